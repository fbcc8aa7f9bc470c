#pragma once

// Discrete-event machinery: event queue with a total (time, insertion)
// order, named deterministic random streams and the run trace.

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "meshtcp/segment.hpp"

namespace meshtcp {

// ---------------------------------------------------------------- events

struct SegmentArrival {
  int node = 0;
  Segment segment;
};

enum class TimerKind { Rto, DelayedAck };

struct TimerExpiry {
  int flow = 0;
  TimerKind timer = TimerKind::Rto;
  std::uint64_t timer_id = 0;
};

// End of a transmission on a directional link; frees its channel groups.
struct ChannelFree {
  int link = 0;
};

struct AppTick {
  int flow = 0;
};

struct SampleTick {};

using EventPayload = std::variant<SegmentArrival, TimerExpiry, ChannelFree, AppTick, SampleTick>;

struct SimEvent {
  double time = 0.0;
  std::uint64_t tie_break = 0;
  EventPayload payload;
};

std::string describe(const SimEvent& ev);

class EventQueue {
 public:
  // Throws ContractViolation when time lies before the current clock.
  void schedule(double time, EventPayload payload);

  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }
  const SimEvent& top() const;
  // Removes the earliest event and advances the clock to its time.
  SimEvent pop();
  double now() const { return clock_; }

  // Pending events in unspecified order.
  const std::vector<SimEvent>& pending() const { return heap_; }

 private:
  std::vector<SimEvent> heap_;
  std::uint64_t next_tie_ = 0;
  double clock_ = 0.0;
};

// Pops and dispatches events until the queue drains or the next event lies
// beyond t_end. A ContractViolation raised by dispatch is rethrown with the
// offending event named.
void run_events_until(EventQueue& queue, double t_end,
                      const std::function<void(const SimEvent&)>& dispatch);

// ------------------------------------------------------------------- rng

// Stateless mixing used to derive stream seeds; exposed for tests.
std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t fnv1a64(std::string_view bytes);

// Named pseudo-random stream. Output depends only on (seed, name, draw
// index): integer-only SplitMix64 core, so identical on every platform.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view name);

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Exponential with the given rate (events per unit); rate > 0.
  double exponential(double rate);

  RngStream split(std::string_view child) const;

  const std::string& name() const { return name_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t draws() const { return draws_; }

 private:
  std::uint64_t seed_;
  std::string name_;
  std::uint64_t state_;
  std::uint64_t draws_ = 0;
};

// ----------------------------------------------------------------- trace

enum class TraceKind {
  Send,
  Deliver,
  DropWireless,
  DropQueue,
  Retx,
  Rto,
  CwndSample,
  PhaseChange,
  StaleAck,
  SpuriousRto,
};

std::string_view to_string(TraceKind k);

// Field usage per kind:
//   SEND/RETX      seq = data seq, value = transmission number
//   DELIVER        seq = data seq, value = hop count travelled
//   DROP_*         seq = data seq or ack number, value = signed hop index
//                  (+k forward DATA link, -k reverse ACK link)
//   RTO            seq = last_ack, value = backed-off rto (seconds)
//   CWND_SAMPLE    seq = ssthresh, value = cwnd (emitted on change)
//   PHASE_CHANGE   seq = previous phase code, value = new phase code
//   STALE_ACK      seq = ack number
//   SPURIOUS_RTO   seq = last_ack
struct TraceRecord {
  double time = 0.0;
  TraceKind kind = TraceKind::Send;
  int flow_id = 0;
  SeqNo seq = 0;
  double value = 0.0;
};

int phase_code(CcPhase p);
CcPhase phase_from_code(int code);

class RunTrace {
 public:
  // Throws ContractViolation if time would go backwards.
  void append(const TraceRecord& r);
  void append(double time, TraceKind kind, int flow_id, SeqNo seq, double value);

  const std::vector<TraceRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  // One record per line: time(9 decimals) TAB kind TAB flow TAB seq TAB value.
  std::string to_text() const;

 private:
  std::vector<TraceRecord> records_;
};

std::string format_trace_line(const TraceRecord& r);
// Shortest round-trip decimal form; stable across runs.
std::string format_number(double v);

}  // namespace meshtcp
