#pragma once

// TCP sender and receiver endpoints. They hold sequence bookkeeping and the
// RTO timer state, turn arriving segments into cc_core events, and hand
// back the segments to transmit plus the trace records produced.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "meshtcp/cc_core.hpp"
#include "meshtcp/segment.hpp"
#include "meshtcp/simcore.hpp"

namespace meshtcp {

inline constexpr double kDefaultRtoMin = 0.2;
inline constexpr double kDefaultRtoMax = 60.0;
inline constexpr double kInitialRto = 1.0;
inline constexpr SeqNo kDefaultReceiverWindow = 65535;

struct RttEstimator {
  double srtt = 0.0;
  double rttvar = 0.0;
  double rto = kInitialRto;
  bool has_sample = false;
  int backoff_exponent = 0;
  double rto_min = kDefaultRtoMin;
  double rto_max = kDefaultRtoMax;
};

RttEstimator make_rtt_estimator(double rto_min = kDefaultRtoMin, double rto_max = kDefaultRtoMax);
// Standard SRTT/RTTVAR update; sample must be positive.
RttEstimator rto_update(RttEstimator est, double sample);
// Doubles rto (capped at rto_max) after a timeout.
RttEstimator rto_backoff(RttEstimator est);

struct TimerArm {
  std::uint64_t id = 0;
  double deadline = 0.0;
};

// What an endpoint call asks the network and trace to do, in order.
struct EndpointEffects {
  std::vector<Segment> transmit;
  std::vector<TraceRecord> records;
  // Latest timer (re)arm requested by the call; older ids become stale.
  std::optional<TimerArm> timer;
};

struct SenderConfig {
  int flow_id = 0;
  Flavor flavor = Flavor::NewReno;
  int mss_bytes = 1460;
  std::optional<SeqNo> app_limit;  // total segments; empty = unbounded
  SeqNo receiver_window = kDefaultReceiverWindow;
  double rto_min = kDefaultRtoMin;
  double rto_max = kDefaultRtoMax;
};

// Observation hooks used by tests and acceptance checks.
struct CcEvent {
  enum class Kind { NewAck, DupAck, Timeout };
  Kind kind = Kind::NewAck;
  double time = 0.0;
  SeqNo ack = 0;
  CcVars before;
  CcVars after;
  std::vector<CcAction> actions;
};

struct SendAudit {
  double time = 0.0;
  SeqNo seq = 0;
  // True for window-governed sends; false for retransmissions ordered by
  // the congestion controller, which bypass the window.
  bool windowed = true;
  SeqNo outstanding = 0;  // high_sent - last_ack right after this send
  SeqNo window = 0;       // effective window at this instant
};

struct SenderObserver {
  std::function<void(const CcEvent&)> on_cc_event;
  std::function<void(const SendAudit&)> on_send;
};

class SenderEndpoint {
 public:
  explicit SenderEndpoint(const SenderConfig& cfg);

  // Records the initial window and fills it.
  EndpointEffects start(double now);
  EndpointEffects on_ack_segment(const Segment& ack, double now);
  EndpointEffects fill_window(double now);
  EndpointEffects on_rto(double now);
  // Timer expiry from the event loop; stale or cancelled ids are ignored.
  EndpointEffects on_timer(std::uint64_t timer_id, double now);

  void set_observer(SenderObserver obs) { observer_ = std::move(obs); }

  int flow_id() const { return cfg_.flow_id; }
  const CcVars& cc() const { return cc_; }
  const RttEstimator& rtt() const { return rtt_; }
  // Next sequence to send (snd_nxt). Falls back to last_ack after an RTO.
  SeqNo high_sent() const { return high_sent_; }
  // Highest sequence ever transmitted, exclusive.
  SeqNo max_sent() const { return max_sent_; }
  SeqNo outstanding() const { return high_sent_ - cc_.last_ack; }
  bool timer_armed() const { return timer_armed_; }
  double timer_deadline() const { return timer_deadline_; }
  bool was_retransmitted(SeqNo seq) const { return retransmitted_.count(seq) != 0; }
  const std::map<SeqNo, double>& send_timestamps() const { return send_timestamps_; }

 private:
  void send_one(SeqNo seq, bool windowed, double now, EndpointEffects& fx);
  void retransmit(SeqNo seq, double now, EndpointEffects& fx);
  void apply_step(CcStep step, CcEvent::Kind kind, SeqNo ack, double now, EndpointEffects& fx);
  void fill(double now, EndpointEffects& fx);
  void arm_timer(double now, EndpointEffects& fx);
  void record_cc_change(const CcVars& before, double now, EndpointEffects& fx);

  SenderConfig cfg_;
  CcVars cc_;
  RttEstimator rtt_;
  SeqNo high_sent_ = 0;
  SeqNo max_sent_ = 0;
  std::map<SeqNo, double> send_timestamps_;
  std::set<SeqNo> retransmitted_;
  std::map<SeqNo, int> tx_count_;
  bool timer_armed_ = false;
  double timer_deadline_ = 0.0;
  std::uint64_t timer_id_ = 0;
  SenderObserver observer_;
};

struct ReceiverConfig {
  int flow_id = 0;
  bool sack_enabled = false;
  bool delayed_ack = false;
  int ack_bytes = 40;
  double delayed_ack_timeout = 0.1;
};

class ReceiverEndpoint {
 public:
  explicit ReceiverEndpoint(const ReceiverConfig& cfg);

  // Returns the ACK to send (none only while a delayed ACK is being held)
  // and, with delayed ACKs, the hold timer to arm.
  EndpointEffects on_data(const Segment& seg, double now);
  EndpointEffects on_delayed_ack_timer(std::uint64_t timer_id, double now);

  SeqNo rcv_next() const { return rcv_next_; }
  const std::set<SeqNo>& ooo_buffer() const { return ooo_; }

 private:
  Segment make_ack(std::optional<SeqNo> trigger, double now) const;

  ReceiverConfig cfg_;
  SeqNo rcv_next_ = 0;
  std::set<SeqNo> ooo_;
  bool ack_pending_ = false;
  std::uint64_t timer_id_ = 0;
};

}  // namespace meshtcp
