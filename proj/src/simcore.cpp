#include "meshtcp/simcore.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "meshtcp/error.hpp"

namespace meshtcp {

namespace {

// Min-heap order on (time, tie_break).
struct Later {
  bool operator()(const SimEvent& a, const SimEvent& b) const {
    if (a.time != b.time) return a.time > b.time;
    return a.tie_break > b.tie_break;
  }
};

}  // namespace

std::string describe(const SimEvent& ev) {
  char head[64];
  std::snprintf(head, sizeof head, "t=%.9f #%llu ", ev.time,
                static_cast<unsigned long long>(ev.tie_break));
  std::string out = head;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, SegmentArrival>) {
          out += "SEGMENT_ARRIVAL node=" + std::to_string(p.node) +
                 (p.segment.is_data() ? " DATA seq=" + std::to_string(p.segment.seq)
                                      : " ACK ack=" + std::to_string(p.segment.ack));
        } else if constexpr (std::is_same_v<T, TimerExpiry>) {
          out += std::string("TIMER_EXPIRY flow=") + std::to_string(p.flow) +
                 (p.timer == TimerKind::Rto ? " rto" : " delayed-ack") +
                 " id=" + std::to_string(p.timer_id);
        } else if constexpr (std::is_same_v<T, ChannelFree>) {
          out += "CHANNEL_FREE link=" + std::to_string(p.link);
        } else if constexpr (std::is_same_v<T, AppTick>) {
          out += "APP_TICK flow=" + std::to_string(p.flow);
        } else {
          out += "SAMPLE_TICK";
        }
      },
      ev.payload);
  return out;
}

void EventQueue::schedule(double time, EventPayload payload) {
  if (!(time >= clock_)) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "event scheduled in the past: %.9f < clock %.9f", time, clock_);
    throw ContractViolation(buf);
  }
  heap_.push_back(SimEvent{time, next_tie_++, std::move(payload)});
  std::push_heap(heap_.begin(), heap_.end(), Later{});
}

const SimEvent& EventQueue::top() const {
  if (heap_.empty()) throw ContractViolation("top() on empty event queue");
  return heap_.front();
}

SimEvent EventQueue::pop() {
  if (heap_.empty()) throw ContractViolation("pop() on empty event queue");
  std::pop_heap(heap_.begin(), heap_.end(), Later{});
  SimEvent ev = std::move(heap_.back());
  heap_.pop_back();
  clock_ = ev.time;
  return ev;
}

void run_events_until(EventQueue& queue, double t_end,
                      const std::function<void(const SimEvent&)>& dispatch) {
  while (!queue.empty() && queue.top().time <= t_end) {
    SimEvent ev = queue.pop();
    try {
      dispatch(ev);
    } catch (const ContractViolation& e) {
      throw ContractViolation(std::string(e.what()) + " [while dispatching " + describe(ev) + "]");
    }
  }
}

// ------------------------------------------------------------------- rng

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

RngStream::RngStream(std::uint64_t seed, std::string_view name) : seed_(seed), name_(name) {
  std::uint64_t mix = seed ^ fnv1a64(name);
  state_ = splitmix64(mix);
}

std::uint64_t RngStream::next_u64() {
  ++draws_;
  return splitmix64(state_);
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::exponential(double rate) {
  if (!(rate > 0.0)) throw ContractViolation("exponential(): rate must be positive");
  return -std::log1p(-uniform()) / rate;
}

RngStream RngStream::split(std::string_view child) const {
  return RngStream(seed_, name_ + "/" + std::string(child));
}

// ----------------------------------------------------------------- trace

std::string_view to_string(TraceKind k) {
  switch (k) {
    case TraceKind::Send: return "SEND";
    case TraceKind::Deliver: return "DELIVER";
    case TraceKind::DropWireless: return "DROP_WIRELESS";
    case TraceKind::DropQueue: return "DROP_QUEUE";
    case TraceKind::Retx: return "RETX";
    case TraceKind::Rto: return "RTO";
    case TraceKind::CwndSample: return "CWND_SAMPLE";
    case TraceKind::PhaseChange: return "PHASE_CHANGE";
    case TraceKind::StaleAck: return "STALE_ACK";
    case TraceKind::SpuriousRto: return "SPURIOUS_RTO";
  }
  return "?";
}

int phase_code(CcPhase p) {
  switch (p) {
    case CcPhase::SlowStart: return 0;
    case CcPhase::CongestionAvoidance: return 1;
    case CcPhase::FastRecovery: return 2;
  }
  return -1;
}

CcPhase phase_from_code(int code) {
  switch (code) {
    case 0: return CcPhase::SlowStart;
    case 1: return CcPhase::CongestionAvoidance;
    case 2: return CcPhase::FastRecovery;
  }
  throw ContractViolation("bad phase code " + std::to_string(code));
}

void RunTrace::append(const TraceRecord& r) {
  if (!records_.empty() && r.time < records_.back().time) {
    throw ContractViolation("trace time went backwards");
  }
  records_.push_back(r);
}

void RunTrace::append(double time, TraceKind kind, int flow_id, SeqNo seq, double value) {
  append(TraceRecord{time, kind, flow_id, seq, value});
}

std::string format_number(double v) {
  if (v == 0.0) return "0";  // folds -0
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string format_trace_line(const TraceRecord& r) {
  char t[48];
  std::snprintf(t, sizeof t, "%.9f", r.time);
  std::string line = t;
  line += '\t';
  line += to_string(r.kind);
  line += '\t';
  line += std::to_string(r.flow_id);
  line += '\t';
  line += std::to_string(r.seq);
  line += '\t';
  line += format_number(r.value);
  return line;
}

std::string RunTrace::to_text() const {
  std::string out;
  out.reserve(records_.size() * 40);
  for (const auto& r : records_) {
    out += format_trace_line(r);
    out += '\n';
  }
  return out;
}

}  // namespace meshtcp
