#include "meshtcp/metrics.hpp"

#include <cstdio>
#include <map>
#include <set>
#include <string>

#include "meshtcp/error.hpp"

namespace meshtcp {

namespace {

bool is_data_transmission(const TraceRecord& r) {
  return r.kind == TraceKind::Send || r.kind == TraceKind::Retx;
}

struct SendSpan {
  long count = 0;
  double first = 0.0;
  double last = 0.0;
};

SendSpan send_span(const RunTrace& trace, int flow_id, TimeWindow w) {
  SendSpan s;
  for (const TraceRecord& r : trace.records()) {
    if (r.flow_id != flow_id || !is_data_transmission(r) || !w.contains(r.time)) continue;
    if (s.count == 0) s.first = r.time;
    s.last = r.time;
    ++s.count;
  }
  if (s.count < 2 || !(s.last > s.first)) {
    throw MetricUndefined("throughput needs at least two sends over a positive time span");
  }
  return s;
}

long count_kind(const RunTrace& trace, int flow_id, TraceKind kind, TimeWindow w) {
  long n = 0;
  for (const TraceRecord& r : trace.records()) {
    if (r.flow_id == flow_id && r.kind == kind && w.contains(r.time)) ++n;
  }
  return n;
}

}  // namespace

double throughput(const RunTrace& trace, int flow_id, TimeWindow w) {
  const SendSpan s = send_span(trace, flow_id, w);
  return static_cast<double>(s.count) / (s.last - s.first);
}

double goodput(const RunTrace& trace, int flow_id, TimeWindow w) {
  const SendSpan s = send_span(trace, flow_id, w);
  std::set<SeqNo> distinct;
  for (const TraceRecord& r : trace.records()) {
    if (r.flow_id == flow_id && r.kind == TraceKind::Deliver && w.contains(r.time)) distinct.insert(r.seq);
  }
  return static_cast<double>(distinct.size()) / (s.last - s.first);
}

double packet_loss_rate(const RunTrace& trace, int flow_id, TimeWindow w) {
  const long delivered = count_kind(trace, flow_id, TraceKind::Deliver, w);
  if (delivered == 0) throw MetricUndefined("packet loss rate needs at least one delivery");
  return static_cast<double>(count_kind(trace, flow_id, TraceKind::Retx, w)) /
         static_cast<double>(delivered);
}

double mean_delay(const RunTrace& trace, int flow_id, TimeWindow w) {
  std::map<SeqNo, double> first_send;
  std::set<SeqNo> seen;
  double total = 0.0;
  long n = 0;
  for (const TraceRecord& r : trace.records()) {
    if (r.flow_id != flow_id) continue;
    if (is_data_transmission(r)) {
      first_send.try_emplace(r.seq, r.time);
    } else if (r.kind == TraceKind::Deliver && w.contains(r.time) && seen.insert(r.seq).second) {
      auto it = first_send.find(r.seq);
      if (it == first_send.end()) {
        throw ContractViolation("delivery of seq " + std::to_string(r.seq) + " that was never sent");
      }
      total += r.time - it->second;
      ++n;
    }
  }
  if (n == 0) throw MetricUndefined("mean delay needs at least one delivery");
  return total / static_cast<double>(n);
}

MetricsSummary summarize(const RunTrace& trace, int flow_id, TimeWindow w) {
  MetricsSummary m;
  auto optional_metric = [](auto&& fn) -> std::optional<double> {
    try {
      return fn();
    } catch (const MetricUndefined&) {
      return std::nullopt;
    }
  };
  m.throughput = optional_metric([&] { return throughput(trace, flow_id, w); });
  m.goodput = optional_metric([&] { return goodput(trace, flow_id, w); });
  m.plr = optional_metric([&] { return packet_loss_rate(trace, flow_id, w); });
  m.mean_delay = optional_metric([&] { return mean_delay(trace, flow_id, w); });

  for (const TraceRecord& r : trace.records()) {
    if (r.flow_id != flow_id || !w.contains(r.time)) continue;
    switch (r.kind) {
      case TraceKind::Rto: ++m.rto_count; break;
      case TraceKind::Retx: ++m.retransmit_count; break;
      case TraceKind::Deliver: ++m.delivered_count; break;
      case TraceKind::CwndSample:
        m.cwnd_series.emplace_back(r.time, static_cast<SeqNo>(r.value));
        break;
      case TraceKind::PhaseChange:
        m.phase_series.emplace_back(r.time, phase_from_code(static_cast<int>(r.value)));
        break;
      default: break;
    }
  }
  return m;
}

std::string cwnd_series_text(const MetricsSummary& m) {
  std::string out;
  char buf[64];
  for (const auto& [t, cwnd] : m.cwnd_series) {
    std::snprintf(buf, sizeof buf, "%.9f\t%lld\n", t, static_cast<long long>(cwnd));
    out += buf;
  }
  return out;
}

}  // namespace meshtcp
