#pragma once

// Performance metrics computed from a RunTrace: throughput (data packets
// sent per second between first and last send), goodput, packet loss rate
// (retransmissions per received packet) and mean first-send-to-delivery
// delay.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "meshtcp/simcore.hpp"

namespace meshtcp {

// Restricts a metric to records with time in [from, to].
struct TimeWindow {
  double from = 0.0;
  double to = 1e300;
  bool contains(double t) const { return t >= from && t <= to; }
};

// (SEND + RETX) / (last - first send). MetricUndefined with fewer than two
// sends or a zero time span.
double throughput(const RunTrace& trace, int flow_id, TimeWindow w = {});
// Distinct delivered seqs over the same span as throughput().
double goodput(const RunTrace& trace, int flow_id, TimeWindow w = {});
// RETX / DELIVER; MetricUndefined with zero deliveries.
double packet_loss_rate(const RunTrace& trace, int flow_id, TimeWindow w = {});
// Mean over delivered seqs of (first delivery - first send); MetricUndefined
// with zero deliveries.
double mean_delay(const RunTrace& trace, int flow_id, TimeWindow w = {});

struct MetricsSummary {
  // Empty when the metric is undefined for the trace.
  std::optional<double> throughput;
  std::optional<double> goodput;
  std::optional<double> plr;
  std::optional<double> mean_delay;
  long rto_count = 0;
  long retransmit_count = 0;
  long delivered_count = 0;
  std::vector<std::pair<double, SeqNo>> cwnd_series;
  std::vector<std::pair<double, CcPhase>> phase_series;
};

MetricsSummary summarize(const RunTrace& trace, int flow_id, TimeWindow w = {});

// cwnd series as "time<TAB>cwnd" lines.
std::string cwnd_series_text(const MetricsSummary& m);

}  // namespace meshtcp
