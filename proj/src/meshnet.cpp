#include "meshtcp/meshnet.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "meshtcp/error.hpp"

namespace meshtcp {

void validate(const LinkModel& link) {
  if (!(link.bandwidth_bps > 0.0) || !std::isfinite(link.bandwidth_bps)) {
    throw ConfigError("bandwidth_bps must be positive");
  }
  if (!(link.prop_delay_s >= 0.0) || !std::isfinite(link.prop_delay_s)) {
    throw ConfigError("prop_delay_s must be non-negative");
  }
  if (link.queue_capacity < 1) throw ConfigError("queue_capacity must be at least 1");
  if (!(link.loss_rate >= 0.0) || !std::isfinite(link.loss_rate)) {
    throw ConfigError("loss rate must be non-negative");
  }
  if (link.interference_range < 0) throw ConfigError("interference_range must be non-negative");
}

// -------------------------------------------------------------- topology

ChainTopology::ChainTopology(int n_nodes, const LinkModel& link) : n_nodes_(n_nodes) {
  if (n_nodes < 2) {
    throw ConfigError("a chain needs at least 2 nodes, got " + std::to_string(n_nodes));
  }
  validate(link);
  hops_.assign(static_cast<std::size_t>(n_hops()), link);

  const int h = n_hops();
  const int width = link.interference_range + 1;
  if (h <= width) {
    std::vector<int> all;
    for (int k = 1; k <= h; ++k) all.push_back(k);
    groups_.push_back(std::move(all));
  } else {
    for (int k = 1; k + width - 1 <= h; ++k) {
      std::vector<int> g;
      for (int j = k; j < k + width; ++j) g.push_back(j);
      groups_.push_back(std::move(g));
    }
  }
  interferes_.assign(static_cast<std::size_t>(h + 1), std::vector<bool>(static_cast<std::size_t>(h + 1), false));
  for (const auto& g : groups_) {
    for (int a : g) {
      for (int b : g) interferes_[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = true;
    }
  }
}

const LinkModel& ChainTopology::hop_model(int hop) const {
  if (hop < 1 || hop > n_hops()) throw ContractViolation("no hop " + std::to_string(hop));
  return hops_[static_cast<std::size_t>(hop - 1)];
}

void ChainTopology::set_hop_loss_rate(int hop, double rate) {
  if (hop < 1 || hop > n_hops()) throw ConfigError("no hop " + std::to_string(hop));
  if (!(rate >= 0.0)) throw ConfigError("loss rate must be non-negative");
  hops_[static_cast<std::size_t>(hop - 1)].loss_rate = rate;
}

void ChainTopology::set_all_loss_rates(double rate) {
  for (int k = 1; k <= n_hops(); ++k) set_hop_loss_rate(k, rate);
}

std::vector<int> ChainTopology::groups_of_hop(int hop) const {
  std::vector<int> out;
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    if (std::find(groups_[g].begin(), groups_[g].end(), hop) != groups_[g].end()) {
      out.push_back(static_cast<int>(g));
    }
  }
  return out;
}

bool ChainTopology::interferes(int hop_a, int hop_b) const {
  return interferes_.at(static_cast<std::size_t>(hop_a)).at(static_cast<std::size_t>(hop_b));
}

int ChainTopology::next_node(int node, SegmentKind kind) const {
  const int next = kind == SegmentKind::Data ? node + 1 : node - 1;
  if (node < 1 || node > n_nodes_ || next < 1 || next > n_nodes_) {
    throw ContractViolation("no route from node " + std::to_string(node));
  }
  return next;
}

int ChainTopology::out_link(int node, SegmentKind kind) const {
  const int next = next_node(node, kind);
  return kind == SegmentKind::Data ? link_index(node, Direction::Forward)
                                   : link_index(next, Direction::Reverse);
}

ChainTopology build_chain(int n_nodes, const LinkModel& link) { return ChainTopology(n_nodes, link); }

TransmitPlan link_transmit(const LinkModel& link, const Segment& seg, double now, bool dropped) {
  TransmitPlan plan;
  plan.tx_time = static_cast<double>(seg.size_bytes) * 8.0 / link.bandwidth_bps;
  plan.channel_free_at = now + plan.tx_time;
  if (!dropped) plan.arrival_at = now + plan.tx_time + link.prop_delay_s;
  return plan;
}

// --------------------------------------------------------------- arbiter

ChannelArbiter::ChannelArbiter(const ChainTopology& topo)
    : topo_(&topo), busy_(static_cast<std::size_t>(topo.n_hops() + 1), false) {}

bool ChannelArbiter::blocked_by_air(int hop) const {
  for (int k = 1; k <= topo_->n_hops(); ++k) {
    if (busy_[static_cast<std::size_t>(k)] && topo_->interferes(hop, k)) return true;
  }
  return false;
}

std::optional<double> ChannelArbiter::request(int link, double now) {
  const int hop = hop_of_link(link);
  bool blocked = blocked_by_air(hop);
  for (int p : pending_) {
    if (blocked) break;
    blocked = topo_->interferes(hop, hop_of_link(p));
  }
  if (blocked) {
    pending_.push_back(link);
    return std::nullopt;
  }
  busy_[static_cast<std::size_t>(hop)] = true;
  return now;
}

std::vector<int> ChannelArbiter::release(int link, double /*now*/) {
  const int hop = hop_of_link(link);
  if (!busy_[static_cast<std::size_t>(hop)]) {
    throw ContractViolation("release of idle hop " + std::to_string(hop));
  }
  busy_[static_cast<std::size_t>(hop)] = false;

  std::vector<int> granted;
  std::vector<int> still_waiting_hops;
  std::deque<int> remaining;
  for (int p : pending_) {
    const int ph = hop_of_link(p);
    bool blocked = blocked_by_air(ph);
    for (int w : still_waiting_hops) {
      if (blocked) break;
      blocked = topo_->interferes(ph, w);
    }
    if (blocked) {
      still_waiting_hops.push_back(ph);
      remaining.push_back(p);
    } else {
      busy_[static_cast<std::size_t>(ph)] = true;
      granted.push_back(p);
    }
  }
  pending_ = std::move(remaining);
  return granted;
}

// ----------------------------------------------------------- error model

LossProcess::LossProcess(double rate, RngStream stream) : rate_(rate), stream_(std::move(stream)) {
  if (!(rate >= 0.0)) throw ConfigError("loss rate must be non-negative");
  if (rate_ > 0.0) next_instant_ = stream_.exponential(rate_);
}

bool LossProcess::decide(double start, double end) {
  if (rate_ == 0.0) return false;
  while (next_instant_ < start) next_instant_ += stream_.exponential(rate_);
  if (next_instant_ >= end) return false;
  while (next_instant_ < end) next_instant_ += stream_.exponential(rate_);
  return true;
}

bool error_model_decide(LossProcess& process, const Segment& /*seg*/, double start, double end) {
  return process.decide(start, end);
}

ErrorModel::ErrorModel(const ChainTopology& topo, std::uint64_t seed, std::vector<ScriptedDrop> script)
    : script_(std::move(script)), tx_counts_(static_cast<std::size_t>(topo.n_hops())) {
  for (const ScriptedDrop& d : script_) {
    if (d.link < 1 || d.link > topo.n_hops()) {
      throw ConfigError("scripted drop names link " + std::to_string(d.link) + " outside the chain");
    }
    if (d.seq < 0 || d.nth < 1) throw ConfigError("scripted drop needs seq >= 0 and nth >= 1");
  }
  processes_.reserve(static_cast<std::size_t>(topo.n_hops()));
  for (int k = 1; k <= topo.n_hops(); ++k) {
    processes_.emplace_back(topo.hop_model(k).loss_rate,
                            RngStream(seed, "loss/hop/" + std::to_string(k)));
  }
}

bool ErrorModel::decide(int link, const Segment& seg, double start, double end) {
  const int hop = hop_of_link(link);
  if (!script_.empty()) {
    if (!seg.is_data() || direction_of_link(link) != Direction::Forward) return false;
    const int nth = ++tx_counts_[static_cast<std::size_t>(hop - 1)][seg.seq];
    return std::any_of(script_.begin(), script_.end(), [&](const ScriptedDrop& d) {
      return d.link == hop && d.seq == seg.seq && d.nth == nth;
    });
  }
  return processes_[static_cast<std::size_t>(hop - 1)].decide(start, end);
}

// --------------------------------------------------------------- network

MeshNetwork::MeshNetwork(const ChainTopology& topo, std::uint64_t seed,
                         std::vector<ScriptedDrop> script, EventQueue& events, RunTrace& trace)
    : topo_(&topo),
      events_(&events),
      trace_(&trace),
      arbiter_(topo),
      errors_(topo, seed, std::move(script)),
      links_(static_cast<std::size_t>(topo.n_links())) {}

namespace {

double signed_hop(int link) {
  const int hop = hop_of_link(link);
  return direction_of_link(link) == Direction::Forward ? hop : -hop;
}

SeqNo seg_number(const Segment& s) { return s.is_data() ? s.seq : s.ack; }

}  // namespace

bool MeshNetwork::enqueue(int link, const Segment& seg, double now) {
  LinkQueue& lq = links_.at(static_cast<std::size_t>(link));
  const int cap = topo_->hop_model(hop_of_link(link)).queue_capacity;
  const std::size_t occupied = lq.queue.size() + (lq.on_air ? 1 : 0);
  if (occupied >= static_cast<std::size_t>(cap)) {
    trace_->append(now, TraceKind::DropQueue, seg.flow_id, seg_number(seg), signed_hop(link));
    return false;
  }
  lq.queue.push_back(seg);
  if (lq.state == LinkState::Idle) request_channel(link, now);
  return true;
}

void MeshNetwork::request_channel(int link, double now) {
  LinkQueue& lq = links_[static_cast<std::size_t>(link)];
  lq.state = LinkState::Waiting;
  if (arbiter_.request(link, now)) start_transmission(link, now);
}

void MeshNetwork::start_transmission(int link, double now) {
  LinkQueue& lq = links_[static_cast<std::size_t>(link)];
  if (lq.queue.empty()) throw ContractViolation("channel granted to an empty link queue");
  lq.on_air = lq.queue.front();
  lq.queue.pop_front();
  lq.state = LinkState::Transmitting;

  const Segment& seg = *lq.on_air;
  const LinkModel& model = topo_->hop_model(hop_of_link(link));
  const double tx_time = static_cast<double>(seg.size_bytes) * 8.0 / model.bandwidth_bps;
  const bool dropped = errors_.decide(link, seg, now, now + tx_time);
  const TransmitPlan plan = link_transmit(model, seg, now, dropped);

  if (tx_log_) tx_log_->push_back({link, now, plan.channel_free_at});
  events_->schedule(plan.channel_free_at, ChannelFree{link});
  if (plan.arrival_at) {
    const SegmentKind kind = seg.kind;
    const int from = direction_of_link(link) == Direction::Forward ? hop_of_link(link)
                                                                   : hop_of_link(link) + 1;
    events_->schedule(*plan.arrival_at, SegmentArrival{topo_->next_node(from, kind), seg});
  } else {
    trace_->append(now, TraceKind::DropWireless, seg.flow_id, seg_number(seg), signed_hop(link));
  }
}

void MeshNetwork::on_channel_free(int link, double now) {
  LinkQueue& lq = links_.at(static_cast<std::size_t>(link));
  if (lq.state != LinkState::Transmitting) {
    throw ContractViolation("channel free on link " + std::to_string(link) + " that is not transmitting");
  }
  lq.on_air.reset();
  lq.state = LinkState::Idle;
  for (int g : arbiter_.release(link, now)) start_transmission(g, now);
  if (!lq.queue.empty()) request_channel(link, now);
}

std::size_t MeshNetwork::queue_length(int link) const {
  const LinkQueue& lq = links_.at(static_cast<std::size_t>(link));
  return lq.queue.size() + (lq.on_air ? 1 : 0);
}

std::size_t MeshNetwork::queued_data(int flow) const {
  std::size_t n = 0;
  for (const LinkQueue& lq : links_) {
    n += static_cast<std::size_t>(std::count_if(lq.queue.begin(), lq.queue.end(), [&](const Segment& s) {
      return s.is_data() && s.flow_id == flow;
    }));
  }
  return n;
}

}  // namespace meshtcp
