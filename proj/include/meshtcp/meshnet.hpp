#pragma once

// Wireless mesh chain: topology, drop-tail link queues, channel arbitration
// across interference groups and the per-hop stochastic error model.

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <vector>

#include "meshtcp/segment.hpp"
#include "meshtcp/simcore.hpp"

namespace meshtcp {

struct LinkModel {
  double bandwidth_bps = 2e6;
  double prop_delay_s = 0.001;
  int queue_capacity = 50;     // segments, counting the one on air
  double loss_rate = 0.0;      // loss instants per second of simulated time
  int interference_range = 2;  // hops
};

// Throws ConfigError on non-positive bandwidth, capacity < 1, etc.
void validate(const LinkModel& link);

enum class Direction { Forward, Reverse };

// Directional links are numbered 2*(hop-1) for DATA toward higher node
// indices and 2*(hop-1)+1 for the reverse (ACK) direction. Hops are 1-based:
// hop k joins node k and node k+1.
inline int link_index(int hop, Direction dir) {
  return 2 * (hop - 1) + (dir == Direction::Reverse ? 1 : 0);
}
inline int hop_of_link(int link) { return link / 2 + 1; }
inline Direction direction_of_link(int link) {
  return (link % 2) ? Direction::Reverse : Direction::Forward;
}

class ChainTopology {
 public:
  ChainTopology(int n_nodes, const LinkModel& link);

  int n_nodes() const { return n_nodes_; }
  int n_hops() const { return n_nodes_ - 1; }
  int n_links() const { return 2 * n_hops(); }
  bool supports_hops(int h) const { return h >= 1 && h <= n_hops(); }

  const LinkModel& hop_model(int hop) const;
  void set_hop_loss_rate(int hop, double rate);
  void set_all_loss_rates(double rate);

  // Interference groups as lists of hops; every pair of hops within
  // interference_range of each other shares at least one group.
  const std::vector<std::vector<int>>& groups() const { return groups_; }
  std::vector<int> groups_of_hop(int hop) const;
  bool interferes(int hop_a, int hop_b) const;

  // Static chain routing: DATA moves to node+1, ACKs to node-1.
  int next_node(int node, SegmentKind kind) const;
  int out_link(int node, SegmentKind kind) const;

 private:
  int n_nodes_;
  std::vector<LinkModel> hops_;
  std::vector<std::vector<int>> groups_;
  std::vector<std::vector<bool>> interferes_;
};

// n_nodes >= 2, else ConfigError.
ChainTopology build_chain(int n_nodes, const LinkModel& link);

// Timing of one store-and-forward transmission.
struct TransmitPlan {
  double tx_time = 0.0;
  double channel_free_at = 0.0;
  std::optional<double> arrival_at;  // empty when dropped on the air
};

TransmitPlan link_transmit(const LinkModel& link, const Segment& seg, double now, bool dropped);

// Serialises transmissions whose hops interfere. Requests are served first
// come first served: a request is granted once no interfering hop is on the
// air and no earlier waiting request interferes with it.
class ChannelArbiter {
 public:
  explicit ChannelArbiter(const ChainTopology& topo);

  // Grant time (== now) if the channel is free for this link, otherwise
  // the request joins the FIFO and std::nullopt is returned.
  std::optional<double> request(int link, double now);
  // Ends the transmission on `link` and returns the waiting links granted
  // at `now`, in FIFO order.
  std::vector<int> release(int link, double now);

  bool hop_busy(int hop) const { return busy_[static_cast<std::size_t>(hop)]; }
  std::size_t waiting() const { return pending_.size(); }

 private:
  bool blocked_by_air(int hop) const;

  const ChainTopology* topo_;
  std::vector<bool> busy_;  // indexed by hop, slot 0 unused
  std::deque<int> pending_;
};

// Poisson process of loss instants on one hop. A transmission occupying
// [start, end) is lost iff at least one instant falls inside it. Calls must
// come with non-decreasing, non-overlapping intervals.
class LossProcess {
 public:
  LossProcess(double rate, RngStream stream);

  bool decide(double start, double end);
  double rate() const { return rate_; }
  std::uint64_t instants_drawn() const { return stream_.draws(); }

 private:
  double rate_;
  RngStream stream_;
  double next_instant_ = 0.0;
};

// One-shot form of the above over a caller-owned process.
bool error_model_decide(LossProcess& process, const Segment& seg, double start, double end);

// Deterministic override: drop the nth transmission of DATA `seq` on the
// forward link of hop `link`.
struct ScriptedDrop {
  int link = 1;
  SeqNo seq = 0;
  int nth = 1;
  friend bool operator==(const ScriptedDrop&, const ScriptedDrop&) = default;
};

// Per-hop error model. Streams are keyed by (seed, hop) only, so flows and
// flavors sharing a seed see identical loss instants. A non-empty script
// replaces the stochastic model entirely.
class ErrorModel {
 public:
  ErrorModel(const ChainTopology& topo, std::uint64_t seed, std::vector<ScriptedDrop> script);

  bool decide(int link, const Segment& seg, double start, double end);
  bool scripted() const { return !script_.empty(); }

 private:
  std::vector<LossProcess> processes_;  // index hop-1
  std::vector<ScriptedDrop> script_;
  std::vector<std::map<SeqNo, int>> tx_counts_;  // per hop
};

struct TxInterval {
  int link = 0;
  double start = 0.0;
  double end = 0.0;
};

// Queues, channel access and propagation for every directional link.
// Arrivals and channel releases are scheduled on the shared event queue.
class MeshNetwork {
 public:
  MeshNetwork(const ChainTopology& topo, std::uint64_t seed, std::vector<ScriptedDrop> script,
              EventQueue& events, RunTrace& trace);

  // Appends to the link's drop-tail queue; false (and a DROP_QUEUE record)
  // when the queue is full.
  bool enqueue(int link, const Segment& seg, double now);
  void on_channel_free(int link, double now);

  std::size_t queue_length(int link) const;
  // DATA segments of `flow` waiting in link queues (not yet on the air).
  std::size_t queued_data(int flow) const;

  void set_tx_log(std::vector<TxInterval>* log) { tx_log_ = log; }
  const ChainTopology& topology() const { return *topo_; }

 private:
  enum class LinkState { Idle, Waiting, Transmitting };
  struct LinkQueue {
    std::deque<Segment> queue;
    std::optional<Segment> on_air;
    LinkState state = LinkState::Idle;
  };

  void request_channel(int link, double now);
  void start_transmission(int link, double now);

  const ChainTopology* topo_;
  EventQueue* events_;
  RunTrace* trace_;
  ChannelArbiter arbiter_;
  ErrorModel errors_;
  std::vector<LinkQueue> links_;
  std::vector<TxInterval>* tx_log_ = nullptr;
};

}  // namespace meshtcp
