#pragma once

// One simulation instance: a chain, its network state, the TCP endpoints of
// each flow and the event loop that drives them.

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "meshtcp/endpoint.hpp"
#include "meshtcp/meshnet.hpp"
#include "meshtcp/simcore.hpp"

namespace meshtcp {

struct FlowSpec {
  Flavor flavor = Flavor::NewReno;
  int hops = 1;  // source node 1, destination node 1 + hops
  int mss_bytes = 1460;
  int ack_bytes = 40;
  std::optional<SeqNo> app_limit;
  SeqNo receiver_window = kDefaultReceiverWindow;
  double rto_min = kDefaultRtoMin;
  double rto_max = kDefaultRtoMax;
  bool delayed_ack = false;
  double start_time = 0.0;
};

struct WorldConfig {
  int n_nodes = 2;
  LinkModel link;
  std::uint64_t seed = 1;
  std::vector<ScriptedDrop> scripted_drops;
};

class World {
 public:
  explicit World(const WorldConfig& cfg);
  World(const World&) = delete;
  World& operator=(const World&) = delete;

  // Returns the new flow's id (0, 1, ...). ConfigError if the chain is too
  // short for the requested hop count.
  int add_flow(const FlowSpec& spec);

  void set_sender_observer(int flow, SenderObserver obs);
  void set_tx_log(std::vector<TxInterval>* log);

  // Dispatches every event with time <= t_end; may be called repeatedly
  // with growing horizons.
  const RunTrace& run_until(double t_end);

  const RunTrace& trace() const { return trace_; }
  double now() const { return events_.now(); }
  const ChainTopology& topology() const { return *topo_; }
  const SenderEndpoint& sender(int flow) const;
  const ReceiverEndpoint& receiver(int flow) const;
  // DATA segments of the flow still inside the network: queued at some
  // node or propagating toward the next one.
  std::size_t data_in_flight(int flow) const;

 private:
  struct Flow {
    FlowSpec spec;
    int src = 1;
    int dst = 2;
    SenderEndpoint sender;
    ReceiverEndpoint receiver;
  };

  void dispatch(const SimEvent& ev);
  void on_arrival(int node, const Segment& seg, double now);
  void apply_sender(Flow& f, EndpointEffects fx);
  void apply_receiver(Flow& f, EndpointEffects fx);
  Flow& flow(int id);

  std::unique_ptr<ChainTopology> topo_;
  EventQueue events_;
  RunTrace trace_;
  std::unique_ptr<MeshNetwork> net_;
  std::vector<std::unique_ptr<Flow>> flows_;
};

}  // namespace meshtcp
