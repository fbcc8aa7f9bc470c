#include "meshtcp/world.hpp"

#include <string>

#include "meshtcp/error.hpp"

namespace meshtcp {

World::World(const WorldConfig& cfg)
    : topo_(std::make_unique<ChainTopology>(build_chain(cfg.n_nodes, cfg.link))) {
  net_ = std::make_unique<MeshNetwork>(*topo_, cfg.seed, cfg.scripted_drops, events_, trace_);
}

int World::add_flow(const FlowSpec& spec) {
  if (!topo_->supports_hops(spec.hops)) {
    throw ConfigError("a " + std::to_string(spec.hops) + "-hop flow needs at least " +
                      std::to_string(spec.hops + 1) + " nodes; chain has " +
                      std::to_string(topo_->n_nodes()));
  }
  if (spec.ack_bytes < 1) throw ConfigError("ack_bytes must be positive");
  if (!(spec.start_time >= events_.now())) throw ConfigError("flow start lies in the past");

  const int id = static_cast<int>(flows_.size());
  SenderConfig sc;
  sc.flow_id = id;
  sc.flavor = spec.flavor;
  sc.mss_bytes = spec.mss_bytes;
  sc.app_limit = spec.app_limit;
  sc.receiver_window = spec.receiver_window;
  sc.rto_min = spec.rto_min;
  sc.rto_max = spec.rto_max;
  ReceiverConfig rc;
  rc.flow_id = id;
  rc.sack_enabled = spec.flavor == Flavor::Sack;
  rc.delayed_ack = spec.delayed_ack;
  rc.ack_bytes = spec.ack_bytes;

  flows_.push_back(std::make_unique<Flow>(Flow{spec, 1, 1 + spec.hops, SenderEndpoint(sc),
                                               ReceiverEndpoint(rc)}));
  events_.schedule(spec.start_time, AppTick{id});
  return id;
}

World::Flow& World::flow(int id) {
  if (id < 0 || id >= static_cast<int>(flows_.size())) {
    throw ContractViolation("unknown flow " + std::to_string(id));
  }
  return *flows_[static_cast<std::size_t>(id)];
}

const SenderEndpoint& World::sender(int id) const {
  return const_cast<World*>(this)->flow(id).sender;
}

const ReceiverEndpoint& World::receiver(int id) const {
  return const_cast<World*>(this)->flow(id).receiver;
}

void World::set_sender_observer(int id, SenderObserver obs) { flow(id).sender.set_observer(std::move(obs)); }

void World::set_tx_log(std::vector<TxInterval>* log) { net_->set_tx_log(log); }

const RunTrace& World::run_until(double t_end) {
  run_events_until(events_, t_end, [this](const SimEvent& ev) { dispatch(ev); });
  return trace_;
}

void World::dispatch(const SimEvent& ev) {
  const double now = ev.time;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, SegmentArrival>) {
          on_arrival(p.node, p.segment, now);
        } else if constexpr (std::is_same_v<T, TimerExpiry>) {
          Flow& f = flow(p.flow);
          if (p.timer == TimerKind::Rto) {
            apply_sender(f, f.sender.on_timer(p.timer_id, now));
          } else {
            apply_receiver(f, f.receiver.on_delayed_ack_timer(p.timer_id, now));
          }
        } else if constexpr (std::is_same_v<T, ChannelFree>) {
          net_->on_channel_free(p.link, now);
        } else if constexpr (std::is_same_v<T, AppTick>) {
          Flow& f = flow(p.flow);
          apply_sender(f, f.sender.start(now));
        }
      },
      ev.payload);
}

void World::on_arrival(int node, const Segment& seg, double now) {
  Flow& f = flow(seg.flow_id);
  if (seg.is_data()) {
    if (node == f.dst) {
      trace_.append(now, TraceKind::Deliver, seg.flow_id, seg.seq, f.spec.hops);
      apply_receiver(f, f.receiver.on_data(seg, now));
    } else {
      net_->enqueue(topo_->out_link(node, SegmentKind::Data), seg, now);
    }
  } else {
    if (node == f.src) {
      apply_sender(f, f.sender.on_ack_segment(seg, now));
    } else {
      net_->enqueue(topo_->out_link(node, SegmentKind::Ack), seg, now);
    }
  }
}

void World::apply_sender(Flow& f, EndpointEffects fx) {
  for (const TraceRecord& r : fx.records) trace_.append(r);
  for (const Segment& s : fx.transmit) {
    net_->enqueue(topo_->out_link(f.src, SegmentKind::Data), s, events_.now());
  }
  if (fx.timer) {
    events_.schedule(fx.timer->deadline, TimerExpiry{f.sender.flow_id(), TimerKind::Rto, fx.timer->id});
  }
}

void World::apply_receiver(Flow& f, EndpointEffects fx) {
  for (const TraceRecord& r : fx.records) trace_.append(r);
  for (const Segment& s : fx.transmit) {
    net_->enqueue(topo_->out_link(f.dst, SegmentKind::Ack), s, events_.now());
  }
  if (fx.timer) {
    events_.schedule(fx.timer->deadline,
                     TimerExpiry{f.sender.flow_id(), TimerKind::DelayedAck, fx.timer->id});
  }
}

std::size_t World::data_in_flight(int id) const {
  std::size_t n = net_->queued_data(id);
  for (const SimEvent& ev : events_.pending()) {
    if (const auto* a = std::get_if<SegmentArrival>(&ev.payload)) {
      if (a->segment.is_data() && a->segment.flow_id == id) ++n;
    }
  }
  return n;
}

}  // namespace meshtcp
