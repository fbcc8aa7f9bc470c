#include "meshtcp/endpoint.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "meshtcp/error.hpp"

namespace meshtcp {

RttEstimator make_rtt_estimator(double rto_min, double rto_max) {
  if (!(rto_min > 0.0) || !(rto_max >= rto_min)) {
    throw ConfigError("rto bounds must satisfy 0 < rto_min <= rto_max");
  }
  RttEstimator est;
  est.rto_min = rto_min;
  est.rto_max = rto_max;
  est.rto = std::clamp(kInitialRto, rto_min, rto_max);
  return est;
}

RttEstimator rto_update(RttEstimator est, double sample) {
  if (!(sample > 0.0)) throw ContractViolation("rto_update: RTT sample must be positive");
  if (!est.has_sample) {
    est.srtt = sample;
    est.rttvar = sample / 2.0;
    est.has_sample = true;
  } else {
    est.rttvar = 0.75 * est.rttvar + 0.25 * std::abs(est.srtt - sample);
    est.srtt = 0.875 * est.srtt + 0.125 * sample;
  }
  est.rto = std::clamp(est.srtt + 4.0 * est.rttvar, est.rto_min, est.rto_max);
  est.backoff_exponent = 0;
  return est;
}

RttEstimator rto_backoff(RttEstimator est) {
  est.backoff_exponent += 1;
  est.rto = std::min(est.rto * 2.0, est.rto_max);
  return est;
}

// ---------------------------------------------------------------- sender

SenderEndpoint::SenderEndpoint(const SenderConfig& cfg)
    : cfg_(cfg),
      cc_(init_sender(cfg.flavor, cfg.mss_bytes)),
      rtt_(make_rtt_estimator(cfg.rto_min, cfg.rto_max)) {
  if (cfg.receiver_window < 0) throw ConfigError("receiver window must be non-negative");
  if (cfg.app_limit && *cfg.app_limit < 0) throw ConfigError("app_limit must be non-negative");
}

EndpointEffects SenderEndpoint::start(double now) {
  EndpointEffects fx;
  fx.records.push_back({now, TraceKind::CwndSample, cfg_.flow_id, cc_.ssthresh,
                        static_cast<double>(cc_.cwnd)});
  fill(now, fx);
  return fx;
}

EndpointEffects SenderEndpoint::fill_window(double now) {
  EndpointEffects fx;
  fill(now, fx);
  return fx;
}

void SenderEndpoint::arm_timer(double now, EndpointEffects& fx) {
  timer_armed_ = true;
  timer_deadline_ = now + rtt_.rto;
  ++timer_id_;
  fx.timer = TimerArm{timer_id_, timer_deadline_};
}

void SenderEndpoint::send_one(SeqNo seq, bool windowed, double now, EndpointEffects& fx) {
  const int nth = ++tx_count_[seq];
  Segment seg;
  seg.kind = SegmentKind::Data;
  seg.flow_id = cfg_.flow_id;
  seg.seq = seq;
  seg.size_bytes = cfg_.mss_bytes;
  seg.sent_time = now;
  seg.tx_number = nth;
  if (nth == 1) {
    send_timestamps_[seq] = now;
    fx.records.push_back({now, TraceKind::Send, cfg_.flow_id, seq, 1.0});
  } else {
    retransmitted_.insert(seq);
    send_timestamps_.erase(seq);
    fx.records.push_back({now, TraceKind::Retx, cfg_.flow_id, seq, static_cast<double>(nth)});
  }
  max_sent_ = std::max(max_sent_, seq + 1);
  fx.transmit.push_back(seg);
  if (!timer_armed_) arm_timer(now, fx);
  if (observer_.on_send) {
    observer_.on_send(SendAudit{now, seq, windowed, high_sent_ - cc_.last_ack,
                                effective_window(cc_, cfg_.receiver_window)});
  }
}

void SenderEndpoint::retransmit(SeqNo seq, double now, EndpointEffects& fx) {
  if (seq < cc_.last_ack || seq >= max_sent_) {
    throw ContractViolation("retransmit of seq " + std::to_string(seq) + " outside [" +
                            std::to_string(cc_.last_ack) + ", " + std::to_string(max_sent_) + ")");
  }
  send_one(seq, /*windowed=*/false, now, fx);
}

void SenderEndpoint::fill(double now, EndpointEffects& fx) {
  const SeqNo window = effective_window(cc_, cfg_.receiver_window);
  while (high_sent_ - cc_.last_ack < window && (!cfg_.app_limit || high_sent_ < *cfg_.app_limit)) {
    const SeqNo seq = high_sent_++;
    send_one(seq, /*windowed=*/true, now, fx);
  }
}

void SenderEndpoint::record_cc_change(const CcVars& before, double now, EndpointEffects& fx) {
  if (before.phase != cc_.phase) {
    fx.records.push_back({now, TraceKind::PhaseChange, cfg_.flow_id, phase_code(before.phase),
                          static_cast<double>(phase_code(cc_.phase))});
  }
  if (before.cwnd != cc_.cwnd || before.ssthresh != cc_.ssthresh) {
    fx.records.push_back({now, TraceKind::CwndSample, cfg_.flow_id, cc_.ssthresh,
                          static_cast<double>(cc_.cwnd)});
  }
}

void SenderEndpoint::apply_step(CcStep step, CcEvent::Kind kind, SeqNo ack, double now,
                                EndpointEffects& fx) {
  CcVars before = std::move(cc_);
  cc_ = std::move(step.vars);
  if (cc_.cwnd < 1) throw ContractViolation("congestion window fell below one segment");
  record_cc_change(before, now, fx);
  for (const CcAction& a : step.actions) {
    switch (a.kind) {
      case CcAction::Kind::Retransmit:
        retransmit(a.seq, now, fx);
        break;
      case CcAction::Kind::RestartRtoTimer:
        arm_timer(now, fx);
        break;
      case CcAction::Kind::SendAllowed:
      case CcAction::Kind::EnterPhase:
      case CcAction::Kind::None:
        break;
    }
  }
  if (observer_.on_cc_event) {
    observer_.on_cc_event(CcEvent{kind, now, ack, std::move(before), cc_, std::move(step.actions)});
  }
}

EndpointEffects SenderEndpoint::on_ack_segment(const Segment& ack, double now) {
  if (ack.kind != SegmentKind::Ack || ack.flow_id != cfg_.flow_id) {
    throw ContractViolation("sender " + std::to_string(cfg_.flow_id) +
                            " handed a segment that is not its ACK");
  }
  EndpointEffects fx;
  if (ack.ack < cc_.last_ack) {
    fx.records.push_back({now, TraceKind::StaleAck, cfg_.flow_id, ack.ack, 0.0});
    return fx;
  }
  if (ack.ack > max_sent_) {
    throw ContractViolation("ACK " + std::to_string(ack.ack) + " covers unsent data (max sent " +
                            std::to_string(max_sent_) + ")");
  }

  if (ack.ack > cc_.last_ack) {
    std::optional<double> sample;
    const SeqNo newest = ack.ack - 1;
    if (auto it = send_timestamps_.find(newest);
        it != send_timestamps_.end() && !retransmitted_.count(newest)) {
      const double rtt = now - it->second;
      if (rtt > 0.0) {
        sample = rtt;
        rtt_ = rto_update(rtt_, rtt);
      }
    }
    send_timestamps_.erase(send_timestamps_.begin(), send_timestamps_.lower_bound(ack.ack));
    high_sent_ = std::max(high_sent_, ack.ack);
    apply_step(meshtcp::on_new_ack(cc_, ack.ack, sample, now, ack.sack_blocks()),
               CcEvent::Kind::NewAck, ack.ack, now, fx);
    if (max_sent_ > cc_.last_ack) {
      arm_timer(now, fx);
    } else {
      timer_armed_ = false;
      fx.timer.reset();
    }
  } else {
    apply_step(meshtcp::on_dupack(cc_, ack.ack, max_sent_, now, ack.sack_blocks()),
               CcEvent::Kind::DupAck, ack.ack, now, fx);
  }
  fill(now, fx);
  return fx;
}

EndpointEffects SenderEndpoint::on_rto(double now) {
  EndpointEffects fx;
  timer_armed_ = false;
  if (max_sent_ <= cc_.last_ack) {
    fx.records.push_back({now, TraceKind::SpuriousRto, cfg_.flow_id, cc_.last_ack, 0.0});
    return fx;
  }
  rtt_ = rto_backoff(rtt_);
  fx.records.push_back({now, TraceKind::Rto, cfg_.flow_id, cc_.last_ack, rtt_.rto});
  // Go back to the oldest unacknowledged segment; on_timeout's RETRANSMIT
  // resends it and later window fills resend the rest.
  high_sent_ = cc_.last_ack + 1;
  apply_step(meshtcp::on_timeout(cc_, max_sent_), CcEvent::Kind::Timeout, cc_.last_ack, now, fx);
  if (!timer_armed_) arm_timer(now, fx);
  fill(now, fx);
  return fx;
}

EndpointEffects SenderEndpoint::on_timer(std::uint64_t timer_id, double now) {
  if (!timer_armed_ || timer_id != timer_id_) return {};
  return on_rto(now);
}

// -------------------------------------------------------------- receiver

ReceiverEndpoint::ReceiverEndpoint(const ReceiverConfig& cfg) : cfg_(cfg) {}

Segment ReceiverEndpoint::make_ack(std::optional<SeqNo> trigger, double now) const {
  Segment ack;
  ack.kind = SegmentKind::Ack;
  ack.flow_id = cfg_.flow_id;
  ack.ack = rcv_next_;
  ack.size_bytes = cfg_.ack_bytes;
  ack.sent_time = now;
  if (!cfg_.sack_enabled || ooo_.empty()) return ack;

  std::vector<SackBlock> blocks;
  for (SeqNo s : ooo_) {
    if (!blocks.empty() && blocks.back().end == s) {
      blocks.back().end = s + 1;
    } else {
      blocks.push_back({s, s + 1});
    }
  }
  // Block holding the triggering segment first, the rest highest first.
  std::stable_sort(blocks.begin(), blocks.end(), [&](const SackBlock& a, const SackBlock& b) {
    const bool ah = trigger && *trigger >= a.begin && *trigger < a.end;
    const bool bh = trigger && *trigger >= b.begin && *trigger < b.end;
    if (ah != bh) return ah;
    return a.begin > b.begin;
  });
  for (const SackBlock& b : blocks) {
    if (ack.sack_count == kMaxSackBlocks) break;
    ack.sack[static_cast<std::size_t>(ack.sack_count++)] = b;
  }
  return ack;
}

EndpointEffects ReceiverEndpoint::on_data(const Segment& seg, double now) {
  if (seg.kind != SegmentKind::Data) throw ContractViolation("receiver handed a non-DATA segment");
  EndpointEffects fx;
  bool in_order = false;
  if (seg.seq == rcv_next_) {
    in_order = ooo_.empty();
    ++rcv_next_;
    while (!ooo_.empty() && *ooo_.begin() == rcv_next_) {
      ooo_.erase(ooo_.begin());
      ++rcv_next_;
    }
  } else if (seg.seq > rcv_next_) {
    ooo_.insert(seg.seq);
  }

  if (cfg_.delayed_ack && in_order) {
    if (!ack_pending_) {
      ack_pending_ = true;
      fx.timer = TimerArm{++timer_id_, now + cfg_.delayed_ack_timeout};
      return fx;
    }
  }
  ack_pending_ = false;
  fx.transmit.push_back(make_ack(seg.seq > rcv_next_ ? std::optional<SeqNo>(seg.seq) : std::nullopt,
                                 now));
  return fx;
}

EndpointEffects ReceiverEndpoint::on_delayed_ack_timer(std::uint64_t timer_id, double now) {
  EndpointEffects fx;
  if (!ack_pending_ || timer_id != timer_id_) return fx;
  ack_pending_ = false;
  fx.transmit.push_back(make_ack(std::nullopt, now));
  return fx;
}

}  // namespace meshtcp
