#include "meshtcp/cc_core.hpp"

#include <algorithm>
#include <string>

#include "meshtcp/error.hpp"

namespace meshtcp {

std::string_view to_string(Flavor f) {
  switch (f) {
    case Flavor::Sac: return "sac";
    case Flavor::NewReno: return "newreno";
    case Flavor::Reno: return "reno";
    case Flavor::Sack: return "sack";
    case Flavor::Vegas: return "vegas";
  }
  return "?";
}

std::string_view to_string(CcPhase p) {
  switch (p) {
    case CcPhase::SlowStart: return "SS";
    case CcPhase::CongestionAvoidance: return "CA";
    case CcPhase::FastRecovery: return "FRR";
  }
  return "?";
}

Flavor parse_flavor(std::string_view name) {
  for (Flavor f : kAllFlavors) {
    if (to_string(f) == name) return f;
  }
  throw ConfigError("unknown flavor '" + std::string(name) +
                    "' (expected sac, newreno, reno, sack or vegas)");
}

bool is_legal_phase_edge(CcPhase from, CcPhase to) {
  using P = CcPhase;
  if (to == P::SlowStart) return true;
  if (from == P::SlowStart) return to == P::CongestionAvoidance || to == P::FastRecovery;
  if (from == P::CongestionAvoidance) return to == P::FastRecovery;
  return to == P::CongestionAvoidance;  // FRR -> CA
}

namespace {

void merge_sack(CcVars& v, std::span<const SackBlock> sack) {
  if (v.flavor != Flavor::Sack) return;
  auto& board = v.sack_scoreboard;
  for (const SackBlock& b : sack) {
    if (b.end > b.begin) board.push_back(b);
  }
  std::sort(board.begin(), board.end(),
            [](const SackBlock& a, const SackBlock& b) { return a.begin < b.begin; });
  std::vector<SackBlock> merged;
  for (SackBlock b : board) {
    b.begin = std::max(b.begin, v.last_ack);
    if (b.end <= b.begin) continue;
    if (!merged.empty() && b.begin <= merged.back().end) {
      merged.back().end = std::max(merged.back().end, b.end);
    } else {
      merged.push_back(b);
    }
  }
  board = std::move(merged);
}

// First sequence above `after` that the receiver lacks and that lies below
// the highest SACKed segment.
std::optional<SeqNo> next_sack_hole(const CcVars& v, SeqNo after) {
  SeqNo s = std::max(after + 1, v.last_ack);
  for (const SackBlock& b : v.sack_scoreboard) {
    if (s < b.begin) return s;
    if (s < b.end) s = b.end;
  }
  return std::nullopt;
}

void clear_recovery(CcVars& v) {
  v.high_seq = 0;
  v.rlp = 0;
  v.add_dupacks = 0;
  v.sack_high_rxt = -1;
}

void exit_recovery(CcVars& v, std::vector<CcAction>& actions) {
  v.phase = CcPhase::CongestionAvoidance;
  v.cwnd = std::max<SeqNo>(v.ssthresh, 1);
  v.ca_acked = 0;
  clear_recovery(v);
  actions.push_back(CcAction::enter_phase(CcPhase::CongestionAvoidance));
}

void vegas_adjust(CcVars& v, double now) {
  if (!v.vegas_base_rtt || !v.vegas_last_rtt) return;
  if (now < v.vegas_next_adjust) return;
  const double base = *v.vegas_base_rtt;
  const double last = *v.vegas_last_rtt;
  // Expected minus actual rate, scaled to segments queued in the network.
  const double diff = static_cast<double>(v.cwnd) * (1.0 / base - 1.0 / last) * base;
  if (diff < kVegasAlpha) {
    v.cwnd += 1;
  } else if (diff > kVegasBeta) {
    v.cwnd = std::max<SeqNo>(v.cwnd - 1, 1);
  }
  v.vegas_next_adjust = now + last;
}

}  // namespace

CcVars init_sender(Flavor flavor, int mss_bytes) {
  if (mss_bytes < 64 || mss_bytes > 65535) {
    throw ConfigError("mss_bytes must lie in [64, 65535], got " + std::to_string(mss_bytes));
  }
  CcVars v;
  v.flavor = flavor;
  v.phase = CcPhase::SlowStart;
  v.cwnd = 1;
  v.ssthresh = std::max<SeqNo>(kInitialSsthreshBytes / mss_bytes, kMinSsthresh);
  return v;
}

CcStep on_new_ack(CcVars v, SeqNo ack_seq, std::optional<double> rtt_sample, double now,
                  std::span<const SackBlock> sack) {
  if (ack_seq <= v.last_ack) {
    throw ContractViolation("on_new_ack: ack " + std::to_string(ack_seq) +
                            " does not advance last_ack " + std::to_string(v.last_ack));
  }
  std::vector<CcAction> actions;
  const SeqNo newly_acked = ack_seq - v.last_ack;
  v.last_ack = ack_seq;
  v.dupacks = 0;
  if (rtt_sample && *rtt_sample > 0.0) {
    v.vegas_base_rtt = v.vegas_base_rtt ? std::min(*v.vegas_base_rtt, *rtt_sample) : *rtt_sample;
    v.vegas_last_rtt = *rtt_sample;
  }
  merge_sack(v, sack);

  switch (v.phase) {
    case CcPhase::SlowStart:
      v.cwnd += 1;
      if (v.cwnd > v.ssthresh) {
        v.phase = CcPhase::CongestionAvoidance;
        v.ca_acked = 0;
        actions.push_back(CcAction::enter_phase(CcPhase::CongestionAvoidance));
      }
      break;

    case CcPhase::CongestionAvoidance:
      if (v.flavor == Flavor::Vegas) {
        vegas_adjust(v, now);
      } else {
        v.ca_acked += 1;
        if (v.ca_acked >= v.cwnd) {
          v.ca_acked -= v.cwnd;
          v.cwnd += 1;
        }
      }
      break;

    case CcPhase::FastRecovery:
      if (ack_seq >= v.high_seq) {
        exit_recovery(v, actions);
        break;
      }
      switch (v.flavor) {
        case Flavor::Reno:
        case Flavor::Vegas:
          exit_recovery(v, actions);
          break;
        case Flavor::NewReno:
        case Flavor::Sac:
          actions.push_back(CcAction::retransmit(ack_seq));
          v.cwnd = std::max<SeqNo>(v.cwnd - newly_acked + 1, 1);
          if (v.flavor == Flavor::Sac) v.add_dupacks = 0;
          break;
        case Flavor::Sack: {
          v.cwnd = std::max<SeqNo>(v.cwnd - newly_acked + 1, 1);
          if (ack_seq > v.sack_high_rxt) {
            actions.push_back(CcAction::retransmit(ack_seq));
            v.sack_high_rxt = ack_seq;
          } else if (auto hole = next_sack_hole(v, v.sack_high_rxt)) {
            actions.push_back(CcAction::retransmit(*hole));
            v.sack_high_rxt = *hole;
          }
          break;
        }
      }
      break;
  }
  actions.push_back(CcAction::send_allowed(v.cwnd));
  return {std::move(v), std::move(actions)};
}

CcStep on_dupack(CcVars v, SeqNo ack_seq, SeqNo high_sent, double /*now*/,
                 std::span<const SackBlock> sack) {
  if (ack_seq != v.last_ack) {
    throw ContractViolation("on_dupack: ack " + std::to_string(ack_seq) +
                            " is not a duplicate of last_ack " + std::to_string(v.last_ack));
  }
  if (high_sent < ack_seq) {
    throw ContractViolation("on_dupack: high_sent " + std::to_string(high_sent) +
                            " below ack " + std::to_string(ack_seq));
  }
  std::vector<CcAction> actions;
  merge_sack(v, sack);
  v.dupacks += 1;

  if (v.phase != CcPhase::FastRecovery) {
    if (v.dupacks == kDupackThreshold) {
      const SeqNo flight = high_sent - v.last_ack;
      v.high_seq = high_sent;
      v.ssthresh = std::max<SeqNo>(flight / 2, kMinSsthresh);
      v.cwnd = v.ssthresh + kDupackThreshold;
      if (v.flavor == Flavor::Sac) {
        v.rlp = std::max<SeqNo>(flight, 1);
        v.add_dupacks = 0;
      }
      if (v.flavor == Flavor::Sack) v.sack_high_rxt = v.last_ack;
      v.phase = CcPhase::FastRecovery;
      actions.push_back(CcAction::retransmit(v.last_ack));
      actions.push_back(CcAction::enter_phase(CcPhase::FastRecovery));
      actions.push_back(CcAction::send_allowed(v.cwnd));
    }
    return {std::move(v), std::move(actions)};
  }

  if (v.flavor == Flavor::Sac) {
    v.add_dupacks += 1;
    if (v.add_dupacks >= v.rlp - 1) {
      // The retransmission itself was lost: resend now, halve the window
      // as it stood before this dupack, keep ssthresh.
      actions.push_back(CcAction::retransmit(v.last_ack));
      v.cwnd = std::max<SeqNo>(v.cwnd / 2, 1);
      v.add_dupacks = 0;
      actions.push_back(CcAction::restart_rto_timer());
    } else {
      v.cwnd += 1;
    }
  } else {
    v.cwnd += 1;
    if (v.flavor == Flavor::Sack) {
      if (auto hole = next_sack_hole(v, v.sack_high_rxt)) {
        actions.push_back(CcAction::retransmit(*hole));
        v.sack_high_rxt = *hole;
      }
    }
  }
  actions.push_back(CcAction::send_allowed(v.cwnd));
  return {std::move(v), std::move(actions)};
}

CcStep on_timeout(CcVars v, SeqNo high_sent) {
  std::vector<CcAction> actions;
  const SeqNo flight = std::max<SeqNo>(high_sent - v.last_ack, 0);
  v.ssthresh = std::max<SeqNo>(flight / 2, kMinSsthresh);
  v.cwnd = 1;
  v.phase = CcPhase::SlowStart;
  v.dupacks = 0;
  v.ca_acked = 0;
  clear_recovery(v);
  v.sack_scoreboard.clear();
  if (flight > 0) actions.push_back(CcAction::retransmit(v.last_ack));
  actions.push_back(CcAction::enter_phase(CcPhase::SlowStart));
  return {std::move(v), std::move(actions)};
}

SeqNo effective_window(const CcVars& vars, SeqNo receiver_window) {
  return std::max<SeqNo>(std::min(vars.cwnd, receiver_window), 0);
}

}  // namespace meshtcp
