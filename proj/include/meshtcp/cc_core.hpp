#pragma once

// Congestion-control state machines for SAC, NewReno, Reno, SACK and Vegas.
//
// Every operation takes the sender state by value and returns the successor
// state together with the actions the endpoint has to carry out. Sequence
// numbers and windows are counted in whole segments.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace meshtcp {

using SeqNo = std::int64_t;

enum class Flavor { Sac, NewReno, Reno, Sack, Vegas };

enum class CcPhase { SlowStart, CongestionAvoidance, FastRecovery };

inline constexpr Flavor kAllFlavors[] = {Flavor::Sac, Flavor::NewReno, Flavor::Reno,
                                         Flavor::Sack, Flavor::Vegas};

// Lowercase config names: "sac", "newreno", "reno", "sack", "vegas".
std::string_view to_string(Flavor f);
std::string_view to_string(CcPhase p);
// Throws ConfigError for anything outside the closed set.
Flavor parse_flavor(std::string_view name);

// True for the edges of the sender state diagram:
// SS->CA, SS->FRR, CA->FRR, FRR->CA and any phase -> SS.
bool is_legal_phase_edge(CcPhase from, CcPhase to);

// Half-open interval [begin, end) of segments held by the receiver.
struct SackBlock {
  SeqNo begin = 0;
  SeqNo end = 0;
  friend bool operator==(const SackBlock&, const SackBlock&) = default;
};

inline constexpr int kDupackThreshold = 3;
inline constexpr int kInitialSsthreshBytes = 65535;
inline constexpr SeqNo kMinSsthresh = 2;
inline constexpr double kVegasAlpha = 1.0;
inline constexpr double kVegasBeta = 3.0;

struct CcVars {
  Flavor flavor = Flavor::NewReno;
  CcPhase phase = CcPhase::SlowStart;
  SeqNo cwnd = 1;
  SeqNo ssthresh = 44;
  SeqNo last_ack = 0;
  // Recovery point: highest sequence sent (exclusive) when FRR was entered.
  SeqNo high_seq = 0;
  // SAC: outstanding segments captured at FRR entry.
  SeqNo rlp = 0;
  int dupacks = 0;
  // SAC: dupacks since FRR entry or since the last retransmission.
  int add_dupacks = 0;
  // New ACKs counted toward the next +1 in congestion avoidance; cwnd grows
  // once this reaches cwnd (1/cwnd credit per ACK, kept integral).
  SeqNo ca_acked = 0;
  std::optional<double> vegas_base_rtt;
  std::optional<double> vegas_last_rtt;
  // Vegas adjusts at most once per RTT; next instant an adjustment may run.
  double vegas_next_adjust = 0.0;
  // SACK flavor: merged, sorted receiver intervals above last_ack.
  std::vector<SackBlock> sack_scoreboard;
  // SACK flavor: highest hole retransmitted during this recovery episode.
  SeqNo sack_high_rxt = -1;

  friend bool operator==(const CcVars&, const CcVars&) = default;
};

struct CcAction {
  enum class Kind { Retransmit, SendAllowed, EnterPhase, RestartRtoTimer, None };
  Kind kind = Kind::None;
  SeqNo seq = 0;      // Retransmit
  SeqNo window = 0;   // SendAllowed
  CcPhase phase = CcPhase::SlowStart;  // EnterPhase

  static CcAction retransmit(SeqNo s) { return {Kind::Retransmit, s, 0, CcPhase::SlowStart}; }
  static CcAction send_allowed(SeqNo w) { return {Kind::SendAllowed, 0, w, CcPhase::SlowStart}; }
  static CcAction enter_phase(CcPhase p) { return {Kind::EnterPhase, 0, 0, p}; }
  static CcAction restart_rto_timer() { return {Kind::RestartRtoTimer, 0, 0, CcPhase::SlowStart}; }

  friend bool operator==(const CcAction&, const CcAction&) = default;
};

struct CcStep {
  CcVars vars;
  std::vector<CcAction> actions;
};

// mss_bytes must lie in [64, 65535]; ConfigError otherwise.
CcVars init_sender(Flavor flavor, int mss_bytes);

// ack_seq must exceed vars.last_ack. rtt_sample is empty when Karn's rule
// excluded the sample. sack carries the blocks reported by this ACK.
CcStep on_new_ack(CcVars vars, SeqNo ack_seq, std::optional<double> rtt_sample, double now,
                  std::span<const SackBlock> sack = {});

// ack_seq must equal vars.last_ack; high_sent is the highest sequence ever
// transmitted (exclusive) and must not be below ack_seq.
CcStep on_dupack(CcVars vars, SeqNo ack_seq, SeqNo high_sent, double now,
                 std::span<const SackBlock> sack = {});

CcStep on_timeout(CcVars vars, SeqNo high_sent);

SeqNo effective_window(const CcVars& vars, SeqNo receiver_window);

}  // namespace meshtcp
