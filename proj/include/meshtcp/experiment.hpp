#pragma once

// Experiment configuration, sweeps over flavors x hops x loss rates x seeds,
// paired flavor comparison and CSV output.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "meshtcp/cc_core.hpp"
#include "meshtcp/endpoint.hpp"
#include "meshtcp/meshnet.hpp"
#include "meshtcp/metrics.hpp"

namespace meshtcp {

struct ExperimentSpec {
  std::vector<Flavor> flavors;
  std::vector<int> hop_counts;
  std::vector<double> loss_rates;
  std::vector<std::uint64_t> seeds;
  double duration = 0.0;
  LinkModel link;
  int mss_bytes = 1460;
  int ack_bytes = 40;
  double rto_min = kDefaultRtoMin;
  double rto_max = kDefaultRtoMax;
  std::optional<SeqNo> app_limit;
  std::vector<ScriptedDrop> scripted_drops;
  double warmup = 0.0;

  std::size_t combination_count() const {
    return flavors.size() * hop_counts.size() * loss_rates.size() * seeds.size();
  }
  int max_hops() const;
};

// Parses the `key = value` format; `overrides` are extra "key=value" lines
// applied on top of the file (replacing keys it sets). Throws ConfigError
// naming the offending line.
ExperimentSpec load_config(std::string_view text, std::span<const std::string> overrides = {});

// Reads a whole file; ConfigError if it cannot be opened.
std::string read_text_file(const std::string& path);

struct RunPoint {
  Flavor flavor = Flavor::NewReno;
  int hops = 1;
  double loss_rate = 0.0;
  std::uint64_t seed = 1;
};

std::string describe(const RunPoint& p);

struct RunOutput {
  RunTrace trace;
  MetricsSummary summary;
};

// Builds a fresh chain of max(hops)+1 nodes with a single flow from node 1
// and runs it for spec.duration simulated seconds.
RunOutput run_single(const ExperimentSpec& spec, const RunPoint& point,
                     const SenderObserver* observer = nullptr);

struct ResultRow {
  Flavor flavor = Flavor::NewReno;
  int hops = 1;
  double loss_rate = 0.0;
  std::uint64_t seed = 1;
  std::optional<double> throughput;
  std::optional<double> goodput;
  std::optional<double> plr;
  std::optional<double> mean_delay;
  long rto_count = 0;
  long retransmit_count = 0;
  long delivered_count = 0;
};

// Every (flavor, hops, loss rate, seed) combination, sorted by flavor
// (sac, newreno, reno, sack, vegas), hops, loss rate and seed.
std::vector<RunPoint> combinations(const ExperimentSpec& spec);

// threads == 0 picks the hardware concurrency. Rows come back in
// combinations() order regardless of how the work was scheduled.
std::vector<ResultRow> run_experiment(const ExperimentSpec& spec, unsigned threads = 0);

inline constexpr std::string_view kCsvHeader =
    "flavor,hops,loss_rate,seed,throughput,goodput,plr,mean_delay,rto_count,retransmit_count,"
    "delivered_count";

std::string emit_csv(std::span<const ResultRow> rows);

struct PairedDelta {
  int hops = 1;
  double loss_rate = 0.0;
  std::uint64_t seed = 1;
  double baseline_throughput = 0.0;
  double candidate_throughput = 0.0;
  long baseline_rto = 0;
  long candidate_rto = 0;
};

struct Comparison {
  Flavor baseline = Flavor::NewReno;
  Flavor candidate = Flavor::Sac;
  std::vector<PairedDelta> pairs;
  double mean_baseline_throughput = 0.0;
  double mean_candidate_throughput = 0.0;
  double mean_throughput_delta = 0.0;  // candidate - baseline
  double mean_rto_delta = 0.0;         // candidate - baseline
  // Candidate mean throughput >= baseline mean throughput.
  bool candidate_wins() const { return mean_candidate_throughput >= mean_baseline_throughput; }
};

// Runs both flavors over every (hops, loss rate, seed) of the spec, ignoring
// spec.flavors. Undefined throughput counts as zero.
Comparison compare_flavors(const ExperimentSpec& spec, Flavor baseline, Flavor candidate,
                           unsigned threads = 0);

std::string comparison_csv(const Comparison& c);
std::string comparison_summary(const Comparison& c);

}  // namespace meshtcp
