// meshtcp command-line front end. Talks to the simulator only through the
// C interface in meshtcp.h.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "meshtcp/meshtcp.h"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitConfig = 2;
constexpr int kExitVerdict = 3;

struct Options {
  std::string config;
  std::string out;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  std::string flavor;
  int hops = 1;
  std::string baseline = "newreno";
  std::string candidate = "sac";
};

int status_exit(mtcp_status s) {
  std::cerr << "meshtcp: " << mtcp_last_error() << "\n";
  return s == MTCP_ERR_CONFIG ? kExitConfig : kExitInternal;
}

// RAII holder for the C handles.
template <typename T, void (*Destroy)(T*)>
struct Handle {
  T* ptr = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Destroy(ptr); }
};

using Experiment = Handle<mtcp_experiment, mtcp_experiment_destroy>;
using Results = Handle<mtcp_results, mtcp_results_destroy>;
using Trace = Handle<mtcp_trace, mtcp_trace_destroy>;
using Comparison = Handle<mtcp_comparison, mtcp_comparison_destroy>;

std::optional<std::string> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool write_file(const fs::path& path, const char* text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  return static_cast<bool>(out);
}

bool prepare_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    std::cerr << "meshtcp: cannot create output directory '" << dir << "'\n";
    return false;
  }
  return true;
}

// Loads config text, applying --set overrides and the --seed override.
int load(const Options& o, Experiment& exp) {
  const auto text = read_file(o.config);
  if (!text) {
    std::cerr << "meshtcp: cannot read config file '" << o.config << "'\n";
    return kExitConfig;
  }
  std::vector<std::string> overrides = o.overrides;
  if (o.seed) overrides.push_back("seeds = " + std::to_string(*o.seed));
  std::vector<const char*> argv;
  for (const auto& s : overrides) argv.push_back(s.c_str());
  const mtcp_status s = mtcp_experiment_create(text->c_str(), argv.data(), argv.size(), &exp.ptr);
  return s == MTCP_OK ? kExitOk : status_exit(s);
}

int cmd_validate(const Options& o) {
  Experiment exp;
  if (int rc = load(o, exp)) return rc;
  std::cerr << "config ok: " << mtcp_experiment_combination_count(exp.ptr) << " combinations\n";
  return kExitOk;
}

int cmd_run(const Options& o) {
  Experiment exp;
  if (int rc = load(o, exp)) return rc;
  Results res;
  if (mtcp_status s = mtcp_experiment_run(exp.ptr, o.threads, &res.ptr); s != MTCP_OK) {
    return status_exit(s);
  }
  if (!prepare_out_dir(o.out)) return kExitInternal;
  if (!write_file(fs::path(o.out) / "results.csv", mtcp_results_csv(res.ptr))) {
    std::cerr << "meshtcp: failed to write results.csv\n";
    return kExitInternal;
  }
  std::cerr << "wrote " << mtcp_results_count(res.ptr) << " rows to "
            << (fs::path(o.out) / "results.csv").string() << "\n";
  return kExitOk;
}

int cmd_trace(const Options& o) {
  Experiment exp;
  if (int rc = load(o, exp)) return rc;
  if (!o.seed) {
    std::cerr << "meshtcp: trace requires --seed\n";
    return kExitConfig;
  }
  Trace tr;
  if (mtcp_status s = mtcp_run_trace(exp.ptr, o.flavor.c_str(), o.hops, *o.seed, &tr.ptr); s != MTCP_OK) {
    return status_exit(s);
  }
  if (!prepare_out_dir(o.out)) return kExitInternal;
  if (!write_file(fs::path(o.out) / "trace.tsv", mtcp_trace_text(tr.ptr)) ||
      !write_file(fs::path(o.out) / "cwnd.tsv", mtcp_trace_cwnd_text(tr.ptr))) {
    std::cerr << "meshtcp: failed to write trace files\n";
    return kExitInternal;
  }
  std::cerr << "wrote " << mtcp_trace_record_count(tr.ptr) << " trace records\n";
  return kExitOk;
}

int cmd_compare(const Options& o) {
  Experiment exp;
  if (int rc = load(o, exp)) return rc;
  Comparison cmp;
  if (mtcp_status s = mtcp_run_compare(exp.ptr, o.baseline.c_str(), o.candidate.c_str(), o.threads, &cmp.ptr);
      s != MTCP_OK) {
    return status_exit(s);
  }
  if (!prepare_out_dir(o.out)) return kExitInternal;
  if (!write_file(fs::path(o.out) / "compare.csv", mtcp_comparison_csv(cmp.ptr)) ||
      !write_file(fs::path(o.out) / "summary.txt", mtcp_comparison_summary_line(cmp.ptr))) {
    std::cerr << "meshtcp: failed to write comparison files\n";
    return kExitInternal;
  }
  std::cerr << mtcp_comparison_summary_line(cmp.ptr);
  mtcp_compare_summary sum{};
  mtcp_comparison_summary(cmp.ptr, &sum);
  return sum.candidate_wins ? kExitOk : kExitVerdict;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"meshtcp: TCP congestion control over wireless mesh chains"};
  app.require_subcommand(1, 1);
  Options o;

  auto common = [&](CLI::App* sub, bool with_out) {
    sub->add_option("--config", o.config, "experiment config file")->required();
    if (with_out) sub->add_option("--out", o.out, "output directory (created if absent)")->required();
    sub->add_option("--set", o.overrides, "config override key=value (repeatable)");
  };

  CLI::App* run = app.add_subcommand("run", "run every combination, write results.csv");
  common(run, true);
  run->add_option("--seed", o.seed, "replace the config's seed list");
  run->add_option("--threads", o.threads, "worker threads (0 = all cores)");

  CLI::App* trace = app.add_subcommand("trace", "run one combination, write trace.tsv and cwnd.tsv");
  common(trace, true);
  trace->add_option("--flavor", o.flavor, "sac, newreno, reno, sack or vegas")->required();
  trace->add_option("--hops", o.hops, "hop count")->required();
  trace->add_option("--seed", o.seed, "seed")->required();

  CLI::App* compare = app.add_subcommand("compare", "paired-seed comparison of two flavors");
  common(compare, true);
  compare->add_option("--baseline", o.baseline, "baseline flavor")->capture_default_str();
  compare->add_option("--candidate", o.candidate, "candidate flavor")->capture_default_str();
  compare->add_option("--seed", o.seed, "replace the config's seed list");
  compare->add_option("--threads", o.threads, "worker threads (0 = all cores)");

  CLI::App* validate = app.add_subcommand("validate", "parse and validate a config");
  common(validate, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  if (*run) return cmd_run(o);
  if (*trace) return cmd_trace(o);
  if (*compare) return cmd_compare(o);
  return cmd_validate(o);
}
