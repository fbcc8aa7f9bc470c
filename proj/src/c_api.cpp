#include "meshtcp/meshtcp.h"

#include <algorithm>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "meshtcp/error.hpp"
#include "meshtcp/experiment.hpp"

struct mtcp_experiment {
  meshtcp::ExperimentSpec spec;
};

struct mtcp_results {
  std::vector<meshtcp::ResultRow> rows;
  std::string csv;
};

struct mtcp_trace {
  std::string text;
  std::string cwnd;
  std::size_t records = 0;
};

struct mtcp_comparison {
  meshtcp::Comparison cmp;
  std::string csv;
  std::string summary;
};

namespace {

thread_local std::string g_last_error;

mtcp_status set_error(mtcp_status status, const std::string& msg) {
  g_last_error = msg;
  return status;
}

// Maps exceptions escaping the C++ core onto status codes.
template <typename Fn>
mtcp_status guarded(Fn&& fn) {
  try {
    fn();
    return MTCP_OK;
  } catch (const meshtcp::ConfigError& e) {
    return set_error(MTCP_ERR_CONFIG, e.what());
  } catch (const meshtcp::ContractViolation& e) {
    return set_error(MTCP_ERR_INTERNAL, e.what());
  } catch (const std::exception& e) {
    return set_error(MTCP_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(MTCP_ERR_INTERNAL, "unknown error");
  }
}

}  // namespace

extern "C" {

const char* mtcp_version(void) { return "1.0.0"; }

const char* mtcp_last_error(void) { return g_last_error.c_str(); }

mtcp_status mtcp_experiment_create(const char* config_text, const char* const* overrides, size_t n_overrides,
                                   mtcp_experiment** out) {
  if (!config_text || !out || (n_overrides > 0 && !overrides)) {
    return set_error(MTCP_ERR_ARGUMENT, "null argument");
  }
  *out = nullptr;
  return guarded([&] {
    std::vector<std::string> ov;
    for (size_t i = 0; i < n_overrides; ++i) {
      if (!overrides[i]) throw meshtcp::ConfigError("override " + std::to_string(i + 1) + " is null");
      ov.emplace_back(overrides[i]);
    }
    *out = new mtcp_experiment{meshtcp::load_config(config_text, ov)};
  });
}

void mtcp_experiment_destroy(mtcp_experiment* exp) { delete exp; }

size_t mtcp_experiment_combination_count(const mtcp_experiment* exp) {
  return exp ? exp->spec.combination_count() : 0;
}

mtcp_status mtcp_experiment_run(const mtcp_experiment* exp, unsigned threads, mtcp_results** out) {
  if (!exp || !out) return set_error(MTCP_ERR_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    auto res = std::make_unique<mtcp_results>();
    res->rows = meshtcp::run_experiment(exp->spec, threads);
    res->csv = meshtcp::emit_csv(res->rows);
    *out = res.release();
  });
}

void mtcp_results_destroy(mtcp_results* res) { delete res; }

size_t mtcp_results_count(const mtcp_results* res) { return res ? res->rows.size() : 0; }

mtcp_status mtcp_results_row(const mtcp_results* res, size_t index, mtcp_result_row* out) {
  if (!res || !out) return set_error(MTCP_ERR_ARGUMENT, "null argument");
  if (index >= res->rows.size()) return set_error(MTCP_ERR_ARGUMENT, "row index out of range");
  const meshtcp::ResultRow& r = res->rows[index];
  std::memset(out, 0, sizeof *out);
  const std::string_view name = meshtcp::to_string(r.flavor);
  std::memcpy(out->flavor, name.data(), std::min(name.size(), sizeof out->flavor - 1));
  out->hops = r.hops;
  out->loss_rate = r.loss_rate;
  out->seed = r.seed;
  out->has_throughput = r.throughput.has_value();
  out->throughput = r.throughput.value_or(0.0);
  out->has_goodput = r.goodput.has_value();
  out->goodput = r.goodput.value_or(0.0);
  out->has_plr = r.plr.has_value();
  out->plr = r.plr.value_or(0.0);
  out->has_mean_delay = r.mean_delay.has_value();
  out->mean_delay = r.mean_delay.value_or(0.0);
  out->rto_count = r.rto_count;
  out->retransmit_count = r.retransmit_count;
  out->delivered_count = r.delivered_count;
  return MTCP_OK;
}

const char* mtcp_results_csv(const mtcp_results* res) { return res ? res->csv.c_str() : ""; }

mtcp_status mtcp_run_trace(const mtcp_experiment* exp, const char* flavor, int hops, uint64_t seed,
                           mtcp_trace** out) {
  if (!exp || !flavor || !out) return set_error(MTCP_ERR_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    if (hops < 1) throw meshtcp::ConfigError("hops must be >= 1");
    meshtcp::RunPoint p{meshtcp::parse_flavor(flavor), hops, exp->spec.loss_rates.front(), seed};
    meshtcp::RunOutput run = meshtcp::run_single(exp->spec, p);
    auto tr = std::make_unique<mtcp_trace>();
    tr->text = run.trace.to_text();
    tr->cwnd = meshtcp::cwnd_series_text(run.summary);
    tr->records = run.trace.size();
    *out = tr.release();
  });
}

void mtcp_trace_destroy(mtcp_trace* tr) { delete tr; }

const char* mtcp_trace_text(const mtcp_trace* tr) { return tr ? tr->text.c_str() : ""; }

const char* mtcp_trace_cwnd_text(const mtcp_trace* tr) { return tr ? tr->cwnd.c_str() : ""; }

size_t mtcp_trace_record_count(const mtcp_trace* tr) { return tr ? tr->records : 0; }

mtcp_status mtcp_run_compare(const mtcp_experiment* exp, const char* baseline, const char* candidate,
                             unsigned threads, mtcp_comparison** out) {
  if (!exp || !baseline || !candidate || !out) return set_error(MTCP_ERR_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    auto c = std::make_unique<mtcp_comparison>();
    c->cmp = meshtcp::compare_flavors(exp->spec, meshtcp::parse_flavor(baseline),
                                      meshtcp::parse_flavor(candidate), threads);
    c->csv = meshtcp::comparison_csv(c->cmp);
    c->summary = meshtcp::comparison_summary(c->cmp);
    *out = c.release();
  });
}

void mtcp_comparison_destroy(mtcp_comparison* cmp) { delete cmp; }

const char* mtcp_comparison_csv(const mtcp_comparison* cmp) { return cmp ? cmp->csv.c_str() : ""; }

const char* mtcp_comparison_summary_line(const mtcp_comparison* cmp) {
  return cmp ? cmp->summary.c_str() : "";
}

mtcp_status mtcp_comparison_summary(const mtcp_comparison* cmp, mtcp_compare_summary* out) {
  if (!cmp || !out) return set_error(MTCP_ERR_ARGUMENT, "null argument");
  out->pairs = cmp->cmp.pairs.size();
  out->mean_baseline_throughput = cmp->cmp.mean_baseline_throughput;
  out->mean_candidate_throughput = cmp->cmp.mean_candidate_throughput;
  out->mean_throughput_delta = cmp->cmp.mean_throughput_delta;
  out->mean_rto_delta = cmp->cmp.mean_rto_delta;
  out->candidate_wins = cmp->cmp.candidate_wins() ? 1 : 0;
  return MTCP_OK;
}

}  // extern "C"
