/*
 * C interface to the meshtcp simulator.
 *
 * All objects are opaque handles created by mtcp_*_create / mtcp_run_* and
 * released with the matching *_destroy function. Functions returning
 * mtcp_status leave a human-readable message retrievable with
 * mtcp_last_error() (thread-local, valid until the next failing call).
 */
#ifndef MESHTCP_H
#define MESHTCP_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  define MTCP_API __declspec(dllexport)
#elif defined(__GNUC__)
#  define MTCP_API __attribute__((visibility("default")))
#else
#  define MTCP_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mtcp_status {
  MTCP_OK = 0,
  MTCP_ERR_INTERNAL = 1, /* contract violation inside the simulator */
  MTCP_ERR_CONFIG = 2,   /* bad configuration text or argument values */
  MTCP_ERR_ARGUMENT = 4  /* null handle / pointer, index out of range */
} mtcp_status;

typedef struct mtcp_experiment mtcp_experiment;
typedef struct mtcp_results mtcp_results;
typedef struct mtcp_trace mtcp_trace;
typedef struct mtcp_comparison mtcp_comparison;

typedef struct mtcp_result_row {
  char flavor[16];
  int32_t hops;
  double loss_rate;
  uint64_t seed;
  /* has_* is 0 when the metric is undefined for the run */
  int32_t has_throughput;
  double throughput;
  int32_t has_goodput;
  double goodput;
  int32_t has_plr;
  double plr;
  int32_t has_mean_delay;
  double mean_delay;
  int64_t rto_count;
  int64_t retransmit_count;
  int64_t delivered_count;
} mtcp_result_row;

typedef struct mtcp_compare_summary {
  size_t pairs;
  double mean_baseline_throughput;
  double mean_candidate_throughput;
  double mean_throughput_delta;
  double mean_rto_delta;
  int32_t candidate_wins; /* candidate mean throughput >= baseline */
} mtcp_compare_summary;

MTCP_API const char* mtcp_version(void);
MTCP_API const char* mtcp_last_error(void);

/* Parses and validates a config; overrides are "key=value" strings applied
 * on top of the text. n_overrides may be 0 with overrides NULL. */
MTCP_API mtcp_status mtcp_experiment_create(const char* config_text, const char* const* overrides,
                                            size_t n_overrides, mtcp_experiment** out);
MTCP_API void mtcp_experiment_destroy(mtcp_experiment* exp);
MTCP_API size_t mtcp_experiment_combination_count(const mtcp_experiment* exp);

/* Runs every combination. threads == 0 uses the hardware concurrency. */
MTCP_API mtcp_status mtcp_experiment_run(const mtcp_experiment* exp, unsigned threads, mtcp_results** out);
MTCP_API void mtcp_results_destroy(mtcp_results* res);
MTCP_API size_t mtcp_results_count(const mtcp_results* res);
MTCP_API mtcp_status mtcp_results_row(const mtcp_results* res, size_t index, mtcp_result_row* out);
/* CSV text owned by the results handle. */
MTCP_API const char* mtcp_results_csv(const mtcp_results* res);

/* Runs one combination with the experiment's first loss rate. */
MTCP_API mtcp_status mtcp_run_trace(const mtcp_experiment* exp, const char* flavor, int hops, uint64_t seed,
                                    mtcp_trace** out);
MTCP_API void mtcp_trace_destroy(mtcp_trace* tr);
MTCP_API const char* mtcp_trace_text(const mtcp_trace* tr);
MTCP_API const char* mtcp_trace_cwnd_text(const mtcp_trace* tr);
MTCP_API size_t mtcp_trace_record_count(const mtcp_trace* tr);

/* Paired-seed comparison of two flavors over the experiment's hops, loss
 * rates and seeds. */
MTCP_API mtcp_status mtcp_run_compare(const mtcp_experiment* exp, const char* baseline, const char* candidate,
                                      unsigned threads, mtcp_comparison** out);
MTCP_API void mtcp_comparison_destroy(mtcp_comparison* cmp);
MTCP_API const char* mtcp_comparison_csv(const mtcp_comparison* cmp);
MTCP_API const char* mtcp_comparison_summary_line(const mtcp_comparison* cmp);
MTCP_API mtcp_status mtcp_comparison_summary(const mtcp_comparison* cmp, mtcp_compare_summary* out);

#ifdef __cplusplus
}
#endif

#endif /* MESHTCP_H */
