#include "meshtcp/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "meshtcp/error.hpp"
#include "meshtcp/world.hpp"

namespace meshtcp {

namespace {

constexpr std::string_view kKnownKeys[] = {
    "flavors",      "hops",           "loss_rates",  "seeds",     "duration",
    "bandwidth_bps", "prop_delay_s",  "queue_capacity", "mss_bytes", "ack_bytes",
    "interference_range", "rto_min_s", "rto_max_s",  "app_limit", "scripted_drops",
    "warmup_s",
};

constexpr std::string_view kRequiredKeys[] = {"flavors", "hops", "loss_rates", "seeds", "duration"};

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

struct Entry {
  std::string value;
  std::string where;  // "line 3" or "override 1"
};

[[noreturn]] void fail(const Entry& e, const std::string& key, const std::string& msg) {
  throw ConfigError(e.where + ": " + key + ": " + msg);
}

template <typename Int>
Int parse_int(std::string_view s, const Entry& e, const std::string& key) {
  Int v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    fail(e, key, "'" + std::string(s) + "' is not an integer");
  }
  return v;
}

double parse_double(std::string_view s, const Entry& e, const std::string& key) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    fail(e, key, "'" + std::string(s) + "' is not a number");
  }
  return v;
}

template <typename T, typename Parse>
std::vector<T> parse_list(const Entry& e, const std::string& key, Parse parse) {
  std::vector<T> out;
  for (std::string_view item : split(e.value, ',')) {
    if (item.empty()) fail(e, key, "empty list element");
    out.push_back(parse(item));
  }
  return out;
}

template <typename T>
void reject_duplicates(std::vector<T> values, const Entry& e, const std::string& key) {
  std::sort(values.begin(), values.end());
  if (std::adjacent_find(values.begin(), values.end()) != values.end()) {
    fail(e, key, "duplicate list element");
  }
}

void add_entry(std::map<std::string, Entry>& entries, std::string_view line, const std::string& where,
               bool allow_replace) {
  const auto eq = line.find('=');
  if (eq == std::string_view::npos) throw ConfigError(where + ": expected 'key = value'");
  const std::string key(trim(line.substr(0, eq)));
  const std::string value(trim(line.substr(eq + 1)));
  if (key.empty()) throw ConfigError(where + ": missing key");
  if (std::find(std::begin(kKnownKeys), std::end(kKnownKeys), key) == std::end(kKnownKeys)) {
    throw ConfigError(where + ": unknown key '" + key + "'");
  }
  if (!allow_replace && entries.count(key)) throw ConfigError(where + ": duplicate key '" + key + "'");
  entries[key] = Entry{value, where};
}

}  // namespace

int ExperimentSpec::max_hops() const {
  return hop_counts.empty() ? 0 : *std::max_element(hop_counts.begin(), hop_counts.end());
}

ExperimentSpec load_config(std::string_view text, std::span<const std::string> overrides) {
  std::map<std::string, Entry> entries;
  int line_no = 0;
  for (std::string_view raw : split(text, '\n')) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    add_entry(entries, line, "line " + std::to_string(line_no), false);
  }
  for (std::size_t i = 0; i < overrides.size(); ++i) {
    add_entry(entries, trim(overrides[i]), "override " + std::to_string(i + 1), true);
  }
  for (std::string_view key : kRequiredKeys) {
    if (!entries.count(std::string(key))) {
      throw ConfigError("missing required key '" + std::string(key) + "'");
    }
  }

  ExperimentSpec spec;
  for (const auto& [key, e] : entries) {
    if (e.value.empty()) fail(e, key, "empty value");
    if (key == "flavors") {
      spec.flavors = parse_list<Flavor>(e, key, [&](std::string_view s) {
        try {
          return parse_flavor(s);
        } catch (const ConfigError& err) {
          fail(e, key, err.what());
        }
      });
      reject_duplicates(spec.flavors, e, key);
    } else if (key == "hops") {
      spec.hop_counts = parse_list<int>(e, key, [&](std::string_view s) {
        const int h = parse_int<int>(s, e, key);
        if (h < 1) fail(e, key, "hop counts must be >= 1");
        return h;
      });
      reject_duplicates(spec.hop_counts, e, key);
    } else if (key == "loss_rates") {
      spec.loss_rates = parse_list<double>(e, key, [&](std::string_view s) {
        const double r = parse_double(s, e, key);
        if (r < 0.0) fail(e, key, "loss rates must be >= 0");
        return r;
      });
      reject_duplicates(spec.loss_rates, e, key);
    } else if (key == "seeds") {
      spec.seeds = parse_list<std::uint64_t>(
          e, key, [&](std::string_view s) { return parse_int<std::uint64_t>(s, e, key); });
      reject_duplicates(spec.seeds, e, key);
    } else if (key == "duration") {
      spec.duration = parse_double(e.value, e, key);
      if (!(spec.duration > 0.0)) fail(e, key, "must be positive");
    } else if (key == "bandwidth_bps") {
      spec.link.bandwidth_bps = parse_double(e.value, e, key);
    } else if (key == "prop_delay_s") {
      spec.link.prop_delay_s = parse_double(e.value, e, key);
    } else if (key == "queue_capacity") {
      spec.link.queue_capacity = parse_int<int>(e.value, e, key);
    } else if (key == "mss_bytes") {
      spec.mss_bytes = parse_int<int>(e.value, e, key);
      if (spec.mss_bytes < 64 || spec.mss_bytes > 65535) fail(e, key, "must lie in [64, 65535]");
    } else if (key == "ack_bytes") {
      spec.ack_bytes = parse_int<int>(e.value, e, key);
      if (spec.ack_bytes < 1) fail(e, key, "must be positive");
    } else if (key == "interference_range") {
      spec.link.interference_range = parse_int<int>(e.value, e, key);
    } else if (key == "rto_min_s") {
      spec.rto_min = parse_double(e.value, e, key);
    } else if (key == "rto_max_s") {
      spec.rto_max = parse_double(e.value, e, key);
    } else if (key == "app_limit") {
      if (e.value == "unbounded") {
        spec.app_limit.reset();
      } else {
        spec.app_limit = parse_int<SeqNo>(e.value, e, key);
        if (*spec.app_limit < 0) fail(e, key, "must be >= 0 or 'unbounded'");
      }
    } else if (key == "scripted_drops") {
      for (std::string_view item : split(e.value, ';')) {
        if (item.empty()) continue;
        const auto parts = split(item, ':');
        if (parts.size() != 3) fail(e, key, "expected link:seq:nth, got '" + std::string(item) + "'");
        ScriptedDrop d{parse_int<int>(parts[0], e, key), parse_int<SeqNo>(parts[1], e, key),
                       parse_int<int>(parts[2], e, key)};
        if (d.link < 1 || d.seq < 0 || d.nth < 1) fail(e, key, "needs link >= 1, seq >= 0, nth >= 1");
        spec.scripted_drops.push_back(d);
      }
    } else if (key == "warmup_s") {
      spec.warmup = parse_double(e.value, e, key);
      if (spec.warmup < 0.0) fail(e, key, "must be >= 0");
    }
  }

  validate(spec.link);
  if (!(spec.rto_min > 0.0) || !(spec.rto_max >= spec.rto_min)) {
    throw ConfigError("rto bounds must satisfy 0 < rto_min_s <= rto_max_s");
  }
  if (spec.warmup >= spec.duration) throw ConfigError("warmup_s must be below duration");
  for (const ScriptedDrop& d : spec.scripted_drops) {
    if (d.link > spec.max_hops()) {
      throw ConfigError("scripted drop on link " + std::to_string(d.link) +
                        " lies beyond the longest flow (" + std::to_string(spec.max_hops()) + " hops)");
    }
  }
  return spec;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string describe(const RunPoint& p) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "flavor=%s hops=%d loss_rate=%g seed=%llu",
                std::string(to_string(p.flavor)).c_str(), p.hops, p.loss_rate,
                static_cast<unsigned long long>(p.seed));
  return buf;
}

RunOutput run_single(const ExperimentSpec& spec, const RunPoint& point, const SenderObserver* observer) {
  WorldConfig wc;
  wc.n_nodes = std::max(spec.max_hops(), point.hops) + 1;
  wc.link = spec.link;
  wc.link.loss_rate = point.loss_rate;
  wc.seed = point.seed;
  wc.scripted_drops = spec.scripted_drops;
  World world(wc);

  FlowSpec fs;
  fs.flavor = point.flavor;
  fs.hops = point.hops;
  fs.mss_bytes = spec.mss_bytes;
  fs.ack_bytes = spec.ack_bytes;
  fs.app_limit = spec.app_limit;
  fs.rto_min = spec.rto_min;
  fs.rto_max = spec.rto_max;
  const int flow = world.add_flow(fs);
  if (observer) world.set_sender_observer(flow, *observer);

  RunOutput out;
  out.trace = world.run_until(spec.duration);
  out.summary = summarize(out.trace, flow, TimeWindow{spec.warmup, spec.duration});
  return out;
}

std::vector<RunPoint> combinations(const ExperimentSpec& spec) {
  std::vector<Flavor> flavors = spec.flavors;
  std::sort(flavors.begin(), flavors.end());
  std::vector<int> hops = spec.hop_counts;
  std::sort(hops.begin(), hops.end());
  std::vector<double> rates = spec.loss_rates;
  std::sort(rates.begin(), rates.end());
  std::vector<std::uint64_t> seeds = spec.seeds;
  std::sort(seeds.begin(), seeds.end());

  std::vector<RunPoint> out;
  out.reserve(spec.combination_count());
  for (Flavor f : flavors)
    for (int h : hops)
      for (double r : rates)
        for (std::uint64_t s : seeds) out.push_back(RunPoint{f, h, r, s});
  return out;
}

namespace {

template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) body(i);
  };
  if (threads <= 1) {
    worker();
    return;
  }
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

// Runs every point, keeping the first failure (in point order) and
// rethrowing it with the combination named.
std::vector<MetricsSummary> run_points(const ExperimentSpec& spec, const std::vector<RunPoint>& points,
                                       unsigned threads) {
  std::vector<MetricsSummary> results(points.size());
  std::vector<std::exception_ptr> errors(points.size());
  parallel_for(points.size(), threads, [&](std::size_t i) {
    try {
      results[i] = run_single(spec, points[i]).summary;
    } catch (...) {
      errors[i] = std::current_exception();
    }
  });
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const ConfigError& e) {
      throw ConfigError("run " + describe(points[i]) + ": " + e.what());
    } catch (const std::exception& e) {
      throw ContractViolation("run " + describe(points[i]) + " aborted: " + e.what());
    }
  }
  return results;
}

void append_optional(std::string& out, const std::optional<double>& v) {
  if (!v) {
    out += "NA";
    return;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  out += buf;
}

void append_fixed(std::string& out, double v) { append_optional(out, v); }

}  // namespace

std::vector<ResultRow> run_experiment(const ExperimentSpec& spec, unsigned threads) {
  const std::vector<RunPoint> points = combinations(spec);
  const std::vector<MetricsSummary> summaries = run_points(spec, points, threads);
  std::vector<ResultRow> rows;
  rows.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const RunPoint& p = points[i];
    const MetricsSummary& m = summaries[i];
    rows.push_back(ResultRow{p.flavor, p.hops, p.loss_rate, p.seed, m.throughput, m.goodput, m.plr,
                             m.mean_delay, m.rto_count, m.retransmit_count, m.delivered_count});
  }
  return rows;
}

std::string emit_csv(std::span<const ResultRow> rows) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const ResultRow& r : rows) {
    out += to_string(r.flavor);
    out += ',' + std::to_string(r.hops) + ',';
    append_fixed(out, r.loss_rate);
    out += ',' + std::to_string(r.seed) + ',';
    append_optional(out, r.throughput);
    out += ',';
    append_optional(out, r.goodput);
    out += ',';
    append_optional(out, r.plr);
    out += ',';
    append_optional(out, r.mean_delay);
    out += ',' + std::to_string(r.rto_count) + ',' + std::to_string(r.retransmit_count) + ',' +
           std::to_string(r.delivered_count) + '\n';
  }
  return out;
}

Comparison compare_flavors(const ExperimentSpec& spec, Flavor baseline, Flavor candidate, unsigned threads) {
  ExperimentSpec s = spec;
  s.flavors = {baseline};
  const std::vector<RunPoint> base_points = combinations(s);
  std::vector<RunPoint> points = base_points;
  for (RunPoint p : base_points) {
    p.flavor = candidate;
    points.push_back(p);
  }
  const std::vector<MetricsSummary> results = run_points(spec, points, threads);

  Comparison c;
  c.baseline = baseline;
  c.candidate = candidate;
  const std::size_t n = base_points.size();
  double sum_b = 0.0, sum_c = 0.0, sum_rto = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const MetricsSummary& b = results[i];
    const MetricsSummary& k = results[n + i];
    PairedDelta d;
    d.hops = base_points[i].hops;
    d.loss_rate = base_points[i].loss_rate;
    d.seed = base_points[i].seed;
    d.baseline_throughput = b.throughput.value_or(0.0);
    d.candidate_throughput = k.throughput.value_or(0.0);
    d.baseline_rto = b.rto_count;
    d.candidate_rto = k.rto_count;
    sum_b += d.baseline_throughput;
    sum_c += d.candidate_throughput;
    sum_rto += static_cast<double>(d.candidate_rto - d.baseline_rto);
    c.pairs.push_back(d);
  }
  if (n > 0) {
    c.mean_baseline_throughput = sum_b / static_cast<double>(n);
    c.mean_candidate_throughput = sum_c / static_cast<double>(n);
    c.mean_throughput_delta = c.mean_candidate_throughput - c.mean_baseline_throughput;
    c.mean_rto_delta = sum_rto / static_cast<double>(n);
  }
  return c;
}

std::string comparison_csv(const Comparison& c) {
  std::string out =
      "hops,loss_rate,seed,baseline_throughput,candidate_throughput,throughput_delta,"
      "baseline_rto_count,candidate_rto_count,rto_delta\n";
  for (const PairedDelta& d : c.pairs) {
    out += std::to_string(d.hops) + ',';
    append_fixed(out, d.loss_rate);
    out += ',' + std::to_string(d.seed) + ',';
    append_fixed(out, d.baseline_throughput);
    out += ',';
    append_fixed(out, d.candidate_throughput);
    out += ',';
    append_fixed(out, d.candidate_throughput - d.baseline_throughput);
    out += ',' + std::to_string(d.baseline_rto) + ',' + std::to_string(d.candidate_rto) + ',' +
           std::to_string(d.candidate_rto - d.baseline_rto) + '\n';
  }
  return out;
}

std::string comparison_summary(const Comparison& c) {
  char buf[320];
  std::snprintf(buf, sizeof buf,
                "baseline=%s candidate=%s pairs=%zu mean_baseline_throughput=%.6f "
                "mean_candidate_throughput=%.6f mean_throughput_delta=%.6f mean_rto_delta=%.6f "
                "verdict=%s\n",
                std::string(to_string(c.baseline)).c_str(), std::string(to_string(c.candidate)).c_str(),
                c.pairs.size(), c.mean_baseline_throughput, c.mean_candidate_throughput,
                c.mean_throughput_delta, c.mean_rto_delta, c.candidate_wins() ? "pass" : "fail");
  return buf;
}

}  // namespace meshtcp
