#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "meshtcp/error.hpp"
#include "meshtcp/simcore.hpp"

using namespace meshtcp;

TEST_CASE("event queue order") {
  EventQueue q;
  q.schedule(1.0, AppTick{0});
  CHECK(q.top().time == 1.0);

  q.schedule(1.0, AppTick{1});
  q.schedule(0.5, AppTick{2});
  q.schedule(1.0, AppTick{3});
  std::vector<int> order;
  while (!q.empty()) order.push_back(std::get<AppTick>(q.pop().payload).flow);
  CHECK(order == std::vector<int>{2, 0, 1, 3});
  CHECK(q.now() == 1.0);
}

TEST_CASE("scheduling in the past is a contract violation") {
  EventQueue q;
  q.schedule(2.0, SampleTick{});
  q.pop();
  CHECK_THROWS_AS(q.schedule(1.0, SampleTick{}), ContractViolation);
  CHECK_NOTHROW(q.schedule(2.0, SampleTick{}));
}

TEST_CASE("run_events_until stops at the horizon and names failing events") {
  EventQueue q;
  for (double t : {0.5, 1.0, 1.5, 2.5}) q.schedule(t, AppTick{0});
  int n = 0;
  run_events_until(q, 1.5, [&](const SimEvent& ev) {
    CHECK(ev.time <= 1.5);
    ++n;
  });
  CHECK(n == 3);
  CHECK(q.size() == 1);

  EventQueue bad;
  bad.schedule(0.1, TimerExpiry{3, TimerKind::Rto, 9});
  try {
    run_events_until(bad, 1.0, [](const SimEvent&) { throw ContractViolation("boom"); });
    FAIL("expected a throw");
  } catch (const ContractViolation& e) {
    const std::string msg = e.what();
    CHECK(msg.find("boom") != std::string::npos);
    CHECK(msg.find("0.1") != std::string::npos);
  }
}

TEST_CASE("events scheduled during dispatch keep the total order") {
  EventQueue q;
  q.schedule(1.0, AppTick{0});
  std::vector<double> seen;
  run_events_until(q, 10.0, [&](const SimEvent& ev) {
    seen.push_back(ev.time);
    if (seen.size() < 5) {
      q.schedule(ev.time, AppTick{1});
      q.schedule(ev.time + 1.0, AppTick{2});
    }
  });
  for (std::size_t i = 1; i < seen.size(); ++i) CHECK(seen[i] >= seen[i - 1]);
}

TEST_CASE("splitmix64 reference values") {
  // First outputs of the reference SplitMix64 generator seeded with 0.
  std::uint64_t s = 0;
  CHECK(splitmix64(s) == 0xe220a8397b1dcdafULL);
  CHECK(splitmix64(s) == 0x6e789e6aa1b965f4ULL);
  CHECK(splitmix64(s) == 0x06c45d188009454fULL);
}

TEST_CASE("fnv1a64 reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("rng streams are reproducible and independent by name") {
  RngStream a(42, "loss/hop/1");
  RngStream b(42, "loss/hop/1");
  RngStream c(42, "loss/hop/2");
  RngStream d(43, "loss/hop/1");
  bool differs_name = false;
  bool differs_seed = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    differs_name |= x != c.next_u64();
    differs_seed |= x != d.next_u64();
  }
  CHECK(differs_name);
  CHECK(differs_seed);
  CHECK(a.draws() == 100);

  RngStream s1 = RngStream(7, "x").split("child");
  RngStream s2 = RngStream(7, "x").split("child");
  CHECK(s1.next_u64() == s2.next_u64());
  CHECK(s1.name() == "x/child");
}

TEST_CASE("uniform and exponential draws") {
  RngStream r(1, "u");
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));

  RngStream e(2, "e");
  double esum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = e.exponential(4.0);
    REQUIRE(x >= 0.0);
    esum += x;
  }
  CHECK(esum / n == doctest::Approx(0.25).epsilon(0.02));
  CHECK_THROWS_AS(e.exponential(0.0), ContractViolation);
}

TEST_CASE("trace records and text format") {
  RunTrace t;
  t.append(0.0, TraceKind::CwndSample, 0, 44, 1.0);
  t.append(0.5, TraceKind::Send, 0, 7, 1.0);
  t.append(0.5, TraceKind::DropWireless, 0, 7, -2.0);
  t.append({1.25, TraceKind::Rto, 0, 7, 0.4});
  CHECK_THROWS_AS(t.append(1.0, TraceKind::Send, 0, 8, 1.0), ContractViolation);
  CHECK(t.size() == 4);
  CHECK(t.to_text() ==
        "0.000000000\tCWND_SAMPLE\t0\t44\t1\n"
        "0.500000000\tSEND\t0\t7\t1\n"
        "0.500000000\tDROP_WIRELESS\t0\t7\t-2\n"
        "1.250000000\tRTO\t0\t7\t0.4\n");
}

TEST_CASE("trace kind names and phase codes") {
  std::set<std::string_view> names;
  for (TraceKind k : {TraceKind::Send, TraceKind::Deliver, TraceKind::DropWireless, TraceKind::DropQueue,
                      TraceKind::Retx, TraceKind::Rto, TraceKind::CwndSample, TraceKind::PhaseChange,
                      TraceKind::StaleAck, TraceKind::SpuriousRto}) {
    names.insert(to_string(k));
  }
  CHECK(names.size() == 10);
  CHECK(names.count("SPURIOUS_RTO") == 1);
  for (CcPhase p : {CcPhase::SlowStart, CcPhase::CongestionAvoidance, CcPhase::FastRecovery}) {
    CHECK(phase_from_code(phase_code(p)) == p);
  }
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(3.0) == "3");
}
