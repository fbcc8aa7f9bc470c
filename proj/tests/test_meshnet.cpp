#include <cmath>
#include <vector>

#include "doctest.h"
#include "meshtcp/error.hpp"
#include "meshtcp/meshnet.hpp"

using namespace meshtcp;

namespace {

Segment data(SeqNo seq, int bytes = 1460) {
  Segment s;
  s.kind = SegmentKind::Data;
  s.seq = seq;
  s.size_bytes = bytes;
  return s;
}

int count(const RunTrace& t, TraceKind k) {
  int n = 0;
  for (const auto& r : t.records()) n += r.kind == k;
  return n;
}

// Drives a MeshNetwork alone: channel releases are dispatched, arrivals
// are collected instead of being forwarded.
struct Harness {
  ChainTopology topo;
  EventQueue events;
  RunTrace trace;
  MeshNetwork net;
  std::vector<std::pair<double, SegmentArrival>> arrivals;

  Harness(int n_nodes, LinkModel link, std::vector<ScriptedDrop> script = {}, std::uint64_t seed = 1)
      : topo(build_chain(n_nodes, link)), net(topo, seed, std::move(script), events, trace) {}

  void run(double t_end = 1e9) {
    run_events_until(events, t_end, [&](const SimEvent& ev) {
      if (const auto* cf = std::get_if<ChannelFree>(&ev.payload)) {
        net.on_channel_free(cf->link, ev.time);
      } else if (const auto* a = std::get_if<SegmentArrival>(&ev.payload)) {
        arrivals.emplace_back(ev.time, *a);
      }
    });
  }
};

}  // namespace

TEST_CASE("build_chain") {
  LinkModel m;
  ChainTopology five = build_chain(5, m);
  CHECK(five.n_hops() == 4);
  CHECK(five.n_links() == 8);
  for (int h = 1; h <= 4; ++h) CHECK(five.supports_hops(h));
  CHECK_FALSE(five.supports_hops(5));
  CHECK_FALSE(five.supports_hops(0));

  ChainTopology two = build_chain(2, m);
  CHECK(two.n_hops() == 1);
  CHECK(two.groups().size() == 1);

  CHECK_THROWS_AS(build_chain(1, m), ConfigError);
  LinkModel bad;
  bad.queue_capacity = 0;
  CHECK_THROWS_AS(build_chain(3, bad), ConfigError);
  bad = LinkModel{};
  bad.bandwidth_bps = 0;
  CHECK_THROWS_AS(build_chain(3, bad), ConfigError);
  bad = LinkModel{};
  bad.loss_rate = -0.1;
  CHECK_THROWS_AS(build_chain(3, bad), ConfigError);
}

TEST_CASE("interference groups of range 2") {
  ChainTopology t = build_chain(6, LinkModel{});  // 5 hops
  REQUIRE(t.groups().size() == 3);
  CHECK(t.groups()[0] == std::vector<int>{1, 2, 3});
  CHECK(t.groups()[2] == std::vector<int>{3, 4, 5});
  CHECK(t.interferes(1, 3));
  CHECK_FALSE(t.interferes(1, 4));
  CHECK(t.interferes(2, 4));
  CHECK(t.interferes(4, 4));
  CHECK(t.groups_of_hop(3) == std::vector<int>{0, 1, 2});

  ChainTopology four = build_chain(5, LinkModel{});
  CHECK(four.groups().size() == 2);
  CHECK_FALSE(four.interferes(1, 4));

  ChainTopology three = build_chain(4, LinkModel{});
  CHECK(three.groups().size() == 1);
}

TEST_CASE("routing and link numbering") {
  ChainTopology t = build_chain(4, LinkModel{});
  CHECK(t.next_node(1, SegmentKind::Data) == 2);
  CHECK(t.next_node(3, SegmentKind::Ack) == 2);
  CHECK(t.out_link(1, SegmentKind::Data) == 0);
  CHECK(t.out_link(2, SegmentKind::Ack) == 1);
  CHECK(t.out_link(4, SegmentKind::Ack) == 5);
  CHECK(hop_of_link(5) == 3);
  CHECK(direction_of_link(5) == Direction::Reverse);
  CHECK(link_index(3, Direction::Forward) == 4);
  CHECK_THROWS_AS(t.next_node(4, SegmentKind::Data), ContractViolation);
}

TEST_CASE("link_transmit timing") {
  LinkModel m;
  auto p = link_transmit(m, data(0, 1500), 1.0, false);
  CHECK(p.tx_time == doctest::Approx(0.006));
  CHECK(p.channel_free_at == doctest::Approx(1.006));
  REQUIRE(p.arrival_at);
  CHECK(*p.arrival_at == doctest::Approx(1.007));

  Segment ack;
  ack.kind = SegmentKind::Ack;
  ack.size_bytes = 40;
  CHECK(link_transmit(m, ack, 0.0, false).tx_time == doctest::Approx(0.00016));
  CHECK_FALSE(link_transmit(m, ack, 0.0, true).arrival_at.has_value());
}

TEST_CASE("channel arbiter") {
  ChainTopology t = build_chain(6, LinkModel{});
  SUBCASE("idle channel grants immediately") {
    ChannelArbiter a(t);
    CHECK(a.request(0, 1.0) == 1.0);
    CHECK(a.hop_busy(1));
  }
  SUBCASE("FIFO among interfering requests") {
    ChannelArbiter a(t);
    REQUIRE(a.request(link_index(1, Direction::Forward), 0.0));
    CHECK_FALSE(a.request(link_index(2, Direction::Forward), 0.5));
    CHECK_FALSE(a.request(link_index(3, Direction::Forward), 0.6));
    auto g = a.release(link_index(1, Direction::Forward), 2.0);
    CHECK(g == std::vector<int>{link_index(2, Direction::Forward)});
    CHECK(a.waiting() == 1);
    g = a.release(link_index(2, Direction::Forward), 3.0);
    CHECK(g == std::vector<int>{link_index(3, Direction::Forward)});
  }
  SUBCASE("a later request may not overtake an interfering earlier one") {
    ChannelArbiter a(t);
    REQUIRE(a.request(link_index(1, Direction::Forward), 0.0));
    CHECK_FALSE(a.request(link_index(3, Direction::Forward), 0.1));
    // hop 5 does not interfere with hop 1 but does with waiting hop 3
    CHECK_FALSE(a.request(link_index(5, Direction::Forward), 0.2));
  }
  SUBCASE("non-interfering hops transmit together") {
    ChannelArbiter a(t);
    CHECK(a.request(link_index(1, Direction::Forward), 0.0));
    CHECK(a.request(link_index(4, Direction::Forward), 0.0));
    CHECK(a.request(link_index(5, Direction::Reverse), 0.0) == std::nullopt);
  }
  SUBCASE("both directions of a hop share the channel") {
    ChannelArbiter a(t);
    CHECK(a.request(link_index(2, Direction::Forward), 0.0));
    CHECK_FALSE(a.request(link_index(2, Direction::Reverse), 0.0));
  }
  SUBCASE("releasing an idle hop is a contract violation") {
    ChannelArbiter a(t);
    CHECK_THROWS_AS(a.release(0, 0.0), ContractViolation);
  }
}

TEST_CASE("loss process") {
  SUBCASE("rate 0 never drops") {
    LossProcess p(0.0, RngStream(1, "x"));
    for (int i = 0; i < 1000; ++i) CHECK_FALSE(p.decide(i, i + 0.5));
    CHECK(p.instants_drawn() == 0);
  }
  SUBCASE("same seed, same decisions") {
    LossProcess a(5.0, RngStream(9, "loss/hop/1"));
    LossProcess b(5.0, RngStream(9, "loss/hop/1"));
    for (int i = 0; i < 2000; ++i) {
      const double s = i * 0.01;
      CHECK(a.decide(s, s + 0.006) == b.decide(s, s + 0.006));
    }
  }
  SUBCASE("continuous transmission drops close to the Poisson mean") {
    // P(at least one instant in a slot of length d) = 1 - exp(-rate d).
    const double rate = 2.0;
    const double d = 1460 * 8 / 2e6;
    const int slots = 200000;
    double total = 0.0;
    const int seeds = 10;
    for (int seed = 1; seed <= seeds; ++seed) {
      LossProcess p(rate, RngStream(static_cast<std::uint64_t>(seed), "loss/hop/1"));
      int drops = 0;
      for (int i = 0; i < slots; ++i) drops += p.decide(i * d, (i + 1) * d);
      total += drops;
    }
    const double expected = slots * (1.0 - std::exp(-rate * d));
    const double mean = total / seeds;
    CHECK(std::abs(mean - expected) < 3.0 * std::sqrt(expected / seeds));
  }
}

TEST_CASE("scripted drops") {
  Harness h(2, LinkModel{}, {{1, 10, 1}, {1, 10, 2}});
  for (int i = 0; i < 3; ++i) h.net.enqueue(0, data(10), 0.0);
  h.net.enqueue(0, data(11), 0.0);
  h.run();
  CHECK(count(h.trace, TraceKind::DropWireless) == 2);
  REQUIRE(h.arrivals.size() == 2);
  CHECK(h.arrivals[0].second.segment.seq == 10);
  CHECK(h.arrivals[1].second.segment.seq == 11);

  LinkModel m;
  CHECK_THROWS_AS(Harness(3, m, {{3, 1, 1}}), ConfigError);
  CHECK_THROWS_AS(Harness(3, m, {{1, 1, 0}}), ConfigError);
}

TEST_CASE("scripted mode ignores the stochastic rate") {
  LinkModel m;
  m.loss_rate = 1000.0;
  Harness h(2, m, {{1, 99, 1}});
  for (SeqNo s = 0; s < 20; ++s) h.net.enqueue(0, data(s), 0.0);
  h.run();
  CHECK(count(h.trace, TraceKind::DropWireless) == 0);
}

TEST_CASE("drop-tail queue") {
  SUBCASE("capacity 50: 10 accepted, the 51st dropped") {
    Harness h(2, LinkModel{});
    for (SeqNo s = 0; s < 10; ++s) CHECK(h.net.enqueue(0, data(s), 0.0));
    for (SeqNo s = 10; s < 50; ++s) CHECK(h.net.enqueue(0, data(s), 0.0));
    CHECK(h.net.queue_length(0) == 50);
    CHECK_FALSE(h.net.enqueue(0, data(50), 0.0));
    CHECK(count(h.trace, TraceKind::DropQueue) == 1);
    CHECK(h.trace.records().back().value == 1.0);
  }
  SUBCASE("capacity 1 drops a back-to-back arrival") {
    LinkModel m;
    m.queue_capacity = 1;
    Harness h(2, m);
    CHECK(h.net.enqueue(0, data(0), 0.0));
    CHECK_FALSE(h.net.enqueue(0, data(1), 0.0));
    h.run();
    CHECK(h.net.enqueue(0, data(2), h.events.now()));
  }
}

TEST_CASE("lossless chain delivers everything in order, groups never overlap") {
  LinkModel m;
  m.queue_capacity = 1000;
  Harness h(5, m);
  std::vector<TxInterval> log;
  h.net.set_tx_log(&log);
  // Push 100 segments across every hop by re-enqueueing arrivals.
  for (SeqNo s = 0; s < 100; ++s) h.net.enqueue(0, data(s), 0.0);
  std::vector<SeqNo> delivered;
  run_events_until(h.events, 1e9, [&](const SimEvent& ev) {
    if (const auto* cf = std::get_if<ChannelFree>(&ev.payload)) {
      h.net.on_channel_free(cf->link, ev.time);
    } else if (const auto* a = std::get_if<SegmentArrival>(&ev.payload)) {
      if (a->node == 5) {
        delivered.push_back(a->segment.seq);
      } else {
        h.net.enqueue(h.topo.out_link(a->node, SegmentKind::Data), a->segment, ev.time);
      }
    }
  });
  REQUIRE(delivered.size() == 100);
  for (SeqNo s = 0; s < 100; ++s) CHECK(delivered[static_cast<std::size_t>(s)] == s);
  CHECK(count(h.trace, TraceKind::DropQueue) == 0);

  for (std::size_t i = 0; i < log.size(); ++i) {
    for (std::size_t j = i + 1; j < log.size(); ++j) {
      if (!h.topo.interferes(hop_of_link(log[i].link), hop_of_link(log[j].link))) continue;
      const bool overlap = log[i].start < log[j].end && log[j].start < log[i].end;
      REQUIRE_FALSE(overlap);
    }
  }
  // Hop 1 and hop 4 are outside each other's range and must get to overlap.
  bool spatial_reuse = false;
  for (const auto& a : log) {
    for (const auto& b : log) {
      if (hop_of_link(a.link) == 1 && hop_of_link(b.link) == 4 && a.start < b.end && b.start < a.end) {
        spatial_reuse = true;
      }
    }
  }
  CHECK(spatial_reuse);
}
