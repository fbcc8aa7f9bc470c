#include <vector>

#include "doctest.h"
#include "meshtcp/endpoint.hpp"
#include "meshtcp/error.hpp"

using namespace meshtcp;

namespace {

Segment ack_of(SeqNo a, int flow = 0) {
  Segment s;
  s.kind = SegmentKind::Ack;
  s.flow_id = flow;
  s.ack = a;
  s.size_bytes = 40;
  return s;
}

Segment data_of(SeqNo seq, int flow = 0) {
  Segment s;
  s.kind = SegmentKind::Data;
  s.flow_id = flow;
  s.seq = seq;
  s.size_bytes = 1460;
  return s;
}

std::vector<SeqNo> seqs(const EndpointEffects& fx) {
  std::vector<SeqNo> out;
  for (const auto& s : fx.transmit) out.push_back(s.seq);
  return out;
}

int count(const EndpointEffects& fx, TraceKind k) {
  int n = 0;
  for (const auto& r : fx.records) n += r.kind == k;
  return n;
}

// Sender that has sent 0..n-1 and received ACKs up to `acked`.
SenderEndpoint sender_at(SenderConfig cfg, SeqNo acked) {
  SenderEndpoint s(cfg);
  s.start(0.0);
  double t = 0.0;
  for (SeqNo a = 1; a <= acked; ++a) {
    t += 0.01;
    s.on_ack_segment(ack_of(a, cfg.flow_id), t);
  }
  return s;
}

}  // namespace

TEST_CASE("rto_update") {
  RttEstimator e = make_rtt_estimator(0.2, 60.0);
  CHECK(e.rto == doctest::Approx(1.0));
  e = rto_update(e, 1.0);
  CHECK(e.srtt == doctest::Approx(1.0));
  CHECK(e.rttvar == doctest::Approx(0.5));
  CHECK(e.rto == doctest::Approx(3.0));
  e = rto_update(e, 1.0);
  CHECK(e.rttvar == doctest::Approx(0.375));
  CHECK(e.srtt == doctest::Approx(1.0));
  CHECK(e.rto == doctest::Approx(2.5));

  RttEstimator small = make_rtt_estimator(0.2, 60.0);
  small.has_sample = true;
  small.srtt = 0.05;
  small.rttvar = 0.01;
  small = rto_update(small, 0.05);
  CHECK(small.rto == doctest::Approx(0.2));

  CHECK_THROWS_AS(rto_update(e, 0.0), ContractViolation);
  CHECK_THROWS_AS(rto_update(e, -1.0), ContractViolation);
  CHECK_THROWS_AS(make_rtt_estimator(0.0, 1.0), ConfigError);
  CHECK_THROWS_AS(make_rtt_estimator(2.0, 1.0), ConfigError);
}

TEST_CASE("rto_backoff doubles and caps") {
  RttEstimator e = make_rtt_estimator(0.2, 3.0);
  e = rto_backoff(e);
  CHECK(e.rto == doctest::Approx(2.0));
  CHECK(e.backoff_exponent == 1);
  e = rto_backoff(e);
  CHECK(e.rto == doctest::Approx(3.0));
  e = rto_update(e, 0.1);
  CHECK(e.backoff_exponent == 0);
}

TEST_CASE("fill_window") {
  SUBCASE("empty window of 4 sends 0..3") {
    SenderConfig cfg;
    SenderEndpoint s(cfg);
    auto fx = s.start(0.0);
    CHECK(seqs(fx) == std::vector<SeqNo>{0});
    s.on_ack_segment(ack_of(1), 0.1);
    s.on_ack_segment(ack_of(2), 0.2);
    s.on_ack_segment(ack_of(3), 0.3);
    CHECK(s.cc().cwnd == 4);
    CHECK(s.high_sent() == 7);
    CHECK(s.outstanding() == 4);
    CHECK(s.fill_window(0.4).transmit.empty());
  }
  SUBCASE("application limit stops the sender") {
    SenderConfig cfg;
    cfg.app_limit = 2;
    SenderEndpoint s(cfg);
    s.start(0.0);
    auto fx = s.on_ack_segment(ack_of(1), 0.1);
    CHECK(seqs(fx) == std::vector<SeqNo>{1});
    fx = s.on_ack_segment(ack_of(2), 0.2);
    CHECK(fx.transmit.empty());
    CHECK(s.high_sent() == 2);
    CHECK_FALSE(s.timer_armed());
  }
  SUBCASE("zero receiver window stalls") {
    SenderConfig cfg;
    cfg.receiver_window = 0;
    SenderEndpoint s(cfg);
    CHECK(s.start(0.0).transmit.empty());
  }
  SUBCASE("first send arms the timer, start records the initial window") {
    SenderEndpoint s(SenderConfig{});
    auto fx = s.start(0.0);
    REQUIRE(fx.timer.has_value());
    CHECK(fx.timer->deadline == doctest::Approx(1.0));
    CHECK(count(fx, TraceKind::CwndSample) == 1);
    CHECK(count(fx, TraceKind::Send) == 1);
  }
}

TEST_CASE("ACK classification") {
  SenderConfig cfg;
  SenderEndpoint s = sender_at(cfg, 3);
  const SeqNo last = s.cc().last_ack;
  REQUIRE(last == 3);

  SUBCASE("new ACK rearms the timer with an RTT sample") {
    const auto before = s.rtt();
    auto fx = s.on_ack_segment(ack_of(4), 1.0);
    CHECK(s.cc().last_ack == 4);
    CHECK(fx.timer.has_value());
    CHECK(s.rtt().srtt != before.srtt);
  }
  SUBCASE("equal ACK is a dupack") {
    auto fx = s.on_ack_segment(ack_of(3), 1.0);
    CHECK(s.cc().dupacks == 1);
    CHECK(s.cc().last_ack == 3);
    CHECK(count(fx, TraceKind::StaleAck) == 0);
  }
  SUBCASE("older ACK is stale") {
    const CcVars before = s.cc();
    auto fx = s.on_ack_segment(ack_of(2), 1.0);
    CHECK(count(fx, TraceKind::StaleAck) == 1);
    CHECK(s.cc() == before);
    CHECK(fx.transmit.empty());
  }
  SUBCASE("ACK for unsent data is a contract violation") {
    CHECK_THROWS_AS(s.on_ack_segment(ack_of(s.max_sent() + 1), 1.0), ContractViolation);
  }
  SUBCASE("foreign ACK is rejected") {
    CHECK_THROWS_AS(s.on_ack_segment(ack_of(4, 7), 1.0), ContractViolation);
  }
}

TEST_CASE("the timer is cancelled once everything is acknowledged") {
  SenderConfig cfg;
  cfg.app_limit = 3;
  SenderEndpoint s(cfg);
  s.start(0.0);
  s.on_ack_segment(ack_of(1), 0.1);
  s.on_ack_segment(ack_of(2), 0.2);
  CHECK(s.timer_armed());
  auto fx = s.on_ack_segment(ack_of(3), 0.3);
  CHECK_FALSE(s.timer_armed());
  CHECK_FALSE(fx.timer.has_value());
}

TEST_CASE("RTO handling") {
  SUBCASE("first timeout doubles rto and collapses the window") {
    SenderEndpoint s = sender_at(SenderConfig{}, 5);
    const double rto = s.rtt().rto;
    auto fx = s.on_rto(2.0);
    CHECK(s.rtt().rto == doctest::Approx(2 * rto));
    CHECK(s.cc().cwnd == 1);
    CHECK(s.cc().phase == CcPhase::SlowStart);
    CHECK(count(fx, TraceKind::Rto) == 1);
    CHECK(count(fx, TraceKind::Retx) == 1);
    CHECK(seqs(fx) == std::vector<SeqNo>{5});
    CHECK(fx.timer.has_value());
  }
  SUBCASE("two timeouts from rto 1.0 reach 4.0") {
    SenderEndpoint s(SenderConfig{});
    s.start(0.0);
    s.on_rto(1.0);
    CHECK(s.rtt().rto == doctest::Approx(2.0));
    s.on_rto(3.0);
    CHECK(s.rtt().rto == doctest::Approx(4.0));
    CHECK(s.rtt().backoff_exponent == 2);
  }
  SUBCASE("timeout with nothing outstanding is spurious") {
    SenderConfig cfg;
    cfg.app_limit = 1;
    SenderEndpoint s(cfg);
    s.start(0.0);
    s.on_ack_segment(ack_of(1), 0.1);
    const CcVars before = s.cc();
    const double rto = s.rtt().rto;
    auto fx = s.on_rto(1.0);
    CHECK(count(fx, TraceKind::SpuriousRto) == 1);
    CHECK(count(fx, TraceKind::Rto) == 0);
    CHECK(s.cc() == before);
    CHECK(s.rtt().rto == rto);
  }
  SUBCASE("stale timer ids are ignored") {
    SenderEndpoint s(SenderConfig{});
    auto first = s.start(0.0);
    REQUIRE(first.timer);
    auto again = s.on_ack_segment(ack_of(1), 0.1);
    REQUIRE(again.timer);
    CHECK(s.on_timer(first.timer->id, 1.0).records.empty());
    CHECK_FALSE(s.on_timer(again.timer->id, 1.2).records.empty());
  }
}

TEST_CASE("Karn's rule: retransmitted segments give no RTT sample") {
  SenderEndpoint s(SenderConfig{});
  s.start(0.0);
  s.on_rto(1.0);  // seq 0 goes out a second time
  REQUIRE(s.was_retransmitted(0));
  const RttEstimator before = s.rtt();
  s.on_ack_segment(ack_of(1), 1.5);
  CHECK(s.rtt().has_sample == before.has_sample);
  CHECK(s.rtt().srtt == before.srtt);
}

TEST_CASE("observer sees window audits and cc events") {
  SenderEndpoint s(SenderConfig{});
  std::vector<SendAudit> audits;
  std::vector<CcEvent> events;
  s.set_observer({[&](const CcEvent& e) { events.push_back(e); },
                  [&](const SendAudit& a) { audits.push_back(a); }});
  s.start(0.0);
  s.on_ack_segment(ack_of(1), 0.1);
  REQUIRE(events.size() == 1);
  CHECK(events[0].kind == CcEvent::Kind::NewAck);
  CHECK(events[0].before.cwnd == 1);
  CHECK(events[0].after.cwnd == 2);
  for (const auto& a : audits) {
    CHECK(a.windowed);
    CHECK(a.outstanding <= a.window);
  }
}

TEST_CASE("receiver") {
  SUBCASE("in-order data merges buffered segments") {
    ReceiverEndpoint r(ReceiverConfig{});
    for (SeqNo s = 0; s < 5; ++s) r.on_data(data_of(s), 0.0);
    r.on_data(data_of(6), 0.1);
    r.on_data(data_of(7), 0.1);
    auto fx = r.on_data(data_of(5), 0.2);
    REQUIRE(fx.transmit.size() == 1);
    CHECK(fx.transmit[0].ack == 8);
    CHECK(r.rcv_next() == 8);
    CHECK(r.ooo_buffer().empty());
  }
  SUBCASE("out-of-order data produces a duplicate ACK") {
    ReceiverEndpoint r(ReceiverConfig{});
    for (SeqNo s = 0; s < 5; ++s) r.on_data(data_of(s), 0.0);
    auto fx = r.on_data(data_of(7), 0.1);
    REQUIRE(fx.transmit.size() == 1);
    CHECK(fx.transmit[0].ack == 5);
    CHECK(r.ooo_buffer().count(7) == 1);
    CHECK(fx.transmit[0].sack_count == 0);
  }
  SUBCASE("old data produces a duplicate ACK") {
    ReceiverEndpoint r(ReceiverConfig{});
    for (SeqNo s = 0; s < 5; ++s) r.on_data(data_of(s), 0.0);
    auto fx = r.on_data(data_of(3), 0.1);
    REQUIRE(fx.transmit.size() == 1);
    CHECK(fx.transmit[0].ack == 5);
  }
  SUBCASE("SACK blocks: triggering block first, then highest") {
    ReceiverConfig cfg;
    cfg.sack_enabled = true;
    ReceiverEndpoint r(cfg);
    for (SeqNo s : {2, 3, 5, 9, 11}) r.on_data(data_of(s), 0.0);
    auto fx = r.on_data(data_of(6), 0.1);
    const Segment& a = fx.transmit.at(0);
    CHECK(a.ack == 0);
    REQUIRE(a.sack_count == 3);
    CHECK(a.sack[0] == SackBlock{5, 7});
    CHECK(a.sack[1] == SackBlock{11, 12});
    CHECK(a.sack[2] == SackBlock{9, 10});
  }
  SUBCASE("ACK values never decrease") {
    ReceiverEndpoint r(ReceiverConfig{});
    SeqNo last = 0;
    for (SeqNo s : {0, 2, 1, 1, 5, 3, 4, 0, 6}) {
      auto fx = r.on_data(data_of(s), 0.0);
      REQUIRE(fx.transmit.size() == 1);
      CHECK(fx.transmit[0].ack >= last);
      last = fx.transmit[0].ack;
    }
    CHECK(last == 7);
  }
  SUBCASE("delayed ACK holds the first in-order segment") {
    ReceiverConfig cfg;
    cfg.delayed_ack = true;
    ReceiverEndpoint r(cfg);
    auto fx = r.on_data(data_of(0), 0.0);
    CHECK(fx.transmit.empty());
    REQUIRE(fx.timer);
    CHECK(fx.timer->deadline == doctest::Approx(0.1));
    fx = r.on_data(data_of(1), 0.01);
    REQUIRE(fx.transmit.size() == 1);
    CHECK(fx.transmit[0].ack == 2);
    auto late = r.on_data(data_of(2), 0.02);
    REQUIRE(late.timer);
    auto fired = r.on_delayed_ack_timer(late.timer->id, 0.12);
    REQUIRE(fired.transmit.size() == 1);
    CHECK(fired.transmit[0].ack == 3);
  }
}
