#include <gtest/gtest.h>

#include "tim/protocol.hpp"

using namespace tim;
using K = MessageKind;

namespace {

struct Fixture {
  ProtocolConfig cfg;
  MessageFactory factory;
  RelayPolicy policy{HopLimit{4}};
  ProtocolContext ctx{cfg, factory, policy};
  EntityId v17{17, kRegular, 17};
  EntityId v3{3, kRegular, 3};
  EntityId police{20, kPolice, 0};
  EntityId r0{30, kRsu, 0}, r1{31, kRsu, 1}, r2{32, kRsu, 2};
  EntityId ta{40, kTa, 0};

  Fixture() {
    for (const auto& e : {v17, v3, police, r0, r1, r2, ta}) factory.register_entity(e);
  }

  EntityState rsu(EntityId id = {31, kRsu, 1}) {
    EntityState s(id);
    s.rsu.neighbours = {r0, r2};
    s.rsu.ta = ta;
    s.rsu.position = 600.0;
    s.rsu.route_length = 4000.0;
    for (const char* r : {"X", "Y", "Z", "W"}) s.rsu.roads.insert(RoadId(r));
    return s;
  }

  Message make(K kind, const EntityId& from, Timestamp t = 550.0, const char* road = "X") {
    return factory.make(kind, RoadId(road), from, t);
  }
};

std::vector<Timestamp> burst_times(const Actions& a, K kind) {
  std::vector<Timestamp> out;
  for (const auto& x : a) {
    if (const auto* b = std::get_if<Broadcast>(&x); b && b->msg.kind == kind) out.push_back(b->at);
  }
  return out;
}

}  // namespace

// --- rule table ------------------------------------------------------------

TEST(RuleTable, NineRowsAndZeroDefault) {
  const auto t = RsuRuleTable::accident_defaults();
  EXPECT_EQ(t.size(), 9u);
  EXPECT_EQ(t.lookup({K::Accident, SenderClass::Vehicle, true}), (RuleEntry{3, 3, K::AvoidRoad}));
  EXPECT_EQ(t.lookup({K::Accident, SenderClass::Rsu, true}), (RuleEntry{2, 2, K::AvoidRoad}));
  EXPECT_EQ(t.lookup({K::Accident, SenderClass::Vehicle, false}).same, 2u);
  EXPECT_EQ(t.lookup({K::AvoidRoad, SenderClass::Rsu, true}).same, 3u);
  EXPECT_EQ(t.lookup({K::AvoidRoad, SenderClass::Vehicle, true}).same, 2u);
  EXPECT_EQ(t.lookup({K::Flood, SenderClass::Ta, false}), RuleEntry{});
}

// --- RSU -------------------------------------------------------------------

TEST(HandleRsu, AccidentFromVehicleFirstReceipt) {
  Fixture f;
  auto s = f.rsu();
  const auto m = f.make(K::Accident, f.v17);
  const auto a = handle_rsu(s, m, kRegular, 550.0, f.ctx);
  EXPECT_EQ(count_broadcasts(a, K::Accident), 3u);
  EXPECT_EQ(count_broadcasts(a, K::AvoidRoad), 3u);
  EXPECT_EQ(count_wired(a, K::Accident), 2u);
  EXPECT_EQ(burst_times(a, K::Accident), (std::vector<Timestamp>{550.0, 552.0, 554.0}));
  EXPECT_EQ(s.ledger.status(RoadId("X")), IncidentStatus::Open);
}

TEST(HandleRsu, AvoidRoadBurstIsOneMessage) {
  Fixture f;
  auto s = f.rsu();
  const auto a = handle_rsu(s, f.make(K::Accident, f.v17), kRegular, 550.0, f.ctx);
  std::set<std::uint64_t> ids;
  for (const auto& x : a) {
    if (const auto* b = std::get_if<Broadcast>(&x); b && b->msg.kind == K::AvoidRoad) {
      ids.insert(b->msg.id.value);
      EXPECT_EQ(b->msg.origin, s.self);
    }
  }
  EXPECT_EQ(ids.size(), 1u);
}

TEST(HandleRsu, AccidentFromRsu) {
  Fixture f;
  auto s = f.rsu();
  const auto a = handle_rsu(s, f.make(K::Accident, f.v17), kRsu, 550.0, f.ctx);
  EXPECT_EQ(count_broadcasts(a, K::Accident), 2u);
  EXPECT_EQ(count_broadcasts(a, K::AvoidRoad), 2u);
  EXPECT_EQ(count_wired(a, K::Accident), 0u);
}

TEST(HandleRsu, AvoidRoadFromRsuAndVehicle) {
  Fixture f;
  auto s = f.rsu();
  s.ledger.open(RoadId("X"), K::Accident, MessageId{1}, 550.0);
  EXPECT_EQ(count_broadcasts(handle_rsu(s, f.make(K::AvoidRoad, f.r0), kRsu, 551.0, f.ctx), K::AvoidRoad), 3u);
  EXPECT_EQ(count_broadcasts(handle_rsu(s, f.make(K::AvoidRoad, f.r2), kRegular, 551.0, f.ctx), K::AvoidRoad),
            2u);
}

TEST(HandleRsu, StaleAccidentRebroadcastOnce) {
  Fixture f;
  auto s = f.rsu();
  const auto m = f.make(K::Accident, f.v17);
  handle_rsu(s, m, kRegular, 550.0, f.ctx);
  const auto a = handle_rsu(s, m, kRegular, 551.0, f.ctx);
  EXPECT_EQ(count_broadcasts(a, K::Accident), 2u);
  EXPECT_EQ(count_broadcasts(a, K::AvoidRoad), 0u);
  EXPECT_TRUE(handle_rsu(s, m, kRegular, 552.0, f.ctx).empty());
  EXPECT_TRUE(handle_rsu(s, m, kRsu, 552.0, f.ctx).empty());
}

TEST(HandleRsu, ResolvedIncidentIsSilent) {
  Fixture f;
  auto s = f.rsu();
  const auto m = f.make(K::Accident, f.v17);
  handle_rsu(s, m, kRegular, 550.0, f.ctx);
  s.ledger.resolve(RoadId("X"), 800.0);
  EXPECT_TRUE(handle_rsu(s, m, kRegular, 801.0, f.ctx).empty());
  EXPECT_TRUE(handle_rsu(s, f.make(K::Accident, f.v3, 801.0), kRegular, 801.0, f.ctx).empty());
}

TEST(HandleRsu, UnknownRoadDroppedWithWarning) {
  Fixture f;
  auto s = f.rsu();
  EXPECT_TRUE(handle_rsu(s, f.make(K::Accident, f.v17, 550.0, "Q"), kRegular, 550.0, f.ctx).empty());
  ASSERT_EQ(s.log.size(), 1u);
  EXPECT_NE(s.log[0].find("unknown road Q"), std::string::npos);
}

TEST(HandleRsu, AccidentDispatchesOfficials) {
  Fixture f;
  auto s = f.rsu();
  s.rsu.officials = {f.police};
  const auto a = handle_rsu(s, f.make(K::Accident, f.v17), kRegular, 550.0, f.ctx);
  EXPECT_EQ(std::count_if(a.begin(), a.end(),
                          [](const auto& x) { return std::holds_alternative<DispatchOfficial>(x); }),
            1);
}

TEST(HandleRsu, AccidentRelayedByPoliceIsOfficialClass) {
  Fixture f;
  auto s = f.rsu();
  s.rsu.officials = {f.police};
  const auto a = handle_rsu(s, f.make(K::Accident, f.v17), kPolice, 550.0, f.ctx);
  EXPECT_EQ(count_broadcasts(a, K::Accident), 3u);
  for (const auto& x : a) EXPECT_FALSE(std::holds_alternative<DispatchOfficial>(x));
}

TEST(HandleRsu, TaKindReportsGoToAuthority) {
  Fixture f;
  auto s = f.rsu();
  const auto a = handle_rsu(s, f.make(K::Flood, f.v17), kRegular, 550.0, f.ctx);
  EXPECT_EQ(count_broadcasts(a, K::Flood), 3u);
  std::size_t to_ta = 0;
  for (const auto& x : a) {
    if (const auto* w = std::get_if<WiredSend>(&x); w && w->to == f.ta) ++to_ta;
  }
  EXPECT_EQ(to_ta, 1u);
  EXPECT_EQ(count_wired(a, K::Flood), 3u);
}

TEST(HandleRsu, ReportFromNeighbourRsuIsNotForwarded) {
  Fixture f;
  auto s = f.rsu();
  const auto a = handle_rsu(s, f.make(K::Debris, f.v17), kRsu, 550.0, f.ctx);
  EXPECT_EQ(count_broadcasts(a, K::Debris), 3u);
  EXPECT_EQ(count_wired(a, K::Debris), 0u);
}

TEST(HandleRsu, AddressingIncidentGetsAckAndRestriction) {
  Fixture f;
  auto s = f.rsu();
  handle_rsu(s, f.make(K::Accident, f.v17), kRegular, 550.0, f.ctx);
  const auto addr = f.factory.make(K::AddressingIncident, RoadId("X"), f.police, 560.0);
  const auto a = handle_rsu(s, addr, kPolice, 560.0, f.ctx);
  EXPECT_EQ(count_broadcasts(a, K::Ack), 1u);
  EXPECT_EQ(count_broadcasts(a, K::RestrictedMovement), 1u);
  EXPECT_EQ(s.ledger.status(RoadId("X")), IncidentStatus::BeingAttended);
  const auto again = handle_rsu(s, addr, kRegular, 561.0, f.ctx);
  EXPECT_EQ(count_broadcasts(again, K::Ack), 0u);
  const auto tick = rsu_timer(s, {TimerKind::RestrictedMovement, RoadId("X")}, 570.0, f.ctx);
  EXPECT_EQ(count_broadcasts(tick, K::RestrictedMovement), 1u);
  s.ledger.resolve(RoadId("X"), 600.0);
  EXPECT_TRUE(rsu_timer(s, {TimerKind::RestrictedMovement, RoadId("X")}, 580.0, f.ctx).empty());
}

TEST(HandleRsu, ServiceQueryAnswered) {
  Fixture f;
  auto s = f.rsu();
  s.rsu.services = {{"petrol-pump", RoadId("X"), 900.0}};
  auto q = f.make(K::ServiceQuery, f.v17);
  q.detail = "petrol-pump";
  const auto a = handle_rsu(s, q, kRegular, 550.0, f.ctx);
  ASSERT_EQ(a.size(), 1u);
  const auto& reply = std::get<Broadcast>(a[0]).msg;
  EXPECT_EQ(reply.kind, K::ServiceReply);
  EXPECT_EQ(reply.detail, "X");
  EXPECT_EQ(reply.correlation, q.id);
}

// --- resolution -------------------------------------------------------------

TEST(RsuResolution, SortedRoadFromPolice) {
  Fixture f;
  auto s = f.rsu();
  s.ledger.open(RoadId("X"), K::Accident, MessageId{1}, 550.0);
  const auto m = f.factory.make(K::SortedRoad, RoadId("X"), f.police, 800.0);
  const auto a = handle_rsu_resolution(s, m, kPolice, 800.0, f.ctx);
  EXPECT_EQ(count_broadcasts(a, K::ClearedRoad), 3u);
  EXPECT_EQ(count_wired(a, K::ClearedRoad), 2u);
  EXPECT_EQ(count_broadcasts(a, K::SortedRoad), 0u);
  EXPECT_EQ(s.ledger.status(RoadId("X")), IncidentStatus::Resolved);
}

TEST(RsuResolution, ClearedRoadFromRsu) {
  Fixture f;
  auto s = f.rsu();
  s.ledger.open(RoadId("X"), K::Accident, MessageId{1}, 550.0);
  const auto a = handle_rsu_resolution(s, f.make(K::ClearedRoad, f.r0, 800.0), kRsu, 800.0, f.ctx);
  EXPECT_EQ(count_broadcasts(a, K::ClearedRoad), 3u);
  EXPECT_EQ(count_wired(a, K::ClearedRoad), 0u);
}

TEST(RsuResolution, NoOpenIncidentIgnored) {
  Fixture f;
  auto s = f.rsu();
  EXPECT_TRUE(handle_rsu_resolution(s, f.make(K::ClearedRoad, f.r0, 800.0), kRsu, 800.0, f.ctx).empty());
  EXPECT_EQ(s.log.size(), 1u);
}

TEST(RsuResolution, RepeatCountIsConfigurable) {
  Fixture f;
  f.cfg.cleared_repeats = 5;
  auto s = f.rsu();
  s.ledger.open(RoadId("X"), K::Accident, MessageId{1}, 550.0);
  EXPECT_EQ(count_broadcasts(handle_rsu_resolution(s, f.make(K::ClearedRoad, f.r0, 800.0), kRsu, 800.0, f.ctx),
                             K::ClearedRoad),
            5u);
}

// --- service lookup -----------------------------------------------------------

TEST(ServiceQuery, EmptyRegistryGivesEmptyReply) {
  Fixture f;
  auto s = f.rsu();
  auto q = f.make(K::ServiceQuery, f.v17);
  q.detail = "parking";
  const auto a = handle_service_query(s, q, {}, 550.0, f.ctx);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(std::get<Broadcast>(a[0]).msg.detail, "");
}

TEST(ServiceQuery, NearestByRouteDistance) {
  Fixture f;
  auto s = f.rsu();  // at s = 600 on a 4000 m loop
  const std::vector<ServiceEntry> reg{{"restaurant", RoadId("W"), 500.0},   // 3900 m ahead
                                      {"restaurant", RoadId("Y"), 1200.0},  // 600 m ahead
                                      {"petrol-pump", RoadId("X"), 700.0}};
  auto q = f.make(K::ServiceQuery, f.v17);
  q.detail = "restaurant";
  // brute force over the registry
  double best = 1e18;
  std::string want;
  for (const auto& e : reg) {
    if (e.category != "restaurant") continue;
    double d = std::fmod(e.position - 600.0 + 4000.0, 4000.0);
    if (d < best) {
      best = d;
      want = e.road.name;
    }
  }
  const auto a = handle_service_query(s, q, reg, 550.0, f.ctx);
  EXPECT_EQ(std::get<Broadcast>(a[0]).msg.detail, want);
  EXPECT_EQ(want, "Y");
}

// --- vehicles ---------------------------------------------------------------

TEST(HandleVehicle, RelaysUnseenWithinHopLimit) {
  Fixture f;
  EntityState s(f.v3);
  auto m = f.make(K::Accident, f.v17);
  m.hops = 2;
  const auto a = handle_vehicle(s, m, HopLimit{4}, 550.5);
  ASSERT_EQ(a.size(), 1u);
  const auto& b = std::get<Broadcast>(a[0]);
  EXPECT_EQ(b.source, ActionSource::Relay);
  EXPECT_EQ(b.msg.hops, 2u);
  EXPECT_TRUE(handle_vehicle(s, m, HopLimit{4}, 551.0).empty());
}

TEST(HandleVehicle, OfficialFreeRoadAlwaysRelayed) {
  Fixture f;
  EntityState s(f.v3);
  auto m = f.factory.make(K::FreeRoad, RoadId("X"), f.police, 250.0);
  m.hops = 7;
  EXPECT_EQ(handle_vehicle(s, m, Freshness{60}, 550.0).size(), 1u);
}

TEST(HandleVehicle, FreeRoadBehindPoliceNotRelayed) {
  Fixture f;
  EntityState s(f.v3);
  const auto m = f.factory.make(K::FreeRoad, RoadId("X"), f.police, 550.0);
  EXPECT_TRUE(handle_vehicle(s, m, HopLimit{4}, 550.0, {kPolice, false}).empty());
}

TEST(HandleVehicle, WrongRoleThrows) {
  Fixture f;
  EntityState s(f.r1);
  EXPECT_THROW(handle_vehicle(s, f.make(K::Accident, f.v17), HopLimit{4}, 550.0), DomainError);
}

// --- officials --------------------------------------------------------------

TEST(HandleOfficial, FirstAccidentStartsExchange) {
  Fixture f;
  EntityState s(f.police);
  const auto a = handle_official(s, ReceivedMessage{f.make(K::Accident, f.v17), kRegular}, 550.0, f.ctx);
  EXPECT_EQ(count_broadcasts(a, K::AddressingIncident), 1u);
  EXPECT_EQ(count_broadcasts(a, K::FreeRoad), 1u);
  EXPECT_EQ(count_broadcasts(a, K::Attending), 1u);
  EXPECT_EQ(count_broadcasts(a, K::Accident), 1u);  // relayed as well
  EXPECT_EQ(std::count_if(a.begin(), a.end(), [](const auto& x) { return std::holds_alternative<ArmTimer>(x); }),
            1);
  const auto again = handle_official(s, ReceivedMessage{f.make(K::Accident, f.v3), kRegular}, 551.0, f.ctx);
  EXPECT_EQ(count_broadcasts(again, K::AddressingIncident), 0u);
}

TEST(HandleOfficial, PeriodicUntilArrival) {
  Fixture f;
  EntityState s(f.police);
  handle_official(s, ReceivedMessage{f.make(K::Accident, f.v17), kRegular}, 550.0, f.ctx);
  const TimerToken tok{TimerKind::OfficialPeriodic, RoadId("X")};
  const auto tick = handle_official(s, TimerFired{tok}, 555.0, f.ctx);
  EXPECT_EQ(count_broadcasts(tick, K::FreeRoad), 1u);
  EXPECT_EQ(count_broadcasts(tick, K::Attending), 1u);
  const auto arrive = handle_official(s, ArrivalAtIncident{RoadId("X")}, 557.0, f.ctx);
  EXPECT_EQ(count_broadcasts(arrive, K::FreeRoad), 1u);
  EXPECT_TRUE(handle_official(s, TimerFired{tok}, 560.0, f.ctx).empty());
}

TEST(HandleOfficial, ResolutionWithoutAckIsClearedRoad) {
  Fixture f;
  EntityState s(f.police);
  handle_official(s, ReceivedMessage{f.make(K::Accident, f.v17), kRegular}, 550.0, f.ctx);
  const auto a = handle_official(s, IncidentResolved{RoadId("X")}, 700.0, f.ctx);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(std::get<Broadcast>(a[0]).msg.kind, K::ClearedRoad);
  EXPECT_TRUE(handle_official(s, IncidentResolved{RoadId("X")}, 701.0, f.ctx).empty());
}

TEST(HandleOfficial, AckedAccidentIsSorted) {
  Fixture f;
  EntityState s(f.police);
  const auto a = handle_official(s, ReceivedMessage{f.make(K::Accident, f.v17), kRegular}, 550.0, f.ctx);
  MessageId addr;
  for (const auto& x : a) {
    if (const auto* b = std::get_if<Broadcast>(&x); b && b->msg.kind == K::AddressingIncident) addr = b->msg.id;
  }
  auto ack = f.factory.make(K::Ack, RoadId("X"), f.r1, 550.01, addr);
  handle_official(s, ReceivedMessage{ack, kRsu}, 550.02, f.ctx);
  EXPECT_TRUE(s.duty.acked);
  const auto r = handle_official(s, IncidentResolved{RoadId("X")}, 700.0, f.ctx);
  EXPECT_EQ(count_broadcasts(r, K::SortedRoad), 1u);
}

TEST(HandleOfficial, ObstacleAndStrandedResolutions) {
  Fixture f;
  EntityState s(f.police);
  const auto a = handle_official(s, ReceivedMessage{f.make(K::Obstacle, f.v17), kRegular}, 550.0, f.ctx);
  EXPECT_EQ(count_broadcasts(a, K::Attending), 1u);
  EXPECT_EQ(count_broadcasts(a, K::AddressingIncident), 0u);
  EXPECT_EQ(count_broadcasts(handle_official(s, IncidentResolved{RoadId("X")}, 700.0, f.ctx), K::ObstacleCleared),
            1u);
  EntityState s2(f.police);
  handle_official(s2, ReceivedMessage{f.make(K::StrandedVehicle, f.v17), kRegular}, 550.0, f.ctx);
  EXPECT_EQ(count_broadcasts(handle_official(s2, IncidentResolved{RoadId("X")}, 700.0, f.ctx), K::ClearedRoad), 1u);
}

TEST(HandleOfficial, ResolutionWithoutIncidentIsOrderError) {
  Fixture f;
  EntityState s(f.police);
  EXPECT_THROW(handle_official(s, IncidentResolved{RoadId("X")}, 700.0, f.ctx), ProtocolOrderError);
}

// --- authority --------------------------------------------------------------

TEST(HandleTa, ResolvesAfterDelay) {
  Fixture f;
  EntityState s(f.ta);
  const auto a = handle_ta(s, f.make(K::Flood, f.v17), f.r1, 551.0, f.ctx);
  ASSERT_EQ(a.size(), 1u);
  const auto& w = std::get<WiredSend>(a[0]);
  EXPECT_EQ(w.msg.kind, K::FloodResolved);
  EXPECT_EQ(w.to, f.r1);
  EXPECT_DOUBLE_EQ(w.at, 611.0);
  const auto b = handle_ta(s, f.make(K::SignalMalfunction, f.v17), f.r1, 551.0, f.ctx);
  EXPECT_EQ(std::get<WiredSend>(b[0]).msg.kind, K::SignalResolved);
}

TEST(HandleTa, DropsOtherKindsAndDuplicates) {
  Fixture f;
  EntityState s(f.ta);
  EXPECT_TRUE(handle_ta(s, f.make(K::Accident, f.v17), f.r1, 551.0, f.ctx).empty());
  const auto m = f.make(K::Debris, f.v17);
  EXPECT_EQ(handle_ta(s, m, f.r1, 551.0, f.ctx).size(), 1u);
  EXPECT_TRUE(handle_ta(s, m, f.r1, 552.0, f.ctx).empty());
  EXPECT_EQ(handle_ta(s, m, f.r2, 552.0, f.ctx).size(), 1u);
}

// --- detectors ----------------------------------------------------------------

namespace {

SpeedHistory held(double speed, double seconds, double before = 13.0) {
  SpeedHistory h;
  double t = 0.0;
  for (; t < 20.0; t += 0.5) h.push(t, before);
  for (double end = t + seconds; t <= end + 1e-9; t += 0.5) h.push(t, speed);
  return h;
}

}  // namespace

TEST(DetectJam, ThresholdsAndQueue) {
  DetectorState ep;
  EXPECT_EQ(detect_jam(held(0.05, 31.0), true, 0.0, ep), K::TrafficJam);
  DetectorState ep2;
  EXPECT_FALSE(detect_jam(held(0.05, 31.0), false, 0.0, ep2));
  DetectorState ep3;
  EXPECT_FALSE(detect_jam(held(0.0, 30.0), true, 0.0, ep3));
}

TEST(DetectJam, OncePerEpisode) {
  SpeedHistory h;
  DetectorState ep;
  int fired = 0;
  double t = 0.0;
  auto run = [&](double v, double secs) {
    for (double end = t + secs; t < end; t += 0.5) {
      h.push(t, v);
      if (detect_jam(h, true, t, ep)) ++fired;
    }
  };
  run(0.0, 100.0);
  EXPECT_EQ(fired, 1);
  run(5.0, 5.0);
  run(0.0, 40.0);
  EXPECT_EQ(fired, 2);
}

TEST(DetectCongestion, Thresholds) {
  DetectorState a, b, c;
  EXPECT_EQ(detect_congestion(held(5.0, 70.0), 0.0, a), K::Congestion);
  EXPECT_FALSE(detect_congestion(held(5.0, 59.0), 0.0, b));
  EXPECT_FALSE(detect_congestion(held(0.5, 70.0), 0.0, c));
}

TEST(DetectCongestion, FreeFlowAtTargetSpeedIsNotCongestion) {
  DetectorState ep;
  EXPECT_FALSE(detect_congestion(held(13.0, 70.0), 0.0, ep));
}

TEST(DetectCongestion, OncePerEpisodeAcrossTheWindow) {
  SpeedHistory h;
  DetectorState ep;
  int fired = 0;
  for (double t = 0.0; t < 200.0; t += 0.5) {
    h.push(t, 5.0);
    if (detect_congestion(h, t, ep)) ++fired;
  }
  EXPECT_EQ(fired, 1);
}

TEST(SpeedHistory, StrictlyIncreasingTimes) {
  SpeedHistory h;
  h.push(1.0, 3.0);
  EXPECT_THROW(h.push(1.0, 3.0), DomainError);
  EXPECT_THROW(h.push(0.5, 3.0), DomainError);
  EXPECT_THROW(SpeedHistory(60.0), DomainError);
}

TEST(SpeedHistory, KeepsOnlyTheWindow) {
  SpeedHistory h(120.0);
  for (int k = 0; k <= 1000; ++k) h.push(0.5 * k, 1.0);
  EXPECT_DOUBLE_EQ(h.span(), 120.0);
}

TEST(VehicleTick, ReportsThenClears) {
  Fixture f;
  EntityState s(f.v3);
  const RoadId x("X");
  int jams = 0, clears = 0;
  double t = 0.0;
  auto drive = [&](double v, double secs, bool queue) {
    for (double end = t + secs; t < end; t += 0.5) {
      s.history.push(t, v);
      for (const auto& a : vehicle_tick(s, f.ctx, {v, queue, x}, t)) {
        const auto& b = std::get<Broadcast>(a);
        if (b.msg.kind == K::TrafficJam) ++jams;
        if (b.msg.kind == K::ClearedRoad) ++clears;
      }
    }
  };
  drive(0.0, 40.0, true);
  EXPECT_EQ(jams, 1);
  drive(13.0, 9.0, false);
  EXPECT_EQ(clears, 0);
  drive(13.0, 5.0, false);
  EXPECT_EQ(clears, 1);
  drive(13.0, 30.0, false);
  EXPECT_EQ(clears, 1);
}

TEST(VehicleTick, SuppressedWhenAlreadyHeard) {
  Fixture f;
  EntityState s(f.v3);
  handle_vehicle(s, f.make(K::TrafficJam, f.v17, 0.0), HopLimit{4}, 0.0);
  int jams = 0;
  for (double t = 0.0; t < 40.0; t += 0.5) {
    s.history.push(t, 0.0);
    jams += static_cast<int>(count_broadcasts(vehicle_tick(s, f.ctx, {0.0, true, RoadId("X")}, t), K::TrafficJam));
  }
  EXPECT_EQ(jams, 0);
}

// --- ledger -----------------------------------------------------------------

TEST(IncidentLedger, ForwardOnly) {
  IncidentLedger l;
  const RoadId x("X");
  EXPECT_FALSE(l.attend(x, 1.0));
  EXPECT_TRUE(l.open(x, K::Accident, MessageId{1}, 1.0));
  EXPECT_FALSE(l.open(x, K::Accident, MessageId{2}, 2.0));
  EXPECT_TRUE(l.attend(x, 3.0));
  EXPECT_FALSE(l.attend(x, 4.0));
  EXPECT_TRUE(l.resolve(x, 5.0));
  EXPECT_FALSE(l.resolve(x, 6.0));
  EXPECT_FALSE(l.attend(x, 7.0));
  EXPECT_EQ(l.status(x), IncidentStatus::Resolved);
  const RoadId y("Y");
  l.open(y, K::Flood, MessageId{3}, 1.0);
  EXPECT_TRUE(l.resolve(y, 2.0));
}
