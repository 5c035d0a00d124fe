#include <gtest/gtest.h>

#include <algorithm>

#include "hsc/sim/origin_stub.hpp"
#include "hsc/sim/report.hpp"
#include "sim_fixtures.hpp"

using namespace fixtures;

namespace {

bool trace_has(const RunResult& r, const std::string& needle) {
  return std::any_of(r.trace.begin(), r.trace.end(),
                     [&](const std::string& l) { return l.find(needle) != std::string::npos; });
}

}  // namespace

TEST(Harness, ThroughputMatchesLinkRate) {
  for (const double bps : {64000.0, 144000.0, 1e6}) {
    auto sc = single({link("l", InterfaceKind::cellular, bps, 5, 0.2)}, 500000);
    const auto r = run_scenario(sc, {});
    ASSERT_TRUE(r.all_completed());
    const double ideal = 500000.0 * 8 / bps;
    const auto& m = r.transfers[0].metrics;
    EXPECT_GE(m.overall_time_s, ideal) << bps;
    EXPECT_LE(m.overall_time_s, ideal * 1.1 + 0.2) << bps;
    EXPECT_TRUE(r.transfers[0].content_matches);
  }
}

TEST(Harness, CellularOnlyDraft) {
  const auto r = run_scenario(single({cdma()}, 500000, "draft.ppt"), {});
  EXPECT_NEAR(r.transfers[0].metrics.overall_time_s, 500000.0 * 8 / 144000, 0.1 * 27.8);
  EXPECT_EQ(r.transfers[0].metrics.per_interface_bytes.size(), 1u);
}

TEST(Harness, DeterministicForEqualInputs) {
  auto fc = fuzz_case(77);
  const auto a = run_scenario(fc.scenario, fc.config, fc.faults);
  const auto b = run_scenario(fc.scenario, fc.config, fc.faults);
  EXPECT_EQ(a.metrics(), b.metrics());
  EXPECT_EQ(a.trace, b.trace);
  EXPECT_EQ(to_csv(a.metrics()), to_csv(b.metrics()));
}

TEST(Harness, WireBytesCoverEveryDelivery) {
  for (std::uint64_t seed = 1; seed <= 15; ++seed) {
    auto fc = fuzz_case(seed);
    const auto r = run_scenario(fc.scenario, fc.config, fc.faults);
    for (const auto& t : r.transfers) {
      ASSERT_TRUE(t.metrics.completed) << seed;
      ASSERT_TRUE(t.content_matches) << seed;
      ASSERT_EQ(t.bytes_delivered, t.spec.size);
      ByteCount wire = 0;
      for (const auto& [id, n] : t.metrics.per_interface_bytes) wire += n;
      ASSERT_GE(wire, t.spec.size) << seed;
    }
  }
}

TEST(Harness, PacketRecoveryOffsetsAreDeliveredCounts) {
  auto sc = single({wlan()}, 6'000'000);
  Faults f;
  f.on_progress.push_back({0, 1'000'000, act(ActionKind::ap_power_off, "wlan"),
                           act(ActionKind::ap_power_on, "wlan"), 1.0});
  const auto r = run_scenario(sc, {}, f);
  const auto& t = r.transfers[0];
  ASSERT_TRUE(t.metrics.completed);
  ASSERT_EQ(t.request_offsets.size(), 2u);
  EXPECT_EQ(t.request_offsets[0], 0u);
  EXPECT_GE(t.request_offsets[1], 1'000'000u);
  EXPECT_LT(t.request_offsets[1], 6'000'000u);
  EXPECT_EQ(t.failures, 1u);
  EXPECT_TRUE(trace_has(r, "ended code 10054"));
  EXPECT_TRUE(t.continuity);
}

TEST(Harness, SessionRecoveryRestartsFromZero) {
  auto sc = single({wlan()}, 2'000'000);
  StackConfig cfg;
  cfg.recovery = RecoveryMode::session;
  Faults f;
  f.on_progress.push_back({0, 1'000'000, act(ActionKind::ap_power_off, "wlan"),
                           act(ActionKind::ap_power_on, "wlan"), 1.0});
  const auto r = run_scenario(sc, cfg, f);
  const auto& t = r.transfers[0];
  ASSERT_TRUE(t.content_matches);
  ASSERT_EQ(t.request_offsets.size(), 2u);
  EXPECT_EQ(t.request_offsets[1], 0u);
  EXPECT_GE(r.origin_bytes_served.at("r.bin"), 3'000'000u);
}

TEST(Harness, NicOffForTwentyFiveSeconds) {
  auto sc = single({wlan()}, 6'000'000);
  sc.timeline = {{2, act(ActionKind::nic_off, "wlan")}, {27, act(ActionKind::nic_on, "wlan")}};
  const auto r = run_scenario(sc, {});
  const auto& m = r.transfers[0].metrics;
  ASSERT_TRUE(m.completed);
  // The NIC is switched back on after 25 s and needs 2 s to come up.
  EXPECT_NEAR(m.disconnect_time_s, 27.0, 0.05);
  EXPECT_GE(m.handoff_delay_s + m.detection_delay_s, 27.0 - 0.05);
  EXPECT_TRUE(trace_has(r, "ended code 10050"));
}

TEST(Harness, AccessPointPowerCycle) {
  auto sc = load_scenario(std::string(HSC_SCENARIO_DIR) + "/ap_power_cycle.scn");
  const auto r = run_scenario(sc, apply_overrides(sc));
  const auto& t = r.transfers[0];
  ASSERT_TRUE(t.metrics.completed);
  EXPECT_TRUE(t.content_matches);
  EXPECT_NEAR(t.metrics.disconnect_time_s, 86.0, 0.05);
  EXPECT_TRUE(trace_has(r, "down (conn_reset)"));
}

TEST(Harness, CrossSubnetHandoffStall) {
  auto sc = load_scenario(std::string(HSC_SCENARIO_DIR) + "/subnet_handoff.scn");
  const auto r = run_scenario(sc, apply_overrides(sc));
  const auto& t = r.transfers[0];
  ASSERT_TRUE(t.content_matches);
  EXPECT_NEAR(t.metrics.disconnect_time_s, 17.4, 0.05);
  ASSERT_EQ(t.stalls.size(), 1u);
  EXPECT_GE(t.stalls[0], 17.4);
  EXPECT_TRUE(trace_has(r, "addr_not_available"));
  EXPECT_GT(t.metrics.per_interface_bytes.at("wlan_b"), 0u);
}

TEST(Harness, NoPreemptionMeansNoUselessTraffic) {
  const auto r = run_scenario(single({wlan()}, 1'000'000), {});
  EXPECT_EQ(r.transfers[0].metrics.useless_traffic_bytes, 0u);
  EXPECT_EQ(measure_useless_traffic(r), 0u);
}

TEST(Harness, UselessTrafficBoundedByDrainWindow) {
  auto sc = single({cdma(), wlan("wlan", false)}, 5'000'000);
  sc.timeline = {{30, act(ActionKind::enable, "wlan")}};
  for (const double drain : {0.0, 2.0}) {
    StackConfig cfg;
    cfg.drain_window = drain;
    const auto r = run_scenario(sc, cfg);
    const auto& t = r.transfers[0];
    ASSERT_TRUE(t.content_matches);
    ASSERT_EQ(t.preemptions, 1u);
    const auto u = t.metrics.useless_traffic_bytes;
    EXPECT_EQ(u, measure_useless_traffic(r));
    if (drain == 0.0) EXPECT_EQ(u, 0u);
    else {
      EXPECT_GT(u, 0u);
      EXPECT_LE(u, 36'000u);  // 2 s at 144 kb/s
    }
  }
}

TEST(Harness, PolicyOffStaysOnCellular) {
  auto sc = load_scenario(std::string(HSC_SCENARIO_DIR) + "/hysteresis.scn");
  const auto r = run_scenario(sc, apply_overrides(sc));
  ASSERT_TRUE(r.all_completed());
  EXPECT_EQ(r.transfers[0].metrics.per_interface_bytes.at("wlan"), 0u);
  EXPECT_EQ(r.transfers[0].preemptions, 0u);
}

TEST(Harness, PolicyOnMovesToWlan) {
  auto sc = load_scenario(std::string(HSC_SCENARIO_DIR) + "/preempt_cdma_wlan.scn");
  const auto r = run_scenario(sc, apply_overrides(sc));
  const auto& t = r.transfers[0];
  ASSERT_TRUE(t.content_matches);
  EXPECT_EQ(t.preemptions, 1u);
  EXPECT_GT(t.metrics.per_interface_bytes.at("wlan"), 0u);
  ASSERT_TRUE(t.last_decision);
  EXPECT_TRUE(t.last_decision->preempt);
}

TEST(Harness, TransferWaitsForFirstInterface) {
  auto sc = single({wlan("wlan", false)}, 100000);
  sc.timeline = {{5, act(ActionKind::enable, "wlan")}};
  const auto r = run_scenario(sc, {});
  ASSERT_TRUE(r.all_completed());
  EXPECT_TRUE(r.transfers[0].content_matches);
  // Added to the OS table 2 s after enabling, seen at the next 10 s poll.
  EXPECT_GE(r.transfers[0].metrics.overall_time_s, 7.0);
}

TEST(Harness, OriginTruncationResumes) {
  auto sc = single({wlan()}, 1'000'000);
  Faults f;
  f.origin = {{"r.bin", 300000}, {"r.bin", 10}};
  const auto r = run_scenario(sc, {}, f);
  const auto& t = r.transfers[0];
  ASSERT_TRUE(t.content_matches);
  EXPECT_EQ(t.failures, 2u);
  ASSERT_EQ(t.request_offsets.size(), 3u);
  EXPECT_EQ(t.request_offsets[1], 300000u);
  EXPECT_EQ(t.request_offsets[2], 300010u);
}

TEST(Harness, NoRangeSupportSkipsAtGateway) {
  auto sc = single({wlan()}, 1'000'000);
  StackConfig cfg;
  cfg.origin_range_support = false;
  Faults f;
  f.origin = {{"r.bin", 400000}};
  const auto r = run_scenario(sc, cfg, f);
  ASSERT_TRUE(r.transfers[0].content_matches);
  EXPECT_EQ(r.gateway_bytes_skipped, 400000u);
}

TEST(Harness, RedundantActionWarns) {
  auto sc = single({wlan()}, 3'000'000);
  sc.timeline = {{0.5, act(ActionKind::enable, "wlan")}};
  const auto r = run_scenario(sc, {});
  EXPECT_EQ(r.warnings, 1u);
  EXPECT_TRUE(r.all_completed());
}

TEST(Harness, UnknownInterfaceRejected) {
  auto sc = single({wlan()}, 100000);
  sc.timeline = {{1, act(ActionKind::disable, "ghost")}};
  EXPECT_THROW(run_scenario(sc, {}), ScenarioError);
  Faults f;
  f.on_progress.push_back({3, 10, act(ActionKind::disable, "wlan"), std::nullopt, 1.0});
  EXPECT_THROW(run_scenario(single({wlan()}, 100), {}, f), ScenarioError);
}

TEST(Harness, RetryBudgetExhaustion) {
  auto sc = single({wlan()}, 1'000'000);
  StackConfig cfg;
  cfg.retry_budget = 0;
  Faults f;
  f.on_progress.push_back({0, 100000, act(ActionKind::ap_power_off, "wlan"),
                           act(ActionKind::ap_power_on, "wlan"), 1.0});
  const auto r = run_scenario(sc, cfg, f);
  EXPECT_FALSE(r.all_completed());
  EXPECT_FALSE(r.transfers[0].continuity);
  EXPECT_TRUE(r.transfers[0].local_leg_error);
}

TEST(Harness, FifoOrderWithOneWorker) {
  Scenario sc = single({wlan()}, 500000, "a");
  sc.transfers.push_back({0, "b", 500000});
  sc.transfers.push_back({0, "c", 500000});
  StackConfig cfg;
  cfg.workers = 1;
  const auto r = run_scenario(sc, cfg);
  ASSERT_TRUE(r.all_completed());
  EXPECT_LT(r.transfers[0].metrics.overall_time_s, r.transfers[1].metrics.overall_time_s);
  EXPECT_LT(r.transfers[1].metrics.overall_time_s, r.transfers[2].metrics.overall_time_s);
}

TEST(Harness, ConcurrentTransfersShareTheLink) {
  Scenario sc = single({link("l", InterfaceKind::wlan, 1e6, 2, 0.01)}, 500000, "a");
  sc.transfers.push_back({0, "b", 500000});
  const auto r = run_scenario(sc, {});
  ASSERT_TRUE(r.all_completed());
  // Two 4 Mb transfers over 1 Mb/s: both finish near 8 s.
  for (const auto& t : r.transfers) EXPECT_NEAR(t.metrics.overall_time_s, 8.0, 0.5);
}

TEST(Report, CsvAndJson) {
  TransferMetrics m;
  m.overall_time_s = 1.5;
  m.per_interface_bytes = {{"cdma", 10}, {"wlan", 20}};
  m.completed = true;
  const auto csv = to_csv({m});
  EXPECT_EQ(csv, std::string(kCsvHeader) + "\n1.500000,0.000000,0.000000,0.000000,0,cdma:10;wlan:20,true\n");
  const auto json = to_json({m});
  EXPECT_NE(json.find("\"overall_time_s\": 1.5"), std::string::npos);
  EXPECT_NE(json.find("\"wlan\": 20"), std::string::npos);
}
