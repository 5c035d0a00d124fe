#include <gtest/gtest.h>

#include <filesystem>

#include "hsc/sim/scenario.hpp"

using namespace hsc;
using namespace hsc::sim;

namespace {

constexpr const char* kSample = R"(# two links
name = sample
seed = 42
interface cdma kind=cellular bandwidth=144000 cost=5 latency=0.5 utilization=0.06
interface wlan kind=wlan bandwidth=11000000 cost=2 latency=0.005 available=0

transfer start=0 resource=draft.ppt size=500000
transfer start=1.5 resource=other size=10   # trailing comment

event 30 enable wlan
event 40 subnet_handoff wlan cdma
stack.poll_interval = 5
stack.recovery = session
policy.to_wlan = 3.5
)";

std::string with(const std::string& extra) {
  return std::string("interface a kind=wlan bandwidth=1000 cost=1\n") + extra;
}

}  // namespace

TEST(ScenarioParse, Sample) {
  const auto sc = parse_scenario(kSample);
  EXPECT_EQ(sc.name, "sample");
  EXPECT_EQ(sc.seed, 42u);
  ASSERT_EQ(sc.interfaces.size(), 2u);
  const auto* cdma = sc.find_interface("cdma");
  ASSERT_NE(cdma, nullptr);
  EXPECT_EQ(cdma->desc.kind, InterfaceKind::cellular);
  EXPECT_EQ(cdma->desc.bandwidth_capacity, 144000);
  EXPECT_EQ(cdma->desc.cost_metric, 5);
  EXPECT_EQ(cdma->desc.latency, 0.5);
  EXPECT_EQ(cdma->utilization, 0.06);
  EXPECT_TRUE(cdma->desc.available);
  EXPECT_FALSE(sc.find_interface("wlan")->desc.available);
  EXPECT_EQ(sc.find_interface("nope"), nullptr);

  ASSERT_EQ(sc.transfers.size(), 2u);
  EXPECT_EQ(sc.transfers[1].start, 1.5);
  EXPECT_EQ(sc.transfers[1].resource_id, "other");
  EXPECT_EQ(sc.transfers[1].size, 10u);

  ASSERT_EQ(sc.timeline.size(), 2u);
  EXPECT_EQ(sc.timeline[0].time, 30);
  EXPECT_EQ(sc.timeline[0].action, (Action{ActionKind::enable, "wlan", ""}));
  EXPECT_EQ(sc.timeline[1].action, (Action{ActionKind::subnet_handoff, "wlan", "cdma"}));
  EXPECT_NO_THROW(validate(sc));
}

TEST(ScenarioParse, OverridesApply) {
  const auto cfg = apply_overrides(parse_scenario(kSample));
  EXPECT_EQ(cfg.poll_interval, 5);
  EXPECT_EQ(cfg.recovery, RecoveryMode::session);
  EXPECT_EQ(cfg.handoff.to_wlan, 3.5);
  // Untouched knobs keep their defaults.
  EXPECT_EQ(cfg.drain_window, StackConfig{}.drain_window);
  EXPECT_TRUE(cfg.policy_enabled);
}

TEST(ScenarioParse, OverridesOnTopOfBase) {
  StackConfig base;
  base.workers = 9;
  base.policy_enabled = false;
  auto sc = parse_scenario(with("stack.policy = on\n"));
  const auto cfg = apply_overrides(sc, base);
  EXPECT_TRUE(cfg.policy_enabled);
  EXPECT_EQ(cfg.workers, 9u);
}

TEST(ScenarioParse, ActionNamesRoundTrip) {
  for (const auto k : {ActionKind::enable, ActionKind::disable, ActionKind::ap_power_off,
                       ActionKind::ap_power_on, ActionKind::nic_off, ActionKind::nic_on,
                       ActionKind::subnet_handoff})
    EXPECT_EQ(parse_action_kind(to_string(k)), k);
  EXPECT_FALSE(parse_action_kind("reboot"));
}

TEST(ScenarioParse, SyntaxErrorsCarryLineNumbers) {
  const std::vector<std::pair<std::string, std::string>> cases{
      {"interface\n", "line 1"},
      {"\n\ninterface a kind=satellite bandwidth=1 cost=1\n", "line 3"},
      {with("transfer start=0 resource=x size=abc\n"), "line 2"},
      {with("event 1 explode a\n"), "line 2"},
      {with("event 1 subnet_handoff a\n"), "line 2"},
      {with("bogus line\n"), "line 2"},
      {with("stack.colour = red\n"), "line 2"},
      {with("interface b kind=wlan bandwidth=1 cost=1 speed=3\n"), "line 2"},
  };
  for (const auto& [text, where] : cases) {
    try {
      parse_scenario(text);
      ADD_FAILURE() << "accepted: " << text;
    } catch (const ScenarioError& e) {
      EXPECT_NE(std::string(e.what()).find(where), std::string::npos) << e.what();
    }
  }
}

TEST(ScenarioValidate, Rejections) {
  const std::vector<std::string> bad{
      with("event 1 enable ghost\n"),
      with("event 5 disable a\nevent 1 enable a\n"),
      with("interface a kind=wlan bandwidth=1 cost=1\n"),
      with("interface b kind=wlan bandwidth=0 cost=1\n"),
      with("interface b kind=wlan bandwidth=10 cost=0\n"),
      with("interface b kind=wlan bandwidth=10 cost=1 utilization=1.5\n"),
      with("transfer start=0 resource=x size=5\ntransfer start=1 resource=x size=6\n"),
      with("event 1 subnet_handoff a a\n"),
      with("stack.workers = 0\n"),
      with("stack.recovery = sometimes\n"),
      with("stack.tick = 0\n"),
      with("policy.ewma_weight = 2\n"),
  };
  for (const auto& text : bad) {
    EXPECT_THROW(validate(parse_scenario(text)), ScenarioError) << text;
  }
}

TEST(ScenarioLoad, MissingFile) {
  EXPECT_THROW(load_scenario("/nonexistent/x.scn"), ScenarioError);
}

TEST(ScenarioLoad, CannedScenariosValidate) {
  const std::filesystem::path dir = HSC_SCENARIO_DIR;
  int n = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".scn") continue;
    const auto sc = load_scenario(entry.path());
    EXPECT_NO_THROW(validate(sc)) << entry.path();
    EXPECT_EQ(sc.name, entry.path().stem().string());
    EXPECT_FALSE(sc.transfers.empty());
    ++n;
  }
  EXPECT_GE(n, 5);
}
