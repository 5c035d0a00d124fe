#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <random>
#include <set>

#include "hsc/sensing.hpp"

using namespace hsc;

namespace {

// The bound exactly as stated, without the series branch.
double bound_formula(double T, double l) {
  const double x = T * l;
  return (x * x - 2 * x + 2 - 2 * std::exp(-x)) / (2 * T * l * l);
}

// Exact long-run mean of time-since-last-change, zero before the first
// change of each cycle.
double exact_mean_delay(double T, double l) {
  return (T / l - 2 / (l * l) + std::exp(-l * T) * (2 + l * T) / (l * l)) / T;
}

InterfaceDescriptor iface(const std::string& id) {
  InterfaceDescriptor d;
  d.id = id;
  d.bandwidth_capacity = 1e6;
  return d;
}

}  // namespace

TEST(ClassifyFailure, RecoverableSet) {
  for (const auto c : {FailureCause::host_down, FailureCause::conn_aborted, FailureCause::conn_reset,
                       FailureCause::net_down, FailureCause::net_unreachable, FailureCause::net_reset,
                       FailureCause::try_again, FailureCause::no_recovery,
                       FailureCause::addr_not_available})
    EXPECT_EQ(classify_failure(c), Disposition::recoverable_handoff) << to_string(c);
}

TEST(ClassifyFailure, Examples) {
  EXPECT_EQ(classify_failure(FailureCause::conn_reset), Disposition::recoverable_handoff);
  EXPECT_EQ(classify_failure(FailureCause::preemptive_marker), Disposition::preemptive);
  EXPECT_EQ(classify_failure(9999), Disposition::ignore);
  EXPECT_EQ(classify_failure(0), Disposition::ignore);
  EXPECT_EQ(classify_failure(-1), Disposition::ignore);
}

TEST(InterfaceDescriptor, Validation) {
  auto d = iface("a");
  EXPECT_NO_THROW(validate(d));
  d.bandwidth_capacity = 0;
  EXPECT_THROW(validate(d), std::invalid_argument);
  d = iface("a");
  d.cost_metric = 0;
  EXPECT_THROW(validate(d), std::invalid_argument);
}

TEST(PollOnce, Examples) {
  const auto cdma = iface("cdma");
  const auto wlan = iface("wlan");
  const auto ev = poll_once({cdma, wlan}, {cdma}, 3.0);
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0], (NetworkEvent{NetworkEventKind::connected, FailureCause::none, "wlan", 3.0}));

  EXPECT_TRUE(poll_once({cdma, wlan}, {wlan, cdma}).empty());

  const auto gone = poll_once({}, {wlan});
  ASSERT_EQ(gone.size(), 1u);
  EXPECT_EQ(gone[0].kind, NetworkEventKind::disconnected);
  EXPECT_EQ(gone[0].interface_id, "wlan");
}

TEST(PollOnce, UnavailableDescriptorsAreAbsent) {
  auto wlan = iface("wlan");
  auto down = wlan;
  down.available = false;
  const auto ev = poll_once({down}, {wlan});
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0].kind, NetworkEventKind::disconnected);
}

TEST(PollOnceProperty, ReplayEmitsSymmetricDifference) {
  std::mt19937_64 rng(99);
  const std::vector<std::string> universe{"a", "b", "c", "d", "e", "f"};
  std::set<std::string> state;
  std::vector<InterfaceDescriptor> prev;
  for (int step = 0; step < 5000; ++step) {
    auto next = state;
    const int flips = static_cast<int>(rng() % 4);
    for (int k = 0; k < flips; ++k) {
      const auto& id = universe[rng() % universe.size()];
      if (!next.erase(id)) next.insert(id);
    }
    std::vector<InterfaceDescriptor> cur;
    for (const auto& id : next) cur.push_back(iface(id));
    std::shuffle(cur.begin(), cur.end(), rng);

    std::set<std::string> connected, disconnected;
    for (const auto& e : poll_once(cur, prev)) {
      if (e.kind == NetworkEventKind::connected) ASSERT_TRUE(connected.insert(e.interface_id).second);
      else ASSERT_TRUE(disconnected.insert(e.interface_id).second);
    }
    std::set<std::string> added, removed;
    std::set_difference(next.begin(), next.end(), state.begin(), state.end(),
                        std::inserter(added, added.end()));
    std::set_difference(state.begin(), state.end(), next.begin(), next.end(),
                        std::inserter(removed, removed.end()));
    ASSERT_EQ(connected, added);
    ASSERT_EQ(disconnected, removed);
    state = next;
    prev = cur;
  }
}

TEST(DelayBound, ReferenceValues) {
  EXPECT_NEAR(delay_bound(10, 0.1), 1.3212, 5e-5);
  EXPECT_NEAR(delay_bound(10, 0.1), 10 * (0.5 - std::exp(-1.0)), 1e-12);
  EXPECT_NEAR(delay_bound(10, 10), 4.901, 5e-4);
  EXPECT_NEAR(delay_bound(10, 10), bound_formula(10, 10), 1e-12);
}

TEST(DelayBound, MatchesFormulaAcrossScales) {
  for (double T : {0.5, 1.0, 5.0, 10.0, 30.0, 100.0})
    for (double l : {0.01, 0.05, 0.1, 1.0, 3.0, 10.0})
      EXPECT_NEAR(delay_bound(T, l), bound_formula(T, l), 1e-9 * std::max(1.0, bound_formula(T, l)))
          << T << " " << l;
}

TEST(DelayBound, SmallRateLimit) {
  for (double x : {1e-3, 1e-5, 1e-8}) {
    const double T = 10;
    const double l = x / T;
    EXPECT_NEAR(delay_bound(T, l) / (T * T * l / 6), 1.0, 1e-2) << x;
    EXPECT_GE(delay_bound(T, l), 0.0);
  }
  // Both sides of the series cut-over agree with the closed form.
  for (double l : {0.0099999, 0.0100001})
    EXPECT_NEAR(delay_bound(1, l) / bound_formula(1, l), 1.0, 1e-8) << l;
}

TEST(DelayBound, ApproachesHalfInterval) {
  EXPECT_NEAR(delay_bound(10, 1e4), 5.0, 1e-3);
}

TEST(DelayBound, DomainErrors) {
  EXPECT_THROW(delay_bound(0, 1), std::domain_error);
  EXPECT_THROW(delay_bound(1, 0), std::domain_error);
  EXPECT_THROW(delay_bound(-1, 1), std::domain_error);
  EXPECT_THROW(delay_bound(1, -1), std::domain_error);
  EXPECT_THROW(delay_bound(std::nan(""), 1), std::domain_error);
}

TEST(DelayBoundProperty, IncreasingInTAndLambda) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.01, 50);
  for (int i = 0; i < 2000; ++i) {
    const double a = u(rng), b = u(rng), l = u(rng) / 5;
    const double lo = std::min(a, b), hi = std::max(a, b);
    ASSERT_LE(delay_bound(lo, l), delay_bound(hi, l) + 1e-12);
    ASSERT_LE(delay_bound(l, lo), delay_bound(l, hi) + 1e-12);
  }
}

TEST(ExpectedDelayNth, FirstEventClosedForm) {
  EXPECT_NEAR(expected_delay_nth(1, 10, 0.1), 3.6788, 5e-5);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.01, 20);
  for (int i = 0; i < 500; ++i) {
    const double tau = u(rng), l = u(rng);
    const double x = l * tau;
    const double closed = tau * (1 - (1 - std::exp(-x)) / x);
    ASSERT_NEAR(expected_delay_nth(1, tau, l), closed, 1e-9 * std::max(1.0, tau));
  }
}

TEST(ExpectedDelayNth, LargeRateLimit) {
  EXPECT_NEAR(expected_delay_nth(1, 10, 1e3), 10 - 1e-3, 1e-9);
}

TEST(ExpectedDelayNth, LaterEventsDelayLess) {
  for (double tau : {0.5, 2.0, 10.0})
    for (double l : {0.1, 1.0, 5.0})
      for (int n = 1; n < 6; ++n)
        EXPECT_LE(expected_delay_nth(n + 1, tau, l), expected_delay_nth(n, tau, l) + 1e-12);
}

TEST(ExpectedDelayNth, MonteCarloSecondEvent) {
  const double tau = 10, l = 0.3;
  std::mt19937_64 rng(17);
  std::exponential_distribution<double> gap(l);
  const int n = 200000;
  double s1 = 0, s2 = 0, sq2 = 0;
  for (int i = 0; i < n; ++i) {
    const double a = gap(rng);
    const double b = a + gap(rng);
    s1 += std::max(0.0, tau - a);
    const double d2 = std::max(0.0, tau - b);
    s2 += d2;
    sq2 += d2 * d2;
  }
  const double m2 = s2 / n;
  const double se = std::sqrt((sq2 / n - m2 * m2) / n);
  EXPECT_NEAR(m2, expected_delay_nth(2, tau, l), 4 * se);
  EXPECT_LE(m2, s1 / n);
}

TEST(ExpectedDelayNth, DomainErrors) {
  EXPECT_THROW(expected_delay_nth(0, 1, 1), std::domain_error);
  EXPECT_THROW(expected_delay_nth(1, 0, 1), std::domain_error);
  EXPECT_THROW(expected_delay_nth(1, 1, 0), std::domain_error);
}

TEST(ExpectedDelayNth, IntegratesToTheBound) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> T_d(0.1, 60), l_d(0.005, 20);
  for (int i = 0; i < 20; ++i) {
    const double T = T_d(rng), l = l_d(rng);
    double err = 0;
    const double integral = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        [&](double tau) { return tau > 0 ? expected_delay_nth(1, tau, l) : 0.0; }, 0.0, T, 15, 1e-14,
        &err);
    EXPECT_NEAR(integral / T, delay_bound(T, l), 1e-9) << "T=" << T << " lambda=" << l;
  }
}

TEST(SimulateDetectionDelay, NoArrivalsMeansNoDelay) {
  const auto est = simulate_detection_delay(10, 1e-12, 1000, 1);
  EXPECT_EQ(est.mean, 0.0);
  EXPECT_EQ(est.cycles, 1000u);
}

TEST(SimulateDetectionDelay, DeterministicInSeed) {
  const auto a = simulate_detection_delay(5, 1, 20000, 42);
  const auto b = simulate_detection_delay(5, 1, 20000, 42);
  const auto c = simulate_detection_delay(5, 1, 20000, 43);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.std_error, b.std_error);
  EXPECT_NE(a.mean, c.mean);
}

TEST(SimulateDetectionDelay, BelowBoundAtReferencePoint) {
  const auto est = simulate_detection_delay(10, 0.1, 1000000, 1);
  EXPECT_LE(est.mean, delay_bound(10, 0.1) + 3 * est.std_error);
}

TEST(SimulateDetectionDelay, MatchesExactRenewalMean) {
  for (const auto [T, l] : {std::pair{10.0, 0.1}, std::pair{10.0, 10.0}, std::pair{1.0, 1.0},
                            std::pair{30.0, 0.01}}) {
    const auto est = simulate_detection_delay(T, l, 100000, 9);
    EXPECT_NEAR(est.mean, exact_mean_delay(T, l), 4 * est.std_error + 1e-12) << T << " " << l;
    EXPECT_LE(est.mean, delay_bound(T, l));
  }
}

TEST(SimulateDetectionDelay, HighRateStaysUnderBound) {
  const auto est = simulate_detection_delay(10, 10, 100000, 3);
  EXPECT_LE(est.mean, 4.901);
  EXPECT_NEAR(est.mean, 0.098, 0.002);
}

TEST(SimulateDetectionDelay, DomainErrors) {
  EXPECT_THROW(simulate_detection_delay(10, 1, 0, 1), std::domain_error);
  EXPECT_THROW(simulate_detection_delay(0, 1, 1, 1), std::domain_error);
}
