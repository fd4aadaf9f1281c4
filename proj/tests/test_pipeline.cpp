#include <doctest.h>

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "subthermal/pipeline.hpp"
#include "subthermal/simulator.hpp"

using namespace subthermal;

namespace {

std::vector<unsigned> draw(const Pmf& law, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  const PmfSampler sampler(law);
  std::vector<unsigned> out(n);
  for (auto& v : out) v = sampler(rng);
  return out;
}

BinnedTrace trace_of(std::vector<BinCounts> bins) {
  BinnedTrace t;
  t.bins = std::move(bins);
  t.tau_ns = 10'000;
  return t;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("bin_timestamps") {
  CHECK(bin_timestamps(EventStream{}, 10'000).bins.empty());

  EventStream one;
  one.detection = {5'000};
  const BinnedTrace single = bin_timestamps(one, 10'000);
  REQUIRE(single.bins.size() == 1);
  CHECK(single.bins[0].transmitted == 1);
  CHECK(single.bins[0].subtracted == 0);

  EventStream windowed;
  windowed.subtraction = {100, 9'999, 10'000};
  windowed.detection = {25'000, 31'000};
  windowed.end_ns = 30'000;  // third window is complete, the fourth is dropped
  const BinnedTrace t = bin_timestamps(windowed, 10'000);
  REQUIRE(t.bins.size() == 3);
  CHECK(t.bins[0] == BinCounts{2, 0});
  CHECK(t.bins[1] == BinCounts{1, 0});
  CHECK(t.bins[2] == BinCounts{0, 1});

  EventStream unsorted;
  unsorted.detection = {10, 5};
  CHECK_THROWS_AS(bin_timestamps(unsorted, 10), std::invalid_argument);
  CHECK_THROWS_AS(bin_timestamps(one, 0), std::invalid_argument);

  SUBCASE("Poisson stream: per-bin mean is rate times width") {
    Rng rng(41);
    const double rate = 2e-4;  // events per ns
    EventStream stream;
    double t_ns = 0.0;
    while (t_ns < 2e9) {
      t_ns += -std::log(1.0 - uniform01(rng)) / rate;
      stream.detection.push_back(static_cast<std::int64_t>(t_ns));
    }
    stream.end_ns = 2'000'000'000;
    const BinnedTrace binned = bin_timestamps(stream, 10'000);
    CHECK(binned.bins.size() == 200'000);
    std::vector<unsigned> counts;
    for (const auto& b : binned.bins) counts.push_back(b.transmitted);
    const double mean = std::accumulate(counts.begin(), counts.end(), 0.0) / counts.size();
    const double se = std::sqrt(rate * 10'000 / counts.size());
    CHECK(std::abs(mean - rate * 10'000) < 3 * se);
  }
}

TEST_CASE("thin_bins") {
  std::vector<BinCounts> bins;
  for (unsigned i = 0; i < 100; ++i) bins.push_back({i, i});
  const BinnedTrace t = trace_of(bins);
  CHECK(thin_bins(t, 1).bins == t.bins);
  for (std::size_t period : {2u, 7u, 48u, 100u, 150u}) {
    const BinnedTrace thinned = thin_bins(t, period);
    CHECK(thinned.bins.size() == (100 + period - 1) / period);
    for (std::size_t j = 0; j < thinned.bins.size(); ++j) CHECK(thinned.bins[j].subtracted == j * period);
  }
  CHECK_THROWS_AS(thin_bins(t, 0), std::invalid_argument);
}

TEST_CASE("group_and_condition") {
  const BinnedTrace t = trace_of({{1, 3}, {0, 2}, {1, 5}, {0, 0}, {2, 1}, {0, 4}, {9, 9}});
  // Groups of 3: {1,3},{0,2},{1,5} -> K=2, N over m=2 = 5; {0,0},{2,1},{0,4} -> K=2, N = 1.
  CHECK(group_and_condition(t, 3, 2, 2) == std::vector<unsigned>{5, 1});
  CHECK(group_and_condition(t, 3, 3, 2) == std::vector<unsigned>{10, 5});
  CHECK(group_and_condition(t, 3, 1, 7).empty());
  CHECK(group_bins(t, 3, 1).size() == 2);

  const BinnedTrace zero_k = trace_of({{0, 4}, {0, 1}, {0, 0}});
  CHECK(group_and_condition(zero_k, 1, 1, 0) == std::vector<unsigned>{4, 1, 0});
  CHECK_THROWS_AS(group_and_condition(t, 2, 3, 0), std::invalid_argument);
}

TEST_CASE("chi2_survival") {
  CHECK(chi2_survival(3.841458820694124, 1) == doctest::Approx(0.05).epsilon(1e-12));
  for (double x : {0.5, 2.0, 9.0}) CHECK(chi2_survival(x, 2) == doctest::Approx(std::exp(-x / 2)).epsilon(1e-12));
  CHECK(chi2_survival(0.0, 3) == 1.0);
  CHECK_THROWS_AS(chi2_survival(1.0, 0), std::invalid_argument);
}

TEST_CASE("chi2_test") {
  SUBCASE("observed proportional to expected") {
    const Pmf model{{0.5, 0.25, 0.25}, 0.0};
    std::vector<unsigned> samples;
    samples.insert(samples.end(), 200, 0);
    samples.insert(samples.end(), 100, 1);
    samples.insert(samples.end(), 100, 2);
    const GofReport r = chi2_test(samples, model);
    CHECK(r.chi2 == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.p_value == 1.0);
    CHECK(r.dof == 2);
  }
  SUBCASE("pooling audit") {
    const Pmf law = subsystem_table({5, 5, 5, 3.0}, 1e-12);
    const auto samples = draw(law, 2'000, 51);
    const GofReport r = chi2_test(samples, law);
    unsigned next = 0;
    for (const auto& cell : r.cells) {
      CHECK(cell.first == next);
      CHECK(cell.expected >= 5.0);
      next = cell.last + 1;
    }
    CHECK(r.cells.back().open_top);
    double observed = 0.0;
    double expected = 0.0;
    for (const auto& cell : r.cells) {
      observed += cell.observed;
      expected += cell.expected;
    }
    CHECK(observed == 2'000);
    CHECK(expected == doctest::Approx(2'000));
    CHECK(r.p_value == doctest::Approx(chi2_survival(r.chi2, r.dof)).epsilon(1e-9));
    CHECK(r.dof + 1 == r.cells.size());
    CHECK(chi2_test(samples, law, 5.0, 1).dof + 2 == r.cells.size());
  }
  SUBCASE("power against the wrong K") {
    const auto samples = draw(subsystem_table({1, 1, 2, 0.24}, 1e-12), 10'000, 52);
    CHECK(chi2_test(samples, subsystem_table({1, 1, 0, 0.24}, 1e-12)).p_value < 0.05);
  }
  SUBCASE("too little data") {
    const Pmf law = subsystem_table({1, 1, 0, 0.24}, 1e-12);
    CHECK_THROWS_AS(chi2_test(std::vector<unsigned>(49, 0), law), std::invalid_argument);
    // 50 samples at mu0 = 0.01 leave one pooled cell.
    CHECK_THROWS_AS(chi2_test(std::vector<unsigned>(50, 0), subsystem_table({1, 1, 0, 0.01}, 1e-12)),
                    std::invalid_argument);
    CHECK_THROWS_AS(chi2_test(std::vector<unsigned>(100, 0), Pmf{{0.5}, 0.0}), std::invalid_argument);
  }
}

TEST_CASE("estimate_moments") {
  SUBCASE("constant samples") {
    const std::vector<unsigned> c(500, 3);
    const EstimateReport r = estimate_moments(c, 50, 1);
    CHECK(r.mu_hat == 3.0);
    CHECK(r.g2_hat == doctest::Approx(1.0 - 1.0 / 3.0).epsilon(1e-15));
    CHECK(r.mu_se == 0.0);
    CHECK(r.g2_se == 0.0);
    CHECK(r.g2_defined);
  }
  SUBCASE("Bose-Einstein g2") {
    const auto samples = draw(subsystem_table({1, 1, 0, 1.0}, 1e-14), 100'000, 61);
    const EstimateReport r = estimate_moments(samples, 200, 62);
    CHECK(std::abs(r.g2_hat - 2.0) < 3 * r.g2_se);
    CHECK(r.sample_size == 100'000);
  }
  SUBCASE("subtracted subsystem") {
    const SubtractionConfig c{5, 2, 3, 0.24};
    const auto samples = draw(subsystem_table(c, 1e-14), 100'000, 63);
    const EstimateReport r = estimate_moments(samples, 200, 64);
    CHECK(std::abs(r.mu_hat - theoretical_mean(c)) < 3 * r.mu_se);
    CHECK(std::abs(r.g2_hat - theoretical_g2(c)) < 3 * r.g2_se);
  }
  SUBCASE("undefined g2 is flagged") {
    const EstimateReport r = estimate_moments(std::vector<unsigned>(10, 0), 10, 1);
    CHECK(r.mu_hat == 0.0);
    CHECK_FALSE(r.g2_defined);
  }
  SUBCASE("seeded determinism") {
    const auto samples = draw(subsystem_table({2, 1, 1, 0.5}, 1e-12), 5'000, 65);
    const EstimateReport a = estimate_moments(samples, 30, 7);
    const EstimateReport b = estimate_moments(samples, 30, 7);
    CHECK(a.mu_se == b.mu_se);
    CHECK(a.g2_se == b.g2_se);
  }
  CHECK_THROWS_AS(estimate_moments(std::vector<unsigned>{1}, 10, 1), std::invalid_argument);
}

TEST_CASE("fit_mu0") {
  SUBCASE("recovers the generating mean") {
    const double muD = 2 * 0.0015;
    const Pmf law = measured_model({3, 2, 2, 0.24}, muD);
    const auto samples = draw(law, 20'000, 71);
    const Mu0Fit fit = fit_mu0(samples, 3, 2, 2, muD);
    CHECK(fit.mu0 >= 0.22);
    CHECK(fit.mu0 <= 0.26);
    CHECK_FALSE(fit.at_bound);
  }
  SUBCASE("geometric law: maximum likelihood equals the sample mean") {
    const auto samples = draw(subsystem_table({1, 1, 0, 0.7}, 1e-14), 5'000, 72);
    const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / samples.size();
    const Mu0Fit fit = fit_mu0(samples, 1, 1, 0, 0.0);
    CHECK(std::abs(fit.mu0 - mean) < 1e-6);
    CHECK(fit.loglik < 0.0);
  }
  SUBCASE("all-zero samples drive the fit to the lower bound") {
    const Mu0Fit fit = fit_mu0(std::vector<unsigned>(200, 0), 2, 1, 1, 0.0);
    CHECK(fit.at_bound);
    CHECK(fit.mu0 < 1e-5);
  }
  CHECK_THROWS_AS(fit_mu0(std::vector<unsigned>(10, 1), 1, 1, 0, 0.0), std::invalid_argument);
}

}  // TEST_SUITE
