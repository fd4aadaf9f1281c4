#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "subthermal/pipeline.hpp"
#include "subthermal/simulator.hpp"

using namespace subthermal;

namespace {

Pmf polya_model(unsigned K, unsigned M, unsigned m) {
  Pmf p;
  for (unsigned k = 0; k <= K; ++k) p.probs.push_back(polya_pmf(k, K, M, m));
  return p;
}

std::vector<unsigned> transmitted_of(const BinnedTrace& t) {
  std::vector<unsigned> out;
  for (const auto& b : t.bins) out.push_back(b.transmitted);
  return out;
}

}  // namespace

TEST_SUITE("simulator") {

TEST_CASE("sample_thermal") {
  SUBCASE("mean at mu = 0.24") {
    Rng rng(1);
    std::vector<unsigned> draws(1'000'000);
    for (auto& d : draws) d = sample_thermal(0.24, rng);
    const EstimateReport est = estimate_moments(draws, 40, 2);
    CHECK(std::abs(est.mu_hat - 0.24) < 3 * est.mu_se);
  }
  SUBCASE("g2 at mu = 1") {
    Rng rng(3);
    std::vector<unsigned> draws(1'000'000);
    for (auto& d : draws) d = sample_thermal(1.0, rng);
    const EstimateReport est = estimate_moments(draws, 40, 4);
    CHECK(std::abs(est.g2_hat - 2.0) < 3 * est.g2_se);
  }
  SUBCASE("vanishing mean") {
    Rng rng(5);
    for (int i = 0; i < 10'000; ++i) CHECK(sample_thermal(1e-300, rng) == 0);
  }
  SUBCASE("matches the Bose-Einstein law") {
    Rng rng(6);
    std::vector<unsigned> draws(100'000);
    for (auto& d : draws) d = sample_thermal(1.3, rng);
    CHECK(chi2_test(draws, subsystem_table({1, 1, 0, 1.3}, 1e-12)).p_value > 0.001);
  }
}

TEST_CASE("binomial_thin") {
  Rng rng(7);
  for (unsigned n : {0u, 1u, 5u, 40u}) {
    const BeamSplit none = binomial_thin(n, 0.0, rng);
    CHECK(none.reflected == 0);
    CHECK(none.transmitted == n);
    const BeamSplit all = binomial_thin(n, 1.0, rng);
    CHECK(all.reflected == n);
    CHECK(all.transmitted == 0);
    for (int i = 0; i < 100; ++i) {
      const BeamSplit s = binomial_thin(n, 0.3, rng);
      CHECK(s.reflected + s.transmitted == n);
    }
  }
  SUBCASE("thinned thermal light stays thermal") {
    const double mu = 2.0;
    const double r = 0.3;
    std::vector<unsigned> transmitted(100'000);
    for (auto& t : transmitted) t = binomial_thin(sample_thermal(mu, rng), r, rng).transmitted;
    CHECK(chi2_test(transmitted, subsystem_table({1, 1, 0, mu * (1 - r)}, 1e-12)).p_value > 0.001);
  }
}

TEST_CASE("tap-conditioned mean") {
  // Joint law of (reflected k, transmitted t) for one thermal mode:
  // P(k, t) = C(k+t, k) r^k (1-r)^t BE(k+t | mu). Conditioning on k = 2
  // and normalizing over t must reproduce a compound Poisson with a = 3.
  const double mu = 1.7;
  const double r = 0.15;
  const unsigned k = 2;
  std::vector<double> joint(200);
  double norm = 0.0;
  for (unsigned t = 0; t < joint.size(); ++t) {
    const double n = k + t;
    joint[t] = std::exp(std::lgamma(n + 1) - std::lgamma(k + 1.0) - std::lgamma(t + 1.0) + k * std::log(r) +
                        t * std::log1p(-r)) * bose_einstein_pmf(k + t, mu);
    norm += joint[t];
  }
  const double mu0 = tap_conditioned_mean(mu, r);
  for (unsigned t = 0; t < 60; ++t) {
    CHECK(joint[t] / norm == doctest::Approx(compound_poisson_pmf(t, mu0, k + 1.0)).epsilon(1e-10));
  }
  CHECK(source_mean_for(mu0, r) == doctest::Approx(mu).epsilon(1e-14));
  CHECK(weak_tap_mean(mu, r) == doctest::Approx(mu * (1 - r)));
  CHECK_THROWS_AS(source_mean_for(0.24, 0.9), std::invalid_argument);
}

TEST_CASE("run_conditional") {
  SUBCASE("no subtraction, one mode: Bose-Einstein at the conditioned mean") {
    SimConfig cfg;
    cfg.source_mean = 0.5;
    cfg.reflectivity = 0.02;
    cfg.trials = 100'000;
    cfg.seed = 11;
    const ConditionalSamples s = run_conditional(cfg);
    CHECK(s.photons.size() == 100'000);
    const double mu0 = tap_conditioned_mean(0.5, 0.02);
    CHECK(chi2_test(s.photons, subsystem_table({1, 1, 0, mu0}, 1e-12)).p_value > 0.001);
    CHECK(s.acceptance_rate > 0.9);
  }
  SUBCASE("Polya pattern of the subtracted photons") {
    SimConfig cfg;
    cfg.total_modes = 3;
    cfg.observed_modes = 1;
    cfg.subtracted_photons = 2;
    cfg.source_mean = 5.0;
    cfg.reflectivity = 0.02;
    cfg.trials = 20'000;
    cfg.seed = 12;
    const ConditionalSamples s = run_conditional(cfg);
    CHECK(chi2_test(s.observed_subtracted, polya_model(2, 3, 1)).p_value > 0.001);
    const SubtractionConfig law{3, 1, 2, tap_conditioned_mean(5.0, 0.02)};
    CHECK(chi2_test(s.photons, subsystem_table(law, 1e-12)).p_value > 0.001);
    const EstimateReport est = estimate_moments(s.photons, 100, 13);
    CHECK(std::abs(est.mu_hat - theoretical_mean(law)) < 4 * est.mu_se);
  }
  SUBCASE("seeded determinism") {
    SimConfig cfg;
    cfg.total_modes = 2;
    cfg.subtracted_photons = 1;
    cfg.source_mean = 2.0;
    cfg.reflectivity = 0.1;
    cfg.trials = 2'000;
    cfg.seed = 99;
    const ConditionalSamples a = run_conditional(cfg);
    const ConditionalSamples b = run_conditional(cfg);
    CHECK(a.photons == b.photons);
    CHECK(a.observed_subtracted == b.observed_subtracted);
    CHECK(a.attempts == b.attempts);
    cfg.seed = 100;
    CHECK(run_conditional(cfg).photons != a.photons);
  }
  SUBCASE("acceptance floor aborts") {
    SimConfig cfg;
    cfg.subtracted_photons = 6;
    cfg.source_mean = 0.1;
    cfg.reflectivity = 0.01;
    cfg.trials = 10;
    cfg.batches = 1;
    cfg.min_acceptance = 1e-3;
    CHECK_THROWS_AS(run_conditional(cfg), std::runtime_error);
  }
  SUBCASE("invalid configuration") {
    SimConfig cfg;
    cfg.reflectivity = 0.0;
    CHECK_THROWS_AS(run_conditional(cfg), std::invalid_argument);
    cfg.reflectivity = 0.1;
    cfg.observed_modes = 2;
    CHECK_THROWS_AS(run_conditional(cfg), std::invalid_argument);
  }
}

TEST_CASE("sample_pmf") {
  Rng rng(21);
  const Pmf vacuum{{1.0}, 0.0};
  for (int i = 0; i < 1000; ++i) CHECK(sample_pmf(vacuum, rng) == 0);

  const Pmf law = subsystem_table({5, 2, 3, 0.24}, 1e-12);
  const PmfSampler sampler(law);
  std::vector<unsigned> draws(1'000'000);
  for (auto& d : draws) d = sampler(rng);
  const EstimateReport est = estimate_moments(draws, 40, 22);
  CHECK(std::abs(est.mu_hat - pmf_moments(law).mean) < 4 * est.mu_se);

  Rng a(5);
  Rng b(5);
  for (int i = 0; i < 1000; ++i) CHECK(sampler(a) == sampler(b));

  CHECK_THROWS_AS(PmfSampler(Pmf{{0.5, 0.2}, 0.0}), std::invalid_argument);
  CHECK_NOTHROW(PmfSampler(Pmf{{0.5, 0.2}, 0.3}));
}

TEST_CASE("synth_experiment_trace") {
  TraceConfig cfg;
  cfg.mu0 = 0.24;
  cfg.dark_mean_per_bin = 0.0;
  cfg.p_subtract = 0.0;
  cfg.n_bins = 100'000;
  cfg.seed = 31;

  SUBCASE("no tap, no dark counts") {
    const BinnedTrace t = synth_experiment_trace(cfg);
    CHECK(t.bins.size() == 100'000);
    for (const auto& b : t.bins) CHECK(b.subtracted == 0);
    CHECK(chi2_test(transmitted_of(t), subsystem_table({1, 1, 0, 0.24}, 1e-12)).p_value > 0.001);
  }
  SUBCASE("dark counts convolve the measured channel") {
    cfg.dark_mean_per_bin = 0.05;
    const BinnedTrace t = synth_experiment_trace(cfg);
    const Pmf model = convolve_dark_counts(subsystem_table({1, 1, 0, 0.24}, 1e-12), 0.05);
    CHECK(chi2_test(transmitted_of(t), model).p_value > 0.001);
  }
  SUBCASE("operating point and reproducibility") {
    cfg.dark_mean_per_bin = 0.0015;
    cfg.p_subtract = 0.1;
    const BinnedTrace a = synth_experiment_trace(cfg);
    const BinnedTrace b = synth_experiment_trace(cfg);
    CHECK(a.bins == b.bins);
    CHECK(a.tau_ns == 10'000);
    // Bins with no tapped photon carry a thermal law at mu0 plus dark counts.
    std::vector<unsigned> untapped;
    for (const auto& bin : a.bins) {
      if (bin.subtracted == 0) untapped.push_back(bin.transmitted);
    }
    const Pmf model = convolve_dark_counts(subsystem_table({1, 1, 0, 0.24}, 1e-12), 0.0015);
    CHECK(chi2_test(untapped, model).p_value > 0.001);
  }
  SUBCASE("invalid") {
    cfg.p_subtract = 0.9;
    CHECK_THROWS_AS(synth_experiment_trace(cfg), std::invalid_argument);
  }
}

}  // TEST_SUITE
