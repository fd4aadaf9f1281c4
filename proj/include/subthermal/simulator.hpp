#pragma once

// Photon-level Monte Carlo of the subtraction experiment: thermal modes,
// a beam-splitter tap toward the subtraction detector, and post-selection
// on the tapped photon total.

#include <cstdint>
#include <vector>

#include "subthermal/distributions.hpp"
#include "subthermal/random.hpp"
#include "subthermal/trace.hpp"

namespace subthermal {

struct SimConfig {
  unsigned total_modes = 1;
  unsigned observed_modes = 1;
  unsigned subtracted_photons = 0;  // post-selection condition on the tapped total
  double source_mean = 1.0;         // per-mode mean ahead of the tap
  double reflectivity = 0.02;       // tap probability per photon
  std::uint64_t trials = 1;         // accepted samples to collect
  std::uint64_t seed = 0;
  double min_acceptance = 1e-6;
  // Independent RNG substreams; results are reproducible for a fixed
  // (seed, batches) pair.
  unsigned batches = 16;

  void validate() const;
};

struct ConditionalSamples {
  std::vector<unsigned> photons;               // transmitted total over the observed modes
  std::vector<unsigned> observed_subtracted;   // tapped total over the observed modes
  std::uint64_t attempts = 0;
  double acceptance_rate = 0.0;
};

/// Per-mode mean of the transmitted light conditioned on a fixed number of
/// tapped photons. Thinning a geometric law and conditioning on the tapped
/// count yields a negative binomial with this mean per mode exactly, for
/// any reflectivity.
double tap_conditioned_mean(double source_mean, double reflectivity);

/// First-order form source_mean * (1 - r) of the above.
double weak_tap_mean(double source_mean, double reflectivity);

/// Inverse of tap_conditioned_mean. Requires r * (1 + mu0) < 1.
double source_mean_for(double mu0, double reflectivity);

unsigned sample_thermal(double mu, Rng& rng);
unsigned sample_poisson(double mean, Rng& rng);

struct BeamSplit {
  unsigned reflected = 0;
  unsigned transmitted = 0;
};

BeamSplit binomial_thin(unsigned n, double r, Rng& rng);

/// Rejection sampling on the tapped total. Throws std::runtime_error when
/// the acceptance rate stays below cfg.min_acceptance.
ConditionalSamples run_conditional(const SimConfig& cfg);

/// Inverse-CDF sampler over a Pmf; the tail mass maps to the last entry.
class PmfSampler {
 public:
  /// Throws std::invalid_argument when 1 - sum(probs) exceeds the tail bound.
  explicit PmfSampler(const Pmf& pmf);
  unsigned operator()(Rng& rng) const;

 private:
  std::vector<double> cdf_;
};

unsigned sample_pmf(const Pmf& pmf, Rng& rng);

struct TraceConfig {
  double mu0 = 0.24;               // per-mode mean of the conditioned transmitted light
  double dark_mean_per_bin = 0.0;  // Poisson background on the measured channel
  std::int64_t tau_ns = 10'000;
  unsigned thin_period_bins = 48;
  std::uint64_t n_bins = 0;
  double p_subtract = 0.1;         // tap probability per photon
  std::uint64_t seed = 0;

  void validate() const;
};

/// Independent bins: a thermal photon number at source_mean_for(mu0, p)
/// split by the tap into (k, n), plus dark counts on n.
BinnedTrace synth_experiment_trace(const TraceConfig& cfg);

}  // namespace subthermal
