#include "subthermal/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "subthermal/parallel.hpp"

namespace subthermal {

void SimConfig::validate() const {
  if (observed_modes < 1 || observed_modes > total_modes) {
    throw std::invalid_argument("simulator: need 1 <= m <= M");
  }
  if (!(source_mean > 0.0) || !std::isfinite(source_mean)) {
    throw std::invalid_argument("simulator: source mean must be positive");
  }
  if (!(reflectivity > 0.0 && reflectivity < 1.0)) {
    throw std::invalid_argument("simulator: reflectivity must lie in (0, 1)");
  }
  if (trials < 1) throw std::invalid_argument("simulator: trials must be at least 1");
  if (batches < 1) throw std::invalid_argument("simulator: batches must be at least 1");
  if (!(min_acceptance >= 0.0 && min_acceptance < 1.0)) {
    throw std::invalid_argument("simulator: acceptance floor must lie in [0, 1)");
  }
}

double tap_conditioned_mean(double source_mean, double reflectivity) {
  return source_mean * (1.0 - reflectivity) / (1.0 + reflectivity * source_mean);
}

double weak_tap_mean(double source_mean, double reflectivity) {
  return source_mean * (1.0 - reflectivity);
}

double source_mean_for(double mu0, double reflectivity) {
  const double denom = 1.0 - reflectivity * (1.0 + mu0);
  if (!(denom > 0.0)) {
    throw std::invalid_argument("tap probability too large for the requested mean: need r (1 + mu0) < 1");
  }
  return mu0 / denom;
}

unsigned sample_thermal(double mu, Rng& rng) {
  if (!(mu > 0.0)) throw std::invalid_argument("thermal mean must be positive");
  // P(n >= j) = q^j with q = mu / (1 + mu).
  const double u = 1.0 - uniform01(rng);  // (0, 1]
  const double log_q = std::log(mu) - std::log1p(mu);
  return static_cast<unsigned>(std::floor(std::log(u) / log_q));
}

unsigned sample_poisson(double mean, Rng& rng) {
  if (mean < 0.0) throw std::invalid_argument("Poisson mean must be nonnegative");
  if (mean == 0.0) return 0;
  if (mean > 30.0) return sample_poisson(mean / 2, rng) + sample_poisson(mean / 2, rng);
  double p = std::exp(-mean);
  double cdf = p;
  const double u = uniform01(rng);
  unsigned n = 0;
  while (u >= cdf && p > 0.0) {
    ++n;
    p *= mean / n;
    cdf += p;
  }
  return n;
}

BeamSplit binomial_thin(unsigned n, double r, Rng& rng) {
  if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("reflectivity must lie in [0, 1]");
  BeamSplit split;
  for (unsigned i = 0; i < n; ++i) {
    if (uniform01(rng) < r) ++split.reflected;
  }
  split.transmitted = n - split.reflected;
  return split;
}

ConditionalSamples run_conditional(const SimConfig& cfg) {
  cfg.validate();
  const unsigned batches = static_cast<unsigned>(std::min<std::uint64_t>(cfg.batches, cfg.trials));

  struct Batch {
    std::vector<unsigned> photons;
    std::vector<unsigned> observed_subtracted;
    std::uint64_t attempts = 0;
  };
  std::vector<Batch> results(batches);
  const std::uint64_t abort_after =
      cfg.min_acceptance > 0.0 ? static_cast<std::uint64_t>(std::ceil(100.0 / cfg.min_acceptance)) : 0;

  parallel_for(batches, [&](std::size_t b) {
    const std::uint64_t target = cfg.trials / batches + (b < cfg.trials % batches ? 1 : 0);
    Rng rng = substream(cfg.seed, b);
    Batch& out = results[b];
    out.photons.reserve(target);
    out.observed_subtracted.reserve(target);
    while (out.photons.size() < target) {
      ++out.attempts;
      unsigned tapped = 0;
      unsigned tapped_observed = 0;
      unsigned photons = 0;
      bool rejected = false;
      for (unsigned mode = 0; mode < cfg.total_modes; ++mode) {
        const BeamSplit split = binomial_thin(sample_thermal(cfg.source_mean, rng), cfg.reflectivity, rng);
        tapped += split.reflected;
        if (tapped > cfg.subtracted_photons) {
          // The remaining modes cannot restore the condition.
          rejected = true;
          break;
        }
        if (mode < cfg.observed_modes) {
          tapped_observed += split.reflected;
          photons += split.transmitted;
        }
      }
      if (!rejected && tapped == cfg.subtracted_photons) {
        out.photons.push_back(photons);
        out.observed_subtracted.push_back(tapped_observed);
      }
      if (abort_after != 0 && out.attempts >= abort_after &&
          double(out.photons.size()) < cfg.min_acceptance * double(out.attempts)) {
        throw std::runtime_error("post-selection acceptance rate " +
                                 std::to_string(double(out.photons.size()) / double(out.attempts)) +
                                 " is below the floor " + std::to_string(cfg.min_acceptance) +
                                 " after " + std::to_string(out.attempts) + " attempts");
      }
    }
  });

  ConditionalSamples merged;
  merged.photons.reserve(cfg.trials);
  merged.observed_subtracted.reserve(cfg.trials);
  for (auto& batch : results) {
    merged.photons.insert(merged.photons.end(), batch.photons.begin(), batch.photons.end());
    merged.observed_subtracted.insert(merged.observed_subtracted.end(),
                                      batch.observed_subtracted.begin(),
                                      batch.observed_subtracted.end());
    merged.attempts += batch.attempts;
  }
  merged.acceptance_rate = double(merged.photons.size()) / double(merged.attempts);
  return merged;
}

PmfSampler::PmfSampler(const Pmf& pmf) {
  if (pmf.probs.empty()) throw std::invalid_argument("cannot sample from an empty table");
  double total = 0.0;
  cdf_.reserve(pmf.probs.size());
  for (double p : pmf.probs) {
    if (p < 0.0) throw std::invalid_argument("negative probability in table");
    total += p;
    cdf_.push_back(total);
  }
  const double deficit = 1.0 - total;
  if (deficit > pmf.tail_bound + 1e-9 || total > 1.0 + 1e-9) {
    throw std::invalid_argument("table is not normalized within its tail bound (sum = " +
                                std::to_string(total) + ")");
  }
}

unsigned PmfSampler::operator()(Rng& rng) const {
  const double u = uniform01(rng);
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.end()) return static_cast<unsigned>(cdf_.size() - 1);
  return static_cast<unsigned>(it - cdf_.begin());
}

unsigned sample_pmf(const Pmf& pmf, Rng& rng) { return PmfSampler(pmf)(rng); }

void TraceConfig::validate() const {
  if (!(mu0 > 0.0) || !std::isfinite(mu0)) throw std::invalid_argument("trace: mu0 must be positive");
  if (!(dark_mean_per_bin >= 0.0)) throw std::invalid_argument("trace: dark-count mean must be nonnegative");
  if (tau_ns <= 0) throw std::invalid_argument("trace: tau_ns must be positive");
  if (thin_period_bins < 1) throw std::invalid_argument("trace: thinning period must be positive");
  if (!(p_subtract >= 0.0 && p_subtract < 1.0)) {
    throw std::invalid_argument("trace: p_subtract must lie in [0, 1)");
  }
  source_mean_for(mu0, p_subtract);
}

BinnedTrace synth_experiment_trace(const TraceConfig& cfg) {
  cfg.validate();
  const double source = source_mean_for(cfg.mu0, cfg.p_subtract);
  Rng rng = substream(cfg.seed, 0);
  BinnedTrace trace;
  trace.tau_ns = cfg.tau_ns;
  trace.meta["seed"] = std::to_string(cfg.seed);
  trace.bins.reserve(cfg.n_bins);
  for (std::uint64_t i = 0; i < cfg.n_bins; ++i) {
    const BeamSplit split = binomial_thin(sample_thermal(source, rng), cfg.p_subtract, rng);
    const unsigned dark = sample_poisson(cfg.dark_mean_per_bin, rng);
    trace.bins.push_back({split.reflected, split.transmitted + dark});
  }
  return trace;
}

}  // namespace subthermal
