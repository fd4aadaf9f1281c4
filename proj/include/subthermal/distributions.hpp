#pragma once

// Photon-number laws of multimode thermal light after conditional
// photon subtraction, observed on a subset of the modes.

#include <cstdint>
#include <vector>

namespace subthermal {

/// Parameters of the subsystem law: K photons subtracted from an M-mode
/// thermal state whose first m modes are detected.
struct SubtractionConfig {
  unsigned total_modes = 1;        // M
  unsigned observed_modes = 1;     // m
  unsigned subtracted_photons = 0; // K
  double mean_per_mode = 1.0;      // mu0, before subtraction

  /// Throws std::invalid_argument unless 1 <= m <= M and mu0 > 0.
  void validate() const;
};

/// Truncated probability mass function over N = 0..size()-1.
///
/// `tail_bound` is an upper bound on the probability mass of the support
/// beyond the last stored entry.
struct Pmf {
  std::vector<double> probs;
  double tail_bound = 0.0;

  std::size_t size() const { return probs.size(); }
  double operator[](std::size_t n) const { return n < probs.size() ? probs[n] : 0.0; }
  double sum() const;
};

struct Moments {
  double mean = 0.0;
  double g2 = 0.0;
  // Probability mass missing from the table the moments were summed over.
  double tail_mass = 0.0;
};

double bose_einstein_pmf(unsigned n, double mu0);

/// Negative binomial law with per-mode mean mu0 and coherence parameter a.
/// Real a > 0 is accepted. Evaluated through log-gamma.
double compound_poisson_pmf(unsigned n, double mu0, double a);

/// Number of ways to place `balls` indistinguishable balls in `boxes`
/// boxes. Zero boxes hold only zero balls. Throws std::overflow_error when
/// the count exceeds 1e15.
std::uint64_t compositions(unsigned balls, unsigned boxes);

/// Exact Polya probability as an unreduced ratio of composition counts.
struct PolyaRatio {
  std::uint64_t ways = 0;
  std::uint64_t total = 0;
  double value() const { return static_cast<double>(ways) / static_cast<double>(total); }
};

PolyaRatio polya_ratio(unsigned k, unsigned K, unsigned M, unsigned m);

/// Probability that k of K subtracted photons come from the first m of M
/// modes, every composition of K over the M modes being equally likely.
/// Uses exact integer counts when they fit, log-gamma otherwise.
double polya_pmf(unsigned k, unsigned K, unsigned M, unsigned m);

/// Terminating Gauss hypergeometric sum 2F1(-K, b; c; x) with K+1 terms.
/// Throws std::domain_error when a factor of (c)_j vanishes before the
/// series terminates.
double hyp2f1_terminating(unsigned K, double b, double c, double x);

/// Closed-form subsystem law. Branches to the compound Poisson law with
/// a = K + M when m == M, where the closed form has a vanishing Pochhammer
/// denominator.
double subsystem_pmf(unsigned N, const SubtractionConfig& cfg);

/// Same law as a Polya-weighted mixture of compound Poisson laws. Shares no
/// special-function code with subsystem_pmf beyond lgamma.
double subsystem_pmf_mixture(unsigned N, const SubtractionConfig& cfg);

/// Tabulates subsystem_pmf up to the first N whose certified tail falls
/// below tail_tol. The table always has at least `min_size` entries.
Pmf subsystem_table(const SubtractionConfig& cfg, double tail_tol, std::size_t min_size = 0);

/// Tabulates compound_poisson_pmf with the same tail certification.
Pmf compound_poisson_table(double mu0, double a, double tail_tol, std::size_t min_size = 0);

double theoretical_mean(const SubtractionConfig& cfg);
double theoretical_g2(const SubtractionConfig& cfg);

/// Exact moments of the stored table (no renormalization).
/// g2 = (<N^2> - <N>) / <N>^2. Throws std::domain_error when the mean is
/// below 1e-30.
Moments pmf_moments(const Pmf& pmf);

/// Moments of N + D where D ~ Poisson(muD) is independent of N.
Moments with_dark_counts(const Moments& m, double muD);

/// Convolves with a Poisson law of mean muD. The Poisson factor is cut where
/// its own tail drops below 1e-3 of the input tail bound (or 1e-18), and the
/// output tail bound is the sum of both.
Pmf convolve_dark_counts(const Pmf& pmf, double muD);

}  // namespace subthermal
