#pragma once

// Photocount processing: time binning, decimation against interbin
// correlations, grouping of M bins, post-selection on the subtracted total,
// and statistical comparison with the model law.

#include <cstdint>
#include <span>
#include <vector>

#include "subthermal/distributions.hpp"
#include "subthermal/trace.hpp"

namespace subthermal {

/// Counts events per window [i*tau, (i+1)*tau). The record ends at
/// events.end_ns when set (a trailing partial window is dropped), otherwise
/// at the end of the window holding the last event. Throws
/// std::invalid_argument on unsorted channels.
BinnedTrace bin_timestamps(const EventStream& events, std::int64_t tau_ns);

/// Keeps bins 0, period, 2*period, ...
BinnedTrace thin_bins(const BinnedTrace& trace, std::size_t period);

struct GroupRecord {
  unsigned subtracted_total = 0;  // k summed over the M bins
  unsigned observed_total = 0;    // n summed over the first m bins
};

/// Consecutive groups of M bins; a trailing partial group is dropped.
std::vector<GroupRecord> group_bins(const BinnedTrace& trace, unsigned M, unsigned m);

/// observed_total of every group whose subtracted_total equals K.
std::vector<unsigned> group_and_condition(const BinnedTrace& trace, unsigned M, unsigned m, unsigned K);

struct PooledCell {
  unsigned first = 0;
  unsigned last = 0;    // inclusive
  bool open_top = false;  // also holds every N > last
  double observed = 0.0;
  double expected = 0.0;
};

struct GofReport {
  double chi2 = 0.0;
  unsigned dof = 0;
  double p_value = 1.0;
  std::size_t sample_size = 0;
  std::vector<PooledCell> cells;
};

/// Regularized upper incomplete gamma Q(dof/2, chi2/2).
double chi2_survival(double chi2, unsigned dof);

/// Pearson test of samples against a fully tabulated model. Cells are
/// pooled from the high-N side until each expected count reaches
/// min_expected; a low-side remainder joins the lowest pooled cell.
GofReport chi2_test(std::span<const unsigned> samples, const Pmf& model, double min_expected = 5.0,
                    unsigned fitted_params = 0);

struct EstimateReport {
  double mu_hat = 0.0;
  double mu_se = 0.0;
  double g2_hat = 0.0;
  double g2_se = 0.0;
  std::size_t sample_size = 0;
  bool g2_defined = false;  // false when the sample mean is zero
};

/// Sample mean and g2 with seeded nonparametric bootstrap standard errors.
EstimateReport estimate_moments(std::span<const unsigned> samples, unsigned bootstrap_reps,
                                std::uint64_t seed);

/// Law of the measured count: subsystem law convolved with Poisson(muD).
Pmf measured_model(const SubtractionConfig& cfg, double muD, double tail_tol = 1e-12,
                   std::size_t min_size = 0);

struct Mu0Fit {
  double mu0 = 0.0;
  double loglik = 0.0;
  // The maximizer sits on the edge of the search interval; the likelihood
  // is monotone there and mu0 is not identified.
  bool at_bound = false;
};

struct Mu0SearchOptions {
  double lower = 1e-6;
  double upper = 0.0;  // 0 picks a bound from the sample mean
  double rel_tol = 1e-10;
};

/// Maximum-likelihood mu0 by golden-section search in log(mu0).
Mu0Fit fit_mu0(std::span<const unsigned> samples, unsigned M, unsigned m, unsigned K, double muD,
               const Mu0SearchOptions& options = {});

}  // namespace subthermal
