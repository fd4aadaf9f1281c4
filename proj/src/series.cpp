#include "subthermal/series.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace subthermal {

namespace {

constexpr double kNegativeResidueLimit = 1e-10;
constexpr unsigned kMaxTailTerms = 10'000'000;

bool same_ratio(const std::optional<double>& a, const std::optional<double>& b) {
  return a && b && std::abs(*a - *b) <= 1e-15 * std::max(std::abs(*a), std::abs(*b));
}

}  // namespace

TruncatedSeries::TruncatedSeries(std::vector<double> coeffs, std::optional<double> tail_ratio)
    : coeffs_(std::move(coeffs)), tail_ratio_(tail_ratio) {
  if (coeffs_.empty()) coeffs_.push_back(0.0);
}

TruncatedSeries TruncatedSeries::unit(unsigned order) {
  std::vector<double> c(order + 1, 0.0);
  c[0] = 1.0;
  return TruncatedSeries(std::move(c));
}

TruncatedSeries TruncatedSeries::truncated(unsigned order) const {
  if (order >= this->order()) return *this;
  return TruncatedSeries({coeffs_.begin(), coeffs_.begin() + order + 1}, tail_ratio_);
}

TruncatedSeries pgf_bose_einstein(double mu0, unsigned order) {
  if (!(mu0 > 0.0) || !std::isfinite(mu0)) {
    throw std::invalid_argument("mean photon number per mode must be positive");
  }
  const double q = mu0 / (1.0 + mu0);
  std::vector<double> c(order + 1);
  c[0] = 1.0 / (1.0 + mu0);
  for (unsigned n = 1; n <= order; ++n) c[n] = c[n - 1] * q;
  return TruncatedSeries(std::move(c), q);
}

TruncatedSeries series_multiply(const TruncatedSeries& a, const TruncatedSeries& b) {
  const unsigned order = std::min(a.order(), b.order());
  std::vector<double> c(order + 1, 0.0);
  for (unsigned i = 0; i <= order; ++i) {
    if (a[i] == 0.0) continue;
    for (unsigned j = 0; i + j <= order; ++j) c[i + j] += a[i] * b[j];
  }
  std::optional<double> ratio;
  if (same_ratio(a.tail_ratio(), b.tail_ratio())) ratio = a.tail_ratio();
  return TruncatedSeries(std::move(c), ratio);
}

TruncatedSeries series_power(const TruncatedSeries& g, unsigned exponent) {
  TruncatedSeries result = TruncatedSeries::unit(g.order());
  if (exponent == 0) return result;
  result = g;
  for (unsigned i = 1; i < exponent; ++i) result = series_multiply(result, g);
  return result;
}

DerivativeNormalization derivative_normalization(const TruncatedSeries& g) {
  const auto& c = g.coeffs();
  const unsigned L = g.order();
  DerivativeNormalization out;
  for (unsigned n = 1; n <= L; ++n) out.value += double(n) * c[n];

  if (!g.tail_ratio() || L < 1 || !(c[L - 1] > 0.0) || !(c[L] > 0.0)) return out;

  // Thermal-family coefficients obey c[n+1] / c[n] = q (n + a) / (n + 1).
  // The last stored ratio pins a; the tail is then continued exactly.
  const double q = *g.tail_ratio();
  const double a = (c[L] / c[L - 1]) * double(L) / q - double(L) + 1.0;
  double term = c[L];
  double tail = 0.0;
  for (unsigned n = L, steps = 0; steps < kMaxTailTerms; ++n, ++steps) {
    term *= q * (double(n) + a) / (double(n) + 1.0);
    const double contribution = (double(n) + 1.0) * term;
    tail += contribution;
    // Ratio of the next contribution to this one; decreasing in n.
    const double ratio = q * (double(n) + 1.0 + a) / (double(n) + 1.0);
    if (ratio < 1.0 && contribution * ratio / (1.0 - ratio) < 1e-17 * (out.value + tail)) break;
  }
  out.tail_contribution = tail;
  out.value += tail;
  out.tail_corrected = true;
  return out;
}

TruncatedSeries subtract_photon(const TruncatedSeries& g) {
  if (g.order() == 0) {
    throw std::domain_error("cannot differentiate a series of order 0");
  }
  const DerivativeNormalization norm = derivative_normalization(g);
  if (!(norm.value > 0.0) || !std::isfinite(norm.value)) {
    throw std::domain_error("derivative normalization G'(1) vanishes: no photon to subtract");
  }
  std::vector<double> d(g.order());
  for (unsigned n = 0; n < g.order(); ++n) d[n] = double(n + 1) * g[n + 1] / norm.value;
  return TruncatedSeries(std::move(d), g.tail_ratio());
}

TruncatedSeries pgf_subtracted_subsystem(const SubtractionConfig& cfg, unsigned order) {
  cfg.validate();
  const unsigned M = cfg.total_modes;
  const unsigned m = cfg.observed_modes;
  const unsigned K = cfg.subtracted_photons;
  if (m >= M) {
    throw std::invalid_argument(
        "hypergeometric composition requires m < M; use the compound Poisson series for m = M");
  }
  const TruncatedSeries thermal = pgf_bose_einstein(cfg.mean_per_mode, order);

  std::vector<double> w_coeffs(order + 1);
  w_coeffs[0] = 1.0 - thermal[0];
  for (unsigned n = 1; n <= order; ++n) w_coeffs[n] = -thermal[n];
  const TruncatedSeries w(std::move(w_coeffs));

  // Polynomial coefficients (-K)_j (m)_j / ((M)_j j!) of the terminating 2F1.
  std::vector<double> poly(K + 1);
  poly[0] = 1.0;
  for (unsigned j = 0; j < K; ++j) {
    poly[j + 1] = poly[j] * (-double(K) + j) * (double(m) + j) / ((double(M) + j) * (j + 1.0));
  }

  std::vector<double> acc_coeffs(order + 1, 0.0);
  acc_coeffs[0] = poly[K];
  TruncatedSeries acc(std::move(acc_coeffs));
  for (unsigned j = K; j-- > 0;) {
    std::vector<double> next = series_multiply(acc, w).coeffs();
    next[0] += poly[j];
    acc = TruncatedSeries(std::move(next));
  }
  const TruncatedSeries result = series_multiply(series_power(thermal, m), acc);
  return TruncatedSeries(result.coeffs());
}

Pmf coefficients_to_pmf(const TruncatedSeries& g) {
  Pmf pmf;
  pmf.probs.reserve(g.order() + 1);
  for (unsigned n = 0; n <= g.order(); ++n) {
    const double c = g[n];
    if (c < -kNegativeResidueLimit) {
      throw std::domain_error("series coefficient " + std::to_string(n) + " is negative (" +
                              std::to_string(c) + "); not a probability generating function");
    }
    pmf.probs.push_back(std::max(c, 0.0));
  }
  pmf.tail_bound = std::max(0.0, 1.0 - pmf.sum());
  return pmf;
}

}  // namespace subthermal
