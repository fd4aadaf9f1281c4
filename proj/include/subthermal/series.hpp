#pragma once

// Truncated power series in z for probability generating functions
// G(z) = sum_n P(n) z^n.

#include <optional>
#include <vector>

#include "subthermal/distributions.hpp"

namespace subthermal {

/// Coefficients of z^0..z^order.
///
/// Series of the thermal family (powers and normalized derivatives of the
/// Bose-Einstein PGF) carry the asymptotic coefficient ratio
/// q = mu0 / (1 + mu0), which lets operations account for the truncated
/// tail analytically.
class TruncatedSeries {
 public:
  TruncatedSeries() : coeffs_{0.0} {}
  explicit TruncatedSeries(std::vector<double> coeffs, std::optional<double> tail_ratio = {});

  static TruncatedSeries unit(unsigned order);

  unsigned order() const { return static_cast<unsigned>(coeffs_.size() - 1); }
  const std::vector<double>& coeffs() const { return coeffs_; }
  double operator[](std::size_t n) const { return coeffs_[n]; }
  const std::optional<double>& tail_ratio() const { return tail_ratio_; }

  TruncatedSeries truncated(unsigned order) const;

 private:
  std::vector<double> coeffs_;
  std::optional<double> tail_ratio_;
};

TruncatedSeries pgf_bose_einstein(double mu0, unsigned order);

/// Cauchy product truncated to the smaller of the two orders.
TruncatedSeries series_multiply(const TruncatedSeries& a, const TruncatedSeries& b);

TruncatedSeries series_power(const TruncatedSeries& g, unsigned exponent);

/// G'(1) for a truncated series.
struct DerivativeNormalization {
  double value = 0.0;
  // Contribution of the coefficients beyond the stored order. For
  // thermal-family series it is computed and included in `value`; for
  // other series it is unknown and `tail_corrected` is false.
  double tail_contribution = 0.0;
  bool tail_corrected = false;
};

DerivativeNormalization derivative_normalization(const TruncatedSeries& g);

/// G'(z) / G'(1), truncated to order - 1. Throws std::domain_error when the
/// normalization vanishes (vacuum) or the series has order 0.
TruncatedSeries subtract_photon(const TruncatedSeries& g);

/// (G_BE)^m * 2F1(-K, m; M; 1 - G_BE) with the hypergeometric factor
/// expanded as a degree-K polynomial in w = 1 - G_BE(z) and evaluated by
/// Horner's scheme. Requires m < M.
TruncatedSeries pgf_subtracted_subsystem(const SubtractionConfig& cfg, unsigned order);

/// Clamps rounding residue below zero and records 1 - sum as tail bound.
/// Throws std::domain_error for coefficients below -1e-10.
Pmf coefficients_to_pmf(const TruncatedSeries& g);

}  // namespace subthermal
