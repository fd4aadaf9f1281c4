#include "subthermal/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace subthermal {

namespace {

constexpr std::uint64_t kExactCountLimit = 1'000'000'000'000'000ULL;  // 1e15
constexpr std::size_t kMaxTableSize = 50'000'000;

void require_positive_mean(double mu0) {
  if (!(mu0 > 0.0) || !std::isfinite(mu0)) {
    throw std::invalid_argument("mean photon number per mode must be positive and finite, got " +
                                std::to_string(mu0));
  }
}

double log_compositions(unsigned balls, unsigned boxes) {
  if (boxes == 0) {
    return balls == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
  }
  return std::lgamma(double(boxes) + balls) - std::lgamma(double(balls) + 1.0) -
         std::lgamma(double(boxes));
}

// Tabulates eval(N) until the geometric majorant of the remaining mass drops
// below tail_tol. `ratio_bound(N)` must bound P(j+1)/P(j) for every j > N.
Pmf certified_table(const std::function<double(unsigned)>& eval,
                    const std::function<double(unsigned)>& ratio_bound, double tail_tol,
                    std::size_t min_size) {
  if (!(tail_tol > 0.0 && tail_tol < 1.0)) {
    throw std::invalid_argument("tail tolerance must lie in (0, 1), got " + std::to_string(tail_tol));
  }
  Pmf pmf;
  pmf.probs.push_back(eval(0));
  for (unsigned n = 0;; ++n) {
    const double next = eval(n + 1);
    const double rho = ratio_bound(n);
    if (rho < 1.0 && pmf.probs.size() >= min_size) {
      const double tail = next / (1.0 - rho);
      if (tail < tail_tol) {
        pmf.tail_bound = tail;
        return pmf;
      }
    }
    if (pmf.probs.size() >= kMaxTableSize) {
      throw std::runtime_error("probability table exceeds the supported size");
    }
    pmf.probs.push_back(next);
  }
}

// For a mixture of negative binomial laws with coherence parameters up to
// a_max, P(j+1)/P(j) <= q * max(1, (j+a_max)/(j+1)), which decreases in j.
std::function<double(unsigned)> negbin_ratio_bound(double mu0, double a_max) {
  const double q = mu0 / (1.0 + mu0);
  return [q, a_max](unsigned n) {
    const double j = double(n) + 1.0;
    return q * std::max(1.0, (j + a_max) / (j + 1.0));
  };
}

}  // namespace

void SubtractionConfig::validate() const {
  if (observed_modes < 1 || observed_modes > total_modes) {
    throw std::invalid_argument("observed modes m must satisfy 1 <= m <= M (m=" +
                                std::to_string(observed_modes) +
                                ", M=" + std::to_string(total_modes) + ")");
  }
  require_positive_mean(mean_per_mode);
}

double Pmf::sum() const { return std::accumulate(probs.begin(), probs.end(), 0.0); }

double bose_einstein_pmf(unsigned n, double mu0) {
  require_positive_mean(mu0);
  return std::exp(double(n) * std::log(mu0) - (double(n) + 1.0) * std::log1p(mu0));
}

double compound_poisson_pmf(unsigned n, double mu0, double a) {
  require_positive_mean(mu0);
  if (!(a > 0.0) || !std::isfinite(a)) {
    throw std::invalid_argument("coherence parameter a must be positive, got " + std::to_string(a));
  }
  const double dn = n;
  const double log_p = std::lgamma(a + dn) - std::lgamma(a) - std::lgamma(dn + 1.0) +
                       dn * std::log(mu0) - (dn + a) * std::log1p(mu0);
  return std::exp(log_p);
}

std::uint64_t compositions(unsigned balls, unsigned boxes) {
  if (boxes == 0) return balls == 0 ? 1 : 0;
  // C(boxes + balls - 1, balls) by the multiplicative recurrence; every
  // partial product is itself a binomial coefficient.
  const std::uint64_t n = std::uint64_t(boxes) + balls - 1;
  const std::uint64_t k = std::min<std::uint64_t>(balls, boxes - 1);
  unsigned __int128 acc = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    acc = acc * (n - k + i) / i;
    if (acc > kExactCountLimit) {
      throw std::overflow_error("composition count exceeds the exact integer range");
    }
  }
  return static_cast<std::uint64_t>(acc);
}

PolyaRatio polya_ratio(unsigned k, unsigned K, unsigned M, unsigned m) {
  if (k > K) throw std::invalid_argument("polya: k must not exceed K");
  if (m < 1 || m > M) throw std::invalid_argument("polya: need 1 <= m <= M");
  const std::uint64_t inside = compositions(k, m);
  const std::uint64_t outside = compositions(K - k, M - m);
  const unsigned __int128 ways = static_cast<unsigned __int128>(inside) * outside;
  if (ways > kExactCountLimit) {
    throw std::overflow_error("polya: numerator exceeds the exact integer range");
  }
  return {static_cast<std::uint64_t>(ways), compositions(K, M)};
}

double polya_pmf(unsigned k, unsigned K, unsigned M, unsigned m) {
  if (k > K) throw std::invalid_argument("polya: k must not exceed K");
  if (m < 1 || m > M) throw std::invalid_argument("polya: need 1 <= m <= M");
  if (m == M) return k == K ? 1.0 : 0.0;
  try {
    return polya_ratio(k, K, M, m).value();
  } catch (const std::overflow_error&) {
    const double log_p =
        log_compositions(k, m) + log_compositions(K - k, M - m) - log_compositions(K, M);
    return std::exp(log_p);
  }
}

double hyp2f1_terminating(unsigned K, double b, double c, double x) {
  double term = 1.0;
  double sum = 1.0;
  for (unsigned j = 0; j < K; ++j) {
    const double denom = c + j;
    if (denom == 0.0) {
      throw std::domain_error("hyp2f1: Pochhammer denominator (c)_j vanishes at j = " +
                              std::to_string(j + 1));
    }
    term *= (-double(K) + j) * (b + j) / (denom * (j + 1.0)) * x;
    sum += term;
  }
  return sum;
}

double subsystem_pmf(unsigned N, const SubtractionConfig& cfg) {
  cfg.validate();
  const unsigned M = cfg.total_modes;
  const unsigned m = cfg.observed_modes;
  const unsigned K = cfg.subtracted_photons;
  const double mu0 = cfg.mean_per_mode;
  if (m == M) {
    return compound_poisson_pmf(N, mu0, double(K) + M);
  }
  const double dN = N;
  const double dm = m;
  const double dM = M;
  const double dK = K;
  const double log_prefactor = dN * std::log(mu0) - (dN + dm) * std::log1p(mu0) - std::lgamma(dm) +
                               std::lgamma(dN + dm) - std::lgamma(dN + 1.0) + std::lgamma(dM) -
                               std::lgamma(dM - dm) + std::lgamma(dM + dK - dm) -
                               std::lgamma(dM + dK);
  const double series = hyp2f1_terminating(K, dN + dm, -dK - dM + dm + 1.0, 1.0 / (1.0 + mu0));
  return std::exp(log_prefactor) * series;
}

double subsystem_pmf_mixture(unsigned N, const SubtractionConfig& cfg) {
  cfg.validate();
  const unsigned K = cfg.subtracted_photons;
  double total = 0.0;
  for (unsigned k = 0; k <= K; ++k) {
    const double weight = polya_pmf(k, K, cfg.total_modes, cfg.observed_modes);
    if (weight == 0.0) continue;
    total += weight * compound_poisson_pmf(N, cfg.mean_per_mode, double(k) + cfg.observed_modes);
  }
  return total;
}

Pmf subsystem_table(const SubtractionConfig& cfg, double tail_tol, std::size_t min_size) {
  cfg.validate();
  const double a_max = double(cfg.observed_modes) + cfg.subtracted_photons;
  return certified_table([&cfg](unsigned n) { return subsystem_pmf(n, cfg); },
                         negbin_ratio_bound(cfg.mean_per_mode, a_max), tail_tol, min_size);
}

Pmf compound_poisson_table(double mu0, double a, double tail_tol, std::size_t min_size) {
  compound_poisson_pmf(0, mu0, a);  // parameter validation
  return certified_table([mu0, a](unsigned n) { return compound_poisson_pmf(n, mu0, a); },
                         negbin_ratio_bound(mu0, a), tail_tol, min_size);
}

double theoretical_mean(const SubtractionConfig& cfg) {
  cfg.validate();
  return cfg.observed_modes * cfg.mean_per_mode *
         (1.0 + double(cfg.subtracted_photons) / cfg.total_modes);
}

double theoretical_g2(const SubtractionConfig& cfg) {
  cfg.validate();
  const double m = cfg.observed_modes;
  const double M = cfg.total_modes;
  const double K = cfg.subtracted_photons;
  return (1.0 + 1.0 / m) / (1.0 + 1.0 / M) * (1.0 + 1.0 / (M + K));
}

Moments pmf_moments(const Pmf& pmf) {
  double mean = 0.0;
  double second = 0.0;
  for (std::size_t n = 0; n < pmf.probs.size(); ++n) {
    const double dn = double(n);
    mean += dn * pmf.probs[n];
    second += dn * dn * pmf.probs[n];
  }
  if (mean < 1e-30) {
    throw std::domain_error("g2 is undefined for a law with vanishing mean");
  }
  return {mean, (second - mean) / (mean * mean), pmf.tail_bound};
}

Moments with_dark_counts(const Moments& m, double muD) {
  if (muD < 0.0) throw std::invalid_argument("dark-count mean must be nonnegative");
  const double mean = m.mean + muD;
  const double factorial2 = m.g2 * m.mean * m.mean + 2.0 * m.mean * muD + muD * muD;
  return {mean, factorial2 / (mean * mean), m.tail_mass};
}

Pmf convolve_dark_counts(const Pmf& pmf, double muD) {
  if (!(muD >= 0.0)) {
    throw std::invalid_argument("dark-count mean must be nonnegative, got " + std::to_string(muD));
  }
  if (muD == 0.0) return pmf;

  const double target = std::max(1e-3 * pmf.tail_bound, 1e-18);
  std::vector<double> poisson{std::exp(-muD)};
  double poisson_tail = 0.0;
  for (unsigned j = 0;; ++j) {
    const double next = poisson.back() * muD / (j + 1.0);
    // Remaining Poisson terms shrink at least by muD / (j + 2) each step.
    const double rho = muD / (j + 2.0);
    if (rho < 1.0 && next / (1.0 - rho) < target) {
      poisson_tail = next / (1.0 - rho);
      break;
    }
    poisson.push_back(next);
  }

  Pmf out;
  out.probs.assign(pmf.probs.size() + poisson.size() - 1, 0.0);
  for (std::size_t i = 0; i < pmf.probs.size(); ++i) {
    for (std::size_t j = 0; j < poisson.size(); ++j) {
      out.probs[i + j] += pmf.probs[i] * poisson[j];
    }
  }
  out.tail_bound = pmf.tail_bound + poisson_tail;
  return out;
}

}  // namespace subthermal
