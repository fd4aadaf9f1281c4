#include "subthermal/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include <boost/math/special_functions/gamma.hpp>

#include "subthermal/parallel.hpp"
#include "subthermal/random.hpp"

namespace subthermal {

namespace {

constexpr std::size_t kMinGofSamples = 50;

std::vector<std::uint64_t> histogram(std::span<const unsigned> samples) {
  std::vector<std::uint64_t> counts;
  for (unsigned s : samples) {
    if (s >= counts.size()) counts.resize(std::size_t(s) + 1, 0);
    ++counts[s];
  }
  return counts;
}

struct RawMoments {
  double mean = 0.0;
  double g2 = 0.0;
  bool g2_defined = false;
};

RawMoments moments_from_sums(double sum, double sum_sq, double n) {
  RawMoments out;
  out.mean = sum / n;
  if (out.mean > 0.0) {
    out.g2 = (sum_sq / n - out.mean) / (out.mean * out.mean);
    out.g2_defined = true;
  }
  return out;
}

// Sample standard deviation, shifted by the first value so identical inputs
// give exactly zero.
double spread(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  const double shift = values.front();
  double s = 0.0;
  double s2 = 0.0;
  for (double v : values) {
    s += v - shift;
    s2 += (v - shift) * (v - shift);
  }
  const double n = double(values.size());
  return std::sqrt(std::max(0.0, (s2 - s * s / n) / (n - 1.0)));
}

}  // namespace

BinnedTrace bin_timestamps(const EventStream& events, std::int64_t tau_ns) {
  if (tau_ns <= 0) throw std::invalid_argument("bin width must be positive");
  for (const auto* channel : {&events.subtraction, &events.detection}) {
    if (!std::is_sorted(channel->begin(), channel->end())) {
      throw std::invalid_argument("timestamps must be sorted ascending per channel");
    }
    if (!channel->empty() && channel->front() < 0) {
      throw std::invalid_argument("timestamps must be nonnegative");
    }
  }

  std::int64_t n_bins = 0;
  if (events.end_ns) {
    n_bins = *events.end_ns / tau_ns;
  } else {
    std::int64_t last = -1;
    if (!events.subtraction.empty()) last = std::max(last, events.subtraction.back());
    if (!events.detection.empty()) last = std::max(last, events.detection.back());
    n_bins = last < 0 ? 0 : last / tau_ns + 1;
  }

  BinnedTrace trace;
  trace.tau_ns = tau_ns;
  trace.bins.assign(static_cast<std::size_t>(n_bins), {});
  for (std::int64_t t : events.subtraction) {
    const std::int64_t bin = t / tau_ns;
    if (bin < n_bins) ++trace.bins[static_cast<std::size_t>(bin)].subtracted;
  }
  for (std::int64_t t : events.detection) {
    const std::int64_t bin = t / tau_ns;
    if (bin < n_bins) ++trace.bins[static_cast<std::size_t>(bin)].transmitted;
  }
  return trace;
}

BinnedTrace thin_bins(const BinnedTrace& trace, std::size_t period) {
  if (period < 1) throw std::invalid_argument("thinning period must be positive");
  BinnedTrace out;
  out.tau_ns = trace.tau_ns;
  out.meta = trace.meta;
  out.bins.reserve((trace.bins.size() + period - 1) / period);
  for (std::size_t i = 0; i < trace.bins.size(); i += period) out.bins.push_back(trace.bins[i]);
  return out;
}

std::vector<GroupRecord> group_bins(const BinnedTrace& trace, unsigned M, unsigned m) {
  if (M < 1 || m < 1 || m > M) throw std::invalid_argument("grouping needs 1 <= m <= M");
  std::vector<GroupRecord> groups;
  groups.reserve(trace.bins.size() / M);
  for (std::size_t start = 0; start + M <= trace.bins.size(); start += M) {
    GroupRecord g;
    for (unsigned i = 0; i < M; ++i) {
      const BinCounts& bin = trace.bins[start + i];
      g.subtracted_total += bin.subtracted;
      if (i < m) g.observed_total += bin.transmitted;
    }
    groups.push_back(g);
  }
  return groups;
}

std::vector<unsigned> group_and_condition(const BinnedTrace& trace, unsigned M, unsigned m, unsigned K) {
  std::vector<unsigned> samples;
  for (const GroupRecord& g : group_bins(trace, M, m)) {
    if (g.subtracted_total == K) samples.push_back(g.observed_total);
  }
  return samples;
}

double chi2_survival(double chi2, unsigned dof) {
  if (dof < 1) throw std::invalid_argument("chi-square needs at least one degree of freedom");
  if (chi2 <= 0.0) return 1.0;
  return boost::math::gamma_q(0.5 * dof, 0.5 * chi2);
}

GofReport chi2_test(std::span<const unsigned> samples, const Pmf& model, double min_expected,
                    unsigned fitted_params) {
  if (samples.size() < kMinGofSamples) {
    throw std::invalid_argument("chi-square test needs at least " + std::to_string(kMinGofSamples) +
                                " samples, got " + std::to_string(samples.size()));
  }
  if (!(min_expected > 0.0)) throw std::invalid_argument("minimum expected count must be positive");
  if (model.probs.empty()) throw std::invalid_argument("empty model table");
  const double model_sum = model.sum();
  if (model_sum > 1.0 + 1e-9 || 1.0 - model_sum > model.tail_bound + 1e-9) {
    throw std::invalid_argument("model table is not normalized within its tail bound");
  }

  const double n = double(samples.size());
  const std::size_t top = model.probs.size();  // index of the open cell N >= top
  const auto counts = histogram(samples);

  std::vector<double> observed(top + 1, 0.0);
  std::vector<double> expected(top + 1, 0.0);
  for (std::size_t N = 0; N < counts.size(); ++N) observed[std::min(N, top)] += double(counts[N]);
  for (std::size_t N = 0; N < top; ++N) expected[N] = n * model.probs[N];
  expected[top] = n * std::max(0.0, 1.0 - model_sum);

  GofReport report;
  report.sample_size = samples.size();
  PooledCell group;
  bool open_group = false;
  for (std::size_t i = top + 1; i-- > 0;) {
    if (!open_group) {
      group = PooledCell{static_cast<unsigned>(i), static_cast<unsigned>(i), i == top, 0.0, 0.0};
      open_group = true;
    }
    group.first = static_cast<unsigned>(i);
    group.observed += observed[i];
    group.expected += expected[i];
    if (group.expected >= min_expected) {
      report.cells.push_back(group);
      open_group = false;
    }
  }
  if (open_group) {
    // Low-N remainder short of min_expected joins the lowest pooled cell.
    if (report.cells.empty()) {
      report.cells.push_back(group);
    } else {
      PooledCell& lowest = report.cells.back();
      lowest.first = group.first;
      lowest.observed += group.observed;
      lowest.expected += group.expected;
    }
  }
  std::reverse(report.cells.begin(), report.cells.end());

  if (report.cells.size() < 2 + fitted_params) {
    throw std::invalid_argument("too few pooled cells (" + std::to_string(report.cells.size()) +
                                ") for a chi-square test; more samples are needed");
  }
  report.dof = static_cast<unsigned>(report.cells.size()) - 1 - fitted_params;
  for (const auto& cell : report.cells) {
    const double diff = cell.observed - cell.expected;
    report.chi2 += diff * diff / cell.expected;
  }
  report.p_value = chi2_survival(report.chi2, report.dof);
  return report;
}

EstimateReport estimate_moments(std::span<const unsigned> samples, unsigned bootstrap_reps,
                                std::uint64_t seed) {
  if (samples.size() < 2) throw std::invalid_argument("moment estimation needs at least two samples");
  if (bootstrap_reps < 1) throw std::invalid_argument("bootstrap needs at least one resample");

  const double n = double(samples.size());
  double sum = 0.0;
  double sum_sq = 0.0;
  for (unsigned s : samples) {
    sum += s;
    sum_sq += double(s) * s;
  }
  const RawMoments point = moments_from_sums(sum, sum_sq, n);

  EstimateReport report;
  report.sample_size = samples.size();
  report.mu_hat = point.mean;
  report.g2_hat = point.g2;
  report.g2_defined = point.g2_defined;

  std::vector<double> means(bootstrap_reps);
  std::vector<double> g2s(bootstrap_reps);
  std::vector<char> g2_ok(bootstrap_reps, 0);
  parallel_for(bootstrap_reps, [&](std::size_t rep) {
    Rng rng = substream(seed, rep);
    double s = 0.0;
    double s2 = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto idx = static_cast<std::size_t>((static_cast<unsigned __int128>(rng()) * samples.size()) >> 64);
      const double v = samples[idx];
      s += v;
      s2 += v * v;
    }
    const RawMoments m = moments_from_sums(s, s2, n);
    means[rep] = m.mean;
    g2s[rep] = m.g2;
    g2_ok[rep] = m.g2_defined;
  });

  report.mu_se = spread(means);
  std::vector<double> defined_g2;
  for (std::size_t i = 0; i < g2s.size(); ++i) {
    if (g2_ok[i]) defined_g2.push_back(g2s[i]);
  }
  report.g2_se = report.g2_defined ? spread(defined_g2) : 0.0;
  return report;
}

Pmf measured_model(const SubtractionConfig& cfg, double muD, double tail_tol, std::size_t min_size) {
  return convolve_dark_counts(subsystem_table(cfg, tail_tol, min_size), muD);
}

Mu0Fit fit_mu0(std::span<const unsigned> samples, unsigned M, unsigned m, unsigned K, double muD,
               const Mu0SearchOptions& options) {
  if (samples.size() < kMinGofSamples) {
    throw std::invalid_argument("mu0 fit needs at least " + std::to_string(kMinGofSamples) + " samples");
  }
  const auto counts = histogram(samples);
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / double(samples.size());
  const double lower = options.lower;
  double upper = options.upper;
  if (upper <= 0.0) {
    upper = std::max(1.0, 20.0 * mean / (m * (1.0 + double(K) / M)));
  }
  if (!(lower > 0.0 && upper > lower)) throw std::invalid_argument("invalid mu0 search interval");

  auto loglik = [&](double mu0) {
    const SubtractionConfig cfg{M, m, K, mu0};
    const Pmf model = measured_model(cfg, muD, 1e-12, counts.size());
    double ll = 0.0;
    for (std::size_t N = 0; N < counts.size(); ++N) {
      if (counts[N] == 0) continue;
      ll += double(counts[N]) * std::log(std::max(model.probs[N], 1e-300));
    }
    return ll;
  };

  // Golden-section search for the maximum over x = log(mu0).
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = std::log(lower);
  double b = std::log(upper);
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = loglik(std::exp(x1));
  double f2 = loglik(std::exp(x2));
  while (b - a > options.rel_tol) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = loglik(std::exp(x2));
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = loglik(std::exp(x1));
    }
  }
  Mu0Fit fit;
  const double x = 0.5 * (a + b);
  fit.mu0 = std::exp(x);
  fit.loglik = loglik(fit.mu0);
  const double edge = 1e-6;
  fit.at_bound = (x - std::log(lower) < edge) || (std::log(upper) - x < edge);
  return fit;
}

}  // namespace subthermal
