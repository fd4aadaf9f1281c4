#include "subthermal/commands.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "subthermal/random.hpp"
#include "subthermal/trace.hpp"

namespace subthermal::cli {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot open " + path.string() + " for writing");
  return out;
}

std::filesystem::path sibling(const std::filesystem::path& base, const std::string& suffix) {
  auto name = base.stem().string() + suffix;
  return base.has_parent_path() ? base.parent_path() / name : std::filesystem::path(name);
}

void write_pmf_csv(std::ostream& out, const Pmf& model, const Pmf& with_dark) {
  out << "N,P_model,P_with_dark\n";
  const std::size_t rows = std::max(model.size(), with_dark.size());
  for (std::size_t n = 0; n < rows; ++n) {
    out << n << ',' << num(model[n]) << ',' << num(with_dark[n]) << '\n';
  }
}

constexpr double kFigureTail = 1e-12;
constexpr unsigned kFigureMaxModes = 5;
constexpr unsigned kFigureMaxSubtracted = 5;

void write_distribution_curve(const std::filesystem::path& dir, const std::string& fig,
                              const SubtractionConfig& cfg, double muD_per_mode) {
  const Pmf model = subsystem_table(cfg, kFigureTail);
  const Pmf with_dark = convolve_dark_counts(model, cfg.observed_modes * muD_per_mode);
  const auto path = dir / ("fig" + fig + "_M" + std::to_string(cfg.total_modes) + "_m" +
                           std::to_string(cfg.observed_modes) + "_K" +
                           std::to_string(cfg.subtracted_photons) + ".csv");
  auto out = open_output(path);
  write_pmf_csv(out, model, with_dark);
}

// Mean or g2 against the observed mode number for one (M, K) curve.
void write_moment_curve(const std::filesystem::path& dir, const std::string& fig, unsigned M,
                        unsigned K, double mu0, double muD_per_mode) {
  const bool mean_curve = fig == "5a";
  auto out = open_output(dir / ("fig" + fig + "_M" + std::to_string(M) + "_K" + std::to_string(K) + ".csv"));
  out << (mean_curve ? "m,mu,mu_with_dark\n" : "m,g2,g2_with_dark\n");
  for (unsigned m = 1; m <= M; ++m) {
    const SubtractionConfig cfg{M, m, K, mu0};
    const Moments ideal{theoretical_mean(cfg), theoretical_g2(cfg), 0.0};
    const Moments dark = with_dark_counts(ideal, m * muD_per_mode);
    if (mean_curve) {
      out << m << ',' << num(ideal.mean) << ',' << num(dark.mean) << '\n';
    } else {
      out << m << ',' << num(ideal.g2) << ',' << num(dark.g2) << '\n';
    }
  }
}

BinnedTrace load_trace(const AnalyzeOptions& options) {
  const auto kind = detect_trace_kind(options.trace_path);
  std::ifstream in(options.trace_path);
  if (kind == TraceFileKind::binned) return read_trace(in);
  return bin_timestamps(read_events(in), options.tau_ns);
}

}  // namespace

std::vector<AnalyzeRow> analyze_trace(const BinnedTrace& trace, const AnalyzeOptions& options) {
  if (options.m < 1 || options.m > options.M) throw std::invalid_argument("need 1 <= m <= M");
  const BinnedTrace thinned = thin_bins(trace, options.thin_period);
  const auto groups = group_bins(thinned, options.M, options.m);
  const double muD = options.m * options.muD_per_mode;

  std::vector<AnalyzeRow> rows;
  for (unsigned K : options.K_list) {
    AnalyzeRow row;
    row.K = K;
    std::vector<unsigned> samples;
    for (const auto& g : groups) {
      if (g.subtracted_total == K) samples.push_back(g.observed_total);
    }
    row.samples = samples.size();
    row.mu0 = options.mu0;
    const SubtractionConfig nominal{options.M, options.m, K, options.mu0};
    row.theory = with_dark_counts({theoretical_mean(nominal), theoretical_g2(nominal), 0.0}, muD);
    if (samples.size() >= 50) {
      unsigned fitted = 0;
      if (options.fit_mu0) {
        row.mu0 = fit_mu0(samples, options.M, options.m, K, muD).mu0;
        fitted = 1;
      }
      const Pmf model = measured_model({options.M, options.m, K, row.mu0}, muD);
      try {
        row.gof = chi2_test(samples, model, options.min_expected, fitted);
        row.sufficient = true;
        row.rejected = row.gof.p_value < options.alpha;
      } catch (const std::invalid_argument&) {
        row.sufficient = false;  // too few pooled cells
      }
    }
    if (samples.size() >= 2) {
      row.estimate = estimate_moments(samples, options.bootstrap_reps, mix_seed(options.seed, K));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

int cmd_pmf(const PmfOptions& options, std::ostream& err) {
  try {
    options.cfg.validate();
    const Pmf model = subsystem_table(options.cfg, options.tail_tol);
    const Pmf with_dark = convolve_dark_counts(model, options.muD);
    auto out = open_output(options.out);
    write_pmf_csv(out, model, with_dark);
    return kSuccess;
  } catch (const std::invalid_argument& e) {
    err << "pmf: " << e.what() << '\n';
    return kInvalidArguments;
  }
}

int cmd_figures(const FiguresOptions& options, std::ostream& err) {
  const std::string& fig = options.fig_id;
  try {
    if (!(options.mu0 > 0.0) || options.muD_per_mode < 0.0) {
      throw std::invalid_argument("need mu0 > 0 and muD >= 0");
    }
    std::filesystem::create_directories(options.out_dir);
    for (unsigned K = 0; K <= kFigureMaxSubtracted; ++K) {
      if (fig == "4a") {
        for (unsigned M = 1; M <= kFigureMaxModes; ++M) {
          write_distribution_curve(options.out_dir, fig, {M, M, K, options.mu0}, options.muD_per_mode);
        }
      } else if (fig == "4b") {
        for (unsigned M = 1; M <= kFigureMaxModes; ++M) {
          write_distribution_curve(options.out_dir, fig, {M, 1, K, options.mu0}, options.muD_per_mode);
        }
      } else if (fig == "4c") {
        for (unsigned m = 1; m <= kFigureMaxModes; ++m) {
          write_distribution_curve(options.out_dir, fig, {kFigureMaxModes, m, K, options.mu0},
                                   options.muD_per_mode);
        }
      } else if (fig == "5a" || fig == "5b") {
        for (unsigned M = 1; M <= kFigureMaxModes; ++M) {
          write_moment_curve(options.out_dir, fig, M, K, options.mu0, options.muD_per_mode);
        }
      } else {
        throw std::invalid_argument("unknown figure id '" + fig + "' (expected 4a, 4b, 4c, 5a or 5b)");
      }
    }
    return kSuccess;
  } catch (const std::invalid_argument& e) {
    err << "figures: " << e.what() << '\n';
    return kInvalidArguments;
  }
}

int cmd_simulate(const SimulateOptions& options, std::ostream& err) {
  ConditionalSamples result;
  try {
    result = run_conditional(options.sim);
  } catch (const std::invalid_argument& e) {
    err << "simulate: " << e.what() << '\n';
    return kInvalidArguments;
  } catch (const std::runtime_error& e) {
    err << "simulate: " << e.what() << '\n';
    return kStatisticalFailure;
  }
  auto out = open_output(options.out);
  out << "N,k_observed\n";
  for (std::size_t i = 0; i < result.photons.size(); ++i) {
    out << result.photons[i] << ',' << result.observed_subtracted[i] << '\n';
  }
  const auto summary_path = options.summary.empty() ? sibling(options.out, "_summary.csv") : options.summary;
  auto summary = open_output(summary_path);
  summary << "M,m,K,source_mean,reflectivity,mu0_effective,accepted,attempts,acceptance_rate\n";
  const SimConfig& c = options.sim;
  summary << c.total_modes << ',' << c.observed_modes << ',' << c.subtracted_photons << ','
          << num(c.source_mean) << ',' << num(c.reflectivity) << ','
          << num(tap_conditioned_mean(c.source_mean, c.reflectivity)) << ',' << result.photons.size()
          << ',' << result.attempts << ',' << num(result.acceptance_rate) << '\n';
  return kSuccess;
}

int cmd_synth(const SynthOptions& options, std::ostream& err) {
  BinnedTrace trace;
  try {
    trace = synth_experiment_trace(options.trace);
  } catch (const std::invalid_argument& e) {
    err << "synth: " << e.what() << '\n';
    return kInvalidArguments;
  }
  try {
    auto out = open_output(options.out);
    write_trace(out, trace);
    out.flush();
    if (!out) throw std::ios_base::failure("write failed for " + options.out.string());
  } catch (const std::exception& e) {
    err << "synth: " << e.what() << '\n';
    return kInputFormat;
  }
  return kSuccess;
}

int cmd_analyze(const AnalyzeOptions& options, std::ostream& err) {
  BinnedTrace trace;
  try {
    trace = load_trace(options);
  } catch (const TraceFormatError& e) {
    err << "analyze: " << options.trace_path.string() << ": " << e.what() << '\n';
    return kInputFormat;
  } catch (const std::exception& e) {
    err << "analyze: " << e.what() << '\n';
    return kInputFormat;
  }

  std::vector<AnalyzeRow> rows;
  try {
    rows = analyze_trace(trace, options);
  } catch (const std::invalid_argument& e) {
    err << "analyze: " << e.what() << '\n';
    return kInvalidArguments;
  }

  auto report = open_output(options.report);
  report << "M,m,K,samples,status,mu0,chi2,dof,p_value,mu_hat,mu_se,g2_hat,g2_se,mu_theory,g2_theory\n";
  bool any_rejected = false;
  for (const auto& row : rows) {
    report << options.M << ',' << options.m << ',' << row.K << ',' << row.samples << ',';
    if (!row.sufficient) {
      report << "insufficient samples," << num(row.mu0) << ",,,,";
    } else {
      any_rejected = any_rejected || row.rejected;
      report << (row.rejected ? "reject" : "pass") << ',' << num(row.mu0) << ',' << num(row.gof.chi2)
             << ',' << row.gof.dof << ',' << num(row.gof.p_value) << ',';
    }
    if (row.samples >= 2) {
      report << num(row.estimate.mu_hat) << ',' << num(row.estimate.mu_se) << ',';
      if (row.estimate.g2_defined) {
        report << num(row.estimate.g2_hat) << ',' << num(row.estimate.g2_se) << ',';
      } else {
        report << ",,";
      }
    } else {
      report << ",,,,";
    }
    report << num(row.theory.mean) << ',' << num(row.theory.g2) << '\n';
  }

  const auto hist_path =
      options.histogram.empty() ? sibling(options.report, "_hist.csv") : options.histogram;
  auto hist = open_output(hist_path);
  hist << "K,N_first,N_last,observed,expected\n";
  for (const auto& row : rows) {
    if (!row.sufficient) continue;
    for (const auto& cell : row.gof.cells) {
      hist << row.K << ',' << cell.first << ',';
      if (cell.open_top) {
        hist << "inf";
      } else {
        hist << cell.last;
      }
      hist << ',' << num(cell.observed) << ',' << num(cell.expected) << '\n';
    }
  }

  if (options.fail_on_reject && any_rejected) return kStatisticalFailure;
  return kSuccess;
}

int cmd_moments(const MomentsOptions& options, std::ostream& err) {
  try {
    options.cfg.validate();
    const Moments ideal{theoretical_mean(options.cfg), theoretical_g2(options.cfg), 0.0};
    const Moments dark = with_dark_counts(ideal, options.muD);
    const Moments table = pmf_moments(measured_model(options.cfg, options.muD));
    auto out = open_output(options.out);
    out << "M,m,K,mu0,muD,mean,g2,mean_with_dark,g2_with_dark,table_mean_with_dark,table_g2_with_dark\n";
    const auto& c = options.cfg;
    out << c.total_modes << ',' << c.observed_modes << ',' << c.subtracted_photons << ','
        << num(c.mean_per_mode) << ',' << num(options.muD) << ',' << num(ideal.mean) << ','
        << num(ideal.g2) << ',' << num(dark.mean) << ',' << num(dark.g2) << ',' << num(table.mean)
        << ',' << num(table.g2) << '\n';
    return kSuccess;
  } catch (const std::invalid_argument& e) {
    err << "moments: " << e.what() << '\n';
    return kInvalidArguments;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Photon-number statistics of multimode thermal light after photon subtraction"};
  app.require_subcommand(1);

  auto add_config = [](CLI::App* sub, SubtractionConfig& cfg) {
    sub->add_option("--M", cfg.total_modes, "total thermal modes")->required();
    sub->add_option("--m", cfg.observed_modes, "observed modes")->required();
    sub->add_option("--K", cfg.subtracted_photons, "subtracted photons")->required();
    sub->add_option("--mu0", cfg.mean_per_mode, "mean photons per mode before subtraction")->required();
  };

  PmfOptions pmf;
  auto* pmf_cmd = app.add_subcommand("pmf", "tabulate the subsystem photon-number law");
  add_config(pmf_cmd, pmf.cfg);
  pmf_cmd->add_option("--muD", pmf.muD, "total dark-count mean over the observed modes");
  pmf_cmd->add_option("--tail-tol", pmf.tail_tol, "certified tail tolerance");
  pmf_cmd->add_option("--out", pmf.out, "output CSV")->required();

  FiguresOptions figures;
  auto* fig_cmd = app.add_subcommand("figures", "emit theory curves (4a, 4b, 4c, 5a, 5b)");
  fig_cmd->add_option("fig_id", figures.fig_id, "figure id")->required();
  fig_cmd->add_option("--mu0", figures.mu0, "mean photons per mode");
  fig_cmd->add_option("--muD", figures.muD_per_mode, "dark-count mean per observed mode");
  fig_cmd->add_option("--out-dir", figures.out_dir, "output directory")->required();

  SimulateOptions sim;
  auto* sim_cmd = app.add_subcommand("simulate", "photon-level Monte Carlo with post-selection");
  sim_cmd->add_option("--M", sim.sim.total_modes)->required();
  sim_cmd->add_option("--m", sim.sim.observed_modes)->required();
  sim_cmd->add_option("--K", sim.sim.subtracted_photons)->required();
  sim_cmd->add_option("--mu-in", sim.sim.source_mean, "per-mode mean ahead of the tap")->required();
  sim_cmd->add_option("--r", sim.sim.reflectivity, "tap reflectivity");
  sim_cmd->add_option("--trials", sim.sim.trials, "accepted samples to collect")->required();
  sim_cmd->add_option("--seed", sim.sim.seed)->required();
  sim_cmd->add_option("--batches", sim.sim.batches, "RNG substreams");
  sim_cmd->add_option("--min-acceptance", sim.sim.min_acceptance);
  sim_cmd->add_option("--out", sim.out, "samples CSV")->required();
  sim_cmd->add_option("--summary", sim.summary, "summary CSV");

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic binned trace");
  synth_cmd->add_option("--mu0", synth.trace.mu0, "per-mode mean of the conditioned light");
  synth_cmd->add_option("--muD", synth.trace.dark_mean_per_bin, "dark-count mean per bin");
  synth_cmd->add_option("--tau-ns", synth.trace.tau_ns, "bin width");
  synth_cmd->add_option("--thin-period", synth.trace.thin_period_bins, "recommended thinning period");
  synth_cmd->add_option("--n-bins", synth.trace.n_bins)->required();
  synth_cmd->add_option("--p-subtract", synth.trace.p_subtract, "tap probability per photon");
  synth_cmd->add_option("--seed", synth.trace.seed)->required();
  synth_cmd->add_option("--out", synth.out)->required();

  AnalyzeOptions analyze;
  auto* an_cmd = app.add_subcommand("analyze", "bin, thin, group, condition and test a trace");
  an_cmd->add_option("--trace", analyze.trace_path)->required()->check(CLI::ExistingFile);
  an_cmd->add_option("--M", analyze.M)->required();
  an_cmd->add_option("--m", analyze.m)->required();
  an_cmd->add_option("--K", analyze.K_list, "subtracted-photon classes")->delimiter(',');
  an_cmd->add_option("--mu0", analyze.mu0);
  an_cmd->add_option("--muD", analyze.muD_per_mode, "dark-count mean per observed mode");
  an_cmd->add_option("--thin-period", analyze.thin_period);
  an_cmd->add_option("--tau-ns", analyze.tau_ns, "bin width for raw event files");
  an_cmd->add_flag("--fit-mu0", analyze.fit_mu0, "fit mu0 by maximum likelihood per class");
  an_cmd->add_option("--bootstrap", analyze.bootstrap_reps);
  an_cmd->add_option("--min-expected", analyze.min_expected);
  an_cmd->add_option("--alpha", analyze.alpha);
  an_cmd->add_option("--seed", analyze.seed)->required();
  an_cmd->add_flag("--fail-on-reject", analyze.fail_on_reject, "exit 4 if any class is rejected");
  an_cmd->add_option("--report", analyze.report)->required();
  an_cmd->add_option("--histogram", analyze.histogram);

  MomentsOptions moments;
  auto* mom_cmd = app.add_subcommand("moments", "mean and g2 of the subsystem law");
  add_config(mom_cmd, moments.cfg);
  mom_cmd->add_option("--muD", moments.muD, "total dark-count mean over the observed modes");
  mom_cmd->add_option("--out", moments.out)->required();

  std::vector<std::string> argv_storage = args;
  if (argv_storage.empty()) argv_storage.push_back("subthermal");
  std::vector<char*> argv;
  for (auto& a : argv_storage) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return kInvalidArguments;
  }

  try {
    if (pmf_cmd->parsed()) return cmd_pmf(pmf, err);
    if (fig_cmd->parsed()) return cmd_figures(figures, err);
    if (sim_cmd->parsed()) return cmd_simulate(sim, err);
    if (synth_cmd->parsed()) return cmd_synth(synth, err);
    if (an_cmd->parsed()) return cmd_analyze(analyze, err);
    if (mom_cmd->parsed()) return cmd_moments(moments, err);
  } catch (const std::ios_base::failure& e) {
    err << e.what() << '\n';
    return kInputFormat;
  }
  return kInvalidArguments;
}

}  // namespace subthermal::cli
