#include "asyncheat/cli/commands.hpp"

#include "asyncheat/cli/csv.hpp"
#include "asyncheat/linalg.hpp"
#include "asyncheat/modes.hpp"
#include "asyncheat/sim.hpp"

#include "json.hpp"

#include <cmath>
#include <ostream>
#include <random>

namespace asyncheat::cli {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

std::filesystem::path output_dir(const ExperimentConfig& cfg, const CommandOptions& opts) {
  auto dir = opts.out.value_or(cfg.output_dir);
  ensure_directory(dir);
  return dir;
}

// Finite doubles as numbers, anything else as a string.
json number_or_text(double x) {
  if (std::isfinite(x)) return x;
  return format_double(x);
}

sim::EnsembleOptions ensemble_options(const ExperimentConfig& cfg, const CommandOptions& opts) {
  sim::EnsembleOptions eo;
  eo.num_runs = cfg.ensemble_size;
  eo.workers = opts.workers;
  eo.cancel = opts.cancel;
  return eo;
}

void write_snapshots(const std::filesystem::path& path,
                     const std::map<int, grid::StateVector>& snaps) {
  CsvWriter csv(path, {"step", "index", "value"});
  for (const auto& [step, u] : snaps) {
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      csv.cell(step).cell(static_cast<long long>(i)).cell(u(i)).end_row();
    }
  }
  csv.close();
}

}  // namespace

WorstModeAnalysis analyze_worst_mode(const ExperimentConfig& cfg, const CancellationToken* cancel) {
  const auto aspec = cfg.aspec();
  const auto proj = modes::build_projector(aspec);
  WorstModeAnalysis a;
  const auto wm = modes::build_mode_matrix(aspec, modes::most_delayed_pattern(aspec));
  a.w_tilde = modes::deflate(wm.w, proj);
  a.spectral_radius = linalg::spectral_radius(a.w_tilde);
  a.certificate = analysis::solve_discrete_lyapunov(a.w_tilde, analysis::LyapunovMethod::automatic,
                                                    cancel);
  a.lambda = modes::expected_matrix(aspec, cfg.distribution());
  a.lambda_spectral_radius = linalg::spectral_radius(a.lambda);
  a.mean = analysis::verify_mean_contraction(a.lambda, a.certificate, cancel);

  const VectorXd x0 = cfg.initial_state().replicate(aspec.buffer_len(), 1);
  a.e0 = x0 - proj.apply(x0);
  a.tail = analysis::tail_constants(a.w_tilde, cfg.tail_horizon, cancel);
  return a;
}

void cmd_simulate(const ExperimentConfig& cfg, const CommandOptions& opts) {
  const auto rc = cfg.run_config();
  const auto sync = sim::run_sync_reference(rc);
  auto eo = ensemble_options(cfg, opts);
  eo.keep_run_norms = cfg.per_run_norms;
  eo.keep_run_snapshots = true;
  const auto ens = sim::run_ensemble(rc, eo);

  const auto dir = output_dir(cfg, opts);
  {
    CsvWriter csv(dir / "sync_trajectory.csv", {"step", "error_norm", "error_inf_norm"});
    for (std::size_t k = 0; k < sync.error_norms.size(); ++k) {
      csv.cell(k).cell(sync.error_norms[k]).cell(sync.error_inf_norms[k]).end_row();
    }
    csv.close();
  }
  write_snapshots(dir / "sync_snapshots.csv", sync.snapshots);
  {
    std::vector<std::string> header = {"step", "mean_error_norm", "mean_squared_error_norm",
                                       "max_error_inf_norm"};
    if (cfg.per_run_norms) {
      for (int i = 0; i < cfg.ensemble_size; ++i) header.push_back("run_" + std::to_string(i));
    }
    CsvWriter csv(dir / "async_ensemble.csv", header);
    for (std::size_t k = 0; k < ens.mean_error_norm.size(); ++k) {
      csv.cell(k)
          .cell(ens.mean_error_norm[k])
          .cell(ens.mean_squared_norm[k])
          .cell(ens.max_error_inf_norm[k]);
      for (const auto& run : ens.run_error_norms) csv.cell(run[k]);
      csv.end_row();
    }
    csv.close();
  }
  {
    CsvWriter csv(dir / "async_snapshots.csv", {"run", "step", "index", "value"});
    for (std::size_t r = 0; r < ens.run_snapshots.size(); ++r) {
      for (const auto& [step, u] : ens.run_snapshots[r]) {
        for (Eigen::Index i = 0; i < u.size(); ++i) {
          csv.cell(r).cell(step).cell(static_cast<long long>(i)).cell(u(i)).end_row();
        }
      }
    }
    csv.close();
  }
  {
    CsvWriter csv(dir / "exceedance.csv", {"step", "epsilon", "empirical_probability"});
    for (std::size_t k = 0; k < ens.exceedance.size(); ++k) {
      for (std::size_t j = 0; j < cfg.epsilons.size(); ++j) {
        csv.cell(k).cell(cfg.epsilons[j]).cell(ens.exceedance[k][j]).end_row();
      }
    }
    csv.close();
  }
}

void cmd_analyze(const ExperimentConfig& cfg, const CommandOptions& opts) {
  const auto a = analyze_worst_mode(cfg, opts.cancel);
  const auto aspec = cfg.aspec();
  const double e0_norm = a.e0.norm();
  const auto rate = analysis::convergence_rate_bound(a.certificate, a.mean.k_const, e0_norm,
                                                     cfg.steps);

  const auto dir = output_dir(cfg, opts);
  {
    CsvWriter csv(dir / "rate_bound.csv", {"step", "mean_error_bound"});
    for (std::size_t k = 0; k < rate.size(); ++k) csv.cell(k).cell(rate[k]).end_row();
    csv.close();
  }
  {
    std::vector<analysis::ErrorBoundCurve> curves;
    for (double eps : cfg.epsilons) {
      curves.push_back(
          analysis::error_probability_bound(a.tail, a.e0, eps, cfg.steps, aspec.dim()));
    }
    CsvWriter csv(dir / "prob_bound.csv", {"step", "epsilon", "bound"});
    for (int k = 0; k <= cfg.steps; ++k) {
      for (const auto& c : curves) {
        csv.cell(k).cell(c.epsilon).cell(c.values[static_cast<std::size_t>(k)]).end_row();
      }
    }
    csv.close();
  }

  json cert;
  cert["dimension"] = aspec.dim();
  cert["mode_count"] = modes::mode_count_text(aspec);
  cert["e0_norm"] = e0_norm;
  cert["worst_mode"] = {
      {"spectral_radius", a.spectral_radius},
      {"lambda_max_p", a.certificate.lambda_max},
      {"lambda_min_p", a.certificate.lambda_min},
      {"rate", a.certificate.rate},
      {"residual", a.certificate.residual},
      {"method", analysis::to_string(a.certificate.method)},
  };
  json mean = {
      {"k_const", a.mean.k_const},
      {"identity_margin", a.mean.identity_margin},
      {"identity_path_holds", a.mean.identity_path_holds},
      {"rate_dominated", a.mean.rate_dominated},
      {"lambda_spectral_radius", a.lambda_spectral_radius},
      {"lambda_min_singular_value", a.mean.min_singular_value},
      {"lambda_singular", a.mean.lambda_singular},
  };
  if (a.mean.solved) {
    mean["lambda_max_p_lambda"] = a.mean.solved->lambda_max;
    mean["lambda_min_p_lambda"] = a.mean.solved->lambda_min;
    mean["residual_p_lambda"] = a.mean.solved->residual;
  }
  cert["mean_bound"] = mean;
  cert["second_moment"] = {
      {"k0", a.tail.k0},
      {"c0", a.tail.c0},
      {"c1", a.tail.c1},
      {"rate", a.tail.second_moment_rate},
      {"proposition_bound", number_or_text(a.tail.proposition_bound)},
      {"k_const", number_or_text(a.tail.lifted_k_const)},
  };
  write_text_file(dir / "certificate.json", cert.dump(2) + "\n");
}

void cmd_verify(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& report) {
  const auto aspec = cfg.aspec();
  const auto dist = cfg.distribution();
  const auto proj = modes::build_projector(aspec);
  const auto modes_all = modes::enumerate_modes(aspec, opts.cap.value_or(cfg.cap));

  bool passed = true;
  json out;
  out["mode_count"] = modes_all.size();

  int eigen_failures = 0;
  double worst_right = 0.0;
  double worst_left = 0.0;
  double prob_sum = 0.0;
  for (const auto& m : modes_all) {
    throw_if_cancelled(opts.cancel);
    const auto rep = modes::verify_eigenstructure(m.w, proj);
    if (!rep.passed) ++eigen_failures;
    for (double x : rep.right_residuals) worst_right = std::max(worst_right, x);
    for (double x : rep.left_residuals) worst_left = std::max(worst_left, x);
    prob_sum += modes::mode_probability(m.pattern, dist);
  }
  out["eigenstructure"] = {{"failures", eigen_failures},
                           {"max_right_residual", worst_right},
                           {"max_left_residual", worst_left}};
  passed = passed && eigen_failures == 0;

  const double prob_err = std::abs(prob_sum - 1.0);
  out["probability_sum"] = {{"value", prob_sum}, {"abs_error", prob_err}};
  passed = passed && prob_err < 1e-12;

  const MatrixXd lf = modes::expected_matrix(aspec, dist);
  const MatrixXd le = modes::expected_matrix_enumerated(aspec, dist, opts.cap.value_or(cfg.cap));
  const double lambda_diff = (lf - le).cwiseAbs().maxCoeff();
  out["expected_matrix"] = {{"max_abs_diff", lambda_diff}};
  passed = passed && lambda_diff < 1e-12;

  // Random histories, not a primed buffer, so every block column is exercised.
  const sim::AsyncStencil stencil(aspec);
  const sim::DelaySampler sampler(dist);
  sim::Rng rng(cfg.seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  const auto n = aspec.grid_size();
  double sim_diff = 0.0;
  constexpr int kTrials = 5;
  constexpr int kSteps = 100;
  for (int t = 0; t < kTrials; ++t) {
    std::vector<grid::StateVector> hist(static_cast<std::size_t>(aspec.buffer_len()),
                                        grid::StateVector(n));
    for (auto& u : hist)
      for (Eigen::Index i = 0; i < n; ++i) u(i) = uni(rng);
    sim::AsyncSimState state(hist, 0);
    VectorXd x = state.augmented();
    modes::DelayPattern pattern;
    for (int k = 0; k < kSteps; ++k) {
      sampler.sample(rng, pattern);
      stencil.step(state, pattern);
      x = modes::build_mode_matrix(aspec, pattern).w * x;
      sim_diff = std::max(sim_diff, (state.augmented() - x).cwiseAbs().maxCoeff());
    }
  }
  out["simulator_matrix"] = {{"trials", kTrials}, {"steps", kSteps}, {"max_abs_diff", sim_diff}};
  passed = passed && sim_diff < 1e-12;

  out["passed"] = passed;
  report << out.dump(2) << "\n";
  if (!passed) throw VerificationFailed("one or more verification checks failed");
}

void cmd_compare(const ExperimentConfig& cfg, const CommandOptions& opts) {
  const auto rc = cfg.run_config();
  auto eo = ensemble_options(cfg, opts);
  if (cfg.sweep) eo.moment_steps = {cfg.sweep->step};
  const auto ens = sim::run_ensemble(rc, eo);
  const auto a = analyze_worst_mode(cfg, opts.cancel);
  const auto d = cfg.aspec().dim();

  const auto dir = output_dir(cfg, opts);
  {
    std::vector<analysis::ErrorBoundCurve> curves;
    for (double eps : cfg.epsilons) {
      curves.push_back(analysis::error_probability_bound(a.tail, a.e0, eps, cfg.steps, d));
    }
    CsvWriter csv(dir / "comparison.csv", {"step", "epsilon", "empirical_probability",
                                           "empirical_markov", "analytic_bound"});
    for (std::size_t k = 0; k < ens.exceedance.size(); ++k) {
      for (std::size_t j = 0; j < curves.size(); ++j) {
        csv.cell(k)
            .cell(cfg.epsilons[j])
            .cell(ens.exceedance[k][j])
            .cell(ens.mean_squared_norm[k] / cfg.epsilons[j])
            .cell(curves[j].values[k])
            .end_row();
      }
    }
    csv.close();
  }
  if (cfg.sweep) {
    const auto& mom = ens.moments.front();
    double second = 0.0;
    for (double s : mom.run_squared_norms) second += s;
    second /= static_cast<double>(mom.run_squared_norms.size());
    CsvWriter csv(dir / "epsilon_sweep.csv", {"step", "epsilon", "empirical_probability",
                                              "empirical_markov", "analytic_bound"});
    for (double eps : cfg.sweep->epsilons) {
      double hits = 0.0;
      for (double s : mom.run_squared_norms) hits += s > eps ? 1.0 : 0.0;
      const auto bound = analysis::error_probability_bound(a.tail, a.e0, eps, mom.step, d);
      csv.cell(mom.step)
          .cell(eps)
          .cell(hits / static_cast<double>(mom.run_squared_norms.size()))
          .cell(second / eps)
          .cell(bound.values.back())
          .end_row();
    }
    csv.close();
  }
}

int run_command(const std::string& command, const CommandOptions& opts, std::ostream& out,
                std::ostream& err) {
  auto report = [&](const char* kind, const std::string& message, int code) {
    err << json{{"status", "error"}, {"kind", kind}, {"message", message}}.dump() << "\n";
    return code;
  };
  try {
    const auto cfg = load_config(opts.config);
    if (command == "simulate") {
      cmd_simulate(cfg, opts);
    } else if (command == "analyze") {
      cmd_analyze(cfg, opts);
    } else if (command == "verify") {
      cmd_verify(cfg, opts, out);
    } else if (command == "compare") {
      cmd_compare(cfg, opts);
    } else {
      return report("usage", "unknown command '" + command + "'", kExitConfig);
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    return report("config", e.what(), kExitConfig);
  } catch (const modes::ModeCapExceeded& e) {
    return report("config", e.what(), kExitConfig);
  } catch (const IoError& e) {
    return report("io", e.what(), kExitIo);
  } catch (const VerificationFailed& e) {
    return report("verification", e.what(), kExitNumerical);
  } catch (const analysis::LyapunovError& e) {
    return report("numerical", e.what(), kExitNumerical);
  } catch (const analysis::TailHorizonExhausted& e) {
    return report("numerical", e.what(), kExitNumerical);
  } catch (const modes::DeflationError& e) {
    return report("numerical", e.what(), kExitNumerical);
  } catch (const Cancelled& e) {
    return report("cancelled", e.what(), kExitCancelled);
  } catch (const std::exception& e) {
    return report("internal", e.what(), kExitInternal);
  }
}

}  // namespace asyncheat::cli
