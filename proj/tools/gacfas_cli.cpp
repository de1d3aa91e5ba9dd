// Command-line front end: training runs, leave-one-out, gamma x rho sweeps,
// loss-landscape slices, convergence traces and the gradient check.
//
// Exit codes: 0 success, 1 validation error, 2 runtime error.

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gacfas/config.hpp"
#include "gacfas/diagnostics.hpp"
#include "gacfas/harness.hpp"
#include "gacfas/io.hpp"

namespace {

using namespace gacfas;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

std::vector<double> parse_csv_doubles(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ContractError(std::string(what) + ": not a number: '" + item + "'");
    }
  }
  if (out.empty()) throw ContractError(std::string(what) + ": empty list");
  return out;
}

ExperimentConfig load_with_override(const std::string& path, const std::string& out_dir) {
  ExperimentConfig cfg = load_config(path);
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  return cfg;
}

void print_row(const ProtocolRow& r, const std::string& label) {
  std::printf("%-8s runs=%zu  HTER %.4f +- %.4f  AUC %.4f +- %.4f  TPR95 %.4f +- %.4f\n",
              label.c_str(), r.runs, r.hter.mean, r.hter.std, r.auc.mean, r.auc.std, r.tpr95.mean,
              r.tpr95.std);
}

int cmd_train(const std::string& config, std::uint64_t seed, const std::string& out,
              bool full_diag) {
  ExperimentConfig cfg = load_with_override(config, out);
  if (full_diag) cfg.diagnostics_every = 1;
  const RunRecord rec = run_training(cfg, seed);
  const auto dir = std::filesystem::path(cfg.output_dir) / run_dir_name(rec.manifest.held_out, seed);
  write_outputs(rec, dir);
  const EvalReport w = window_mean(rec.evals, cfg.eval_window);
  std::printf("held %zu seed %llu: last-%zu HTER %.4f AUC %.4f TPR95 %.4f -> %s\n",
              rec.manifest.held_out, static_cast<unsigned long long>(seed), cfg.eval_window,
              w.hter, w.auc, w.tpr95, dir.string().c_str());
  return kExitOk;
}

int cmd_loo(const std::string& config, const std::string& out) {
  const ExperimentConfig cfg = load_with_override(config, out);
  const auto dir = std::filesystem::path(cfg.output_dir) / "loo";
  const ProtocolSummary s = run_leave_one_out(cfg, dir);
  write_outputs(s, dir);
  for (const auto& r : s.rows) print_row(r, "held " + std::to_string(r.held));
  print_row(s.overall, "overall");
  return kExitOk;
}

int cmd_sweep(const std::string& config, const std::string& gammas, const std::string& rhos,
              const std::string& out) {
  const ExperimentConfig cfg = load_with_override(config, out);
  const auto cells =
      run_sweep(cfg, parse_csv_doubles(gammas, "--gammas"), parse_csv_doubles(rhos, "--rhos"));
  const auto dir = std::filesystem::path(cfg.output_dir) / "sweep";
  write_sweep(cells, dir);
  for (const auto& c : cells) {
    char label[64];
    std::snprintf(label, sizeof(label), "g=%g r=%g", c.gamma, c.rho);
    print_row(c.summary.overall, label);
  }
  return kExitOk;
}

int cmd_landscape(const std::string& config, const std::string& checkpoint, std::size_t dims,
                  double radius, std::size_t steps, std::uint64_t seed, const std::string& out) {
  const ExperimentConfig cfg = load_with_override(config, out);
  const Vec64 theta = read_params_bin(checkpoint);
  if (theta.size() != cfg.model.param_count()) {
    throw ContractError("checkpoint has " + std::to_string(theta.size()) +
                        " parameters, model needs " + std::to_string(cfg.model.param_count()));
  }
  const std::size_t held = cfg.held_out.value_or(cfg.domains.size() - 1);
  const LeaveOneOut split = leave_one_out(cfg.domains, held);
  Prng prng(seed);
  const LandscapeGrid grid =
      landscape_slice(cfg.model, theta, split.train.merged(), dims, radius, steps, prng);
  const auto path =
      std::filesystem::path(cfg.output_dir) / ("landscape_" + std::to_string(dims) + "d.csv");
  write_landscape_csv(grid, path);
  std::printf("center loss %.6f, %zu grid points -> %s\n", grid.center_loss, grid.losses.size(),
              path.string().c_str());
  return kExitOk;
}

int cmd_convergence(const std::string& config, std::size_t window, const std::string& out) {
  ExperimentConfig cfg = load_with_override(config, out);
  cfg.optimizer.schedule.kind = ScheduleKind::theorem1;
  cfg.diagnostics_every = 1;
  const std::uint64_t seed = cfg.seeds.front();
  const RunRecord rec = run_training(cfg, seed);
  const auto dir = std::filesystem::path(cfg.output_dir) / "convergence";
  write_outputs(rec, dir);
  const ConvergenceTrace tr = convergence_trace(rec.diagnostics, window);
  write_convergence_csv(tr, dir / "convergence.csv");
  std::printf("grad^2:     C=%.4g  windows above bound %.1f%%  last/first decile %.3f\n",
              tr.fitted_c_grad, 100.0 * tr.exceed_fraction_grad,
              tr.last_decile_grad / tr.first_decile_grad);
  std::printf("adv grad^2: C=%.4g  windows above bound %.1f%%  last/first decile %.3f\n",
              tr.fitted_c_adv, 100.0 * tr.exceed_fraction_adv,
              tr.last_decile_adv / tr.first_decile_adv);
  return kExitOk;
}

int cmd_gradcheck(std::size_t instances, std::uint64_t seed) {
  bool ok = true;
  for (Activation act : {Activation::tanh, Activation::relu}) {
    const MlpSpec spec{{2, 8, 8, 2}, act};
    const auto r = gradient_check_suite(spec, instances, 16, 1e-6, 1e-5, seed);
    std::printf("%-4s 2-8-8-2: %zu instances, max rel error %.3e  %s\n",
                act == Activation::tanh ? "tanh" : "relu", r.instances, r.max_rel_error,
                r.passed ? "ok" : "FAIL");
    ok = ok && r.passed;
  }
  return ok ? kExitOk : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient-aligned sharpness-aware training on synthetic multi-domain data"};
  app.require_subcommand(1);

  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool full_diag = false;

  auto* train = app.add_subcommand("train", "Train one run and write its outputs");
  train->add_option("--config", config, "Experiment config (JSON)")->required();
  train->add_option("--seed", seed, "Run seed")->required();
  train->add_option("--out", out, "Override output_dir");
  train->add_flag("--full-diagnostics", full_diag, "Keep diagnostics for every step");

  auto* loo = app.add_subcommand("loo", "Full leave-one-out rotation over all seeds");
  loo->add_option("--config", config)->required();
  loo->add_option("--out", out, "Override output_dir");

  std::string gammas, rhos;
  auto* sweep = app.add_subcommand("sweep", "gamma x rho sensitivity grid");
  sweep->add_option("--config", config)->required();
  sweep->add_option("--gammas", gammas, "Comma-separated gamma values")->required();
  sweep->add_option("--rhos", rhos, "Comma-separated rho values")->required();
  sweep->add_option("--out", out, "Override output_dir");

  std::string checkpoint;
  std::size_t dims = 1;
  double radius = 1.0;
  std::size_t steps = 51;
  auto* land = app.add_subcommand("landscape", "Loss along random block-normalized directions");
  land->add_option("--config", config)->required();
  land->add_option("--checkpoint", checkpoint, "params.bin from a run")->required();
  land->add_option("--dims", dims)->check(CLI::IsMember({1, 2}));
  land->add_option("--radius", radius);
  land->add_option("--steps", steps, "Odd grid resolution per axis");
  land->add_option("--seed", seed, "Direction seed");
  land->add_option("--out", out, "Override output_dir");

  std::size_t window = 200;
  auto* conv = app.add_subcommand("convergence", "1/sqrt(t)-schedule run and convergence trace");
  conv->add_option("--config", config)->required();
  conv->add_option("--window", window, "Steps per averaging window");
  conv->add_option("--out", out, "Override output_dir");

  std::size_t instances = 10;
  auto* grad = app.add_subcommand("gradcheck", "Analytic vs finite-difference gradients");
  grad->add_option("--instances", instances);
  grad->add_option("--seed", seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*train) return cmd_train(config, seed, out, full_diag);
    if (*loo) return cmd_loo(config, out);
    if (*sweep) return cmd_sweep(config, gammas, rhos, out);
    if (*land) return cmd_landscape(config, checkpoint, dims, radius, steps, seed, out);
    if (*conv) return cmd_convergence(config, window, out);
    if (*grad) return cmd_gradcheck(instances, seed);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ContractError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
