// Command-line front end: run, preset, gradcheck, perturb-demo.

#include <CLI11.hpp>

#include <iostream>
#include <random>

#include "geoparam/analysis.hpp"
#include "geoparam/config.hpp"
#include "geoparam/error.hpp"
#include "geoparam/experiment.hpp"
#include "geoparam/perturb.hpp"

namespace {

using namespace geoparam;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;
constexpr int kExitIo = 4;

int report(const RunOutcome& out) {
  std::cout << "run directory: " << out.out_dir.string() << "\n"
            << "lr: " << out.lr << "\n"
            << "final test metric: " << out.final_metric << "\n";
  if (out.status == RunStatus::diverged) {
    std::cerr << "training diverged; see " << (out.out_dir / "manifest.txt").string() << "\n";
    return kExitDiverged;
  }
  return kExitOk;
}

int gradcheck(const std::string& param_name, std::uint64_t seed) {
  const std::vector<Parameterization> params =
      param_name == "all" ? std::vector<Parameterization>{Parameterization::sp, Parameterization::wn,
                                                          Parameterization::wn_mbn, Parameterization::bn,
                                                          Parameterization::gmp, Parameterization::gmp_imn}
                          : std::vector<Parameterization>{parse_parameterization(param_name)};
  bool all_passed = true;
  for (Parameterization p : params) {
    std::mt19937_64 rng(seed);
    const MlpSpec spec = make_mlp(3, {5, 4}, 2, p, LossKind::mse, seed);
    const Model model = build(spec, InitOptions{}, rng);
    std::normal_distribution<double> normal;
    Tensor x(8, 3), y(8, 2);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
    for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = normal(rng);
    const GradientCheckReport r =
        gradient_check(loss_function(model, x, y, Mode::train), trainable_values(model), 1e-6, 1e-4);
    std::cout << to_string(p) << ": max relative error " << r.max_rel_error << " over " << r.checked << " entries "
              << (r.passed ? "PASS" : "FAIL") << "\n";
    all_passed = all_passed && r.passed;
  }
  return all_passed ? kExitOk : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Geometric parameterization experiments for ReLU networks"};
  app.set_version_flag("--version", std::string(GEOPARAM_VERSION));
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  auto* run_cmd = app.add_subcommand("run", "Run an experiment from a config file");
  run_cmd->add_option("config", config_path, "Config file (key = value lines)")->required();
  run_cmd->add_option("--out", out_override, "Override run.out");

  std::string preset_name;
  std::string preset_param = "sp";
  double preset_lr = 0.0;
  bool preset_grid = false;
  std::uint64_t preset_seed = 0;
  std::string preset_out;
  long preset_epochs = 0;
  int parallel_folds = 1;
  auto* preset_cmd = app.add_subcommand("preset", "Run a named experiment (levy, banana, uci-<name>)");
  preset_cmd->add_option("name", preset_name, "Preset name")->required();
  preset_cmd->add_option("--param", preset_param, "sp|wn|wn-mbn|bn|gmp|gmp-imn");
  auto* lr_opt = preset_cmd->add_option("--lr", preset_lr, "Learning rate");
  auto* grid_flag = preset_cmd->add_flag("--grid", preset_grid, "Select the learning rate from the default grid");
  lr_opt->excludes(grid_flag);
  preset_cmd->add_option("--seed", preset_seed, "Seed");
  preset_cmd->add_option("--out", preset_out, "Run directory");
  preset_cmd->add_option("--epochs", preset_epochs, "Override the epoch count");
  preset_cmd->add_option("--parallel-folds", parallel_folds, "Worker threads for splits and grid points");

  std::string gc_param = "all";
  std::uint64_t gc_seed = 0;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Check backward() against finite differences");
  gc_cmd->add_option("--param", gc_param, "Parameterization or 'all'");
  gc_cmd->add_option("--seed", gc_seed, "Seed");

  std::string perturb_out;
  auto* perturb_cmd = app.add_subcommand("perturb-demo", "Boundary change of a fixed 2-D unit under small perturbations");
  perturb_cmd->add_option("--out", perturb_out, "CSV path (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*run_cmd) {
      ExperimentConfig cfg = load_config(config_path);
      if (!out_override.empty()) cfg.out_dir = out_override;
      return report(run(cfg));
    }
    if (*preset_cmd) {
      ExperimentConfig cfg = preset(preset_name, parse_parameterization(preset_param));
      cfg.seed = preset_seed;
      if (*lr_opt) cfg.optim.lr = preset_lr;
      if (preset_grid) cfg.lr_grid = default_lr_grid();
      if (!preset_out.empty()) cfg.out_dir = preset_out;
      if (preset_epochs > 0) cfg.epochs = preset_epochs;
      cfg.parallel_folds = parallel_folds;
      cfg.validate();
      return report(run(cfg));
    }
    if (*gc_cmd) return gradcheck(gc_param, gc_seed);
    if (*perturb_cmd) {
      const auto rows = perturb_demo();
      if (perturb_out.empty()) {
        std::cout << "param,epsilon,eps_norm,angle_deg,dphi\n";
        for (const PerturbRow& r : rows) {
          std::cout << r.param << ',' << r.epsilon << ',' << r.eps_norm << ',' << r.angle_deg << ',' << r.dphi << "\n";
        }
      } else {
        export_perturb(rows, perturb_out);
      }
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NoViableLearningRate& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
