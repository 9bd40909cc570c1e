// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "geoparam/analysis.hpp"
#include "geoparam/autodiff.hpp"
#include "geoparam/config.hpp"
#include "geoparam/experiment.hpp"
#include "geoparam/hypersphere.hpp"
#include "geoparam/layers.hpp"
#include "geoparam/model.hpp"
#include "geoparam/perturb.hpp"

using namespace geoparam;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

constexpr double kPi = std::numbers::pi;

Eigen::VectorXd random_angles(Eigen::Index n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> polar(0.0, kPi), azimuth(0.0, 2.0 * kPi);
  Eigen::VectorXd t(n - 1);
  for (Eigen::Index k = 0; k + 1 < n - 1; ++k) t[k] = polar(rng);
  t[n - 2] = azimuth(rng);
  return t;
}

Eigen::VectorXd direction(const Eigen::VectorXd& theta) {
  return unit_vector(AngularCoordinates<double>(theta)).components();
}

Outcome angular_change_bound() {
  std::mt19937_64 rng(20240601);
  std::uniform_int_distribution<int> dim(2, 10);
  std::uniform_real_distribution<double> log_norm(std::log(1e-6), std::log(1e-3));
  std::normal_distribution<double> normal;
  double worst_excess = -1.0, worst_rel = 0.0;
  int bound_violations = 0, closed_form_misses = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const int n = dim(rng);
    const Eigen::VectorXd theta = random_angles(n, rng);
    Eigen::VectorXd eps(n - 1);
    for (Eigen::Index k = 0; k < eps.size(); ++k) eps[k] = normal(rng);
    eps *= std::exp(log_norm(rng)) / eps.norm();
    const double measured = angle_between<double>(direction(theta), direction(theta + eps));
    const double closed = angular_change_gmp(AngularCoordinates<double>(theta), eps);
    const double excess = measured - eps.norm();
    worst_excess = std::max(worst_excess, excess);
    if (excess > 1e-8) ++bound_violations;
    const double rel = std::abs(measured - closed) / closed;
    worst_rel = std::max(worst_rel, rel);
    if (!(rel <= 1e-3)) ++closed_form_misses;
  }
  std::ostringstream d;
  d << "max(angle - |eps|) = " << worst_excess << ", bound violations " << bound_violations
    << ", max rel. error vs |eps|_M = " << worst_rel << ", misses " << closed_form_misses;
  return {bound_violations == 0 && closed_form_misses == 0, d.str()};
}

Outcome metric_tensor_oracle() {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> dim(2, 8);
  const double h = 1e-6;
  double worst_diag = 0.0, worst_off = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = dim(rng);
    const Eigen::VectorXd theta = random_angles(n, rng);
    Eigen::MatrixXd J(n, n - 1);
    for (int k = 0; k < n - 1; ++k) {
      Eigen::VectorXd up = theta, down = theta;
      up[k] += h;
      down[k] -= h;
      J.col(k) = (direction(up) - direction(down)) / (2.0 * h);
    }
    const Eigen::MatrixXd G = J.transpose() * J;
    const Eigen::VectorXd m = metric_diagonal(AngularCoordinates<double>(theta)).entries;
    worst_diag = std::max(worst_diag, (G.diagonal() - m).cwiseAbs().maxCoeff());
    Eigen::MatrixXd off = G;
    off.diagonal().setZero();
    worst_off = std::max(worst_off, off.cwiseAbs().maxCoeff());
  }
  std::ostringstream d;
  d << "max |diag(J^T J) - M| = " << worst_diag << ", max |offdiag| = " << worst_off;
  return {worst_diag < 1e-5 && worst_off < 1e-5, d.str()};
}

Outcome parameterization_equivalence() {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> dim(2, 10);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> scale(0.1, 10.0);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = dim(rng);
    Tensor w(1, n), x(1, n);
    for (int k = 0; k < n; ++k) {
      w(0, k) = normal(rng);
      x(0, k) = 3.0 * normal(rng);
    }
    const double b = normal(rng);
    const double norm = w.norm();
    const Tensor sp = forward_sp(make_sp(w, Eigen::RowVectorXd::Constant(1, b)), x);
    const Tensor wn = forward_wn(make_wn(scale(rng) * w, Eigen::RowVectorXd::Constant(1, norm),
                                         Eigen::RowVectorXd::Constant(1, b)),
                                 x);
    const Eigen::VectorXd theta = angles_from_direction<double>(w.row(0).transpose()).angles();
    const Tensor gmp = forward_gmp(make_gmp(theta.transpose(), Eigen::RowVectorXd::Constant(1, b / norm),
                                            Eigen::RowVectorXd::Constant(1, norm), n, false),
                                   x, std::nullopt);
    worst = std::max({worst, std::abs(sp(0, 0) - wn(0, 0)), std::abs(sp(0, 0) - gmp(0, 0))});
  }
  std::ostringstream d;
  d << "max |SP - WN|, |SP - GmP| over 1000 triples = " << worst;
  return {worst <= 1e-10, d.str()};
}

Outcome gradient_integrity() {
  struct Case {
    std::string name;
    Eigen::Index in;
    std::vector<Eigen::Index> hidden;
    Parameterization param;
  };
  const std::vector<Case> cases{{"GmP+IMN, 2 hidden", 4, {6, 5}, Parameterization::gmp_imn},
                                {"SP+BN, batch 8", 4, {6}, Parameterization::bn},
                                {"WN+MBN", 4, {6, 5}, Parameterization::wn_mbn}};
  bool ok = true;
  std::ostringstream d;
  for (const Case& c : cases) {
    std::mt19937_64 rng(3);
    const Model model = build(make_mlp(c.in, c.hidden, 2, c.param, LossKind::mse), InitOptions{}, rng);
    std::normal_distribution<double> normal;
    Tensor x(8, c.in), y(8, 2);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
    for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = normal(rng);
    const GradientCheckReport r =
        gradient_check(loss_function(model, x, y, Mode::train), trainable_values(model), 1e-6, 1e-4);
    ok = ok && r.passed;
    d << c.name << ": " << r.max_rel_error << " (" << r.checked << " entries); ";
  }
  return {ok, d.str()};
}

TrainOptions options_for(const ExperimentConfig& cfg, double lr, std::uint64_t seed) {
  TrainOptions o;
  o.epochs = cfg.epochs;
  o.batch_size = cfg.batch_size;
  o.optim = cfg.optim;
  o.optim.lr = lr;
  o.seed = seed;
  o.eval_every_epoch = false;
  return o;
}

TrainResult train_preset(const std::string& name, Parameterization p, double lr, std::uint64_t seed) {
  ExperimentConfig cfg = preset(name, p);
  cfg.seed = seed;
  const auto [tr, te] = make_datasets(cfg);
  const Eigen::Index out = cfg.is_regression() ? 1 : 2;
  return train(model_spec(cfg, tr.features(), out), cfg.init, tr, te, options_for(cfg, lr, derive_seed(seed, 4)));
}

Outcome levy_stability() {
  bool gmp_ok = true, competitor_spike = false;
  std::ostringstream d;
  d << std::setprecision(4);
  for (Parameterization p :
       {Parameterization::gmp, Parameterization::sp, Parameterization::wn, Parameterization::bn}) {
    const bool gmp = p == Parameterization::gmp;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const TrainResult r = train_preset("levy", p, gmp ? 0.1 : 0.01, seed);
      const auto& dphi = r.stability.max_abs_dphi;
      if (r.steps != 2000 || dphi.size() != 2000) {
        return {false, to_string(p) + " did not complete 2000 steps"};
      }
      const double below = double(std::count_if(dphi.begin(), dphi.end(), [](double v) { return v < 1.0; })) /
                           double(dphi.size());
      const double peak = *std::max_element(dphi.begin(), dphi.end());
      if (gmp) {
        gmp_ok = gmp_ok && below >= 0.99;
      } else {
        competitor_spike = competitor_spike || peak > 64.0;
      }
      d << to_string(p) << "/s" << seed << " max " << peak << " frac<1 " << below << "; ";
    }
  }
  return {gmp_ok && competitor_spike, d.str()};
}

Outcome banana_angles() {
  double gmp_peak = 0.0, competitor_peak = 0.0;
  std::ostringstream d;
  d << std::setprecision(4);
  for (Parameterization p :
       {Parameterization::gmp, Parameterization::sp, Parameterization::wn, Parameterization::bn}) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const TrainResult r = train_preset("banana", p, 0.1, seed);
      if (r.diverged || r.stability.size() == 0) return {false, to_string(p) + " run failed: " + r.divergence};
      const auto& a = r.stability.max_abs_dtheta_deg;
      const double peak = *std::max_element(a.begin(), a.end());
      if (p == Parameterization::gmp) {
        gmp_peak = std::max(gmp_peak, peak);
      } else {
        competitor_peak = std::max(competitor_peak, peak);
      }
      d << to_string(p) << "/s" << seed << " " << peak << "deg; ";
    }
  }
  return {gmp_peak < 30.0 && competitor_peak >= 170.0, d.str()};
}

Outcome uci_trend() {
  // Published reference RMSEs for the bundled datasets that have one.
  const std::vector<std::pair<std::string, double>> reference{{"boston", 3.057}, {"wine", 0.613}};
  std::vector<TabularSummary> rows;
  int gmp_wins = 0, datasets = 0;
  bool magnitudes_ok = true;
  std::ostringstream d;
  d << std::setprecision(4);
  for (const UciEntry& e : uci_registry()) {
    double mean_sp = 0.0, mean_gmp = 0.0;
    for (Parameterization p : {Parameterization::sp, Parameterization::gmp}) {
      ExperimentConfig cfg = preset("uci-" + e.name, p);
      cfg.seed = 0;
      cfg.lr_grid = default_lr_grid();
      const TabularSummary s = run_tabular(cfg, {});
      rows.push_back(s);
      (p == Parameterization::sp ? mean_sp : mean_gmp) = s.mean_rmse;
      if (p == Parameterization::gmp) {
        for (const auto& [name, ref] : reference) {
          if (name == e.name && !(s.mean_rmse <= 3.0 * ref && s.mean_rmse >= ref / 3.0)) magnitudes_ok = false;
        }
      }
    }
    ++datasets;
    if (mean_gmp <= mean_sp) ++gmp_wins;
    d << e.name << " SP " << mean_sp << " GmP " << mean_gmp << "; ";
  }
  const std::filesystem::path table = "acceptance_uci_table.csv";
  export_summary(rows, table);

  std::cout << "  UCI test RMSE over 10 splits (mean +- std. error), lr chosen from the grid:\n";
  std::cout << "  " << std::left << std::setw(10) << "dataset" << std::setw(8) << "param" << std::setw(8) << "lr"
            << "rmse\n";
  for (const TabularSummary& s : rows) {
    std::cout << "  " << std::left << std::setw(10) << s.dataset << std::setw(8) << to_string(s.param) << std::setw(8)
              << s.lr << std::fixed << std::setprecision(3) << s.mean_rmse << " +- " << s.stderr_rmse
              << std::defaultfloat << std::setprecision(6) << "\n";
  }
  d << "GmP <= SP on " << gmp_wins << "/" << datasets << ", reference magnitudes " << (magnitudes_ok ? "ok" : "off")
    << ", table written to " << std::filesystem::absolute(table).string();
  return {datasets >= 3 && 2 * gmp_wins > datasets && magnitudes_ok, d.str()};
}

double ks_uniform(std::vector<double> v, double lo, double hi) {
  std::sort(v.begin(), v.end());
  const double n = double(v.size());
  double stat = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double cdf = std::clamp((v[i] - lo) / (hi - lo), 0.0, 1.0);
    stat = std::max({stat, double(i + 1) / n - cdf, cdf - double(i) / n});
  }
  return stat;
}

Outcome initialization_law() {
  std::mt19937_64 rng(5);
  const LayerSpec spec{3, 10000, LayerKind::GMP, PostNorm::none, Activation::relu};
  const ParamSet p = init_params(spec, InitScheme::gmp_default, rng);
  const Tensor& theta = p["theta"];
  // Each coordinate of a uniform point on S^2 is uniform on [-1, 1].
  std::vector<std::vector<double>> coords(3);
  for (Eigen::Index i = 0; i < theta.rows(); ++i) {
    const Eigen::VectorXd u = direction(theta.row(i).transpose());
    for (int k = 0; k < 3; ++k) coords[std::size_t(k)].push_back(u[k]);
  }
  double worst = 0.0;
  for (const auto& c : coords) worst = std::max(worst, ks_uniform(c, -1.0, 1.0));
  const bool exact = (p["lambda"].array() == 0.0).all() && (p["r"].array() == 1.0).all();
  std::ostringstream d;
  d << "max KS statistic over the 3 coordinates = " << worst << ", lambda==0 and r==1: " << (exact ? "yes" : "no");
  return {worst < 0.02 && exact, d.str()};
}

Outcome perturb_demo_check() {
  const auto rows = perturb_demo();
  std::vector<PerturbRow> gmp;
  double sp_at_1e3 = -1.0;
  for (const PerturbRow& r : rows) {
    if (r.param == "gmp") gmp.push_back(r);
    if (r.param == "sp" && r.epsilon == 1e-3) sp_at_1e3 = r.angle_deg;
  }
  bool monotone = gmp.size() == 4, bounded = true;
  for (std::size_t i = 0; i < gmp.size(); ++i) {
    if (i > 0 && !(gmp[i].angle_deg > gmp[i - 1].angle_deg)) monotone = false;
    // Equality holds in two dimensions, so allow the same 1e-8 rad rounding
    // slack as the angular bound check.
    if (gmp[i].angle_deg > (180.0 / kPi) * (gmp[i].eps_norm + 1e-8)) bounded = false;
  }
  // The explicit example: eps = -(1 + e) w reverses a small weight.
  const double e = 1e-3;
  const Eigen::VectorXd w = PerturbUnit{}.w();
  const double adversarial = degrees(angle_between<double>(w, w - (1.0 + e) * w));
  std::ostringstream d;
  d << "GmP angles";
  for (const PerturbRow& r : gmp) d << " " << r.angle_deg;
  d << " deg; SP at 1e-3: " << sp_at_1e3 << " deg; eps=-(1+1e-3)w: " << adversarial << " deg";
  return {monotone && bounded && sp_at_1e3 > 90.0 && adversarial > 90.0, d.str()};
}

struct Criterion {
  std::string name;
  double budget_s;
  std::function<Outcome()> check;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"angular_change_bound", 5, angular_change_bound},
      {"metric_tensor_oracle", 5, metric_tensor_oracle},
      {"parameterization_equivalence", 2, parameterization_equivalence},
      {"gradient_integrity", 30, gradient_integrity},
      {"levy_stability_contrast", 300, levy_stability},
      {"banana_angular_stability", 180, banana_angles},
      {"uci_trend", 1200, uci_trend},
      {"initialization_law", 5, initialization_law},
      {"perturb_demo", 1, perturb_demo_check},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.check();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.budget_s;
    const bool pass = out.passed && in_time;
    if (!pass) ++failures;
    std::cout << (pass ? "PASS " : "FAIL ") << c.name << " (" << std::fixed << std::setprecision(2) << secs << "s of "
              << c.budget_s << "s" << (in_time ? "" : ", over budget") << ")" << std::defaultfloat
              << std::setprecision(6) << ": " << out.detail << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
