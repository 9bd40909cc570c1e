#include "geoparam/perturb.hpp"

#include <cmath>

#include "geoparam/csv.hpp"
#include "geoparam/error.hpp"
#include "geoparam/hypersphere.hpp"

namespace geoparam {

Eigen::Vector2d PerturbUnit::direction() const { return Eigen::Vector2d(std::cos(theta), std::sin(theta)); }

namespace {

PerturbRow measure(const std::string& name, double epsilon, double eps_norm, const Eigen::VectorXd& dir0,
                   const Eigen::VectorXd& phi0, const Eigen::VectorXd& dir1, const Eigen::VectorXd& phi1) {
  return PerturbRow{name, epsilon, eps_norm, degrees(angle_between<double>(dir0, dir1)), (phi1 - phi0).norm()};
}

}  // namespace

std::vector<PerturbRow> perturb_demo(const std::vector<double>& epsilons, const PerturbUnit& unit) {
  std::vector<PerturbRow> rows;
  const Eigen::VectorXd w = unit.w();
  const double b = unit.b();
  const Eigen::VectorXd phi_sp = spatial_location_sp<double>(w, b);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(2);

  for (double e : epsilons) {
    const Eigen::VectorXd eps = e * ones;
    const Eigen::VectorXd w1 = w + eps;
    rows.push_back(measure("sp", e, eps.norm(), w, phi_sp, w1, spatial_location_sp<double>(w1, b)));
  }
  // WN: pre-activation l v^T x / |v| + b with v = w, l = |w|.
  const double l = w.norm();
  for (double e : epsilons) {
    const Eigen::VectorXd v1 = w + e * ones;
    const Eigen::VectorXd w_eff = l * v1 / v1.norm();
    rows.push_back(measure("wn", e, (e * ones).norm(), w, phi_sp, w_eff, spatial_location_sp<double>(w_eff, b)));
  }
  const AngularCoordinates<double> theta0(Eigen::VectorXd::Constant(1, unit.theta));
  const CharacteristicBoundary<double> gmp0{unit.lambda, theta0};
  const Eigen::VectorXd dir0 = unit_vector(theta0).components();
  const Eigen::VectorXd phi0 = spatial_location(gmp0);
  for (double e : epsilons) {
    const AngularCoordinates<double> theta1(Eigen::VectorXd::Constant(1, unit.theta + e));
    const Eigen::VectorXd dir1 = unit_vector(theta1).components();
    const Eigen::VectorXd phi1 = spatial_location(CharacteristicBoundary<double>{unit.lambda, theta1});
    rows.push_back(measure("gmp", e, std::abs(theta1[0] - unit.theta), dir0, phi0, dir1, phi1));
  }
  return rows;
}

void export_perturb(const std::vector<PerturbRow>& rows, const std::filesystem::path& path) {
  std::ofstream out = csv::open_output(path);
  csv::write_row(out, {"param", "epsilon", "eps_norm", "angle_deg", "dphi"});
  for (const PerturbRow& r : rows) {
    csv::write_row(out, {r.param, csv::format_double(r.epsilon), csv::format_double(r.eps_norm),
                         csv::format_double(r.angle_deg), csv::format_double(r.dphi)});
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace geoparam
