#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace geoparam {

/// A fixed 2-D unit written in each parameterization.
///
/// Direction u = (-1, -1) / sqrt(2) and radius lambda = -0.5. The SP weight
/// has norm `weight_norm`; WN uses v = w and l = |w|; GmP uses theta = 5 pi / 4.
struct PerturbUnit {
  double weight_norm = 5e-4 * 1.4142135623730951;
  double lambda = -0.5;
  double theta = 5.0 * 3.14159265358979323846 / 4.0;

  Eigen::Vector2d direction() const;
  Eigen::Vector2d w() const { return weight_norm * direction(); }
  double b() const { return weight_norm * lambda; }
};

struct PerturbRow {
  std::string param;     // sp, wn or gmp
  double epsilon = 0.0;
  double eps_norm = 0.0;   // norm of the perturbation actually applied
  double angle_deg = 0.0;  // change of boundary direction
  double dphi = 0.0;       // displacement of the spatial location
};

/// Adds eps * ones to the direction parameters (w for SP, v for WN, theta for
/// GmP) and measures how far the boundary moves.
std::vector<PerturbRow> perturb_demo(const std::vector<double>& epsilons = {1e-4, 1e-3, 1e-2, 1e-1},
                                     const PerturbUnit& unit = {});

/// Columns: param, epsilon, eps_norm, angle_deg, dphi.
void export_perturb(const std::vector<PerturbRow>& rows, const std::filesystem::path& path);

}  // namespace geoparam
