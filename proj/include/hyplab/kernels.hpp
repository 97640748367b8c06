#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "hyplab/hyperbolic.hpp"

namespace hyplab {

// Range on which the heat-kernel quadrature is validated.
inline constexpr double kHeatTMin = 0.05;
inline constexpr double kHeatTMax = 50.0;
inline constexpr double kHeatDMax = 40.0;
// Green kernels diverge logarithmically at the pole.
inline constexpr double kGreenDMin = 0.05;
inline constexpr double kLambda0 = 0.25;

// Heat kernel of the hyperbolic plane,
//   H(t, d) = sqrt(2) e^{-t/4} / (4 pi t)^{3/2} int_d^inf s e^{-s^2/4t} / sqrt(cosh s - cosh d) ds.
// The log form is exact far past the point where H underflows.
double heat_exact_log(double t, double d);
double heat_exact(double t, double d);

// int_0^inf H(t, r) 2 pi sinh r dr.
double heat_mass(double t);
// Chapman-Kolmogorov at two points a distance d apart: relative residual of
// H(2t, d) against int H(t, x, y) H(t, y, z) dy.
double semigroup_residual(double t, double d);

// log H(t, .) on a uniform grid with 4-point Lagrange interpolation. Exact evaluation past
// the grid.
class RadialHeatProfile {
 public:
  RadialHeatProfile() = default;
  RadialHeatProfile(double t, double d_max, double step = 0.01);

  double t() const { return t_; }
  double d_max() const { return d_max_; }
  double log_value(double d) const;
  double value(double d) const;

 private:
  double t_ = 0, d_max_ = 0, step_ = 0;
  std::vector<double> log_h_;
};

// Bound shapes; the bound is C times the shape.
//   gauss: exp(-t/4 - d^2/(D t)) / min(1, t)
//   hyp:   (1 + d^2/t) exp(-t/4 - d/2 - d^2/4t) / t
double gauss_shape_log(double t, double d, double D);
double hyp_shape_log(double t, double d);

struct HeatBounds {
  double D = 4.5;
  double c_gauss = 0;
  double c_hyp = 0;
};

double heat_bound_gauss(double t, double d, const HeatBounds& b);
double heat_bound_hyp(double t, double d, const HeatBounds& b);

struct HeatGrid {
  std::vector<double> t;
  std::vector<double> d;
};

// Coarse calibration grid and a finer verification grid sharing no point with it.
HeatGrid calibration_grid();
HeatGrid verification_grid();

// Smallest constants making both bounds dominate heat_exact on the grid.
HeatBounds calibrate_heat_bounds(const HeatGrid& grid, double D = 4.5);

struct DominationReport {
  std::size_t points = 0;
  double max_log_ratio_gauss = -1e300;  // max log(H / bound); <= 0 means dominated
  double max_log_ratio_hyp = -1e300;
  std::pair<double, double> worst_gauss{0, 0};
  std::pair<double, double> worst_hyp{0, 0};
  // Points with d >= 2t where the hyperbolic bound is below the Gaussian one.
  std::size_t sharper_points = 0;
  std::size_t sharper_candidates = 0;
  // Largest d at which a point with d >= 2t has the hyperbolic bound above the Gaussian one.
  double sharper_fail_max_d = -1;
  bool holds() const { return max_log_ratio_gauss <= 0 && max_log_ratio_hyp <= 0; }
};

DominationReport verify_heat_bounds(const HeatBounds& b, const HeatGrid& grid);

std::string heat_bounds_to_text(const HeatBounds& b);
HeatBounds heat_bounds_from_text(const std::string& text);
void save_heat_bounds(const HeatBounds& b, const std::filesystem::path& path);
HeatBounds load_heat_bounds(const std::filesystem::path& path);

// G_lambda(d) = int_0^inf e^{lambda t} H(t, d) dt for lambda <= 1/4 and d >= 0.05. The time
// integral is done in closed form under the s-integral, which leaves
//   G = sqrt(2)/(4 pi) int_d^inf e^{-nu s} / sqrt(cosh s - cosh d) ds,  nu = sqrt(1/4 - lambda).
double green_kernel_log(double lambda, double d);
double green_kernel(double lambda, double d);
// log G_lambda on a uniform grid from 0.05 with 4-point Lagrange interpolation.
class RadialGreenProfile {
 public:
  RadialGreenProfile() = default;
  RadialGreenProfile(double lambda, double d_max, double step = 0.01);

  double log_value(double d) const;
  double value(double d) const;

 private:
  double lambda_ = 0, step_ = 0;
  std::vector<double> log_g_;
};

// Closed form at lambda = 0: log(coth(d/2)) / (2 pi).
double green_zero_closed_form(double d);

// int_1^inf G^2 2 pi sinh r dr, lambda < 1/4.
double green_l2_tail(double lambda);

struct AnconaResult {
  double c_easy = 0;  // max G(x,z)G(z,y)/G(x,y)
  double c_hard = 0;  // max G(x,y)/(G(x,z)G(z,y))
  std::size_t triples = 0;
};

// Triples (x, z, y) with z on the segment [x, y] and pairwise distances >= 1.
AnconaResult ancona_check(double lambda, const std::vector<std::array<HPoint, 3>>& triples);
// Same check from the two segment lengths d(x,z), d(z,y).
AnconaResult ancona_check_distances(double lambda, const std::vector<std::pair<double, double>>& segments);

// G_lambda(R)^2 times the length 2 pi sinh R of the circle of radius R.
double sphere_l2_mass(double lambda, double R);
// int_{B(x,R)} min(1, G^2). The disk of radius 0.05 is counted with integrand 1.
double ball_min_mass(double lambda, double R);

struct HarnackResult {
  double max_log_slope = 0;
  std::size_t pairs = 0;
};

// max |log G(x,y) - log G(x,z)| / d(y,z) over pairs with d(y,z) <= 1 and d(x,.) >= 1.
HarnackResult harnack_check(double lambda, HPoint pole, const std::vector<std::pair<HPoint, HPoint>>& pairs);
// -(log G(d2) - log G(d1)) / (d2 - d1).
double green_log_slope(double lambda, double d1, double d2);

struct KernelTable {
  std::vector<double> t_grid;
  std::vector<double> d_grid;
  std::vector<std::vector<double>> log_heat;  // [t][d]
  std::vector<double> lambdas;                // {0, 1/8, 1/4}
  std::vector<double> green_d_grid;
  std::vector<std::vector<double>> log_green;  // [lambda][d]
  HeatBounds bounds;
};

KernelTable build_kernel_table(const HeatGrid& heat_grid, const std::vector<double>& green_d_grid, const HeatBounds& bounds);
std::string kernel_table_to_text(const KernelTable& k);
KernelTable kernel_table_from_text(const std::string& text);
void save_kernel_table(const KernelTable& k, const std::filesystem::path& path);
KernelTable load_kernel_table(const std::filesystem::path& path);

}  // namespace hyplab
