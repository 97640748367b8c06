#include "hyplab/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace hyplab {

namespace {

using boost::math::quadrature::gauss_kronrod;
constexpr double kPi = std::numbers::pi;
constexpr double kQuadTol = 1e-11;

// Integral over [0, u_max] split in pieces so the adaptive rule sees the peak near 0.
template <class F>
double integrate_pieces(F f, double u_max) {
  double total = 0;
  double lo = 0;
  for (double hi : {u_max / 64, u_max / 16, u_max / 4, u_max}) {
    total += gauss_kronrod<double, 31>::integrate(f, lo, hi, 12, kQuadTol);
    lo = hi;
  }
  return total;
}

// log H without the range guard. With s = d + u^2:
//   H = sqrt(2) e^{-t/4} (4 pi t)^{-3/2} e^{-d^2/4t - d/2}
//       int 2u (d + u^2) exp(-(2 d u^2 + u^4)/4t - u^2/4) / sqrt((1 - e^{-2d-u^2}) sinh(u^2/2)) du
double heat_log_unchecked(double t, double d) {
  // exp(-(2dv + v^2)/4t - v/4) <= e^{-80} past v_max.
  const double b = 2 * d + t;
  const double v_max = 0.5 * (-b + std::sqrt(b * b + 1280.0 * t));
  const double u_max = std::sqrt(v_max);
  auto f = [&](double u) {
    const double v = u * u;
    if (v == 0) return d > 0 ? 2.0 * d / std::sqrt(-std::expm1(-2 * d) * 0.5) : 0.0;
    const double e = std::exp(-(2 * d * v + v * v) / (4 * t) - 0.25 * v);
    const double den = std::sqrt(-std::expm1(-2 * d - v) * std::sinh(0.5 * v));
    return 2 * u * (d + v) * e / den;
  };
  const double integral = integrate_pieces(f, u_max);
  return 0.5 * std::log(2.0) - t / 4 - 1.5 * std::log(4 * kPi * t) - d * d / (4 * t) - d / 2 + std::log(integral);
}

void check_heat_range(double t, double d) {
  if (!(t >= kHeatTMin && t <= kHeatTMax)) throw std::domain_error("heat kernel: t outside [0.05, 50]");
  if (!(d >= 0 && d <= kHeatDMax)) throw std::domain_error("heat kernel: d outside [0, 40]");
}

// Both arguments of the hyperbolic law of cosines, written to keep small distances accurate:
// sinh^2(rho/2) = sinh^2((r-d)/2) + sinh r sinh d sin^2(theta/2).
double third_side(double r, double d, double theta) {
  const double a = std::sinh(0.5 * (r - d));
  const double s = std::sin(0.5 * theta);
  return 2 * std::asinh(std::sqrt(a * a + std::sinh(r) * std::sinh(d) * s * s));
}

}  // namespace

double heat_exact_log(double t, double d) {
  check_heat_range(t, d);
  return heat_log_unchecked(t, d);
}

double heat_exact(double t, double d) { return std::exp(heat_exact_log(t, d)); }

double heat_mass(double t) {
  check_heat_range(t, 0);
  // H sinh r <~ exp(r/2 - r^2/4t); cut where that is e^{-80}.
  const double r_max = t + std::sqrt(t * t + 320 * t);
  const RadialHeatProfile prof(t, r_max, 0.005);
  auto f = [&](double r) { return 2 * kPi * std::exp(prof.log_value(r) + std::log(std::sinh(r))); };
  return gauss_kronrod<double, 31>::integrate(f, 1e-300, r_max, 15, 1e-12);
}

double semigroup_residual(double t, double d) {
  check_heat_range(2 * t, d);
  const double r_max = d + t + std::sqrt(t * t + 320 * t);
  const RadialHeatProfile prof(t, r_max + d + 1, 0.005);
  auto outer = [&](double r) {
    if (r <= 0) return 0.0;
    auto inner = [&](double th) { return std::exp(prof.log_value(r) + prof.log_value(third_side(r, d, th))); };
    return 2 * std::sinh(r) * gauss_kronrod<double, 31>::integrate(inner, 0.0, kPi, 12, 1e-12);
  };
  double conv = 0;
  double lo = 0;
  for (double hi : {d, d + 2, r_max}) {
    if (hi <= lo) continue;
    conv += gauss_kronrod<double, 31>::integrate(outer, lo, hi, 12, 1e-11);
    lo = hi;
  }
  const double direct = heat_exact(2 * t, d);
  return std::abs(conv - direct) / direct;
}

RadialHeatProfile::RadialHeatProfile(double t, double d_max, double step) : t_(t), d_max_(d_max), step_(step) {
  if (!(t > 0) || !(d_max > 0) || !(step > 0)) throw std::invalid_argument("RadialHeatProfile: bad parameters");
  const std::size_t n = static_cast<std::size_t>(std::ceil(d_max / step)) + 3;
  log_h_.resize(n + 1);
  // One node below zero by evenness, so interpolation near 0 stays centered.
  for (std::size_t i = 0; i <= n; ++i) log_h_[i] = heat_log_unchecked(t, step * (static_cast<double>(i) - 1.0) * (i == 0 ? -1.0 : 1.0));
}

double RadialHeatProfile::log_value(double d) const {
  d = std::abs(d);
  const double x = d / step_ + 1.0;
  const std::size_t i = static_cast<std::size_t>(x);
  if (i < 1 || i + 2 >= log_h_.size()) return heat_log_unchecked(t_, d);
  const double s = x - static_cast<double>(i);
  const double f0 = log_h_[i - 1], f1 = log_h_[i], f2 = log_h_[i + 1], f3 = log_h_[i + 2];
  // Cubic Lagrange through nodes -1, 0, 1, 2.
  return -s * (s - 1) * (s - 2) / 6 * f0 + (s + 1) * (s - 1) * (s - 2) / 2 * f1 - (s + 1) * s * (s - 2) / 2 * f2 +
         (s + 1) * s * (s - 1) / 6 * f3;
}

double RadialHeatProfile::value(double d) const { return std::exp(log_value(d)); }

double gauss_shape_log(double t, double d, double D) { return -std::log(std::min(1.0, t)) - t / 4 - d * d / (D * t); }

double hyp_shape_log(double t, double d) { return -std::log(t) + std::log1p(d * d / t) - t / 4 - d / 2 - d * d / (4 * t); }

double heat_bound_gauss(double t, double d, const HeatBounds& b) { return b.c_gauss * std::exp(gauss_shape_log(t, d, b.D)); }

double heat_bound_hyp(double t, double d, const HeatBounds& b) { return b.c_hyp * std::exp(hyp_shape_log(t, d)); }

HeatGrid calibration_grid() {
  HeatGrid g;
  g.t = {0.05, 0.1, 0.2, 0.5, 1, 2, 5, 10, 20, 50};
  for (int i = 0; i <= 20; ++i) g.d.push_back(2.0 * i);
  return g;
}

HeatGrid verification_grid() {
  HeatGrid g;
  const HeatGrid coarse = calibration_grid();
  for (int k = 0; k <= 48; ++k) {
    const double t = 0.05 * std::pow(10.0, k / 16.0);
    const bool taken = std::any_of(coarse.t.begin(), coarse.t.end(), [&](double c) { return std::abs(c - t) < 1e-9 * c; });
    if (!taken) g.t.push_back(t);
  }
  for (int i = 0; i < 80; ++i) g.d.push_back(0.25 + 0.5 * i);
  return g;
}

HeatBounds calibrate_heat_bounds(const HeatGrid& grid, double D) {
  if (!(D > 4)) throw std::invalid_argument("calibrate_heat_bounds: D must exceed 4");
  HeatBounds b;
  b.D = D;
  double lg = -INFINITY, lh = -INFINITY;
  for (double t : grid.t)
    for (double d : grid.d) {
      const double lhx = heat_exact_log(t, d);
      lg = std::max(lg, lhx - gauss_shape_log(t, d, D));
      lh = std::max(lh, lhx - hyp_shape_log(t, d));
    }
  b.c_gauss = std::exp(lg);
  b.c_hyp = std::exp(lh);
  return b;
}

DominationReport verify_heat_bounds(const HeatBounds& b, const HeatGrid& grid) {
  DominationReport r;
  const double lcg = std::log(b.c_gauss), lch = std::log(b.c_hyp);
  for (double t : grid.t)
    for (double d : grid.d) {
      const double lhx = heat_exact_log(t, d);
      const double bg = lcg + gauss_shape_log(t, d, b.D), bh = lch + hyp_shape_log(t, d);
      if (lhx - bg > r.max_log_ratio_gauss) {
        r.max_log_ratio_gauss = lhx - bg;
        r.worst_gauss = {t, d};
      }
      if (lhx - bh > r.max_log_ratio_hyp) {
        r.max_log_ratio_hyp = lhx - bh;
        r.worst_hyp = {t, d};
      }
      if (d >= 2 * t) {
        ++r.sharper_candidates;
        if (bh <= bg)
          ++r.sharper_points;
        else
          r.sharper_fail_max_d = std::max(r.sharper_fail_max_d, d);
      }
      ++r.points;
    }
  return r;
}

namespace {
std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}
}  // namespace

std::string heat_bounds_to_text(const HeatBounds& b) {
  return "hyplab-calibration 1\nD " + fmt17(b.D) + "\nc_gauss " + fmt17(b.c_gauss) + "\nc_hyp " + fmt17(b.c_hyp) + "\n";
}

HeatBounds heat_bounds_from_text(const std::string& text) {
  std::istringstream is(text);
  std::string tag, key;
  int version = 0;
  if (!(is >> tag >> version) || tag != "hyplab-calibration" || version != 1) throw std::runtime_error("calibration file: bad header");
  HeatBounds b;
  bool seen[3] = {false, false, false};
  double v;
  while (is >> key >> v) {
    if (key == "D") b.D = v, seen[0] = true;
    else if (key == "c_gauss") b.c_gauss = v, seen[1] = true;
    else if (key == "c_hyp") b.c_hyp = v, seen[2] = true;
  }
  if (!seen[0] || !seen[1] || !seen[2]) throw std::runtime_error("calibration file: missing constant");
  if (!(b.c_gauss > 0) || !(b.c_hyp > 0) || !(b.D > 4)) throw std::runtime_error("calibration file: invalid constant");
  return b;
}

void save_heat_bounds(const HeatBounds& b, const std::filesystem::path& path) { write_file(path, heat_bounds_to_text(b)); }

HeatBounds load_heat_bounds(const std::filesystem::path& path) { return heat_bounds_from_text(read_file(path)); }

double green_kernel_log(double lambda, double d) {
  if (!(lambda <= kLambda0)) throw std::domain_error("green_kernel: lambda above 1/4 diverges");
  if (!(d >= kGreenDMin)) throw std::domain_error("green_kernel: d below 0.05");
  const double nu = std::sqrt(kLambda0 - lambda);
  // With s = d + u^2 the integrand is 2u e^{-nu v - v/4} / sqrt((1 - e^{-2d-v}) sinh(v/2)), v = u^2,
  // bounded by sqrt(2) e^{-(nu+1/2) v} / sqrt((1 - e^{-2d})(1 - e^{-v})); the part past
  // v_max is below e^{-80} of the leading factor.
  const double v_max = 80.0 / (nu + 0.5);
  auto f = [&](double u) {
    const double v = u * u;
    if (v == 0) return 2.0 / std::sqrt(-std::expm1(-2 * d) * 0.5);
    return 2 * u * std::exp(-nu * v - 0.25 * v) / std::sqrt(-std::expm1(-2 * d - v) * std::sinh(0.5 * v));
  };
  const double integral = integrate_pieces(f, std::sqrt(v_max));
  return std::log(std::sqrt(2.0) / (4 * kPi)) - nu * d - d / 2 + std::log(integral);
}

double green_kernel(double lambda, double d) { return std::exp(green_kernel_log(lambda, d)); }

RadialGreenProfile::RadialGreenProfile(double lambda, double d_max, double step) : lambda_(lambda), step_(step) {
  if (!(d_max > kGreenDMin) || !(step > 0)) throw std::invalid_argument("RadialGreenProfile: bad parameters");
  const std::size_t n = static_cast<std::size_t>(std::ceil((d_max - kGreenDMin) / step)) + 3;
  log_g_.resize(n);
  for (std::size_t i = 0; i < n; ++i) log_g_[i] = green_kernel_log(lambda, kGreenDMin + step * static_cast<double>(i));
}

double RadialGreenProfile::log_value(double d) const {
  const double x = (d - kGreenDMin) / step_;
  if (!(x >= 1)) return green_kernel_log(lambda_, d);
  const std::size_t i = static_cast<std::size_t>(x);
  if (i + 2 >= log_g_.size()) return green_kernel_log(lambda_, d);
  const double s = x - static_cast<double>(i);
  const double f0 = log_g_[i - 1], f1 = log_g_[i], f2 = log_g_[i + 1], f3 = log_g_[i + 2];
  return -s * (s - 1) * (s - 2) / 6 * f0 + (s + 1) * (s - 1) * (s - 2) / 2 * f1 - (s + 1) * s * (s - 2) / 2 * f2 +
         (s + 1) * s * (s - 1) / 6 * f3;
}

double RadialGreenProfile::value(double d) const { return std::exp(log_value(d)); }

double green_zero_closed_form(double d) {
  if (!(d > 0)) throw std::domain_error("green_zero_closed_form: d must be positive");
  return std::log(1.0 / std::tanh(0.5 * d)) / (2 * kPi);
}

double green_l2_tail(double lambda) {
  if (!(lambda < kLambda0)) throw std::domain_error("green_l2_tail: needs lambda < 1/4");
  const double nu = std::sqrt(kLambda0 - lambda);
  // G^2 sinh r decays like e^{-2 nu r}.
  const double r_max = 1 + 90.0 / (2 * nu);
  auto f = [&](double r) { return 2 * kPi * std::exp(2 * green_kernel_log(lambda, r) + std::log(std::sinh(r))); };
  double total = 0, lo = 1;
  for (double hi : {5.0, 20.0, r_max}) {
    if (hi <= lo) continue;
    total += gauss_kronrod<double, 31>::integrate(f, lo, hi, 12, 1e-10);
    lo = hi;
  }
  return total;
}

AnconaResult ancona_check_distances(double lambda, const std::vector<std::pair<double, double>>& segments) {
  AnconaResult r;
  r.c_easy = 0;
  r.c_hard = 0;
  for (const auto& [a, b] : segments) {
    if (!(a >= 1 && b >= 1)) throw std::invalid_argument("ancona_check: distances must be at least 1");
    const double lr = green_kernel_log(lambda, a) + green_kernel_log(lambda, b) - green_kernel_log(lambda, a + b);
    r.c_easy = std::max(r.c_easy, std::exp(lr));
    r.c_hard = std::max(r.c_hard, std::exp(-lr));
    ++r.triples;
  }
  return r;
}

AnconaResult ancona_check(double lambda, const std::vector<std::array<HPoint, 3>>& triples) {
  std::vector<std::pair<double, double>> seg;
  seg.reserve(triples.size());
  for (const auto& tr : triples) {
    const double dxz = hyp_dist(tr[0], tr[1]), dzy = hyp_dist(tr[1], tr[2]), dxy = hyp_dist(tr[0], tr[2]);
    if (std::abs(dxz + dzy - dxy) > 1e-8 * std::max(1.0, dxy)) throw std::invalid_argument("ancona_check: middle point is not on the segment");
    seg.emplace_back(dxz, dzy);
  }
  return ancona_check_distances(lambda, seg);
}

double sphere_l2_mass(double lambda, double R) {
  if (!(R >= 1 && R <= 30)) throw std::domain_error("sphere_l2_mass: R outside [1, 30]");
  return std::exp(2 * green_kernel_log(lambda, R) + std::log(2 * kPi * std::sinh(R)));
}

double ball_min_mass(double lambda, double R) {
  if (!(R > kGreenDMin)) throw std::domain_error("ball_min_mass: R must exceed 0.05");
  auto f = [&](double r) { return std::exp(std::min(0.0, 2 * green_kernel_log(lambda, r)) + std::log(2 * kPi * std::sinh(r))); };
  const double inner = 2 * kPi * (std::cosh(kGreenDMin) - 1);
  double total = inner, lo = kGreenDMin;
  for (double hi = std::min(R, 1.0);; hi = std::min(R, hi + 4.0)) {
    total += gauss_kronrod<double, 31>::integrate(f, lo, hi, 12, 1e-10);
    lo = hi;
    if (hi >= R) break;
  }
  return total;
}

HarnackResult harnack_check(double lambda, HPoint pole, const std::vector<std::pair<HPoint, HPoint>>& pairs) {
  HarnackResult r;
  for (const auto& [y, z] : pairs) {
    const double dyz = hyp_dist(y, z);
    const double dy = hyp_dist(pole, y), dz = hyp_dist(pole, z);
    if (!(dyz <= 1 + 1e-12) || !(dy >= 1) || !(dz >= 1)) throw std::invalid_argument("harnack_check: inadmissible pair");
    if (dyz == 0) continue;
    const double s = std::abs(green_kernel_log(lambda, dy) - green_kernel_log(lambda, dz)) / dyz;
    r.max_log_slope = std::max(r.max_log_slope, s);
    ++r.pairs;
  }
  return r;
}

double green_log_slope(double lambda, double d1, double d2) {
  return -(green_kernel_log(lambda, d2) - green_kernel_log(lambda, d1)) / (d2 - d1);
}

KernelTable build_kernel_table(const HeatGrid& heat_grid, const std::vector<double>& green_d_grid, const HeatBounds& bounds) {
  KernelTable k;
  k.t_grid = heat_grid.t;
  k.d_grid = heat_grid.d;
  if (!std::is_sorted(k.t_grid.begin(), k.t_grid.end()) || !std::is_sorted(k.d_grid.begin(), k.d_grid.end()))
    throw std::invalid_argument("build_kernel_table: grids must be sorted");
  for (double t : k.t_grid) {
    std::vector<double> row;
    for (double d : k.d_grid) row.push_back(heat_exact_log(t, d));
    k.log_heat.push_back(std::move(row));
  }
  k.lambdas = {0.0, 0.125, 0.25};
  k.green_d_grid = green_d_grid;
  for (double l : k.lambdas) {
    std::vector<double> row;
    for (double d : green_d_grid) row.push_back(green_kernel_log(l, d));
    k.log_green.push_back(std::move(row));
  }
  k.bounds = bounds;
  return k;
}

namespace {
void write_row(std::ostringstream& os, const char* key, const std::vector<double>& v) {
  os << key << ' ' << v.size();
  for (double x : v) os << ' ' << fmt17(x);
  os << '\n';
}

std::vector<double> read_row(std::istringstream& is, const std::string& expect) {
  std::string key;
  std::size_t n = 0;
  if (!(is >> key >> n) || key != expect) throw std::runtime_error("kernel table: expected " + expect);
  std::vector<double> v(n);
  for (double& x : v)
    if (!(is >> x)) throw std::runtime_error("kernel table: truncated " + expect);
  return v;
}
}  // namespace

// Values are stored as logarithms: the heat kernel underflows doubles on most of the grid.
std::string kernel_table_to_text(const KernelTable& k) {
  std::ostringstream os;
  os << "hyplab-kernels 1\n";
  os << "D " << fmt17(k.bounds.D) << "\nc_gauss " << fmt17(k.bounds.c_gauss) << "\nc_hyp " << fmt17(k.bounds.c_hyp) << '\n';
  write_row(os, "t_grid", k.t_grid);
  write_row(os, "d_grid", k.d_grid);
  for (const auto& row : k.log_heat) write_row(os, "log_heat", row);
  write_row(os, "lambdas", k.lambdas);
  write_row(os, "green_d_grid", k.green_d_grid);
  for (const auto& row : k.log_green) write_row(os, "log_green", row);
  return os.str();
}

KernelTable kernel_table_from_text(const std::string& text) {
  std::istringstream is(text);
  std::string tag, key;
  int version = 0;
  if (!(is >> tag >> version) || tag != "hyplab-kernels" || version != 1) throw std::runtime_error("kernel table: bad header");
  KernelTable k;
  if (!(is >> key >> k.bounds.D) || key != "D") throw std::runtime_error("kernel table: missing D");
  if (!(is >> key >> k.bounds.c_gauss) || key != "c_gauss") throw std::runtime_error("kernel table: missing c_gauss");
  if (!(is >> key >> k.bounds.c_hyp) || key != "c_hyp") throw std::runtime_error("kernel table: missing c_hyp");
  k.t_grid = read_row(is, "t_grid");
  k.d_grid = read_row(is, "d_grid");
  for (std::size_t i = 0; i < k.t_grid.size(); ++i) {
    k.log_heat.push_back(read_row(is, "log_heat"));
    if (k.log_heat.back().size() != k.d_grid.size()) throw std::runtime_error("kernel table: ragged heat row");
  }
  k.lambdas = read_row(is, "lambdas");
  k.green_d_grid = read_row(is, "green_d_grid");
  for (std::size_t i = 0; i < k.lambdas.size(); ++i) {
    k.log_green.push_back(read_row(is, "log_green"));
    if (k.log_green.back().size() != k.green_d_grid.size()) throw std::runtime_error("kernel table: ragged green row");
  }
  return k;
}

void save_kernel_table(const KernelTable& k, const std::filesystem::path& path) { write_file(path, kernel_table_to_text(k)); }

KernelTable load_kernel_table(const std::filesystem::path& path) { return kernel_table_from_text(read_file(path)); }

}  // namespace hyplab
