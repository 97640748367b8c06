#include "hyplab/orbit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "hyplab/detail/isometry_index.hpp"

namespace hyplab {

OrbitBall enumerate_ball(const FuchsianModel& model, double radius, const BallOptions& options) {
  if (!(radius >= 0)) throw std::invalid_argument("enumerate_ball: radius must be non-negative");
  if (radius > options.max_radius)
    throw std::invalid_argument("enumerate_ball: radius " + std::to_string(radius) + " exceeds R_max " + std::to_string(options.max_radius));
  OrbitEnumOptions eo;
  eo.exact_confirm = options.exact_confirm;
  const OrbitElements orbit = enumerate_orbit_elements(model, radius, eo);

  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < orbit.size(); ++i)
    if (orbit.displacement[i] <= radius) ids.push_back(i);
  std::stable_sort(ids.begin(), ids.end(), [&](std::size_t x, std::size_t y) { return orbit.displacement[x] < orbit.displacement[y]; });

  OrbitBall ball;
  ball.genus = model.genus();
  ball.radius = radius;
  ball.entries.reserve(ids.size());
  detail::IsometryIndex index(ids.size());
  for (std::size_t i : ids) {
    OrbitEntry e;
    e.matrix = orbit.matrices[i];
    e.displacement = orbit.displacement[i];
    e.word = side_word_to_word(model, orbit.side_word(i));
    if (i != 0) e.translation_length = translation_length(e.matrix);
    index.insert(e.matrix, static_cast<std::uint32_t>(ball.entries.size()));
    ball.entries.push_back(std::move(e));
  }

  // Roots of non-primitive elements are no farther from x0 than their powers
  // (sinh(d/2) = cosh(r) sinh(l/2) grows with l at fixed axis distance), so marking
  // every power of every ball element that stays in the ball is exact.
  for (std::size_t i = 1; i < ball.size(); ++i) {
    Mat2 p = ball.entries[i].matrix;
    for (int k = 2;; ++k) {
      p = p * ball.entries[i].matrix;
      if (displacement(p) > radius + 1e-9) break;
      int hit = -1;
      index.for_each_candidate(p, [&](std::uint32_t id) {
        if (hit < 0 && same_isometry(ball.entries[id].matrix, p, 1e-6)) hit = static_cast<int>(id);
      });
      if (hit >= 0) ball.entries[static_cast<std::size_t>(hit)].primitive_power = std::max(ball.entries[static_cast<std::size_t>(hit)].primitive_power, k);
    }
  }
  ball.complete = true;
  return ball;
}

std::vector<double> census_radii(double radius, double step) {
  std::vector<double> r;
  for (int i = 0;; ++i) {
    const double v = 1.0 + step * i;
    if (v > radius + 1e-12) break;
    r.push_back(v);
  }
  return r;
}

std::vector<CensusShell> count_nonprimitive(const OrbitBall& ball, const std::vector<double>& radii) {
  if (!ball.complete) throw std::invalid_argument("count_nonprimitive: ball is not complete");
  std::vector<CensusShell> out;
  for (double R : radii) {
    if (R > ball.radius + 1e-12) throw std::invalid_argument("count_nonprimitive: radius beyond the ball");
    CensusShell s;
    s.radius = R;
    for (const OrbitEntry& e : ball.entries) {
      if (e.displacement > R) break;
      ++s.total;
      if (e.primitive_power >= 2)
        ++s.nonprimitive;
      else if (e.translation_length > 0)
        ++s.primitive;
    }
    out.push_back(s);
  }
  return out;
}

double fit_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
    if (!(y[i] > 0)) continue;
    const double ly = std::log(y[i]);
    sx += x[i];
    sy += ly;
    sxx += x[i] * x[i];
    sxy += x[i] * ly;
    ++n;
  }
  if (n < 2) throw std::invalid_argument("fit_log_slope: need two positive points");
  const double den = n * sxx - sx * sx;
  if (den == 0) throw std::invalid_argument("fit_log_slope: degenerate abscissae");
  return (n * sxy - sx * sy) / den;
}

double counting_constant(const OrbitBall& ball) {
  // N(R) e^{-R} is maximal just after a jump, i.e. at an entry's displacement.
  double c = 0;
  for (std::size_t i = 0; i < ball.size(); ++i) {
    const double R = std::max(1.0, ball.entries[i].displacement);
    c = std::max(c, static_cast<double>(i + 1) * std::exp(-R));
  }
  return c;
}

double gaussian_tail_integral(double t, double cutoff) {
  // int_c^inf exp(r - r^2/16t) dr = e^{4t} (sqrt(pi)/2) 4 sqrt(t) erfc((c - 8t) / (4 sqrt t))
  const double s = 4.0 * std::sqrt(t);
  return std::exp(4.0 * t) * 0.5 * s * std::sqrt(std::numbers::pi) * std::erfc((cutoff - 8.0 * t) / s);
}

TailCheck tail_sum_check(const OrbitBall& ball, double t, double cutoff) {
  if (cutoff > ball.radius + 1e-12) throw std::invalid_argument("tail_sum_check: cutoff beyond the ball");
  if (!(t > 0)) throw std::invalid_argument("tail_sum_check: t must be positive");
  TailCheck tc;
  for (const OrbitEntry& e : ball.entries)
    if (e.displacement >= cutoff) tc.sum += std::exp(-e.displacement * e.displacement / (16.0 * t));
  tc.integral = gaussian_tail_integral(t, cutoff);
  tc.boundary = std::exp(cutoff - cutoff * cutoff / (16.0 * t));
  tc.constant = counting_constant(ball);
  tc.majorant = tc.constant * (tc.boundary + tc.integral);
  tc.holds = tc.sum <= tc.majorant;
  return tc;
}

namespace {
std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace

std::string ball_to_text(const OrbitBall& ball) {
  std::ostringstream os;
  os << "hyplab-ball 1\n";
  os << "genus " << ball.genus << "\nradius " << fmt17(ball.radius) << "\ncomplete " << (ball.complete ? 1 : 0) << "\ncount "
     << ball.size() << "\n";
  for (const OrbitEntry& e : ball.entries) {
    os << fmt17(e.matrix.a) << ' ' << fmt17(e.matrix.b) << ' ' << fmt17(e.matrix.c) << ' ' << fmt17(e.matrix.d) << ' '
       << fmt17(e.displacement) << ' ' << fmt17(e.translation_length) << ' ' << e.primitive_power << ' ' << to_string(e.word) << "\n";
  }
  return os.str();
}

OrbitBall ball_from_text(const std::string& text) {
  std::istringstream is(text);
  std::string tag, key;
  int version = 0;
  if (!(is >> tag >> version) || tag != "hyplab-ball" || version != 1) throw std::runtime_error("ball file: bad header");
  OrbitBall ball;
  int complete = 0;
  std::size_t count = 0;
  if (!(is >> key >> ball.genus) || key != "genus") throw std::runtime_error("ball file: missing genus");
  if (!(is >> key >> ball.radius) || key != "radius") throw std::runtime_error("ball file: missing radius");
  if (!(is >> key >> complete) || key != "complete") throw std::runtime_error("ball file: missing complete flag");
  if (!(is >> key >> count) || key != "count") throw std::runtime_error("ball file: missing count");
  ball.complete = complete != 0;
  const Presentation p(ball.genus);
  std::string line;
  std::getline(is, line);
  ball.entries.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(is, line)) throw std::runtime_error("ball file: truncated");
    std::istringstream ls(line);
    OrbitEntry e;
    if (!(ls >> e.matrix.a >> e.matrix.b >> e.matrix.c >> e.matrix.d >> e.displacement >> e.translation_length >> e.primitive_power))
      throw std::runtime_error("ball file: malformed entry " + std::to_string(i));
    std::string rest;
    std::getline(ls, rest);
    e.word = parse_word(rest, p);
    ball.entries.push_back(std::move(e));
  }
  return ball;
}

void save_ball(const OrbitBall& ball, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << ball_to_text(ball);
}

OrbitBall load_ball(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return ball_from_text(ss.str());
}

}  // namespace hyplab
