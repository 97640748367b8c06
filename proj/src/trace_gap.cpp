#include "hyplab/trace_gap.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "hyplab/rng.hpp"

namespace hyplab {

namespace {
constexpr std::size_t kStrata = 50;

std::size_t round_to_batches(std::size_t count) { return (std::max<std::size_t>(count, kBatches) + kBatches - 1) / kBatches * kBatches; }

double batch_stderr(const double* b) {
  double mean = 0;
  for (std::size_t i = 0; i < kBatches; ++i) mean += b[i];
  mean /= kBatches;
  double ss = 0;
  for (std::size_t i = 0; i < kBatches; ++i) ss += (b[i] - mean) * (b[i] - mean);
  return std::sqrt(ss / (kBatches - 1) / kBatches);
}
}  // namespace

std::vector<HPoint> sample_fundamental_domain(const FuchsianModel& model, std::size_t count, std::uint64_t seed) {
  count = round_to_batches(count);
  Rng rng(seed);
  const double span = std::cosh(model.domain_radius) - 1;
  std::vector<HPoint> accepted;
  // Whole rounds (one proposal per stratum) keep the sample uniform; a random subset of the
  // accepted points is then taken.
  while (accepted.size() < count) {
    for (std::size_t k = 0; k < kStrata; ++k) {
      const double u = (static_cast<double>(k) + rng.uniform()) / kStrata;
      const double r = std::acosh(1 + u * span);
      const HPoint p = polar_point(r, 2 * std::numbers::pi * rng.uniform());
      if (in_fundamental_domain(model, p)) accepted.push_back(p);
    }
  }
  std::shuffle(accepted.begin(), accepted.end(), rng.engine());
  accepted.resize(count);
  return accepted;
}

double OrbitWeights::combine(const std::vector<double>& coeff) const {
  double s = 0;
  for (std::size_t i = 0; i < value.size() && i < coeff.size(); ++i) s += coeff[i] * value[i];
  return s;
}

double OrbitWeights::combine_stderr(const std::vector<double>& coeff) const {
  double b[kBatches] = {};
  for (std::size_t i = 0; i < value.size() && i < coeff.size(); ++i) {
    if (coeff[i] == 0) continue;
    for (std::size_t k = 0; k < kBatches; ++k) b[k] += coeff[i] * batch[i * kBatches + k];
  }
  return batch_stderr(b);
}

OrbitWeights compute_orbit_weights(const FuchsianModel& model, const OrbitBall& ball, double t, const std::vector<HPoint>& points,
                                   const std::vector<std::size_t>& entries) {
  if (!(t >= 0.1 && t <= 20)) throw std::domain_error("orbit weights: t outside [0.1, 20]");
  if (points.empty() || points.size() % kBatches != 0) throw std::invalid_argument("orbit weights: point count must be a positive multiple of 25");
  const RadialHeatProfile prof(t, ball.radius + 2 * model.domain_radius + 1, 0.01);
  OrbitWeights w;
  w.t = t;
  w.value.assign(ball.size(), 0.0);
  w.batch.assign(ball.size() * kBatches, 0.0);
  const double per_batch = static_cast<double>(points.size() / kBatches);
  for (std::size_t e : entries) {
    const Mat2& g = ball.entries.at(e).matrix;
    double* b = &w.batch[e * kBatches];
    double total = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const double h = prof.value(hyp_dist(points[i], apply(g, points[i])));
      b[i % kBatches] += h;
      total += h;
    }
    for (std::size_t k = 0; k < kBatches; ++k) b[k] *= model.area / per_batch;
    w.value[e] = model.area * total / static_cast<double>(points.size());
  }
  return w;
}

OrbitWeights compute_orbit_weights(const FuchsianModel& model, const OrbitBall& ball, double t, const std::vector<HPoint>& points) {
  std::vector<std::size_t> all(ball.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return compute_orbit_weights(model, ball, t, points, all);
}

WeightEstimate orbit_weight(const FuchsianModel& model, const Mat2& g, double t, std::size_t mc_points, std::uint64_t seed) {
  OrbitBall one;
  one.genus = model.genus();
  one.radius = displacement(g);
  one.complete = false;
  one.entries.push_back(OrbitEntry{{}, g, one.radius, 0, 1});
  const auto pts = sample_fundamental_domain(model, mc_points, seed);
  const OrbitWeights w = compute_orbit_weights(model, one, t, pts);
  return {w.value[0], w.combine_stderr({1.0})};
}

double truncation_tail_bound(const FuchsianModel& model, const OrbitBall& ball, double t) {
  const double c = counting_constant(ball);
  const double shift = 2 * model.domain_radius;
  const double R = ball.radius;
  const RadialHeatProfile prof(t, R + 60, 0.01);
  auto log_f = [&](double r) { return std::log(model.area) + prof.log_value(std::max(0.0, r - shift)); };
  double integral = 0;
  for (double lo = R;; lo += 5) {
    const double piece = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        [&](double r) { return std::exp(r + log_f(r)); }, lo, lo + 5, 10, 1e-10);
    integral += piece;
    if (piece <= 1e-16 * integral || lo > R + 400) break;
  }
  return c * (std::exp(R + log_f(R)) + integral);
}

std::vector<std::size_t> fixed_point_table(const CoverHom& h, const OrbitBall& ball) {
  std::vector<std::size_t> f(ball.size());
  for (std::size_t i = 0; i < ball.size(); ++i) f[i] = fixed_points(h, ball.entries[i].word);
  return f;
}

CoverTrace cover_heat_trace(const CoverHom& h, const FuchsianModel& model, const OrbitBall& ball, double t, std::size_t mc_points,
                            std::uint64_t seed) {
  if (!ball.complete) throw std::invalid_argument("cover_heat_trace: ball is not complete");
  const auto pts = sample_fundamental_domain(model, mc_points, seed);
  const OrbitWeights w = compute_orbit_weights(model, ball, t, pts);
  const auto f = fixed_point_table(h, ball);
  std::vector<double> c(f.begin(), f.end());
  CoverTrace tr;
  tr.value = w.combine(c);
  tr.stderr_ = w.combine_stderr(c);
  tr.tail = static_cast<double>(h.n) * truncation_tail_bound(model, ball, t);
  return tr;
}

TraceReport trace_report(const CoverHom& h, const FuchsianModel& model, const OrbitBall& ball, const OrbitWeights& w) {
  if (!ball.complete) throw std::invalid_argument("trace_report: ball is not complete");
  const auto f = fixed_point_table(h, ball);
  TraceReport r;
  r.n = h.n;
  r.t = w.t;
  r.R = ball.radius;
  std::vector<double> diff(ball.size());
  for (std::size_t i = 0; i < ball.size(); ++i) {
    diff[i] = static_cast<double>(f[i]) - 1.0;
    const double term = diff[i] * w.value[i];
    if (i == 0)
      r.term_id = term;
    else if (ball.entries[i].primitive_power >= 2)
      r.term_nonprimitive += term;
    else
      r.term_primitive += term;
    r.base_trace += w.value[i];
    r.cover_trace += static_cast<double>(f[i]) * w.value[i];
  }
  r.mc_stderr = w.combine_stderr(diff);
  r.tail_bound = static_cast<double>(h.n - 1) * truncation_tail_bound(model, ball, w.t);
  const double truncated = r.term_id + r.term_primitive + r.term_nonprimitive;
  r.new_trace_upper = truncated + r.tail_bound;
  r.floor_flag = truncated <= 3 * r.mc_stderr;
  const double floor = std::max(3 * r.mc_stderr, 1e-300);
  r.lambda1_witness = -std::log(std::max(r.new_trace_upper, floor)) / w.t;
  return r;
}

TraceReport new_eigenvalue_witness(const CoverHom& h, const FuchsianModel& model, const OrbitBall& ball, double t, std::size_t mc_points,
                                   std::uint64_t seed) {
  const auto pts = sample_fundamental_domain(model, mc_points, seed);
  return trace_report(h, model, ball, compute_orbit_weights(model, ball, t, pts));
}

nlohmann::json to_json(const TraceReport& r) {
  return {{"n", r.n},
          {"t", r.t},
          {"R", r.R},
          {"term_id", r.term_id},
          {"term_primitive", r.term_primitive},
          {"term_nonprimitive", r.term_nonprimitive},
          {"tail_bound", r.tail_bound},
          {"base_trace", r.base_trace},
          {"cover_trace", r.cover_trace},
          {"mc_stderr", r.mc_stderr},
          {"new_trace_upper", r.new_trace_upper},
          {"lambda1_witness", r.lambda1_witness},
          {"floor_flag", r.floor_flag}};
}

bool NonPrimitiveBound::holds() const {
  return std::all_of(rows.begin(), rows.end(), [](const NonPrimitiveRow& r) { return r.holds; });
}

NonPrimitiveBound nonprimitive_trace_bound(const FuchsianModel& model, const OrbitBall& ball, const std::vector<double>& t_grid,
                                           std::size_t mc_points, std::uint64_t seed) {
  if (t_grid.empty()) throw std::invalid_argument("nonprimitive_trace_bound: empty t grid");
  const double t_max = *std::max_element(t_grid.begin(), t_grid.end());
  if (ball.radius < 2 * t_max) throw std::invalid_argument("nonprimitive_trace_bound: ball radius below 2 max(t)");
  std::vector<std::size_t> np;
  for (std::size_t i = 1; i < ball.size(); ++i)
    if (ball.entries[i].primitive_power >= 2) np.push_back(i);
  std::vector<double> coeff(ball.size(), 0.0);
  for (std::size_t i : np) coeff[i] = 1.0;
  const auto pts = sample_fundamental_domain(model, mc_points, seed);
  NonPrimitiveBound out;
  for (double t : t_grid) {
    const OrbitWeights w = compute_orbit_weights(model, ball, t, pts, np);
    NonPrimitiveRow row;
    row.t = t;
    row.sum = w.combine(coeff);
    row.stderr_ = w.combine_stderr(coeff);
    row.shape = t * t * t * std::exp(-t / 4);
    row.ratio = row.sum / row.shape;
    out.rows.push_back(row);
  }
  out.constant = out.rows.front().ratio;
  for (auto& row : out.rows) row.holds = row.ratio <= out.constant;
  return out;
}

bool GreenRoute::holds() const {
  return std::all_of(rows.begin(), rows.end(), [](const GreenRouteRow& r) { return r.holds; });
}

GreenRoute green_route_bound(const FuchsianModel& model, const OrbitBall& ball, const std::vector<double>& radii, std::size_t mc_points,
                             std::uint64_t seed) {
  if (radii.empty()) throw std::invalid_argument("green_route_bound: no radii");
  const double r_max = *std::max_element(radii.begin(), radii.end());
  if (r_max > ball.radius + 1e-12) throw std::invalid_argument("green_route_bound: radius beyond the ball");
  const auto pts = sample_fundamental_domain(model, mc_points, seed);
  const RadialGreenProfile prof(kLambda0, r_max + 2 * model.domain_radius + 1, 0.01);
  // Integral over F of min(1, G(x, g x)) for each proper power in the ball.
  std::vector<std::pair<double, double>> terms;  // (displacement, weight)
  for (std::size_t i = 1; i < ball.size(); ++i) {
    const OrbitEntry& e = ball.entries[i];
    if (e.primitive_power < 2 || e.displacement > r_max) continue;
    double s = 0;
    for (const HPoint& p : pts) s += std::min(1.0, prof.value(hyp_dist(p, apply(e.matrix, p))));
    terms.emplace_back(e.displacement, model.area * s / static_cast<double>(pts.size()));
  }
  GreenRoute out;
  for (double R : radii) {
    GreenRouteRow row;
    row.R = R;
    for (const auto& [d, w] : terms)
      if (d <= R) row.sum += w;
    row.shape = R * R * R;
    row.ratio = row.sum / row.shape;
    out.rows.push_back(row);
  }
  std::vector<GreenRouteRow> sorted = out.rows;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.R < b.R; });
  for (const auto& row : sorted)
    if (row.sum > 0) {
      out.calibration_R = row.R;
      out.constant = row.ratio;
      break;
    }
  for (auto& row : out.rows) row.holds = row.ratio <= out.constant;
  return out;
}

}  // namespace hyplab
