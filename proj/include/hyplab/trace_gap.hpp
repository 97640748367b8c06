#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "hyplab/cover.hpp"
#include "hyplab/hyperbolic.hpp"
#include "hyplab/kernels.hpp"
#include "hyplab/orbit.hpp"

namespace hyplab {

inline constexpr std::size_t kBatches = 25;

// Points uniform for hyperbolic area in the fundamental polygon: radii stratified in the
// area coordinate of the circumscribed disk, then the Dirichlet test. `count` is rounded up
// to a multiple of kBatches; point i belongs to batch i % kBatches.
std::vector<HPoint> sample_fundamental_domain(const FuchsianModel& model, std::size_t count, std::uint64_t seed);

struct WeightEstimate {
  double value = 0;
  double stderr_ = 0;
};

// int_F H(t, x, g x) dx by Monte Carlo over `mc_points` sampled points.
WeightEstimate orbit_weight(const FuchsianModel& model, const Mat2& g, double t, std::size_t mc_points, std::uint64_t seed);

// Weights of every ball entry on a common set of points, with per-batch means so that any
// linear combination gets a batch-means standard error.
struct OrbitWeights {
  double t = 0;
  std::vector<double> value;  // per entry
  std::vector<double> batch;  // entry * kBatches + b

  double combine(const std::vector<double>& coeff) const;
  double combine_stderr(const std::vector<double>& coeff) const;
};

OrbitWeights compute_orbit_weights(const FuchsianModel& model, const OrbitBall& ball, double t, const std::vector<HPoint>& points);
// Same, restricted to the listed entries (others get weight 0).
OrbitWeights compute_orbit_weights(const FuchsianModel& model, const OrbitBall& ball, double t, const std::vector<HPoint>& points,
                                   const std::vector<std::size_t>& entries);

// Sum over g outside the ball of int_F H(t, x, g x) dx. With d(x, g x) >= d(x0, g x0) - 2 R_c and
// N(r) <= c e^r, summation by parts gives c (f(R) e^R + int_R^inf e^r f(r) dr),
// f(r) = area H(t, max(0, r - 2 R_c)).
double truncation_tail_bound(const FuchsianModel& model, const OrbitBall& ball, double t);

// F_n(g) for every ball entry.
std::vector<std::size_t> fixed_point_table(const CoverHom& h, const OrbitBall& ball);

struct CoverTrace {
  double value = 0;   // sum over the ball of F_n(g) w(g)
  double stderr_ = 0;
  double tail = 0;    // n times the truncation tail bound
};

CoverTrace cover_heat_trace(const CoverHom& h, const FuchsianModel& model, const OrbitBall& ball, double t, std::size_t mc_points,
                            std::uint64_t seed);

// Terms of Tr e^{-t Delta_{X_n}} - Tr e^{-t Delta_X} = sum_g (F_n(g) - 1) w(g), split by the type of g.
struct TraceReport {
  std::size_t n = 0;
  double t = 0;
  double R = 0;
  double term_id = 0;            // (n - 1) area H(t, 0)
  double term_primitive = 0;     // nontrivial primitive g; signed
  double term_nonprimitive = 0;  // proper powers; signed
  double tail_bound = 0;         // (n - 1) times the truncation tail bound
  double base_trace = 0;         // sum over the ball of w(g)
  double cover_trace = 0;        // sum over the ball of F_n(g) w(g)
  double mc_stderr = 0;          // of the truncated difference
  double new_trace_upper = 0;    // term_id + term_primitive + term_nonprimitive + tail_bound
  double lambda1_witness = 0;    // -log(max(new_trace_upper, floor)) / t
  bool floor_flag = false;       // difference within 3 sigma of 0; witness is -log(floor)/t
};

TraceReport new_eigenvalue_witness(const CoverHom& h, const FuchsianModel& model, const OrbitBall& ball, double t, std::size_t mc_points,
                                   std::uint64_t seed);
// Same computation on precomputed weights.
TraceReport trace_report(const CoverHom& h, const FuchsianModel& model, const OrbitBall& ball, const OrbitWeights& w);

nlohmann::json to_json(const TraceReport& r);

struct NonPrimitiveRow {
  double t = 0;
  double sum = 0;  // sum over proper powers in the ball of w(g)
  double stderr_ = 0;
  double shape = 0;  // t^3 e^{-t/4}
  double ratio = 0;
  bool holds = false;  // ratio <= calibrated constant
};

struct NonPrimitiveBound {
  double constant = 0;  // ratio at the first t
  std::vector<NonPrimitiveRow> rows;
  bool holds() const;
};

// Ratios to t^3 e^{-t/4}, calibrated at t_grid.front(). Requires ball radius >= 2 max(t).
NonPrimitiveBound nonprimitive_trace_bound(const FuchsianModel& model, const OrbitBall& ball, const std::vector<double>& t_grid,
                                           std::size_t mc_points, std::uint64_t seed);

struct GreenRouteRow {
  double R = 0;
  double sum = 0;  // sum over proper powers with d(x0, g x0) <= R of int_F min(1, G_{1/4}(x, g x)) dx
  double shape = 0;  // R^3
  double ratio = 0;
  bool holds = false;
};

struct GreenRoute {
  double calibration_R = 0;
  double constant = 0;
  std::vector<GreenRouteRow> rows;
  bool holds() const;
};

// Calibrated at the smallest R whose sum is positive.
GreenRoute green_route_bound(const FuchsianModel& model, const OrbitBall& ball, const std::vector<double>& radii, std::size_t mc_points,
                             std::uint64_t seed);

}  // namespace hyplab
