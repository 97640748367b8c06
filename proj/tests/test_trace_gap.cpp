#include <doctest.h>

#include <cmath>
#include <numbers>

#include "hyplab/rng.hpp"
#include "hyplab/trace_gap.hpp"

using namespace hyplab;

namespace {

const FuchsianModel& model() {
  static const FuchsianModel m = build_model(2);
  return m;
}

const OrbitBall& ball(double R) {
  static const OrbitBall b8 = enumerate_ball(model(), 8.0);
  static const OrbitBall b10 = enumerate_ball(model(), 10.0);
  return R <= 8 ? b8 : b10;
}

const std::vector<HPoint>& points() {
  static const std::vector<HPoint> p = sample_fundamental_domain(model(), 500, 42);
  return p;
}

}  // namespace

TEST_CASE("domain samples") {
  const auto pts = sample_fundamental_domain(model(), 101, 1);
  CHECK(pts.size() % kBatches == 0);
  CHECK(pts.size() >= 101);
  for (const HPoint& p : pts) CHECK(in_fundamental_domain(model(), p, 1e-9));
  const auto again = sample_fundamental_domain(model(), 101, 1);
  CHECK(again.front().x == pts.front().x);
  CHECK(again.back().y == pts.back().y);
  // Uniform in area: the fraction inside the inscribed disk is 2 pi (cosh r_in - 1) / area.
  const auto many = sample_fundamental_domain(model(), 20000, 2);
  double inside = 0;
  for (const HPoint& p : many) inside += hyp_dist(p, model().base_point) <= model().inradius;
  const double expected = 2 * std::numbers::pi * (std::cosh(model().inradius) - 1) / model().area;
  const double se = std::sqrt(expected * (1 - expected) / static_cast<double>(many.size()));
  CHECK(std::abs(inside / static_cast<double>(many.size()) - expected) <= 4 * se);
}

TEST_CASE("identity weight is area times the diagonal kernel") {
  for (double t : {0.5, 1.0, 2.0}) {
    const WeightEstimate w = orbit_weight(model(), Mat2::identity(), t, 100, 3);
    CHECK(w.value == doctest::Approx(4 * std::numbers::pi * heat_exact(t, 0.0)).epsilon(1e-7));
    CHECK(w.stderr_ == doctest::Approx(0.0));
  }
}

TEST_CASE("weights fall with translation length at fixed t") {
  // g^k shares the axis of g, and d(x, g^k x) grows with k at every x.
  const auto& b = ball(8);
  std::size_t tested = 0;
  for (std::size_t i = 1; i < b.size() && tested < 20; i += 13) {
    if (b.entries[i].primitive_power != 1) continue;
    OrbitBall powers;
    Mat2 g = b.entries[i].matrix;
    for (int k = 1; k <= 3; ++k) {
      powers.entries.push_back(OrbitEntry{{}, g, displacement(g), translation_length(g), k});
      powers.radius = displacement(g);
      g = g * b.entries[i].matrix;
    }
    const OrbitWeights w = compute_orbit_weights(model(), powers, 1.0, points());
    CHECK(w.value[0] > w.value[1]);
    CHECK(w.value[1] > w.value[2]);
    ++tested;
  }
  CHECK(tested == 20);
}

TEST_CASE("truncated base trace is stable in R") {
  // At t <= 1 the orbit beyond R = 8 carries a negligible share of the trace.
  const OrbitWeights w1a = compute_orbit_weights(model(), ball(8), 0.5, points());
  const OrbitWeights w2a = compute_orbit_weights(model(), ball(8), 1.0, points());
  const OrbitWeights w1b = compute_orbit_weights(model(), ball(10), 0.5, points());
  const OrbitWeights w2b = compute_orbit_weights(model(), ball(10), 1.0, points());
  auto total = [](const OrbitWeights& w) { return w.combine(std::vector<double>(w.value.size(), 1.0)); };
  const double ra = total(w1a) / total(w2a), rb = total(w1b) / total(w2b);
  CHECK(ra == doctest::Approx(rb).epsilon(1e-3));
  // The tail bound covers what the larger ball adds.
  CHECK(total(w2b) - total(w2a) <= truncation_tail_bound(model(), ball(8), 1.0));
  CHECK(truncation_tail_bound(model(), ball(10), 2.0) < truncation_tail_bound(model(), ball(8), 2.0));
}

TEST_CASE("trivial cover is n copies of the base") {
  const CoverHom h = trivial_hom(2, 5);
  const OrbitWeights w = compute_orbit_weights(model(), ball(8), 2.0, points());
  const TraceReport r = trace_report(h, model(), ball(8), w);
  CHECK(r.cover_trace == doctest::Approx(5 * r.base_trace).epsilon(1e-12));
  CHECK(r.term_id + r.term_primitive + r.term_nonprimitive == doctest::Approx(4 * r.base_trace).epsilon(1e-12));
  CHECK(r.floor_flag == false);
  // The disconnected cover has new eigenvalue 0, so the witness cannot exceed about 0.
  CHECK(r.lambda1_witness <= 0.05);
}

TEST_CASE("degree one cover reproduces the base trace") {
  const CoverHom h = trivial_hom(2, 1);
  const OrbitWeights w = compute_orbit_weights(model(), ball(8), 2.0, points());
  const TraceReport r = trace_report(h, model(), ball(8), w);
  CHECK(r.cover_trace == r.base_trace);
  CHECK(r.term_id == 0.0);
  CHECK(r.term_primitive == 0.0);
  CHECK(r.term_nonprimitive == 0.0);
  CHECK(r.tail_bound == 0.0);
}

TEST_CASE("term accounting and positivity") {
  const OrbitWeights w = compute_orbit_weights(model(), ball(8), 2.0, points());
  for (std::uint64_t s = 0; s < 5; ++s) {
    const CoverHom h = sample_hom(2, 6, derive_seed(5, s)).hom;
    const TraceReport r = trace_report(h, model(), ball(8), w);
    CHECK(r.cover_trace - r.base_trace ==
          doctest::Approx(r.term_id + r.term_primitive + r.term_nonprimitive).epsilon(1e-12));
    CHECK(r.term_id == doctest::Approx(5 * 4 * std::numbers::pi * heat_exact(2.0, 0.0)).epsilon(1e-7));
    CHECK(r.cover_trace >= 6 * w.value[0] * (1 - 1e-12));
    CHECK(r.new_trace_upper == doctest::Approx(r.term_id + r.term_primitive + r.term_nonprimitive + r.tail_bound));
    const double floor = std::max(r.new_trace_upper, 3 * r.mc_stderr);
    CHECK(r.lambda1_witness == doctest::Approx(-std::log(floor) / 2.0));
    const CoverTrace ct = cover_heat_trace(h, model(), ball(8), 2.0, 500, 42);
    CHECK(ct.value == doctest::Approx(r.cover_trace).epsilon(1e-12));
  }
}

TEST_CASE("non-primitive sums at t = 1 calibrate the bound") {
  const NonPrimitiveBound np = nonprimitive_trace_bound(model(), ball(8), {1.0, 2.0, 3.0, 4.0}, 250, 9);
  REQUIRE(np.rows.size() == 4);
  CHECK(np.constant == doctest::Approx(np.rows[0].ratio));
  CHECK(np.rows[0].holds);
  for (const auto& row : np.rows) {
    CHECK(row.sum > 0);
    CHECK(row.shape == doctest::Approx(std::pow(row.t, 3) * std::exp(-row.t / 4)));
  }
  CHECK_THROWS(nonprimitive_trace_bound(model(), ball(8), {1.0, 5.0}, 250, 9));
}

TEST_CASE("Green route sums grow with R") {
  const GreenRoute g = green_route_bound(model(), ball(10), {8.0, 10.0}, 250, 9);
  REQUIRE(g.rows.size() == 2);
  CHECK(g.rows[0].sum <= g.rows[1].sum);
  CHECK(g.calibration_R == 8.0);
  CHECK_THROWS(green_route_bound(model(), ball(8), {10.0}, 250, 9));
}

TEST_CASE("trace report JSON") {
  const OrbitWeights w = compute_orbit_weights(model(), ball(8), 2.0, points());
  const TraceReport r = trace_report(sample_hom(2, 4, 1).hom, model(), ball(8), w);
  const nlohmann::json j = to_json(r);
  CHECK(j["n"] == 4);
  CHECK(j["term_id"].get<double>() == r.term_id);
  CHECK(j.contains("lambda1_witness"));
}
