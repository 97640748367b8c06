#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hyplab/rng.hpp"
#include "hyplab/strong_conv.hpp"

using namespace hyplab;

namespace {

const FuchsianModel& model() {
  static const FuchsianModel m = build_model(2);
  return m;
}

const OrbitBall& ball() {
  static const OrbitBall b = enumerate_ball(model(), 8.0);
  return b;
}

Permutation compose(const Permutation& p, const Permutation& q) {
  Permutation r(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) r[i] = q[p[i]];
  return r;
}

Permutation random_permutation(Rng& rng, std::size_t n) {
  Permutation p = identity_permutation(n);
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.below(i)]);
  return p;
}

// a1 = s, b1 = s^2, a2 = u, b2 = u^3: both commutators vanish, so this is a cover of any size.
CoverHom commuting_hom(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  const Permutation s = random_permutation(rng, n), u = random_permutation(rng, n);
  CoverHom h;
  h.genus = 2;
  h.n = n;
  h.gens = {s, compose(s, s), u, compose(compose(u, u), u)};
  return h;
}

std::vector<double> random_mean_zero(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform() - 0.5;
  project_mean_zero(v);
  return v;
}

double dot(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

GroupRingElement element(std::initializer_list<std::pair<const char*, double>> terms) {
  std::vector<std::pair<Word, double>> t;
  for (const auto& [w, c] : terms) t.emplace_back(parse_word(w), c);
  return make_group_ring_element(t, Presentation(2));
}

}  // namespace

TEST_CASE("group ring elements") {
  const GroupRingElement m = markov_element(2);
  CHECK(m.terms.size() == 8);
  CHECK(m.symmetric);
  CHECK(m.l1_norm() == 8.0);
  // Equal elements merge, zero coefficients vanish.
  const GroupRingElement z = element({{"a1 b1 A1 B1", 1.0}, {"b2 a2 B2 A2", 2.0}, {"a1", 0.0}});
  CHECK(z.terms.size() == 1);
  CHECK(z.terms[0].second == 3.0);
  CHECK_FALSE(z.symmetric);
  const GroupRingElement zz = adjoint(z);
  CHECK(zz.terms.size() == 1);
  const GroupRingElement r = group_ring_from_json(to_json(z), Presentation(2));
  CHECK(r.terms == z.terms);
  CHECK(element({{"a1", 1.0}, {"A1", 1.0}}).symmetric);
}

TEST_CASE("representation conventions") {
  Rng rng(1);
  const CoverHom h = sample_hom(2, 7, 3).hom;
  const std::vector<double> v = random_mean_zero(rng, 7);
  const auto same = rho_apply(h, element({{"", 1.0}}), v);
  for (std::size_t i = 0; i < 7; ++i) CHECK(same[i] == doctest::Approx(v[i]).epsilon(1e-14));
  std::vector<double> ones(7, 1.0);
  CHECK_THROWS(rho_apply(h, markov_element(2), ones));
  project_mean_zero(ones);
  for (double x : ones) CHECK(std::abs(x) <= 1e-15);
  // rho is a homomorphism for the right action.
  const auto g = element({{"a1 B2", 1.0}}), k = element({{"b1 a2 a2", 1.0}}), gk = element({{"a1 B2 b1 a2 a2", 1.0}});
  const auto lhs = rho_apply(h, g, rho_apply(h, k, v));
  const auto rhs = rho_apply(h, gk, v);
  for (std::size_t i = 0; i < 7; ++i) CHECK(lhs[i] == doctest::Approx(rhs[i]).epsilon(1e-14));
}

TEST_CASE("symmetric elements act self-adjointly") {
  Rng rng(2);
  const CoverHom h = sample_hom(2, 8, 5).hom;
  const GroupRingElement z = element({{"a1", 0.5}, {"A1", 0.5}, {"a1 b2", -1.25}, {"B2 A1", -1.25}, {"", 3.0}});
  REQUIRE(z.symmetric);
  for (int i = 0; i < 20; ++i) {
    const auto v = random_mean_zero(rng, 8), w = random_mean_zero(rng, 8);
    CHECK(std::abs(dot(rho_apply(h, z, v), w) - dot(v, rho_apply(h, z, w))) <= 1e-10);
  }
}

TEST_CASE("adjoint operator") {
  Rng rng(3);
  const CoverHom h = sample_hom(2, 6, 9).hom;
  const GroupRingElement z = element({{"a1 b1", 1.0}, {"b2", -2.0}});
  const RepOperator op(h, z);
  std::vector<double> zv(6), zsw(6);
  for (int i = 0; i < 10; ++i) {
    const auto v = random_mean_zero(rng, 6), w = random_mean_zero(rng, 6);
    op.apply(v, zv);
    op.apply_adjoint(w, zsw);
    CHECK(dot(zv, w) == doctest::Approx(dot(v, zsw)).epsilon(1e-12));
  }
}

TEST_CASE("norms of simple elements") {
  const CoverHom triv = trivial_hom(2, 6);
  CHECK(rep_norm(triv, markov_element(2)).norm == doctest::Approx(8.0).epsilon(1e-12));
  const CoverHom h = sample_hom(2, 9, 11).hom;
  CHECK(rep_norm(h, element({{"b1", 1.0}})).norm == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(rep_norm(h, element({{"a1 A2 b1", -2.5}})).norm == doctest::Approx(2.5).epsilon(1e-9));
  CHECK_THROWS(rep_norm(h, markov_element(2), 50));
  CHECK_THROWS(rep_norm(trivial_hom(2, 1), markov_element(2)));
}

TEST_CASE("power iteration agrees with the dense oracle") {
  const GroupRingElement m = markov_element(2);
  const GroupRingElement z = element({{"a1", 1.0}, {"b1 b2", -0.7}, {"A2 b1", 0.3}});
  for (std::size_t n : {4, 10}) {
    for (std::uint64_t s = 0; s < 4; ++s) {
      const CoverHom h = sample_hom(2, n, derive_seed(17, s)).hom;
      const RepNorm r = rep_norm(h, m);
      const auto spec = rep_spectrum_dense(h, m);
      const double top = std::max(std::abs(spec.front()), std::abs(spec.back()));
      CHECK(r.norm == doctest::Approx(top).epsilon(1e-6));
      CHECK(r.norm == doctest::Approx(rep_norm_dense(h, m)).epsilon(1e-6));
      CHECK(rep_norm(h, z).norm == doctest::Approx(rep_norm_dense(h, z)).epsilon(1e-6));
      CHECK(r.norm <= m.l1_norm() + 1e-12);
    }
  }
  for (std::size_t n : {16, 33, 64}) {
    const CoverHom h = commuting_hom(n, n);
    REQUIRE(h.satisfies_relator());
    const auto spec = rep_spectrum_dense(h, m);
    const double top = std::max(std::abs(spec.front()), std::abs(spec.back()));
    CHECK(rep_norm(h, m, 5000).norm == doctest::Approx(top).epsilon(1e-6));
    CHECK(rep_norm(h, z, 5000).norm == doctest::Approx(rep_norm_dense(h, z)).epsilon(1e-6));
  }
}

TEST_CASE("regular representation lower bounds") {
  const GroupRingElement id = element({{"", 1.0}});
  const GroupRingElement m = markov_element(2);
  double prev = 0;
  for (int L : {2, 4, 6}) {
    const CayleyBall b = regular_norm_ball(model(), L);
    CHECK(regular_norm_lower(model(), b, id).lower == doctest::Approx(1.0).epsilon(1e-9));
    const RegularNorm r = regular_norm_lower(model(), b, m);
    CHECK(r.ball_size == b.size());
    CHECK(r.lower >= prev - 1e-9);
    CHECK(r.lower < 8.0);
    prev = r.lower;
  }
  // Gamma is a quotient of the free group of rank 4, whose Markov norm is 2 sqrt(7).
  CHECK(prev > 4.5);
  CHECK(prev < 8.0);
  CHECK_THROWS(regular_norm_ball(model(), kRegularLMax + 1));
  CHECK_THROWS(regular_norm_lower(model(), enumerate_cayley_ball(model(), 2), m));
}

TEST_CASE("regular lower bound sees non-symmetric elements") {
  const GroupRingElement g = element({{"a1 b1", 2.0}});
  CHECK(regular_norm_lower(model(), g, 3).lower == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("norm report JSON") {
  NormReport r;
  r.n = 8;
  r.rep_norm = 6.1;
  r.regular_lower = 5.0;
  r.regular_upper = 8.0;
  r.gap = 1.1;
  const nlohmann::json j = to_json(r);
  CHECK(j["n"] == 8);
  CHECK(j["regular_upper"].get<double>() == 8.0);
  r.regular_upper.reset();
  CHECK(to_json(r)["regular_upper"].is_null());
}

TEST_CASE("Gauss-Legendre rules") {
  for (int n : {1, 4, 9}) {
    const auto [x, w] = gauss_legendre(n);
    for (int k = 0; k < 2 * n; ++k) {
      double s = 0;
      for (int i = 0; i < n; ++i) s += w[static_cast<std::size_t>(i)] * std::pow(x[static_cast<std::size_t>(i)], k);
      const double exact = k % 2 ? 0.0 : 2.0 / (k + 1);
      CHECK(s == doctest::Approx(exact).epsilon(1e-13));
    }
  }
}

TEST_CASE("domain quadrature") {
  const DomainQuadrature q = domain_quadrature(model(), 8);
  CHECK(q.points.size() == 16 * 64);
  CHECK(q.weight_sum() == doctest::Approx(4 * std::numbers::pi).epsilon(1e-9));
  for (const HPoint& p : q.points) CHECK(in_fundamental_domain(model(), p, 1e-9));
  // Integral of cosh d(x0, x) over the polygon: each triangle contributes
  // int sinh rho cosh rho = (cosh^2 rho_max - 1)/2 per unit angle; compare two resolutions.
  auto integral = [](const DomainQuadrature& dq, const FuchsianModel& m) {
    double s = 0;
    for (std::size_t i = 0; i < dq.points.size(); ++i) s += dq.weights[i] * std::cosh(hyp_dist(dq.points[i], m.base_point));
    return s;
  };
  const DomainQuadrature fine = domain_quadrature(model(), 16);
  CHECK(integral(q, model()) == doctest::Approx(integral(fine, model())).epsilon(1e-6));
  CHECK_THROWS(domain_quadrature(model(), 4));
}

TEST_CASE("Schur tail majorant decreases with the cutoff") {
  const double t4 = schur_tail_majorant(model(), ball(), 4.0);
  const double t6 = schur_tail_majorant(model(), ball(), 6.0);
  const double t8 = schur_tail_majorant(model(), ball(), 8.0);
  CHECK(t4 > t6);
  CHECK(t6 > t8);
  CHECK(t8 > 0);
  CHECK_THROWS(schur_tail_majorant(model(), ball(), 9.0));
}

TEST_CASE("degree one heat operator is a contraction") {
  const HeatOpNorm r = heat_op_norm_experiment(trivial_hom(2, 1), model(), ball(), 6.0, 8);
  CHECK(r.n == 1);
  CHECK(r.norm == doctest::Approx(r.base_norm).epsilon(1e-9));
  CHECK(r.norm <= 1.0);
  CHECK(r.norm > 0.5);
  CHECK(r.reference == doctest::Approx(std::exp(-0.25)));
  CHECK(r.slack == doctest::Approx(std::abs(1 - r.base_norm)));
}

TEST_CASE("heat operator on a cover") {
  const CoverHom h = sample_hom(2, 4, 6).hom;
  const HeatOpNorm r = heat_op_norm_experiment(h, model(), ball(), 4.0, 8);
  CHECK(r.norm <= r.base_norm + 1e-9);
  CHECK(r.within == (r.norm <= r.reference + r.tail + r.slack));
  const nlohmann::json j = to_json(r);
  CHECK(j["n"] == 4);
  CHECK_THROWS(heat_op_norm_experiment(h, model(), ball(), 9.0, 8));
  CHECK_THROWS(heat_op_norm_experiment(sample_hom(2, 10, 1).hom, model(), ball(), 4.0, 32));
}
