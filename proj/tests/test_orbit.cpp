#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "hyplab/orbit.hpp"

using namespace hyplab;

namespace {

const FuchsianModel& model() {
  static const FuchsianModel m = build_model(2);
  return m;
}

const OrbitBall& ball8() {
  static const OrbitBall b = enumerate_ball(model(), 8.0);
  return b;
}

}  // namespace

TEST_CASE("below the systole the ball is trivial") {
  const OrbitBall b = enumerate_ball(model(), model().systole - 1e-3);
  CHECK(b.size() == 1);
  CHECK(b.entries[0].word.empty());
  CHECK(b.complete);
}

TEST_CASE("ball entries are sorted, reduced and consistent") {
  const auto& b = ball8();
  const Presentation p(2);
  REQUIRE(b.complete);
  CHECK(b.entries[0].displacement == 0.0);
  for (std::size_t i = 1; i < b.size(); ++i) {
    const auto& e = b.entries[i];
    CHECK(e.displacement >= b.entries[i - 1].displacement);
    CHECK(e.displacement <= 8.0);
    CHECK(dehn_reduce(e.word, p) == e.word);
    CHECK(same_isometry(evaluate(model(), e.word), e.matrix, 1e-7));
    CHECK(e.translation_length >= model().systole - 1e-9);
    CHECK(e.translation_length <= e.displacement + 1e-9);
    CHECK(e.primitive_power >= 1);
  }
}

TEST_CASE("the ball is closed under inverses") {
  const auto& b = ball8();
  const Presentation p(2);
  std::size_t found = 0;
  for (const auto& e : b.entries) {
    const Word inv = canonical_form(inverse(e.word), p);
    for (const auto& f : b.entries) {
      if (std::abs(f.displacement - e.displacement) > 1e-9) continue;
      if (canonical_form(f.word, p) == inv) {
        ++found;
        break;
      }
    }
  }
  CHECK(found == b.size());
}

TEST_CASE("orbit count agrees with the Cayley ball inside the Svarc-Milnor radius") {
  const auto& m = model();
  const SvarcMilnor& sm = m.svarc_milnor;
  const double R = std::min(8.0, sm.complete_radius - 1e-9);
  REQUIRE(R > 4.0);
  const CayleyBall cb = enumerate_cayley_ball(m, sm.fitted_length);
  std::size_t from_cayley = 0;
  for (const Mat2& g : cb.matrices) from_cayley += displacement(g) <= R;
  const auto shells = count_nonprimitive(ball8(), {R});
  CHECK(shells[0].total == from_cayley);
}

TEST_CASE("census bookkeeping") {
  const auto radii = census_radii(8.0, 1.0);
  CHECK(radii.front() == 1.0);
  CHECK(radii.back() == 8.0);
  const auto shells = count_nonprimitive(ball8(), radii);
  for (std::size_t i = 0; i < shells.size(); ++i) {
    CHECK(shells[i].total == 1 + shells[i].primitive + shells[i].nonprimitive);
    if (i > 0) {
      CHECK(shells[i].total >= shells[i - 1].total);
      CHECK(shells[i].nonprimitive >= shells[i - 1].nonprimitive);
    }
  }
  CHECK(shells.back().total == ball8().size());
  CHECK_THROWS(count_nonprimitive(ball8(), {9.0}));
}

TEST_CASE("smallest non-primitive displacement comes from a square") {
  const auto& b = ball8();
  double np_min = 1e300, square_min = 1e300;
  for (const auto& e : b.entries) {
    if (e.primitive_power > 1) np_min = std::min(np_min, e.displacement);
    if (e.primitive_power == 1 && !e.word.empty()) square_min = std::min(square_min, displacement(e.matrix * e.matrix));
  }
  REQUIRE(np_min < 1e300);
  CHECK(np_min == doctest::Approx(square_min).epsilon(1e-9));
  // sinh(d/2) = cosh(r) sinh(l/2) with l = 2 l0 gives d >= 2 l0.
  CHECK(np_min >= 2 * model().systole - 1e-9);
}

TEST_CASE("power exponents match the words") {
  for (const auto& e : ball8().entries) {
    if (e.primitive_power <= 1) continue;
    // l(g*^k) = k l(g*) >= k l0.
    CHECK(translation_length(e.matrix) >= e.primitive_power * model().systole - 1e-8);
  }
}

TEST_CASE("log-slope fit") {
  std::vector<double> x, y;
  for (int i = 0; i < 10; ++i) {
    x.push_back(i);
    y.push_back(3.0 * std::exp(0.7 * i));
  }
  CHECK(fit_log_slope(x, y) == doctest::Approx(0.7).epsilon(1e-12));
  y[0] = 0;  // ignored
  CHECK(fit_log_slope(x, y) == doctest::Approx(0.7).epsilon(1e-12));
  CHECK_THROWS(fit_log_slope({1.0}, {2.0}));
}

TEST_CASE("growth is exponential with rate near one") {
  const auto radii = census_radii(8.0, 0.5);
  const auto shells = count_nonprimitive(ball8(), radii);
  std::vector<double> x, y;
  for (const auto& s : shells)
    if (s.radius >= 5.0) {
      x.push_back(s.radius);
      y.push_back(static_cast<double>(s.total));
    }
  CHECK(fit_log_slope(x, y) == doctest::Approx(1.0).epsilon(0.2));
  const double c = counting_constant(ball8());
  for (const auto& s : shells) CHECK(static_cast<double>(s.total) <= c * std::exp(s.radius) * (1 + 1e-12));
}

TEST_CASE("Gaussian tail sums") {
  const auto& b = ball8();
  const TailCheck single = tail_sum_check(b, 2.0, 8.0);
  CHECK(single.holds);
  const TailCheck tc = tail_sum_check(b, 2.0, 6.0);
  CHECK(tc.sum > 0);
  CHECK(tc.holds);
  CHECK(tail_sum_check(b, 4.0, 6.0).sum > tc.sum);
  CHECK(gaussian_tail_integral(2.0, 6.0) == doctest::Approx(tc.integral).epsilon(1e-12));
  CHECK_THROWS(tail_sum_check(b, 2.0, 9.0));
}

TEST_CASE("ball text round trip") {
  const OrbitBall b = enumerate_ball(model(), 6.0);
  const std::string text = ball_to_text(b);
  const OrbitBall r = ball_from_text(text);
  REQUIRE(r.size() == b.size());
  CHECK(r.radius == b.radius);
  CHECK(r.complete == b.complete);
  for (std::size_t i = 0; i < b.size(); ++i) {
    CHECK(r.entries[i].word == b.entries[i].word);
    CHECK(r.entries[i].displacement == b.entries[i].displacement);
    CHECK(r.entries[i].primitive_power == b.entries[i].primitive_power);
  }
  CHECK(ball_to_text(r) == text);
  const auto path = std::filesystem::temp_directory_path() / "hyplab_test_ball.txt";
  save_ball(b, path);
  CHECK(ball_to_text(load_ball(path)) == text);
  std::filesystem::remove(path);
  CHECK_THROWS(ball_from_text("not a ball"));
}

TEST_CASE("radius guard") {
  CHECK_THROWS(enumerate_ball(model(), 15.0));
  CHECK_THROWS(enumerate_ball(model(), -1.0));
}
