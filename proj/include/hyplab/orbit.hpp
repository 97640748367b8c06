#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "hyplab/group.hpp"
#include "hyplab/hyperbolic.hpp"

namespace hyplab {

struct OrbitEntry {
  Word word;  // Dehn-reduced
  Mat2 matrix;
  double displacement = 0;       // d(x0, g x0)
  double translation_length = 0; // 0 for the identity
  int primitive_power = 1;       // k with g = g*^k, g* primitive
};

// All g with d(x0, g x0) <= radius, sorted by displacement; entry 0 is the identity.
struct OrbitBall {
  int genus = 2;
  double radius = 0;
  bool complete = false;
  std::vector<OrbitEntry> entries;

  std::size_t size() const { return entries.size(); }
};

struct BallOptions {
  // Memory guard.
  double max_radius = 14.0;
  bool exact_confirm = false;
};

OrbitBall enumerate_ball(const FuchsianModel& model, double radius, const BallOptions& options = {});

struct CensusShell {
  double radius = 0;
  std::size_t total = 0;
  std::size_t nonprimitive = 0;
  std::size_t primitive = 0;  // nontrivial primitive elements
};

std::vector<CensusShell> count_nonprimitive(const OrbitBall& ball, const std::vector<double>& radii);
// Radii 1, 1 + step, ..., up to the ball radius.
std::vector<double> census_radii(double radius, double step = 0.5);

// Least-squares slope of log(y) against x over the points with y > 0.
double fit_log_slope(const std::vector<double>& x, const std::vector<double>& y);

// Smallest c with N(R) <= c e^R over the ball's radii (R >= 1).
double counting_constant(const OrbitBall& ball);

struct TailCheck {
  double sum = 0;       // sum over entries with displacement >= cutoff of exp(-d^2/16t)
  double integral = 0;  // int_cutoff^inf exp(r - r^2/16t) dr
  double boundary = 0;  // exp(cutoff) * exp(-cutoff^2/16t)
  double constant = 0;  // counting constant c with N(R) <= c e^R
  double majorant = 0;  // constant * (boundary + integral)
  bool holds = false;
};

// Summation by parts against N(R) <= c e^R gives
// sum_{d >= c0} f(d) <= c (f(c0) e^{c0} + int_{c0}^inf e^r f(r) dr) for decreasing f.
TailCheck tail_sum_check(const OrbitBall& ball, double t, double cutoff);
double gaussian_tail_integral(double t, double cutoff);

std::string ball_to_text(const OrbitBall& ball);
OrbitBall ball_from_text(const std::string& text);
void save_ball(const OrbitBall& ball, const std::filesystem::path& path);
OrbitBall load_ball(const std::filesystem::path& path);

}  // namespace hyplab
