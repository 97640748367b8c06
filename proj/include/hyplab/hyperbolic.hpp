#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "hyplab/group.hpp"

namespace hyplab {

// Element of SL(2,R) acting on the upper half-plane; m and -m are the same isometry.
struct Mat2 {
  double a = 1, b = 0, c = 0, d = 1;

  double det() const { return a * d - b * c; }
  double trace() const { return a + d; }
  static Mat2 identity() { return {}; }
};

// Product renormalized to determinant 1.
Mat2 operator*(const Mat2& x, const Mat2& y);
Mat2 inverse(const Mat2& m);
Mat2 normalized(const Mat2& m);
// Equality up to global sign, relative to the largest entry.
bool same_isometry(const Mat2& x, const Mat2& y, double rel_tol = 1e-9);
bool is_identity(const Mat2& m, double tol = 1e-9);

struct HPoint {
  double x = 0;
  double y = 1;
};

HPoint apply(const Mat2& m, HPoint p);
double hyp_dist(HPoint p, HPoint q);
// d(i, m i), accurate for small and large displacements.
double displacement(const Mat2& m);
double translation_length(const Mat2& m);
bool is_hyperbolic(const Mat2& m);

struct AxisProjection {
  HPoint foot;
  double distance = 0;
};
AxisProjection axis_project(const Mat2& m, HPoint p);

// Unit-disk coordinates (Cayley transform of the half-plane).
struct DiskPoint {
  double x = 0;
  double y = 0;
};
DiskPoint to_disk(HPoint p);
HPoint from_disk(DiskPoint w);
// Point at hyperbolic distance r from i in direction theta (angle in the disk model).
HPoint polar_point(double r, double theta);

// Right-angled triangle with legs d1, d2 (right angle between them): d1 + d2 - hypotenuse.
double right_triangle_defect(double d1, double d2);

struct TriangleDefectResult {
  double max_defect = 0;
  double argmax_d1 = 0;
  double argmax_d2 = 0;
  std::size_t samples = 0;
};
// Random right-angled triangles built from points in the plane (legs up to `max_leg`).
TriangleDefectResult triangle_defect_check(std::size_t samples, std::uint64_t seed, double max_leg = 25.0);

// Constant C in d(x, gx) >= 2r + l(g) - C derived from sinh(d/2) = cosh(r) sinh(l/2)
// and l >= systole.
double quadrilateral_constant(double systole);

struct SvarcMilnor {
  double kappa1 = 0;
  double kappa2 = 0;
  int fitted_length = 0;
  // Every g with d(x0, g x0) below this radius has |g| <= fitted_length.
  double complete_radius = 0;
};

struct ModelOptions {
  // Word length of the Cayley ball used to fit kappa1, kappa2.
  int fit_length = 6;
  // Radius of the orbit ball scanned for the systole (max(this, 2 R_c + generator displacement)).
  double systole_radius = 8.0;
};

struct FuchsianModel {
  Presentation presentation{2};
  // Images of a1, b1, ..., ag, bg.
  std::vector<Mat2> gens;
  // Side pairings y_1..y_2g of the regular 4g-gon; y_j maps side j to side j+2g.
  std::vector<Mat2> side_pairings;
  // y_j written in the generators a_i, b_i, and a_i, b_i written in the y_j.
  std::vector<Word> side_pairing_words;
  std::vector<std::vector<int>> generator_side_words;
  HPoint base_point{0, 1};
  double inradius = 0;
  double domain_radius = 0;
  double area = 0;
  double systole = 0;
  SvarcMilnor svarc_milnor;

  int genus() const { return presentation.genus(); }
  Mat2 letter_matrix(Letter l) const;
  // Side-pairing letters are coded 2j (y_{j+1}) and 2j+1 (its inverse).
  Mat2 side_letter_matrix(int code) const;
};

// Geometry only: polygon, side pairings, generator basis. Cheap.
FuchsianModel build_geometry(int genus);
// Geometry plus the fitted systole and Svarc-Milnor constants.
FuchsianModel build_model(int genus, const ModelOptions& options = {});

Mat2 evaluate(const FuchsianModel& model, const Word& w);
// Signed side-pairing word (+-(j+1) for y_j^{+-1}) rewritten in the a/b generators and Dehn-reduced.
Word side_word_to_word(const FuchsianModel& model, const std::vector<int>& side_word);

// Dirichlet test: d(p, x0) <= d(p, s x0) for every side-pairing s^{+-1}.
bool in_fundamental_domain(const FuchsianModel& model, HPoint p, double slack = 0.0);

void save_model(const FuchsianModel& model, const std::filesystem::path& path);
FuchsianModel load_model(const std::filesystem::path& path);
std::string model_to_text(const FuchsianModel& model);
FuchsianModel model_from_text(const std::string& text);

// Elements of the Cayley ball {|g|_A <= L}, breadth-first, with exact deduplication.
struct CayleyBall {
  int max_length = 0;
  std::vector<Mat2> matrices;
  std::vector<std::uint32_t> parent;  // parent[0] is 0 (identity)
  std::vector<Letter> last_letter;
  std::vector<std::uint8_t> length;
  std::vector<std::size_t> sphere_sizes;
  // When recorded: neighbors[id * 4g + code] is the element id * letter, or kOutside.
  std::vector<std::uint32_t> neighbors;

  static constexpr std::uint32_t kOutside = 0xffffffffu;

  std::size_t size() const { return matrices.size(); }
  Word word(std::size_t id) const;
  std::uint32_t neighbor(std::size_t id, Letter s) const;
};

struct CayleyBallOptions {
  std::size_t max_elements = 12'000'000;
  bool exact_confirm = true;
  // The relator has even length, so the Cayley graph is bipartite and every edge inside the
  // ball joins consecutive spheres; the breadth-first pass therefore sees all of them.
  bool record_neighbors = false;
};

CayleyBall enumerate_cayley_ball(const FuchsianModel& model, int L, const CayleyBallOptions& options = {});

// Fit kappa1, kappa2 so that |g| <= kappa1 d(x0, g x0) + kappa2. The sample is every orbit
// element closer than the first one missing from the Cayley ball, plus that first missing
// element counted with length L + 1; among valid lines the one lowest at that radius wins.
SvarcMilnor fit_svarc_milnor(const FuchsianModel& model, const CayleyBall& ball);

// Group elements g with d(x0, g x0) <= radius, found by breadth-first search over the
// tiling: neighbouring tiles differ by a side pairing, and every tile met by the
// geodesic [x0, g x0] has its centre within the circumradius of that geodesic, so
// pruning at radius + circumradius loses nothing. The tiles kept for that reason stay in the
// result, so callers filter by displacement.
struct OrbitElements {
  double radius = 0;
  std::vector<Mat2> matrices;
  std::vector<double> displacement;
  std::vector<std::uint32_t> parent;
  std::vector<std::int16_t> side_letter;  // signed +-(j+1), 0 for the identity

  std::size_t size() const { return matrices.size(); }
  std::vector<int> side_word(std::size_t id) const;
};

struct OrbitEnumOptions {
  std::size_t max_elements = 20'000'000;
  // Confirm every numeric match with Dehn's algorithm. Matches beyond displacement 20
  // are always confirmed, since doubles no longer separate distinct orbit points there.
  bool exact_confirm = false;
};

OrbitElements enumerate_orbit_elements(const FuchsianModel& model, double radius, const OrbitEnumOptions& options = {});

}  // namespace hyplab
