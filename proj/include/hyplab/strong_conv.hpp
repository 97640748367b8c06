#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hyplab/cover.hpp"
#include "hyplab/group.hpp"
#include "hyplab/hyperbolic.hpp"
#include "hyplab/orbit.hpp"

namespace hyplab {

// Finite sum of c_g g in R[Gamma]. Words are Dehn-reduced and represent distinct elements.
struct GroupRingElement {
  std::vector<std::pair<Word, double>> terms;
  bool symmetric = false;  // coefficient of g^{-1} equals that of g for every g

  double l1_norm() const;
};

// Dehn-reduces the words, merges equal elements and drops zero coefficients.
GroupRingElement make_group_ring_element(const std::vector<std::pair<Word, double>>& terms, const Presentation& p);
// Sum of the 4g generators and their inverses.
GroupRingElement markov_element(int genus);
GroupRingElement adjoint(const GroupRingElement& z);

nlohmann::json to_json(const GroupRingElement& z);
GroupRingElement group_ring_from_json(const nlohmann::json& j, const Presentation& p);

// z acting on R^n through rho(g) v[j] = v[j.g]; this is a homomorphism for the right action.
class RepOperator {
 public:
  RepOperator(const CoverHom& h, const GroupRingElement& z);

  std::size_t n() const { return n_; }
  void apply(const std::vector<double>& v, std::vector<double>& out) const;
  void apply_adjoint(const std::vector<double>& v, std::vector<double>& out) const;

 private:
  std::size_t n_;
  std::vector<double> coeff_;
  std::vector<Permutation> perm_, inv_;
};

// Mean-zero projection in place.
void project_mean_zero(std::vector<double>& v);

// rho(z) v for v in V_n^0. Rejects v whose coordinate sum exceeds 1e-12 (relative to its l1 norm).
std::vector<double> rho_apply(const CoverHom& h, const GroupRingElement& z, const std::vector<double>& v);

struct RepNorm {
  double norm = 0;
  std::size_t iterations = 0;
  bool converged = false;  // Rayleigh quotient stagnated below 1e-12 relative change
};

// Norm of rho(z) on V_n^0 by power iteration on z* z. Start: alternating signs plus a fixed
// small perturbation, projected to mean zero.
RepNorm rep_norm(const CoverHom& h, const GroupRingElement& z, std::size_t iterations = 2000);
// Dense reference: largest singular value on an orthonormal basis of V_n^0.
double rep_norm_dense(const CoverHom& h, const GroupRingElement& z);
// All eigenvalues of rho(z) on V_n^0; z must be symmetric.
std::vector<double> rep_spectrum_dense(const CoverHom& h, const GroupRingElement& z);

struct RegularNorm {
  int L = 0;
  std::size_t ball_size = 0;
  std::size_t lanczos_steps = 0;
  double lower = 0;  // sqrt of the largest Ritz value of (P z P)^* (P z P)
};

inline constexpr int kRegularLMax = 8;

// Ball with neighbor table, as regular_norm_lower needs it.
CayleyBall regular_norm_ball(const FuchsianModel& model, int L);
// Lower bound for the norm of z in the right regular representation, from the compression
// to functions supported on the Cayley ball of radius L.
RegularNorm regular_norm_lower(const FuchsianModel& model, const CayleyBall& ball, const GroupRingElement& z, std::size_t steps = 150);
RegularNorm regular_norm_lower(const FuchsianModel& model, const GroupRingElement& z, int L, std::size_t steps = 150);

struct NormReport {
  std::size_t n = 0;
  double rep_norm = 0;
  bool rep_converged = false;
  double regular_lower = 0;
  std::optional<double> regular_upper;  // sum of |c_g|
  double gap = 0;                       // rep_norm - regular_lower
};

nlohmann::json to_json(const NormReport& r);

// Quadrature on the fundamental polygon: 8g right triangles (centre, side foot, vertex), each
// with res x res nodes. The angular variable is the triangle area swept from the foot, the radial
// one Gauss-Legendre in the distance with weights rescaled to the exact sector area, so the
// weights add up to the polygon area.
struct DomainQuadrature {
  std::vector<HPoint> points;
  std::vector<double> weights;
  double area = 0;

  double weight_sum() const;
};

DomainQuadrature domain_quadrature(const FuchsianModel& model, int res);
// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n);

struct HeatOpNorm {
  std::size_t n = 0;
  double T = 0;
  int grid_res = 0;
  std::size_t grid_points = 0;
  std::size_t elements = 0;  // orbit elements with d(x0, g x0) <= T
  double norm = 0;           // of sum a_g (x) rho(g) on L^2(grid) (x) V^0 (all of R^n when n = 1)
  double base_norm = 0;      // same truncation, trivial representation
  double slack = 0;          // |1 - base_norm|: the base operator has norm 1
  double tail = 0;           // Schur majorant for the elements beyond T
  double reference = 0;      // e^{-lambda0}
  bool within = false;       // norm <= reference + tail + slack
};

// Schur bound on sum over d(x0, g x0) > T of the kernel operators at time t = 1: each one is
// at most area H(1, max(0, d - 2 R_c)); ball entries are summed and the rest of the orbit is
// bounded by summation by parts against N(r) <= c e^r.
double schur_tail_majorant(const FuchsianModel& model, const OrbitBall& ball, double T);

inline constexpr std::size_t kHeatOpMaxDim = 10240;

HeatOpNorm heat_op_norm_experiment(const CoverHom& h, const FuchsianModel& model, const OrbitBall& ball, double T, int grid_res);

nlohmann::json to_json(const HeatOpNorm& r);

}  // namespace hyplab
