#include "hyplab/strong_conv.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>

#include "hyplab/detail/isometry_index.hpp"
#include "hyplab/kernels.hpp"
#include "hyplab/rng.hpp"
#include "hyplab/trace_gap.hpp"

namespace hyplab {

double GroupRingElement::l1_norm() const {
  double s = 0;
  for (const auto& [w, c] : terms) s += std::abs(c);
  return s;
}

GroupRingElement make_group_ring_element(const std::vector<std::pair<Word, double>>& terms, const Presentation& p) {
  GroupRingElement z;
  for (const auto& [w, c] : terms) {
    for (Letter l : w)
      if (!p.contains(l)) throw std::invalid_argument("group ring element: letter outside the presentation");
    const Word r = dehn_reduce(w, p);
    auto it = std::find_if(z.terms.begin(), z.terms.end(), [&](const auto& t) { return equal_in_group(t.first, r, p); });
    if (it == z.terms.end())
      z.terms.emplace_back(r, c);
    else
      it->second += c;
  }
  std::erase_if(z.terms, [](const auto& t) { return t.second == 0.0; });
  z.symmetric = std::all_of(z.terms.begin(), z.terms.end(), [&](const auto& t) {
    const Word inv = inverse(t.first);
    return std::any_of(z.terms.begin(), z.terms.end(), [&](const auto& u) {
      return std::abs(u.second - t.second) <= 1e-14 * std::abs(t.second) && equal_in_group(u.first, inv, p);
    });
  });
  return z;
}

GroupRingElement markov_element(int genus) {
  const Presentation p(genus);
  std::vector<std::pair<Word, double>> terms;
  for (int g = 0; g < p.generator_count(); ++g) {
    terms.push_back({Word{Letter(g, false)}, 1.0});
    terms.push_back({Word{Letter(g, true)}, 1.0});
  }
  return make_group_ring_element(terms, p);
}

GroupRingElement adjoint(const GroupRingElement& z) {
  GroupRingElement a = z;
  for (auto& [w, c] : a.terms) w = inverse(w);
  return a;
}

nlohmann::json to_json(const GroupRingElement& z) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& [w, c] : z.terms) terms.push_back({{"word", to_string(w)}, {"coeff", c}});
  return {{"terms", std::move(terms)}, {"symmetric", z.symmetric}};
}

GroupRingElement group_ring_from_json(const nlohmann::json& j, const Presentation& p) {
  std::vector<std::pair<Word, double>> terms;
  for (const auto& t : j.at("terms")) terms.emplace_back(parse_word(t.at("word").get<std::string>(), p), t.at("coeff").get<double>());
  return make_group_ring_element(terms, p);
}

RepOperator::RepOperator(const CoverHom& h, const GroupRingElement& z) : n_(h.n) {
  for (const auto& [w, c] : z.terms) {
    coeff_.push_back(c);
    perm_.push_back(h.image(w));
    inv_.push_back(inverse(perm_.back()));
  }
}

void RepOperator::apply(const std::vector<double>& v, std::vector<double>& out) const {
  out.assign(n_, 0.0);
  for (std::size_t k = 0; k < coeff_.size(); ++k)
    for (std::size_t j = 0; j < n_; ++j) out[j] += coeff_[k] * v[perm_[k][j]];
}

void RepOperator::apply_adjoint(const std::vector<double>& v, std::vector<double>& out) const {
  out.assign(n_, 0.0);
  for (std::size_t k = 0; k < coeff_.size(); ++k)
    for (std::size_t j = 0; j < n_; ++j) out[j] += coeff_[k] * v[inv_[k][j]];
}

void project_mean_zero(std::vector<double>& v) {
  if (v.empty()) return;
  double s = 0;
  for (double x : v) s += x;
  s /= static_cast<double>(v.size());
  for (double& x : v) x -= s;
}

std::vector<double> rho_apply(const CoverHom& h, const GroupRingElement& z, const std::vector<double>& v) {
  if (v.size() != h.n) throw std::invalid_argument("rho_apply: vector length differs from n");
  double s = 0, l1 = 0;
  for (double x : v) {
    s += x;
    l1 += std::abs(x);
  }
  if (std::abs(s) > 1e-12 * std::max(1.0, l1)) throw std::invalid_argument("rho_apply: vector is not mean-zero");
  std::vector<double> out;
  RepOperator(h, z).apply(v, out);
  project_mean_zero(out);
  return out;
}

namespace {

double dot(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

void scale(std::vector<double>& x, double a) {
  for (double& v : x) v *= a;
}

// Ones-like start: `base` plus a fixed small pseudo-random perturbation.
std::vector<double> perturbed_start(std::vector<double> base, std::uint64_t seed) {
  Rng rng(seed);
  for (double& x : base) x += 1e-3 * (rng.uniform() - 0.5);
  return base;
}

// Largest Ritz value of a symmetric positive semidefinite operator.
double lanczos_top(const std::function<void(const std::vector<double>&, std::vector<double>&)>& apply, std::vector<double> q,
                   std::size_t steps, bool reorthogonalize, std::size_t* used = nullptr,
                   const std::function<void(std::vector<double>&)>& constrain = {}) {
  if (constrain) constrain(q);
  const double q0 = std::sqrt(dot(q, q));
  if (q0 == 0) return 0;
  scale(q, 1.0 / q0);
  std::vector<std::vector<double>> basis;
  std::vector<double> alpha, beta;
  std::vector<double> prev(q.size(), 0.0), w;
  double b = 0;
  for (std::size_t k = 0; k < steps; ++k) {
    if (reorthogonalize) basis.push_back(q);
    apply(q, w);
    if (constrain) constrain(w);
    const double a = dot(w, q);
    alpha.push_back(a);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= a * q[i] + b * prev[i];
    if (reorthogonalize)
      for (const auto& u : basis) {
        const double c = dot(w, u);
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= c * u[i];
      }
    b = std::sqrt(dot(w, w));
    if (b <= 1e-14 * std::max(1.0, std::abs(a))) break;
    beta.push_back(b);
    prev.swap(q);
    q = w;
    scale(q, 1.0 / b);
  }
  if (used) *used = alpha.size();
  const auto m = static_cast<Eigen::Index>(alpha.size());
  Eigen::VectorXd diag = Eigen::Map<Eigen::VectorXd>(alpha.data(), m);
  Eigen::VectorXd sub(std::max<Eigen::Index>(m - 1, 0));
  for (Eigen::Index i = 0; i + 1 < m; ++i) sub[i] = beta[static_cast<std::size_t>(i)];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  return std::max(0.0, es.eigenvalues().maxCoeff());
}

Eigen::MatrixXd mean_zero_basis(std::size_t n) {
  // Helmert basis.
  const auto N = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(N, N - 1);
  for (Eigen::Index k = 1; k < N; ++k) {
    const double s = 1.0 / std::sqrt(static_cast<double>(k * (k + 1)));
    for (Eigen::Index j = 0; j < k; ++j) Q(j, k - 1) = s;
    Q(k, k - 1) = -static_cast<double>(k) * s;
  }
  return Q;
}

Eigen::MatrixXd restricted_matrix(const CoverHom& h, const GroupRingElement& z) {
  const auto N = static_cast<Eigen::Index>(h.n);
  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(N, N);
  for (const auto& [w, c] : z.terms) {
    const Permutation p = h.image(w);
    for (std::size_t j = 0; j < h.n; ++j) Z(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(p[j])) += c;
  }
  const Eigen::MatrixXd Q = mean_zero_basis(h.n);
  return Q.transpose() * Z * Q;
}

}  // namespace

RepNorm rep_norm(const CoverHom& h, const GroupRingElement& z, std::size_t iterations) {
  if (iterations < 100) throw std::invalid_argument("rep_norm: at least 100 iterations");
  if (h.n < 2) throw std::invalid_argument("rep_norm: V_n^0 is trivial for n < 2");
  const RepOperator op(h, z);
  std::vector<double> x(h.n);
  for (std::size_t j = 0; j < h.n; ++j) x[j] = (j % 2 == 0) ? 1.0 : -1.0;
  x = perturbed_start(std::move(x), 0x243f6a8885a308d3ULL);
  project_mean_zero(x);
  scale(x, 1.0 / std::sqrt(dot(x, x)));

  RepNorm r;
  std::vector<double> y, w;
  double est = 0;
  std::size_t still = 0;
  for (std::size_t it = 1; it <= iterations; ++it) {
    op.apply(x, y);
    op.apply_adjoint(y, w);
    project_mean_zero(w);
    const double rq = dot(x, w);
    const double nw = std::sqrt(dot(w, w));
    r.iterations = it;
    if (nw == 0) {
      est = 0;
      r.converged = true;
      break;
    }
    still = (std::abs(rq - est) <= 1e-12 * std::abs(rq)) ? still + 1 : 0;
    est = rq;
    x = w;
    scale(x, 1.0 / nw);
    if (still >= 10) {
      r.converged = true;
      break;
    }
  }
  r.norm = std::sqrt(std::max(0.0, est));
  return r;
}

double rep_norm_dense(const CoverHom& h, const GroupRingElement& z) {
  if (h.n < 2) throw std::invalid_argument("rep_norm_dense: V_n^0 is trivial for n < 2");
  const Eigen::MatrixXd M = restricted_matrix(h, z);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  return svd.singularValues()(0);
}

std::vector<double> rep_spectrum_dense(const CoverHom& h, const GroupRingElement& z) {
  if (!z.symmetric) throw std::invalid_argument("rep_spectrum_dense: element is not symmetric");
  if (h.n < 2) throw std::invalid_argument("rep_spectrum_dense: V_n^0 is trivial for n < 2");
  const Eigen::MatrixXd M = restricted_matrix(h, z);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (M + M.transpose()), Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  return std::vector<double>(ev.data(), ev.data() + ev.size());
}

CayleyBall regular_norm_ball(const FuchsianModel& model, int L) {
  if (L < 0 || L > kRegularLMax) throw std::invalid_argument("regular_norm_lower: L must lie in [0, " + std::to_string(kRegularLMax) + "]");
  CayleyBallOptions opt;
  opt.record_neighbors = true;
  return enumerate_cayley_ball(model, L, opt);
}

RegularNorm regular_norm_lower(const FuchsianModel& model, const CayleyBall& ball, const GroupRingElement& z, std::size_t steps) {
  if (ball.neighbors.empty()) throw std::invalid_argument("regular_norm_lower: ball was enumerated without its neighbor table");
  const std::size_t N = ball.size();
  const std::size_t K = z.terms.size();

  // target[k * N + g] = g * w_k when it lies in the ball.
  std::vector<std::uint32_t> target(K * N, CayleyBall::kOutside);
  std::unique_ptr<detail::IsometryIndex> index;
  for (std::size_t k = 0; k < K; ++k) {
    const Word& w = z.terms[k].first;
    const Mat2 mw = evaluate(model, w);
    for (std::size_t g = 0; g < N; ++g) {
      std::uint32_t cur = static_cast<std::uint32_t>(g);
      for (Letter l : w) {
        cur = ball.neighbor(cur, l);
        if (cur == CayleyBall::kOutside) break;
      }
      if (cur == CayleyBall::kOutside && w.size() > 1) {
        // The path left the ball; the product may still come back in.
        if (!index) {
          index = std::make_unique<detail::IsometryIndex>(N);
          for (std::size_t i = 0; i < N; ++i) index->insert(ball.matrices[i], static_cast<std::uint32_t>(i));
        }
        const Mat2 m = ball.matrices[g] * mw;
        Word gw = ball.word(g);
        gw.insert(gw.end(), w.begin(), w.end());
        index->for_each_candidate(m, [&](std::uint32_t id) {
          if (cur == CayleyBall::kOutside && same_isometry(ball.matrices[id], m, 1e-6) &&
              equal_in_group(ball.word(id), gw, model.presentation))
            cur = id;
        });
      }
      target[k * N + g] = cur;
    }
  }

  auto apply_a = [&](const std::vector<double>& f, std::vector<double>& out) {
    out.assign(N, 0.0);
    for (std::size_t k = 0; k < K; ++k) {
      const double c = z.terms[k].second;
      const std::uint32_t* t = &target[k * N];
      for (std::size_t g = 0; g < N; ++g)
        if (t[g] != CayleyBall::kOutside) out[g] += c * f[t[g]];
    }
  };
  auto apply_at = [&](const std::vector<double>& f, std::vector<double>& out) {
    out.assign(N, 0.0);
    for (std::size_t k = 0; k < K; ++k) {
      const double c = z.terms[k].second;
      const std::uint32_t* t = &target[k * N];
      for (std::size_t g = 0; g < N; ++g)
        if (t[g] != CayleyBall::kOutside) out[t[g]] += c * f[g];
    }
  };
  std::vector<double> tmp;
  auto gram = [&](const std::vector<double>& f, std::vector<double>& out) {
    apply_a(f, tmp);
    apply_at(tmp, out);
  };

  RegularNorm r;
  r.L = ball.max_length;
  r.ball_size = N;
  const double top = lanczos_top(gram, perturbed_start(std::vector<double>(N, 1.0), 0x13198a2e03707344ULL), steps, false, &r.lanczos_steps);
  r.lower = std::sqrt(top);
  return r;
}

RegularNorm regular_norm_lower(const FuchsianModel& model, const GroupRingElement& z, int L, std::size_t steps) {
  const CayleyBall ball = regular_norm_ball(model, L);
  return regular_norm_lower(model, ball, z, steps);
}

nlohmann::json to_json(const NormReport& r) {
  nlohmann::json j{{"n", r.n},
                   {"rep_norm", r.rep_norm},
                   {"rep_converged", r.rep_converged},
                   {"regular_lower", r.regular_lower},
                   {"gap", r.gap}};
  j["regular_upper"] = r.regular_upper ? nlohmann::json(*r.regular_upper) : nlohmann::json(nullptr);
  return j;
}

// ---------------------------------------------------------------------------------------
// Heat operator

std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be positive");
  // Golub-Welsch.
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double b = k / std::sqrt(4.0 * k * k - 1.0);
    J(k, k - 1) = J(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  std::vector<double> x(static_cast<std::size_t>(n)), w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    x[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
    const double v = es.eigenvectors()(0, i);
    w[static_cast<std::size_t>(i)] = 2.0 * v * v;
  }
  return {x, w};
}

double DomainQuadrature::weight_sum() const {
  double s = 0;
  for (double w : weights) s += w;
  return s;
}

DomainQuadrature domain_quadrature(const FuchsianModel& model, int res) {
  if (res < 8) throw std::invalid_argument("heat_op_norm_experiment: grid_res must be at least 8");
  const int g = model.genus();
  const double half = std::numbers::pi / (4.0 * g);
  const double C = std::cosh(model.inradius);
  const double k_in = std::tanh(model.inradius);
  // Area of the right triangle with angle psi at the centre and leg r_in: pi/2 - psi - beta,
  // cos beta = cosh(r_in) sin psi.
  const double a_tot = std::numbers::pi / 2 - half - std::acos(C * std::sin(half));
  const auto [gx, gw] = gauss_legendre(res);

  DomainQuadrature q;
  q.area = model.area;
  const HPoint base = model.base_point;
  for (const Mat2& s : model.side_pairings) {
    for (const Mat2& m : {s, inverse(s)}) {
      const DiskPoint d = to_disk(apply(m, base));
      const double theta = std::atan2(d.y, d.x);
      for (int sign : {-1, 1}) {
        for (int i = 0; i < res; ++i) {
          const double A = 0.5 * a_tot * (1 + gx[static_cast<std::size_t>(i)]);
          const double wA = 0.5 * a_tot * gw[static_cast<std::size_t>(i)];
          const double psi = std::atan2(std::sin(A), C - std::cos(A));
          const double rho_max = std::atanh(k_in / std::cos(psi));
          const double sector = std::cosh(rho_max) - 1.0;
          for (int j = 0; j < res; ++j) {
            const double rho = 0.5 * rho_max * (1 + gx[static_cast<std::size_t>(j)]);
            const double wr = 0.5 * rho_max * gw[static_cast<std::size_t>(j)] * std::sinh(rho);
            q.points.push_back(polar_point(rho, theta + sign * psi));
            q.weights.push_back(wA * wr / sector);
          }
        }
      }
    }
  }
  if (std::abs(q.weight_sum() - q.area) > 1e-6 * q.area)
    throw std::invalid_argument("heat_op_norm_experiment: quadrature weights do not reproduce the area; grid too coarse");
  return q;
}

double schur_tail_majorant(const FuchsianModel& model, const OrbitBall& ball, double T) {
  if (!ball.complete) throw std::invalid_argument("schur_tail_majorant: ball is not complete");
  if (!(T >= 0) || T > ball.radius) throw std::invalid_argument("schur_tail_majorant: T must lie in [0, ball radius]");
  const double shift = 2 * model.domain_radius;
  const RadialHeatProfile prof(1.0, ball.radius + 1, 0.01);
  double s = 0;
  for (const auto& e : ball.entries)
    if (e.displacement > T) s += model.area * prof.value(std::max(0.0, e.displacement - shift));
  return s + truncation_tail_bound(model, ball, 1.0);
}

HeatOpNorm heat_op_norm_experiment(const CoverHom& h, const FuchsianModel& model, const OrbitBall& ball, double T, int grid_res) {
  if (!ball.complete) throw std::invalid_argument("heat_op_norm_experiment: ball is not complete");
  if (!(T >= 0) || T > ball.radius) throw std::invalid_argument("heat_op_norm_experiment: T exceeds the ball radius");
  const DomainQuadrature q = domain_quadrature(model, grid_res);
  const std::size_t M = q.points.size();
  const std::size_t n = h.n;
  if (M * n > kHeatOpMaxDim)
    throw std::invalid_argument("heat_op_norm_experiment: grid points times n exceeds " + std::to_string(kHeatOpMaxDim));

  std::vector<std::size_t> used;
  for (std::size_t e = 0; e < ball.size(); ++e)
    if (ball.entries[e].displacement <= T) used.push_back(e);

  const RadialHeatProfile prof(1.0, T + 2 * model.domain_radius + 1, 0.01);
  std::vector<double> sw(M);
  for (std::size_t i = 0; i < M; ++i) sw[i] = std::sqrt(q.weights[i]);

  const std::size_t D = M * n;
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(D), static_cast<Eigen::Index>(D));
  Eigen::MatrixXd B0 = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(M));
  std::vector<HPoint> img(M);
  for (std::size_t e : used) {
    const Mat2& g = ball.entries[e].matrix;
    const Permutation p = h.image(ball.entries[e].word);
    for (std::size_t j = 0; j < M; ++j) img[j] = apply(g, q.points[j]);
    for (std::size_t i = 0; i < M; ++i) {
      for (std::size_t j = 0; j < M; ++j) {
        const double k = sw[i] * sw[j] * prof.value(hyp_dist(q.points[i], img[j]));
        B0(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += k;
        for (std::size_t a = 0; a < n; ++a) B(static_cast<Eigen::Index>(i * n + a), static_cast<Eigen::Index>(j * n + p[a])) += k;
      }
    }
  }

  auto op = [](const Eigen::MatrixXd& Mx) {
    return [&Mx](const std::vector<double>& v, std::vector<double>& out) {
      const Eigen::Map<const Eigen::VectorXd> x(v.data(), static_cast<Eigen::Index>(v.size()));
      const Eigen::VectorXd y = Mx * (Mx * x);
      out.assign(y.data(), y.data() + y.size());
    };
  };
  std::function<void(std::vector<double>&)> constrain;
  if (n >= 2)
    constrain = [n](std::vector<double>& v) {
      for (std::size_t i = 0; i < v.size(); i += n) {
        double s = 0;
        for (std::size_t a = 0; a < n; ++a) s += v[i + a];
        s /= static_cast<double>(n);
        for (std::size_t a = 0; a < n; ++a) v[i + a] -= s;
      }
    };
  const std::size_t steps = 100;
  HeatOpNorm r;
  r.n = n;
  r.T = T;
  r.grid_res = grid_res;
  r.grid_points = M;
  r.elements = used.size();
  std::vector<double> start(D);
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t a = 0; a < n; ++a) start[i * n + a] = sw[i] * ((a % 2 == 0) ? 1.0 : -1.0);
  if (n == 1) start.assign(sw.begin(), sw.end());
  r.norm = std::sqrt(lanczos_top(op(B), perturbed_start(start, 0xa4093822299f31d0ULL), steps, true, nullptr, constrain));
  r.base_norm = std::sqrt(lanczos_top(op(B0), perturbed_start(sw, 0x082efa98ec4e6c89ULL), steps, true));
  r.slack = std::abs(1.0 - r.base_norm);
  r.tail = schur_tail_majorant(model, ball, T);
  r.reference = std::exp(-kLambda0);
  r.within = r.norm <= r.reference + r.tail + r.slack;
  return r;
}

nlohmann::json to_json(const HeatOpNorm& r) {
  return {{"n", r.n},           {"T", r.T},         {"grid_res", r.grid_res}, {"grid_points", r.grid_points},
          {"elements", r.elements}, {"norm", r.norm}, {"base_norm", r.base_norm}, {"slack", r.slack},
          {"tail", r.tail},     {"reference", r.reference}, {"within", r.within}};
}

}  // namespace hyplab
