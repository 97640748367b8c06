#include "hyplab/hyperbolic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "hyplab/detail/isometry_index.hpp"
#include "hyplab/rng.hpp"

namespace hyplab {

namespace {
constexpr double kPi = std::numbers::pi;
}

Mat2 normalized(const Mat2& m) {
  const double det = m.det();
  if (!(det > 0)) throw std::domain_error("Mat2: determinant must be positive");
  const double s = 1.0 / std::sqrt(det);
  return {m.a * s, m.b * s, m.c * s, m.d * s};
}

Mat2 operator*(const Mat2& x, const Mat2& y) {
  const Mat2 p{x.a * y.a + x.b * y.c, x.a * y.b + x.b * y.d, x.c * y.a + x.d * y.c, x.c * y.b + x.d * y.d};
  // For large entries the computed determinant is dominated by cancellation error and
  // renormalizing by it would inject noise; the product is then left as is.
  const double big = std::max({std::abs(p.a), std::abs(p.b), std::abs(p.c), std::abs(p.d)});
  return big < 1e4 ? normalized(p) : p;
}

Mat2 inverse(const Mat2& m) { return {m.d, -m.b, -m.c, m.a}; }

bool same_isometry(const Mat2& x, const Mat2& y, double rel_tol) {
  const double scale = std::max({1.0, std::abs(x.a), std::abs(x.b), std::abs(x.c), std::abs(x.d)});
  auto close = [&](double s) {
    return std::max({std::abs(x.a - s * y.a), std::abs(x.b - s * y.b), std::abs(x.c - s * y.c), std::abs(x.d - s * y.d)}) <=
           rel_tol * scale;
  };
  return close(1.0) || close(-1.0);
}

bool is_identity(const Mat2& m, double tol) { return same_isometry(m, Mat2::identity(), tol); }

HPoint apply(const Mat2& m, HPoint p) {
  const double nr = m.a * p.x + m.b, ni = m.a * p.y;
  const double dr = m.c * p.x + m.d, di = m.c * p.y;
  const double den = dr * dr + di * di;
  return {(nr * dr + ni * di) / den, (ni * dr - nr * di) / den};
}

double hyp_dist(HPoint p, HPoint q) {
  const double dx = p.x - q.x, dy = p.y - q.y;
  return 2.0 * std::asinh(std::sqrt(dx * dx + dy * dy) / (2.0 * std::sqrt(p.y * q.y)));
}

double displacement(const Mat2& m) {
  const double s = m.a * m.a + m.b * m.b + m.c * m.c + m.d * m.d;
  return 2.0 * std::asinh(std::sqrt(std::max(0.0, (s - 2.0) / 4.0)));
}

bool is_hyperbolic(const Mat2& m) { return std::abs(m.trace()) > 2.0 + 1e-9; }

double translation_length(const Mat2& m) {
  const double tr = std::abs(m.trace());
  if (!(tr > 2.0 + 1e-9)) throw std::domain_error("translation_length: element is not hyperbolic (|trace| <= 2)");
  return 2.0 * std::acosh(tr / 2.0);
}

AxisProjection axis_project(const Mat2& m_in, HPoint p) {
  const Mat2 m = normalized(m_in);
  const double tr = m.trace();
  const double disc = tr * tr - 4.0;
  if (!(disc > 1e-12) || !is_hyperbolic(m)) throw std::domain_error("axis_project: element is not hyperbolic");
  const double scale = std::max({std::abs(m.a), std::abs(m.b), std::abs(m.c), std::abs(m.d)});
  if (std::abs(m.c) <= 1e-14 * scale) {
    const double u = m.b / (m.d - m.a);
    const double dx = p.x - u;
    return {{u, std::hypot(dx, p.y)}, std::asinh(std::abs(dx) / p.y)};
  }
  const double sq = std::sqrt(disc);
  double u = (m.a - m.d + sq) / (2.0 * m.c);
  double v = (m.a - m.d - sq) / (2.0 * m.c);
  if (u < v) std::swap(u, v);
  // A(z) = (z - u)/(z - v), det = u - v > 0, sends the axis to the imaginary half-line.
  const Mat2 A{1.0, -u, 1.0, -v};
  const Mat2 An = normalized(A);
  const HPoint q = apply(An, p);
  const double r = std::hypot(q.x, q.y);
  const HPoint foot = apply(inverse(An), HPoint{0.0, r});
  return {foot, std::asinh(std::abs(q.x) / q.y)};
}

DiskPoint to_disk(HPoint p) {
  // w = (z - i)/(z + i)
  const std::complex<double> z(p.x, p.y), i(0, 1);
  const std::complex<double> w = (z - i) / (z + i);
  return {w.real(), w.imag()};
}

HPoint from_disk(DiskPoint w) {
  const std::complex<double> ww(w.x, w.y), i(0, 1);
  const std::complex<double> z = i * (1.0 + ww) / (1.0 - ww);
  return {z.real(), z.imag()};
}

HPoint polar_point(double r, double theta) {
  const double rho = std::tanh(r / 2.0);
  return from_disk({rho * std::cos(theta), rho * std::sin(theta)});
}

double right_triangle_defect(double d1, double d2) {
  if (d1 < 0 || d2 < 0) throw std::invalid_argument("right_triangle_defect: negative side");
  if (d1 == 0 || d2 == 0) return 0.0;
  // log cosh x = x - log 2 + log1p(e^{-2x}); hypotenuse from cosh c = cosh d1 cosh d2.
  auto log_cosh = [](double x) { return x - std::log(2.0) + std::log1p(std::exp(-2.0 * x)); };
  const double L = log_cosh(d1) + log_cosh(d2);
  const double c = L + std::log1p(std::sqrt(-std::expm1(-2.0 * L)));
  return d1 + d2 - c;
}

TriangleDefectResult triangle_defect_check(std::size_t samples, std::uint64_t seed, double max_leg) {
  if (samples < 1) throw std::invalid_argument("triangle_defect_check: samples must be positive");
  Rng rng(seed);
  TriangleDefectResult res;
  res.samples = samples;
  for (std::size_t s = 0; s < samples; ++s) {
    const double d1 = max_leg * rng.uniform();
    const double d2 = max_leg * rng.uniform();
    const double th = 2.0 * kPi * rng.uniform();
    // Right angle at y = i: x and z leave y in perpendicular directions.
    const HPoint y{0, 1};
    const HPoint x = polar_point(d1, th);
    const HPoint z = polar_point(d2, th + kPi / 2.0);
    const double dxy = hyp_dist(x, y), dyz = hyp_dist(y, z), dxz = hyp_dist(x, z);
    const double defect = dxy + dyz - dxz;
    if (defect > res.max_defect) {
      res.max_defect = defect;
      res.argmax_d1 = d1;
      res.argmax_d2 = d2;
    }
  }
  return res;
}

double quadrilateral_constant(double systole) {
  if (!(systole > 0)) throw std::invalid_argument("quadrilateral_constant: systole must be positive");
  return 2.0 * std::log(2.0 / -std::expm1(-systole));
}

// ---------------------------------------------------------------------------------------
// Model construction

namespace {

using SideWord = std::vector<int>;

SideWord side_inverse(const SideWord& w) {
  SideWord r(w.rbegin(), w.rend());
  for (int& x : r) x = -x;
  return r;
}

SideWord side_reduce(const SideWord& w) {
  SideWord out;
  for (int x : w) {
    if (!out.empty() && out.back() == -x)
      out.pop_back();
    else
      out.push_back(x);
  }
  return out;
}

SideWord cat(std::initializer_list<SideWord> parts) {
  SideWord out;
  for (const SideWord& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

// One step of rewriting a surface word V = x Q y R X S Y T as [a, b] (S R Q T).
struct Level {
  int x = 0, y = 0;
  SideWord Q, R, S;
  SideWord a, b;
};

bool enumerate_bases(const SideWord& V, std::vector<Level>& stack, const std::function<bool(const std::vector<Level>&)>& done) {
  if (V.empty()) return done(stack);
  auto index_of = [&](int letter) {
    return static_cast<std::size_t>(std::find(V.begin(), V.end(), letter) - V.begin());
  };
  const int x = V[0];
  const std::size_t iX = index_of(-x);
  for (std::size_t iy = 1; iy < iX; ++iy) {
    const int y = V[iy];
    const std::size_t iY = index_of(-y);
    if (iY <= iX || iY >= V.size()) continue;
    Level lv;
    lv.x = x;
    lv.y = y;
    lv.Q.assign(V.begin() + 1, V.begin() + static_cast<std::ptrdiff_t>(iy));
    lv.R.assign(V.begin() + static_cast<std::ptrdiff_t>(iy + 1), V.begin() + static_cast<std::ptrdiff_t>(iX));
    lv.S.assign(V.begin() + static_cast<std::ptrdiff_t>(iX + 1), V.begin() + static_cast<std::ptrdiff_t>(iY));
    const SideWord T(V.begin() + static_cast<std::ptrdiff_t>(iY + 1), V.end());
    lv.a = side_reduce(cat({{x}, side_inverse(lv.R), side_inverse(lv.S)}));
    lv.b = side_reduce(cat({lv.S, lv.R, lv.Q, {y}, side_inverse(lv.S)}));
    stack.push_back(lv);
    const bool go_on = enumerate_bases(cat({lv.S, lv.R, lv.Q, T}), stack, done);
    stack.pop_back();
    if (!go_on) return false;
  }
  return true;
}

Mat2 side_product(const std::vector<Mat2>& y, const SideWord& w) {
  Mat2 m;
  for (int s : w) m = m * (s > 0 ? y[static_cast<std::size_t>(s - 1)] : inverse(y[static_cast<std::size_t>(-s - 1)]));
  return m;
}

std::vector<Mat2> polygon_side_pairings(int genus, double& inradius, double& circumradius) {
  const int N = 4 * genus;
  const double alpha = 2.0 * kPi / N;
  inradius = std::acosh(std::cos(alpha / 2.0) / std::sin(kPi / N));
  circumradius = std::acosh(1.0 / (std::tan(kPi / N) * std::tan(alpha / 2.0)));
  using C = std::complex<double>;
  using CM = std::array<C, 4>;
  auto mul = [](const CM& p, const CM& q) {
    return CM{p[0] * q[0] + p[1] * q[2], p[0] * q[1] + p[1] * q[3], p[2] * q[0] + p[3] * q[2], p[2] * q[1] + p[3] * q[3]};
  };
  auto rot = [](double phi) { return CM{std::polar(1.0, phi / 2.0), 0.0, 0.0, std::polar(1.0, -phi / 2.0)}; };
  const CM T{std::cosh(inradius), std::sinh(inradius), std::sinh(inradius), std::cosh(inradius)};
  // Half-plane matrix = Cinv * disk matrix * Cm, with Cm(z) = (z - i)/(z + i).
  const C i(0, 1);
  const CM Cm{1.0, -i, 1.0, i};
  const CM Cinv{0.5, 0.5, 0.5 * i, -0.5 * i};
  std::vector<Mat2> out;
  for (int j = 0; j < 2 * genus; ++j) {
    const double th_j = 2.0 * kPi * j / N, th_o = 2.0 * kPi * (j + 2 * genus) / N;
    const CM disk = mul(mul(rot(th_o), T), rot(kPi - th_j));
    const CM h = mul(mul(Cinv, disk), Cm);
    for (const C& e : h)
      if (std::abs(e.imag()) > 1e-9 * (1.0 + std::abs(e))) throw std::logic_error("side pairing is not real");
    out.push_back(normalized({h[0].real(), h[1].real(), h[2].real(), h[3].real()}));
  }
  return out;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Mat2 FuchsianModel::letter_matrix(Letter l) const {
  const Mat2& g = gens.at(static_cast<std::size_t>(l.generator()));
  return l.inverted() ? inverse(g) : g;
}

Mat2 FuchsianModel::side_letter_matrix(int code) const {
  const Mat2& s = side_pairings.at(static_cast<std::size_t>(code / 2));
  return (code & 1) ? inverse(s) : s;
}

Mat2 evaluate(const FuchsianModel& model, const Word& w) {
  Mat2 m;
  for (Letter l : w) m = m * model.letter_matrix(l);
  return m;
}

Word side_word_to_word(const FuchsianModel& model, const std::vector<int>& side_word) {
  Word w;
  for (int s : side_word) {
    const Word& piece = model.side_pairing_words.at(static_cast<std::size_t>(std::abs(s) - 1));
    if (s > 0)
      w.insert(w.end(), piece.begin(), piece.end());
    else {
      const Word inv = inverse(piece);
      w.insert(w.end(), inv.begin(), inv.end());
    }
  }
  return dehn_reduce(w, model.presentation);
}

FuchsianModel build_geometry(int genus) {
  if (genus < 2) throw std::invalid_argument("build_model: genus must be at least 2");
  FuchsianModel m;
  m.presentation = Presentation(genus);
  m.side_pairings = polygon_side_pairings(genus, m.inradius, m.domain_radius);
  m.area = 4.0 * kPi * (genus - 1);

  // Relator of the side pairings: y1 Y2 y3 Y4 ... Y1 y2 Y3 y4 ...
  SideWord W;
  for (int i = 0; i < 2 * genus; ++i) W.push_back((i + 1) * (i % 2 == 0 ? 1 : -1));
  for (int i = 0; i < 2 * genus; ++i) W.push_back(-(i + 1) * (i % 2 == 0 ? 1 : -1));
  {
    const Mat2 r = side_product(m.side_pairings, W);
    if (!is_identity(r, 1e-9)) throw std::logic_error("polygon side pairings violate the surface relation");
  }

  // Pick the commutator basis with the smallest generator traces, then the shortest words.
  std::vector<Level> stack, best;
  double best_tr = std::numeric_limits<double>::infinity();
  std::size_t best_len = 0, solutions = 0;
  enumerate_bases(W, stack, [&](const std::vector<Level>& sol) {
    if (++solutions > 20000) return false;
    double tr = 0;
    std::size_t len = 0;
    for (const Level& lv : sol) {
      tr = std::max({tr, std::abs(side_product(m.side_pairings, lv.a).trace()), std::abs(side_product(m.side_pairings, lv.b).trace())});
      len += lv.a.size() + lv.b.size();
    }
    const bool better = best.empty() || tr < best_tr * (1 - 1e-9) || (tr <= best_tr * (1 + 1e-9) && len < best_len);
    if (better) {
      best = sol;
      best_tr = tr;
      best_len = len;
    }
    return true;
  });
  if (best.size() != static_cast<std::size_t>(genus)) throw std::logic_error("no commutator basis found");

  for (const Level& lv : best) {
    m.generator_side_words.push_back(lv.a);
    m.generator_side_words.push_back(lv.b);
    m.gens.push_back(side_product(m.side_pairings, lv.a));
    m.gens.push_back(side_product(m.side_pairings, lv.b));
  }

  // Express each y_j in the new generators, from the last level back to the first.
  std::vector<Word> yword(static_cast<std::size_t>(2 * genus));
  std::vector<bool> known(yword.size(), false);
  auto to_word = [&](const SideWord& sw) {
    Word w;
    for (int s : sw) {
      const std::size_t j = static_cast<std::size_t>(std::abs(s) - 1);
      if (!known[j]) throw std::logic_error("basis change is not triangular");
      const Word piece = s > 0 ? yword[j] : inverse(yword[j]);
      w.insert(w.end(), piece.begin(), piece.end());
    }
    return free_reduce(w);
  };
  auto assign = [&](int s, const Word& w) {
    const std::size_t j = static_cast<std::size_t>(std::abs(s) - 1);
    yword[j] = s > 0 ? w : inverse(w);
    known[j] = true;
  };
  auto concat = [](std::initializer_list<Word> parts) {
    Word out;
    for (const Word& w : parts) out.insert(out.end(), w.begin(), w.end());
    return free_reduce(out);
  };
  for (std::size_t k = best.size(); k-- > 0;) {
    const Level& lv = best[k];
    const Word a{Letter(static_cast<int>(2 * k), false)}, b{Letter(static_cast<int>(2 * k + 1), false)};
    const Word S = to_word(lv.S), R = to_word(lv.R), Q = to_word(lv.Q);
    // x = a S R,  y = Q^-1 R^-1 S^-1 b S
    assign(lv.x, concat({a, S, R}));
    assign(lv.y, concat({inverse(Q), inverse(R), inverse(S), b, S}));
  }
  for (Word& w : yword) w = dehn_reduce(w, m.presentation);
  m.side_pairing_words = yword;

  // Forward error bound for a product: roundoff at step k is amplified by |P_k| |P_k^-1| = |P_k|^2,
  // on top of the relative error the generator matrices already carry.
  auto checked_product = [&](const Word& w, double& amplification) {
    Mat2 p;
    amplification = 0;
    for (Letter l : w) {
      p = p * m.letter_matrix(l);
      amplification += p.a * p.a + p.b * p.b + p.c * p.c + p.d * p.d;
    }
    return p;
  };
  double amp = 0;
  const Mat2 rel = checked_product(m.presentation.relator(), amp);
  if (!is_identity(rel, std::max(1e-12, 1e-13 * amp))) throw std::logic_error("generator matrices violate the commutator relation");
  for (std::size_t j = 0; j < yword.size(); ++j) {
    const Mat2 e = checked_product(yword[j], amp);
    if (!same_isometry(e, m.side_pairings[j], std::max(1e-9, 1e-13 * amp))) throw std::logic_error("side pairing rewrite mismatch");
  }
  return m;
}

FuchsianModel build_model(int genus, const ModelOptions& options) {
  FuchsianModel m = build_geometry(genus);
  double shortest_gen = std::numeric_limits<double>::infinity();
  for (const Mat2& g : m.gens) shortest_gen = std::min(shortest_gen, translation_length(g));
  for (const Mat2& s : m.side_pairings) shortest_gen = std::min(shortest_gen, translation_length(s));
  // Some conjugate of the shortest closed geodesic has its axis through the polygon, so its
  // displacement at x0 is at most l0 + 2 R_c <= shortest_gen + 2 R_c.
  const double radius = std::max(options.systole_radius, shortest_gen + 2.0 * m.domain_radius + 1e-6);
  const OrbitElements orbit = enumerate_orbit_elements(m, radius);
  double sys = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < orbit.size(); ++i)
    if (orbit.displacement[i] <= radius) sys = std::min(sys, translation_length(orbit.matrices[i]));
  m.systole = sys;
  if (options.fit_length > 0) m.svarc_milnor = fit_svarc_milnor(m, enumerate_cayley_ball(m, options.fit_length));
  return m;
}

bool in_fundamental_domain(const FuchsianModel& model, HPoint p, double slack) {
  // cosh d(p, q) = 1 + |p - q|^2 / (2 p.y q.y); compare |p - q|^2 / q.y against |p - i|^2.
  const double own = (p.x * p.x + (p.y - 1.0) * (p.y - 1.0));
  for (const Mat2& s : model.side_pairings) {
    for (const Mat2& g : {s, inverse(s)}) {
      const HPoint q = apply(g, model.base_point);
      const double dx = p.x - q.x, dy = p.y - q.y;
      const double other = (dx * dx + dy * dy) / q.y;
      if (slack == 0.0) {
        if (own > other) return false;
      } else if (hyp_dist(p, model.base_point) > hyp_dist(p, q) + slack) {
        return false;
      }
    }
  }
  return true;
}

// ---------------------------------------------------------------------------------------
// Persistence

std::string model_to_text(const FuchsianModel& m) {
  std::ostringstream os;
  os << "hyplab-model 1\n";
  os << "genus " << m.genus() << "\n";
  for (std::size_t k = 0; k < m.gens.size(); ++k) {
    const Mat2& g = m.gens[k];
    os << "generator " << to_string(Word{Letter(static_cast<int>(k), false)}) << ' ' << fmt17(g.a) << ' ' << fmt17(g.b) << ' '
       << fmt17(g.c) << ' ' << fmt17(g.d) << "\n";
  }
  os << "inradius " << fmt17(m.inradius) << "\n";
  os << "domain_radius " << fmt17(m.domain_radius) << "\n";
  os << "area " << fmt17(m.area) << "\n";
  os << "systole " << fmt17(m.systole) << "\n";
  os << "kappa1 " << fmt17(m.svarc_milnor.kappa1) << "\n";
  os << "kappa2 " << fmt17(m.svarc_milnor.kappa2) << "\n";
  os << "fit_length " << m.svarc_milnor.fitted_length << "\n";
  os << "complete_radius " << fmt17(m.svarc_milnor.complete_radius) << "\n";
  return os.str();
}

FuchsianModel model_from_text(const std::string& text) {
  std::istringstream is(text);
  std::string tag;
  int version = 0;
  if (!(is >> tag >> version) || tag != "hyplab-model" || version != 1) throw std::runtime_error("model file: bad header");
  FuchsianModel m;
  bool have_genus = false;
  std::vector<Mat2> stored;
  std::string key;
  while (is >> key) {
    if (key == "genus") {
      int g = 0;
      is >> g;
      m = build_geometry(g);
      have_genus = true;
    } else if (key == "generator") {
      std::string name;
      Mat2 g;
      is >> name >> g.a >> g.b >> g.c >> g.d;
      stored.push_back(g);
    } else if (key == "inradius" || key == "domain_radius" || key == "area") {
      double ignored;
      is >> ignored;
    } else if (key == "systole") {
      is >> m.systole;
    } else if (key == "kappa1") {
      is >> m.svarc_milnor.kappa1;
    } else if (key == "kappa2") {
      is >> m.svarc_milnor.kappa2;
    } else if (key == "fit_length") {
      is >> m.svarc_milnor.fitted_length;
    } else if (key == "complete_radius") {
      is >> m.svarc_milnor.complete_radius;
    } else {
      throw std::runtime_error("model file: unknown key '" + key + "'");
    }
    if (!is) throw std::runtime_error("model file: malformed value for '" + key + "'");
  }
  if (!have_genus) throw std::runtime_error("model file: missing genus");
  if (stored.size() != m.gens.size()) throw std::runtime_error("model file: wrong number of generators");
  for (std::size_t k = 0; k < stored.size(); ++k)
    if (!same_isometry(stored[k], m.gens[k], 1e-12)) throw std::runtime_error("model file: generator matrices do not match the polygon construction");
  return m;
}

void save_model(const FuchsianModel& model, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << model_to_text(model);
}

FuchsianModel load_model(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return model_from_text(ss.str());
}

// ---------------------------------------------------------------------------------------
// Enumeration

Word CayleyBall::word(std::size_t id) const {
  Word w(length[id]);
  for (std::size_t k = length[id]; k-- > 0;) {
    w[k] = last_letter[id];
    id = parent[id];
  }
  return w;
}

std::uint32_t CayleyBall::neighbor(std::size_t id, Letter s) const {
  const std::size_t letters = neighbors.size() / matrices.size();
  return neighbors[id * letters + s.code()];
}

CayleyBall enumerate_cayley_ball(const FuchsianModel& model, int L, const CayleyBallOptions& options) {
  if (L < 0 || L > 12) throw std::invalid_argument("enumerate_cayley_ball: length out of range");
  CayleyBall ball;
  ball.max_length = L;
  ball.matrices.push_back(Mat2::identity());
  ball.parent.push_back(0);
  ball.last_letter.push_back(Letter());
  ball.length.push_back(0);
  ball.sphere_sizes.push_back(1);
  detail::IsometryIndex index(1024);
  index.insert(Mat2::identity(), 0);
  const int letters = 2 * model.presentation.generator_count();
  std::vector<Mat2> lm;
  for (int c = 0; c < letters; ++c) lm.push_back(model.letter_matrix(Letter::from_code(static_cast<std::uint8_t>(c))));
  if (options.record_neighbors) ball.neighbors.assign(static_cast<std::size_t>(letters), CayleyBall::kOutside);
  auto link = [&](std::size_t u, int c, std::size_t v) {
    if (!options.record_neighbors) return;
    const auto k = static_cast<std::size_t>(letters);
    ball.neighbors[u * k + static_cast<std::size_t>(c)] = static_cast<std::uint32_t>(v);
    ball.neighbors[v * k + Letter::from_code(static_cast<std::uint8_t>(c)).inverse().code()] = static_cast<std::uint32_t>(u);
  };

  std::size_t begin = 0;
  for (int len = 1; len <= L; ++len) {
    const std::size_t end = ball.size();
    for (std::size_t u = begin; u < end; ++u) {
      const Word wu = options.exact_confirm ? ball.word(u) : Word{};
      for (int c = 0; c < letters; ++c) {
        const Letter s = Letter::from_code(static_cast<std::uint8_t>(c));
        if (ball.length[u] > 0 && s == ball.last_letter[u].inverse()) continue;
        const Mat2 child = ball.matrices[u] * lm[static_cast<std::size_t>(c)];
        std::int64_t found = -1;
        index.for_each_candidate(child, [&](std::uint32_t id) {
          if (found >= 0 || !same_isometry(ball.matrices[id], child, 1e-6)) return;
          if (options.exact_confirm) {
            Word w = wu;
            w.push_back(s);
            if (!equal_in_group(ball.word(id), w, model.presentation)) return;
          }
          found = id;
        });
        if (found >= 0) {
          link(u, c, static_cast<std::size_t>(found));
          continue;
        }
        if (ball.size() >= options.max_elements) throw std::length_error("enumerate_cayley_ball: element budget exhausted");
        const auto id = static_cast<std::uint32_t>(ball.size());
        ball.matrices.push_back(child);
        ball.parent.push_back(static_cast<std::uint32_t>(u));
        ball.last_letter.push_back(s);
        ball.length.push_back(static_cast<std::uint8_t>(len));
        index.insert(child, id);
        if (options.record_neighbors) ball.neighbors.resize(ball.neighbors.size() + static_cast<std::size_t>(letters), CayleyBall::kOutside);
        link(u, c, id);
      }
    }
    ball.sphere_sizes.push_back(ball.size() - end);
    begin = end;
  }
  return ball;
}

SvarcMilnor fit_svarc_milnor(const FuchsianModel& model, const CayleyBall& ball) {
  const int L = ball.max_length;
  SvarcMilnor sm;
  sm.fitted_length = L;
  detail::IsometryIndex index(ball.size());
  for (std::size_t i = 0; i < ball.size(); ++i) index.insert(ball.matrices[i], static_cast<std::uint32_t>(i));

  // Exact word lengths of orbit elements, in order of displacement, until one is missing.
  std::vector<std::pair<double, int>> points;
  double witness = -1;
  for (double radius = 8.0; witness < 0 && radius <= 16.0; radius += 2.0) {
    const OrbitElements orbit = enumerate_orbit_elements(model, radius);
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < orbit.size(); ++i)
      if (orbit.displacement[i] <= radius) order.push_back(i);
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return orbit.displacement[x] < orbit.displacement[y]; });
    points.clear();
    for (std::size_t i : order) {
      int len = -1;
      index.for_each_candidate(orbit.matrices[i], [&](std::uint32_t id) {
        if (len < 0 && same_isometry(ball.matrices[id], orbit.matrices[i], 1e-6)) len = ball.length[id];
      });
      if (len < 0) {
        witness = orbit.displacement[i];
        break;
      }
      points.emplace_back(orbit.displacement[i], len);
    }
    if (witness < 0) sm.complete_radius = radius;
  }
  if (witness >= 0) {
    sm.complete_radius = witness;
    points.emplace_back(witness, L + 1);
  }
  const double ref = sm.complete_radius;

  // Candidate slopes are the breakpoints of the piecewise-linear objective.
  std::vector<double> slopes{0.0};
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = 0; j < points.size(); ++j)
      if (points[j].first > points[i].first + 1e-9 && points[j].second > points[i].second)
        slopes.push_back((points[j].second - points[i].second) / (points[j].first - points[i].first));
  std::sort(slopes.begin(), slopes.end());
  slopes.erase(std::unique(slopes.begin(), slopes.end()), slopes.end());
  double best = std::numeric_limits<double>::infinity();
  for (double k1 : slopes) {
    double k2 = 0;
    for (const auto& [d, len] : points) k2 = std::max(k2, len - k1 * d);
    const double objective = k1 * ref + k2;
    if (objective < best - 1e-12 || (objective <= best + 1e-12 && k1 > sm.kappa1)) {
      best = objective;
      sm.kappa1 = k1;
      sm.kappa2 = k2;
    }
  }
  return sm;
}

std::vector<int> OrbitElements::side_word(std::size_t id) const {
  std::vector<int> w;
  while (id != 0) {
    w.push_back(side_letter[id]);
    id = parent[id];
  }
  std::reverse(w.begin(), w.end());
  return w;
}

OrbitElements enumerate_orbit_elements(const FuchsianModel& model, double radius, const OrbitEnumOptions& options) {
  if (!(radius >= 0)) throw std::invalid_argument("enumerate_orbit_elements: negative radius");
  const double prune = radius + model.domain_radius;
  OrbitElements out;
  out.radius = radius;
  out.matrices.push_back(Mat2::identity());
  out.displacement.push_back(0.0);
  out.parent.push_back(0);
  out.side_letter.push_back(0);
  detail::IsometryIndex index(4096);
  index.insert(Mat2::identity(), 0);
  const int ng = 2 * model.genus();
  std::vector<Mat2> steps;
  std::vector<int> codes;
  for (int j = 0; j < ng; ++j) {
    steps.push_back(model.side_pairings[static_cast<std::size_t>(j)]);
    codes.push_back(j + 1);
    steps.push_back(inverse(model.side_pairings[static_cast<std::size_t>(j)]));
    codes.push_back(-(j + 1));
  }
  std::vector<std::uint32_t> frontier{0}, next;
  while (!frontier.empty()) {
    next.clear();
    for (std::uint32_t u : frontier) {
      for (std::size_t k = 0; k < steps.size(); ++k) {
        if (u != 0 && out.side_letter[u] == -codes[k]) continue;
        const Mat2 child = out.matrices[u] * steps[k];
        const double disp = displacement(child);
        if (disp > prune) continue;
        bool found = false;
        const bool exact = options.exact_confirm || disp > 20.0;
        index.for_each_candidate(child, [&](std::uint32_t id) {
          if (found || !same_isometry(out.matrices[id], child, 1e-6)) return;
          if (exact) {
            std::vector<int> w = out.side_word(u);
            w.push_back(codes[k]);
            const std::vector<int> v = out.side_word(id);
            std::vector<int> diff = w;
            for (auto it = v.rbegin(); it != v.rend(); ++it) diff.push_back(-*it);
            if (!side_word_to_word(model, diff).empty()) return;
          }
          found = true;
        });
        if (found) continue;
        if (out.size() >= options.max_elements) throw std::length_error("enumerate_orbit_elements: element budget exhausted");
        const auto id = static_cast<std::uint32_t>(out.size());
        out.matrices.push_back(child);
        out.displacement.push_back(disp);
        out.parent.push_back(u);
        out.side_letter.push_back(static_cast<std::int16_t>(codes[k]));
        index.insert(child, id);
        next.push_back(id);
      }
    }
    frontier.swap(next);
  }
  return out;
}

}  // namespace hyplab
