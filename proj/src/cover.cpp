#include "hyplab/cover.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>

#include "hyplab/detail/parallel.hpp"
#include "hyplab/rng.hpp"

namespace hyplab {

Permutation identity_permutation(std::size_t n) {
  Permutation p(n);
  std::iota(p.begin(), p.end(), 0u);
  return p;
}

Permutation inverse(const Permutation& p) {
  Permutation q(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) q[p[i]] = static_cast<std::uint32_t>(i);
  return q;
}

bool is_permutation(const Permutation& p) {
  std::vector<bool> seen(p.size(), false);
  for (std::uint32_t x : p) {
    if (x >= p.size() || seen[x]) return false;
    seen[x] = true;
  }
  return true;
}

std::size_t fixed_point_count(const Permutation& p) {
  std::size_t c = 0;
  for (std::size_t i = 0; i < p.size(); ++i) c += p[i] == i;
  return c;
}

Permutation CoverHom::image(const Word& w) const {
  std::vector<Permutation> inv;
  inv.reserve(gens.size());
  for (const auto& g : gens) inv.push_back(inverse(g));
  Permutation p = identity_permutation(n);
  for (Letter l : w) {
    if (l.generator() >= static_cast<int>(gens.size())) throw std::invalid_argument("CoverHom::image: letter outside the presentation");
    const Permutation& s = l.inverted() ? inv[static_cast<std::size_t>(l.generator())] : gens[static_cast<std::size_t>(l.generator())];
    for (auto& x : p) x = s[x];
  }
  return p;
}

bool CoverHom::satisfies_relator() const {
  const Presentation pres(genus);
  const Permutation r = image(pres.relator());
  return fixed_point_count(r) == n;
}

CoverHom trivial_hom(int genus, std::size_t n) {
  if (n < 1) throw std::invalid_argument("trivial_hom: n must be positive");
  CoverHom h;
  h.genus = genus;
  h.n = n;
  h.gens.assign(static_cast<std::size_t>(2 * genus), identity_permutation(n));
  return h;
}

nlohmann::json to_json(const CoverHom& h) {
  nlohmann::json gens = nlohmann::json::array();
  for (const auto& g : h.gens) {
    nlohmann::json row = nlohmann::json::array();
    for (std::uint32_t x : g) row.push_back(x + 1);
    gens.push_back(std::move(row));
  }
  return {{"n", h.n}, {"genus", h.genus}, {"gens", std::move(gens)}};
}

CoverHom cover_from_json(const nlohmann::json& j) {
  CoverHom h;
  h.n = j.at("n").get<std::size_t>();
  h.genus = j.contains("genus") ? j["genus"].get<int>() : static_cast<int>(j.at("gens").size() / 2);
  for (const auto& row : j.at("gens")) {
    Permutation p;
    for (const auto& x : row) {
      const auto v = x.get<std::int64_t>();
      if (v < 1) throw std::invalid_argument("cover json: images are 1-based");
      p.push_back(static_cast<std::uint32_t>(v - 1));
    }
    if (p.size() != h.n || !is_permutation(p)) throw std::invalid_argument("cover json: generator image is not a permutation of 1..n");
    h.gens.push_back(std::move(p));
  }
  if (h.gens.size() != static_cast<std::size_t>(2 * h.genus)) throw std::invalid_argument("cover json: expected 2g generator images");
  if (!h.satisfies_relator()) throw std::invalid_argument("cover json: relator is not satisfied");
  return h;
}

namespace {

// Relator [a1,b1]...[ag,bg] under the right action, checked point by point with early exit.
bool relator_holds(const std::vector<Permutation>& g, const std::vector<Permutation>& gi, std::size_t n) {
  const std::size_t genus = g.size() / 2;
  for (std::size_t j = 0; j < n; ++j) {
    std::uint32_t x = static_cast<std::uint32_t>(j);
    for (std::size_t k = 0; k < genus; ++k) {
      x = g[2 * k][x];
      x = g[2 * k + 1][x];
      x = gi[2 * k][x];
      x = gi[2 * k + 1][x];
    }
    if (x != j) return false;
  }
  return true;
}

void shuffle_into(Permutation& p, Rng& rng) {
  std::iota(p.begin(), p.end(), 0u);
  for (std::size_t i = p.size(); i > 1; --i) std::swap(p[i - 1], p[rng.below(i)]);
}

}  // namespace

HomSample sample_hom(int genus, std::size_t n, std::uint64_t seed, const SampleOptions& options) {
  if (genus < 2) throw std::invalid_argument("sample_hom: genus must be at least 2");
  if (n < 2 || n > options.n_max)
    throw std::invalid_argument("sample_hom: n must lie in [2, " + std::to_string(options.n_max) + "]");
  Rng rng(seed);
  const std::size_t k = static_cast<std::size_t>(2 * genus);
  std::vector<Permutation> g(k, Permutation(n)), gi(k, Permutation(n));
  for (std::uint64_t trial = 1; trial <= options.trial_budget; ++trial) {
    for (std::size_t s = 0; s < k; ++s) {
      shuffle_into(g[s], rng);
      for (std::size_t i = 0; i < n; ++i) gi[s][g[s][i]] = static_cast<std::uint32_t>(i);
    }
    if (relator_holds(g, gi, n)) {
      HomSample out;
      out.hom.genus = genus;
      out.hom.n = n;
      out.hom.gens = g;
      out.trials = trial;
      return out;
    }
  }
  throw std::runtime_error("sample_hom: trial budget of " + std::to_string(options.trial_budget) + " exhausted at n = " + std::to_string(n) +
                           "; rejection sampling is too slow at this size");
}

std::uint64_t count_accepted(int genus, std::size_t n, std::uint64_t trials, std::uint64_t seed) {
  if (genus < 2 || n < 1) throw std::invalid_argument("count_accepted: genus >= 2 and n >= 1 required");
  Rng rng(seed);
  const std::size_t k = static_cast<std::size_t>(2 * genus);
  std::vector<Permutation> g(k, Permutation(n)), gi(k, Permutation(n));
  std::uint64_t accepted = 0;
  for (std::uint64_t trial = 0; trial < trials; ++trial) {
    for (std::size_t s = 0; s < k; ++s) {
      shuffle_into(g[s], rng);
      for (std::size_t i = 0; i < n; ++i) gi[s][g[s][i]] = static_cast<std::uint32_t>(i);
    }
    accepted += relator_holds(g, gi, n);
  }
  return accepted;
}

std::uint64_t permutation_rank(const Permutation& p) {
  std::uint64_t r = 0;
  const std::size_t n = p.size();
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t smaller = 0;
    for (std::size_t j = i + 1; j < n; ++j) smaller += p[j] < p[i];
    r = r * (n - i) + smaller;
  }
  return r;
}

std::uint64_t hom_rank(const CoverHom& h) {
  std::uint64_t f = 1;
  for (std::size_t i = 2; i <= h.n; ++i) f *= i;
  std::uint64_t r = 0;
  for (const auto& g : h.gens) r = r * f + permutation_rank(g);
  return r;
}

std::vector<CoverHom> enumerate_homs(int genus, std::size_t n) {
  std::vector<Permutation> all;
  Permutation p = identity_permutation(n);
  do all.push_back(p);
  while (std::next_permutation(p.begin(), p.end()));
  const std::size_t k = static_cast<std::size_t>(2 * genus);
  if (std::pow(static_cast<double>(all.size()), static_cast<double>(k)) > 2e7) throw std::invalid_argument("enumerate_homs: too many tuples");
  std::vector<Permutation> inv;
  for (const auto& q : all) inv.push_back(inverse(q));

  std::vector<CoverHom> out;
  std::vector<std::size_t> idx(k, 0);
  std::vector<Permutation> g(k), gi(k);
  for (;;) {
    for (std::size_t s = 0; s < k; ++s) {
      g[s] = all[idx[s]];
      gi[s] = inv[idx[s]];
    }
    if (relator_holds(g, gi, n)) {
      CoverHom h;
      h.genus = genus;
      h.n = n;
      h.gens = g;
      out.push_back(std::move(h));
    }
    std::size_t pos = k;
    while (pos > 0 && ++idx[pos - 1] == all.size()) idx[--pos] = 0;
    if (pos == 0) break;
  }
  return out;
}

std::size_t fixed_points(const CoverHom& h, const Word& w) { return fixed_point_count(h.image(w)); }

FnStatistics estimate_fixed_point_means(int genus, const std::vector<Word>& words, std::size_t n, std::size_t samples,
                                        std::uint64_t seed, int threads, const SampleOptions& options) {
  if (samples < 100) throw std::invalid_argument("estimate_E_Fn: at least 100 samples");
  std::vector<std::vector<double>> values(samples, std::vector<double>(words.size()));
  std::vector<std::uint64_t> trials(samples);
  detail::parallel_for(samples, threads, [&](std::size_t i) {
    const HomSample hs = sample_hom(genus, n, derive_seed(seed, i), options);
    trials[i] = hs.trials;
    for (std::size_t k = 0; k < words.size(); ++k) values[i][k] = static_cast<double>(fixed_points(hs.hom, words[k]));
  });
  FnStatistics st;
  st.n = n;
  st.samples = samples;
  for (auto t : trials) st.trials += t;
  for (std::size_t k = 0; k < words.size(); ++k) {
    double s = 0, ss = 0;
    for (std::size_t i = 0; i < samples; ++i) s += values[i][k];
    const double mean = s / static_cast<double>(samples);
    for (std::size_t i = 0; i < samples; ++i) ss += (values[i][k] - mean) * (values[i][k] - mean);
    FnEstimate e;
    e.word = words[k];
    e.mean = mean;
    e.stderr_ = std::sqrt(ss / static_cast<double>(samples - 1) / static_cast<double>(samples));
    st.estimates.push_back(std::move(e));
  }
  return st;
}

FnEstimate estimate_E_Fn(int genus, const Word& w, std::size_t n, std::size_t samples, std::uint64_t seed, const SampleOptions& options) {
  return estimate_fixed_point_means(genus, {w}, n, samples, seed, 1, options).estimates.front();
}

std::vector<double> graph_laplacian_spectrum(const CoverHom& h) {
  const auto n = static_cast<Eigen::Index>(h.n);
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  const double degree = 2.0 * static_cast<double>(h.gens.size());
  for (const auto& g : h.gens)
    for (std::size_t j = 0; j < h.n; ++j) {
      L(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(g[j])) -= 1;
      L(static_cast<Eigen::Index>(g[j]), static_cast<Eigen::Index>(j)) -= 1;
    }
  for (Eigen::Index i = 0; i < n; ++i) L(i, i) += degree;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(L, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  return std::vector<double>(ev.data(), ev.data() + ev.size());
}

double graph_lambda1(const CoverHom& h) {
  if (h.n < 2) throw std::invalid_argument("graph_lambda1: n must be at least 2");
  const auto spec = graph_laplacian_spectrum(h);
  // Roundoff can push the zero eigenvalues of a disconnected graph slightly negative.
  return std::max(0.0, spec[1]);
}

bool is_transitive(const CoverHom& h) {
  std::vector<Permutation> inv;
  for (const auto& g : h.gens) inv.push_back(inverse(g));
  std::vector<bool> seen(h.n, false);
  std::vector<std::uint32_t> stack{0};
  seen[0] = true;
  std::size_t count = 1;
  while (!stack.empty()) {
    const std::uint32_t v = stack.back();
    stack.pop_back();
    for (std::size_t s = 0; s < h.gens.size(); ++s) {
      for (std::uint32_t w : {h.gens[s][v], inv[s][v]}) {
        if (!seen[w]) {
          seen[w] = true;
          ++count;
          stack.push_back(w);
        }
      }
    }
  }
  return count == h.n;
}

}  // namespace hyplab
