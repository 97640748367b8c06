#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "hyplab/group.hpp"

namespace hyplab {

// 0-based images; the JSON form is 1-based.
using Permutation = std::vector<std::uint32_t>;

Permutation identity_permutation(std::size_t n);
Permutation inverse(const Permutation& p);
bool is_permutation(const Permutation& p);
std::size_t fixed_point_count(const Permutation& p);

// A point of Hom(Gamma, S_n). Permutations act on the right: j.(uv) = (j.u).v, so a word is
// evaluated letter by letter from the left.
struct CoverHom {
  int genus = 2;
  std::size_t n = 1;
  std::vector<Permutation> gens;  // images of a1, b1, ..., ag, bg

  Permutation image(const Word& w) const;
  bool satisfies_relator() const;
};

CoverHom trivial_hom(int genus, std::size_t n);

nlohmann::json to_json(const CoverHom& h);
CoverHom cover_from_json(const nlohmann::json& j);

struct HomSample {
  CoverHom hom;
  std::uint64_t trials = 0;
};

struct SampleOptions {
  std::size_t n_max = 10;
  std::uint64_t trial_budget = 100'000'000;
};

// Uniform on Hom(Gamma, S_n) by rejection: 2g independent uniform permutations, kept iff
// the relator evaluates to the identity. Throws std::runtime_error when the budget runs out.
HomSample sample_hom(int genus, std::size_t n, std::uint64_t seed, const SampleOptions& options = {});

// Number of accepted tuples in exactly `trials` rejection trials.
std::uint64_t count_accepted(int genus, std::size_t n, std::uint64_t trials, std::uint64_t seed);

// Every tuple in Hom(Gamma, S_n), in lexicographic order of the tuple of permutation ranks.
// Only for (n!)^{2g} <= 2e7.
std::vector<CoverHom> enumerate_homs(int genus, std::size_t n);
// Rank of a permutation in lexicographic order, and of a tuple in the product order.
std::uint64_t permutation_rank(const Permutation& p);
std::uint64_t hom_rank(const CoverHom& h);

std::size_t fixed_points(const CoverHom& h, const Word& w);

struct FnEstimate {
  Word word;
  double mean = 0;
  double stderr_ = 0;
};

struct FnStatistics {
  std::size_t n = 0;
  std::size_t samples = 0;
  std::uint64_t trials = 0;
  std::vector<FnEstimate> estimates;
};

// Monte Carlo E[F_n(w)] over `samples` independent uniform covers, all words evaluated on the
// same covers. Cover i uses derive_seed(seed, i).
FnStatistics estimate_fixed_point_means(int genus, const std::vector<Word>& words, std::size_t n, std::size_t samples,
                                        std::uint64_t seed, int threads = 1, const SampleOptions& options = {});
FnEstimate estimate_E_Fn(int genus, const Word& w, std::size_t n, std::size_t samples, std::uint64_t seed,
                         const SampleOptions& options = {});

// Eigenvalues of L = 4g I - A for the Schreier graph with edges j -- j.s over the generators.
std::vector<double> graph_laplacian_spectrum(const CoverHom& h);
double graph_lambda1(const CoverHom& h);
bool is_transitive(const CoverHom& h);

}  // namespace hyplab
