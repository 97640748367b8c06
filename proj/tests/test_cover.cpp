#include <doctest.h>

#include <cmath>
#include <map>
#include <numeric>

#include "hyplab/cover.hpp"
#include "hyplab/rng.hpp"

using namespace hyplab;

namespace {

// |Hom(Gamma_2, G)| = |G| sum_chi (|G| / chi(1))^2 over irreducible characters.
constexpr std::size_t kHomS3 = 6 * (36 + 36 + 9);                 // 486
constexpr std::size_t kHomS4 = 24 * (576 + 576 + 144 + 64 + 64);  // 34176

Word random_word(Rng& rng, std::size_t len) {
  Word out;
  for (std::size_t i = 0; i < len; ++i) out.push_back(Letter::from_code(static_cast<std::uint8_t>(rng.below(8))));
  return out;
}

}  // namespace

TEST_CASE("permutation basics") {
  const Permutation p{2, 0, 1, 3};
  CHECK(is_permutation(p));
  CHECK_FALSE(is_permutation({0, 0, 1}));
  CHECK_FALSE(is_permutation({0, 3, 1}));
  CHECK(fixed_point_count(p) == 1);
  const Permutation q = inverse(p);
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(q[p[i]] == i);
  CHECK(permutation_rank(identity_permutation(5)) == 0);
  CHECK(permutation_rank({4, 3, 2, 1, 0}) == 119);
}

TEST_CASE("exhaustive counts match the character formula") {
  CHECK(enumerate_homs(2, 2).size() == 16);
  const auto h3 = enumerate_homs(2, 3);
  CHECK(h3.size() == kHomS3);
  for (const auto& h : h3) CHECK(h.satisfies_relator());
  CHECK(enumerate_homs(2, 4).size() == kHomS4);
}

TEST_CASE("acceptance at n = 2 is exactly one") { CHECK(count_accepted(2, 2, 10000, 1) == 10000); }

TEST_CASE("acceptance at n = 3 matches the exhaustive rate") {
  const double p = static_cast<double>(kHomS3) / 1296.0;
  const std::uint64_t trials = 100000;
  const double rate = static_cast<double>(count_accepted(2, 3, trials, 7)) / static_cast<double>(trials);
  CHECK(std::abs(rate - p) <= 3 * std::sqrt(p * (1 - p) / static_cast<double>(trials)));
}

TEST_CASE("samples are uniform on Hom at n = 3") {
  const auto all = enumerate_homs(2, 3);
  std::map<std::uint64_t, std::size_t> counts;
  for (const auto& h : all) counts[hom_rank(h)] = 0;
  const std::size_t samples = 5000;
  for (std::size_t i = 0; i < samples; ++i) {
    const HomSample s = sample_hom(2, 3, derive_seed(99, i));
    REQUIRE(counts.count(hom_rank(s.hom)) == 1);
    ++counts[hom_rank(s.hom)];
  }
  const double expected = static_cast<double>(samples) / static_cast<double>(all.size());
  double chi2 = 0;
  for (const auto& [rank, c] : counts) chi2 += (static_cast<double>(c) - expected) * (static_cast<double>(c) - expected) / expected;
  // 485 degrees of freedom: mean 485, standard deviation about 31.
  CHECK(chi2 < 485 + 4 * 31.2);
  CHECK(chi2 > 485 - 4 * 31.2);
}

TEST_CASE("sampling is deterministic and satisfies the relator") {
  const HomSample a = sample_hom(2, 6, 12345);
  const HomSample b = sample_hom(2, 6, 12345);
  CHECK(a.hom.gens == b.hom.gens);
  CHECK(a.trials == b.trials);
  CHECK(a.hom.satisfies_relator());
  for (const auto& g : a.hom.gens) CHECK(is_permutation(g));
  CHECK_THROWS(sample_hom(2, 11, 1));
  CHECK_THROWS(sample_hom(1, 4, 1));
  SampleOptions tight;
  tight.trial_budget = 1;
  CHECK_THROWS_AS(sample_hom(2, 9, 3, tight), std::runtime_error);
}

TEST_CASE("word images are well defined") {
  const Presentation p(2);
  Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    const CoverHom h = sample_hom(2, 5, derive_seed(4, static_cast<std::uint64_t>(i))).hom;
    CHECK(h.image(p.relator()) == identity_permutation(5));
    const Word u = random_word(rng, 6);
    CHECK(h.image(dehn_reduce(u, p)) == h.image(u));
    CHECK(h.image(multiply(u, inverse(u))) == identity_permutation(5));
  }
}

TEST_CASE("fixed points are a class function in [0, n]") {
  Rng rng(5);
  const CoverHom h = sample_hom(2, 7, 77).hom;
  CHECK(fixed_points(h, Word{}) == 7);
  for (int i = 0; i < 100; ++i) {
    const Word g = random_word(rng, 1 + rng.below(8));
    const std::size_t f = fixed_points(h, g);
    CHECK(f <= 7);
    for (std::uint8_t c = 0; c < 8; ++c) {
      const Word s{Letter::from_code(c)};
      CHECK(fixed_points(h, multiply(multiply(s, g), inverse(s))) == f);
    }
  }
}

TEST_CASE("mean fixed points of the identity") {
  const FnEstimate e = estimate_E_Fn(2, Word{}, 5, 200, 3);
  CHECK(e.mean == 5.0);
  CHECK(e.stderr_ == 0.0);
  CHECK_THROWS(estimate_E_Fn(2, Word{}, 5, 50, 3));
}

TEST_CASE("Monte Carlo results do not depend on the thread count") {
  const std::vector<Word> words{parse_word("a1"), parse_word("a1 b1"), parse_word("a1 a1")};
  const FnStatistics one = estimate_fixed_point_means(2, words, 5, 200, 21, 1);
  const FnStatistics two = estimate_fixed_point_means(2, words, 5, 200, 21, 3);
  CHECK(one.trials == two.trials);
  for (std::size_t k = 0; k < words.size(); ++k) {
    CHECK(one.estimates[k].mean == two.estimates[k].mean);
    CHECK(one.estimates[k].stderr_ == two.estimates[k].stderr_);
  }
}

TEST_CASE("a generator has one fixed point on average") {
  const FnEstimate e = estimate_E_Fn(2, parse_word("a1"), 6, 2000, 8);
  CHECK(std::abs(e.mean - 1.0) <= 3 * e.stderr_ + 0.1);
}

TEST_CASE("Schreier graph spectrum") {
  const CoverHom id = trivial_hom(2, 4);
  CHECK(graph_lambda1(id) == doctest::Approx(0.0));
  CHECK_FALSE(is_transitive(id));

  CoverHom swap;
  swap.genus = 2;
  swap.n = 2;
  swap.gens.assign(4, Permutation{1, 0});
  REQUIRE(swap.satisfies_relator());
  const auto spec = graph_laplacian_spectrum(swap);
  CHECK(spec[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(spec[1] == doctest::Approx(16.0).epsilon(1e-12));
  CHECK(graph_lambda1(swap) == doctest::Approx(16.0));
  CHECK(is_transitive(swap));

  for (std::uint64_t s = 0; s < 10; ++s) {
    const CoverHom h = sample_hom(2, 8, derive_seed(31, s)).hom;
    const auto ev = graph_laplacian_spectrum(h);
    // Trace of 8 I - A; each fixed point of a generator is a loop counted twice in A.
    double loops = 0;
    for (const auto& g : h.gens) loops += 2.0 * static_cast<double>(fixed_point_count(g));
    CHECK(std::accumulate(ev.begin(), ev.end(), 0.0) == doctest::Approx(8.0 * 8 - loops).epsilon(1e-9));
    CHECK(ev.front() == doctest::Approx(0.0).epsilon(1e-9));
    CHECK((graph_lambda1(h) > 1e-9) == is_transitive(h));
  }
}

TEST_CASE("cover JSON round trip") {
  const CoverHom h = sample_hom(2, 5, 2024).hom;
  const nlohmann::json j = to_json(h);
  CHECK(j["gens"][0].size() == 5);
  const CoverHom r = cover_from_json(j);
  CHECK(r.gens == h.gens);
  CHECK(r.n == h.n);
  // Images are 1-based on disk.
  nlohmann::json bad = j;
  bad["gens"][0][0] = 0;
  CHECK_THROWS(cover_from_json(bad));
  // [(12), (23)] is a 3-cycle, so the relator fails.
  nlohmann::json broken = nlohmann::json::parse(R"({"n": 3, "gens": [[2,1,3],[1,3,2],[1,2,3],[1,2,3]]})");
  CHECK_THROWS(cover_from_json(broken));
  broken["gens"][1] = {1, 2, 3};
  CHECK_NOTHROW(cover_from_json(broken));
}
