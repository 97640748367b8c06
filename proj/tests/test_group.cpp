#include <doctest.h>

#include <cmath>
#include <set>

#include "hyplab/group.hpp"
#include "hyplab/hyperbolic.hpp"
#include "hyplab/rng.hpp"

using namespace hyplab;

namespace {

Word w(const char* s) { return parse_word(s); }

Word random_word(Rng& rng, int genus, std::size_t len) {
  Word out;
  for (std::size_t i = 0; i < len; ++i) out.push_back(Letter::from_code(static_cast<std::uint8_t>(rng.below(static_cast<std::uint64_t>(4 * genus)))));
  return out;
}

const FuchsianModel& geometry() {
  static const FuchsianModel m = build_geometry(2);
  return m;
}

}  // namespace

TEST_CASE("free reduction") {
  CHECK(free_reduce(w("a1 A1")).empty());
  CHECK(free_reduce(w("a1 b1 B1 a1")) == w("a1 a1"));
  const Word r = w("a1 b2 A2 b1");
  CHECK(free_reduce(r) == r);
  CHECK(is_freely_reduced(r));
  CHECK_FALSE(is_freely_reduced(w("a1 b1 B1")));
}

TEST_CASE("cyclic reduction") {
  CHECK(cyclic_reduce(w("a1 b1 A1")) == w("b1"));
  CHECK(cyclic_reduce(w("a1 b1")) == w("a1 b1"));
  const Word u = w("B1 a1 a1 b1");
  const Word c = cyclic_reduce(u);
  CHECK(c == w("a1 a1"));
  // Conjugate words have the same trace.
  const auto& m = geometry();
  CHECK(std::abs(evaluate(m, u).trace()) == doctest::Approx(std::abs(evaluate(m, c).trace())).epsilon(1e-10));
}

TEST_CASE("letters and inverses") {
  const Letter a(0, false);
  CHECK(a.inverse().inverted());
  CHECK(a.inverse().inverse() == a);
  CHECK(inverse(w("a1 b1 A2")) == w("a2 B1 A1"));
  CHECK(multiply(w("a1 b1"), w("B1 a2")) == w("a1 a2"));
  CHECK(power(w("a1 b1"), 3) == w("a1 b1 a1 b1 a1 b1"));
  CHECK(power(w("a1 b1"), -1) == w("B1 A1"));
}

TEST_CASE("parse and print round trip") {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const Word u = random_word(rng, 3, rng.below(12));
    CHECK(parse_word(to_string(u)) == u);
  }
  CHECK(to_string(Word{}) == "1");
  CHECK_THROWS(parse_word("c1"));
  CHECK_THROWS(parse_word("a0"));
  CHECK_THROWS(parse_word("a3", Presentation(2)));
}

TEST_CASE("presentation") {
  const Presentation p(2);
  CHECK(p.relator() == w("a1 b1 A1 B1 a2 b2 A2 B2"));
  CHECK(p.relator_length() == 8);
  for (std::uint8_t code = 0; code < 8; ++code) CHECK(p.rotations_starting_with(Letter::from_code(code)).size() == 2);
  CHECK(presentation_from_json(to_json(p)) == p);
  CHECK_THROWS(Presentation(1));
}

TEST_CASE("Dehn reduction of relator conjugates") {
  const Presentation p(2);
  const auto& m = geometry();
  CHECK(dehn_reduce(p.relator(), p).empty());
  const Word r = p.relator();
  for (std::size_t k = 0; k < r.size(); ++k) {
    Word rot(r.begin() + static_cast<long>(k), r.end());
    rot.insert(rot.end(), r.begin(), r.begin() + static_cast<long>(k));
    CHECK(dehn_reduce(rot, p).empty());
    CHECK(dehn_reduce(inverse(rot), p).empty());
    CHECK(is_identity(evaluate(m, rot), 1e-9));
  }
}

TEST_CASE("short words without half-relators are unchanged") {
  const Presentation p(2);
  for (const char* s : {"a1 a1 b2", "a1 b1 A1", "a2 a2 a2 a2 a2 a2 a2", "a1 b2 a1 b2"}) CHECK(dehn_reduce(w(s), p) == w(s));
}

TEST_CASE("Dehn reduction preserves the element") {
  const Presentation p(2);
  const auto& m = geometry();
  Rng rng(11);
  for (int i = 0; i < 300; ++i) {
    const Word u = random_word(rng, 2, 1 + rng.below(14));
    const Word d = dehn_reduce(u, p);
    CHECK(is_freely_reduced(d));
    CHECK(d.size() <= u.size());
    CHECK(dehn_reduce(d, p) == d);
    // Cancelling subwords cost about |entries|^2 eps of relative accuracy in the product.
    CHECK(same_isometry(evaluate(m, u), evaluate(m, d), 1e-5));
    CHECK(is_trivial(multiply(u, inverse(u)), p));
  }
}

TEST_CASE("inserting a relator does not change the element") {
  const Presentation p(2);
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const Word u = random_word(rng, 2, rng.below(8));
    const Word v = random_word(rng, 2, rng.below(8));
    Word inserted = u;
    inserted.insert(inserted.end(), p.relator().begin(), p.relator().end());
    inserted.insert(inserted.end(), v.begin(), v.end());
    Word plain = u;
    plain.insert(plain.end(), v.begin(), v.end());
    CHECK(equal_in_group(inserted, plain, p));
    CHECK(canonical_form(inserted, p) == canonical_form(plain, p));
  }
}

TEST_CASE("half-relator swap gives the same canonical form") {
  const Presentation p(2);
  // a1 b1 A1 B1 = (a2 b2 A2 B2)^-1.
  const Word left = w("a1 b1 A1 B1");
  const Word right = w("b2 a2 B2 A2");
  CHECK(equal_in_group(left, right, p));
  CHECK(canonical_form(left, p) == canonical_form(right, p));
  CHECK_FALSE(shortlex_less(canonical_form(left, p), canonical_form(left, p)));
}

TEST_CASE("shortlex order") {
  CHECK(shortlex_less(w("b2"), w("a1 a1")));
  CHECK(shortlex_less(w("a1"), w("A1")));
  CHECK(shortlex_less(w("A1"), w("b1")));
  CHECK_FALSE(shortlex_less(w("a1 b1"), w("a1 b1")));
}

TEST_CASE("primitive decomposition") {
  auto d = primitive_decompose(w("a1 b1 a1 b1"));
  CHECK(d.root == w("a1 b1"));
  CHECK(d.power == 2);
  d = primitive_decompose(w("a1 b1"));
  CHECK(d.power == 1);
  d = primitive_decompose(w("a1 b1 a1 b1 a1 b1"));
  CHECK(d.root == w("a1 b1"));
  CHECK(d.power == 3);
  CHECK_THROWS(primitive_decompose(Word{}));
  CHECK_THROWS(primitive_decompose(w("a1 b1 A1")));
}

TEST_CASE("powers decompose back to their root") {
  Rng rng(17);
  for (int i = 0; i < 100; ++i) {
    Word root = cyclic_reduce(free_reduce(random_word(rng, 2, 1 + rng.below(6))));
    if (root.empty()) continue;
    const auto base = primitive_decompose(root);
    const int k = 1 + static_cast<int>(rng.below(4));
    const auto d = primitive_decompose(power(root, k));
    CHECK(d.power == k * base.power);
    CHECK(d.root == base.root);
  }
}

TEST_CASE("distinct short words name distinct canonical forms") {
  const Presentation p(2);
  const auto& m = geometry();
  // Every freely reduced word of length <= 3 is Dehn-reduced, and no two are equal in the group.
  std::set<Word> forms;
  std::size_t count = 0;
  std::vector<Word> layer{Word{}};
  for (int len = 0; len <= 3; ++len) {
    std::vector<Word> next;
    for (const Word& u : layer) {
      forms.insert(canonical_form(u, p));
      ++count;
      for (std::uint8_t c = 0; c < 8; ++c) {
        const Letter l = Letter::from_code(c);
        if (!u.empty() && u.back() == l.inverse()) continue;
        Word v = u;
        v.push_back(l);
        next.push_back(v);
      }
    }
    layer = std::move(next);
  }
  CHECK(forms.size() == count);
  CHECK(count == 1 + 8 + 56 + 392);
  CHECK_FALSE(is_identity(evaluate(m, w("a1 b1 A1")), 1e-6));
}
