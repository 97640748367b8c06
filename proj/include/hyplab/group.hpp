#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace hyplab {

// Generator k (0-based) or its inverse. Generators are ordered a1, b1, a2, b2, ...
// so generator 2(j-1) is a_j and 2(j-1)+1 is b_j.
class Letter {
 public:
  constexpr Letter() = default;
  constexpr Letter(int generator, bool inverted)
      : code_(static_cast<std::uint8_t>(2 * generator + (inverted ? 1 : 0))) {}

  static constexpr Letter from_code(std::uint8_t code) {
    Letter l;
    l.code_ = code;
    return l;
  }

  constexpr int generator() const { return code_ >> 1; }
  constexpr bool inverted() const { return (code_ & 1) != 0; }
  constexpr Letter inverse() const { return from_code(static_cast<std::uint8_t>(code_ ^ 1)); }
  constexpr std::uint8_t code() const { return code_; }

  // ShortLex letter order: a1 < A1 < b1 < B1 < a2 < ...
  friend constexpr auto operator<=>(Letter, Letter) = default;

 private:
  std::uint8_t code_ = 0;
};

using Word = std::vector<Letter>;

// Genus-g surface group <a1,b1,...,ag,bg | [a1,b1]...[ag,bg]>.
class Presentation {
 public:
  explicit Presentation(int genus);

  int genus() const { return genus_; }
  int generator_count() const { return 2 * genus_; }
  int relator_length() const { return 4 * genus_; }
  const Word& relator() const { return relator_; }

  // Cyclic rotations of r and r^-1 that begin with the given letter.
  // Every letter occurs exactly once in r and once in r^-1, so there are two.
  const std::vector<Word>& rotations_starting_with(Letter l) const { return rotations_[l.code()]; }

  bool contains(Letter l) const { return l.generator() < generator_count(); }

  friend bool operator==(const Presentation& a, const Presentation& b) { return a.genus_ == b.genus_; }

 private:
  int genus_;
  Word relator_;
  std::vector<std::vector<Word>> rotations_;
};

nlohmann::json to_json(const Presentation& p);
Presentation presentation_from_json(const nlohmann::json& j);

Word inverse(const Word& w);
Word free_reduce(const Word& w);
Word cyclic_reduce(const Word& w);
// Concatenation followed by free reduction.
Word multiply(const Word& u, const Word& v);
Word power(const Word& w, int k);
bool is_freely_reduced(const Word& w);
bool is_cyclically_reduced(const Word& w);

// Dehn's algorithm. The result is freely reduced and contains no subword that is
// more than half of a cyclic conjugate of r^{+-1}; it is empty iff w is trivial.
Word dehn_reduce(const Word& w, const Presentation& p);
bool is_trivial(const Word& w, const Presentation& p);
bool equal_in_group(const Word& u, const Word& v, const Presentation& p);

bool shortlex_less(const Word& u, const Word& v);

// ShortLex-least word among the Dehn-reduced forms reachable by swapping exact
// half-relators. The search is capped at `budget` distinct words, so for very long
// inputs the result is a deterministic representative but not a proven normal form.
Word canonical_form(const Word& w, const Presentation& p, std::size_t budget = 512);

struct PrimitiveDecomposition {
  Word root;
  int power = 1;
};

// Writes a cyclically reduced word as root^power with power maximal.
PrimitiveDecomposition primitive_decompose(const Word& w);

// "a1 B1 a2" style. Uppercase means inverse, the empty word prints as "1".
std::string to_string(const Word& w);
Word parse_word(std::string_view text);
Word parse_word(std::string_view text, const Presentation& p);

}  // namespace hyplab
