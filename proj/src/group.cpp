#include "hyplab/group.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <stdexcept>

namespace hyplab {

Presentation::Presentation(int genus) : genus_(genus) {
  if (genus < 2) throw std::invalid_argument("Presentation: genus must be at least 2");
  if (genus > 60) throw std::invalid_argument("Presentation: genus too large");
  for (int j = 0; j < genus; ++j) {
    const int a = 2 * j, b = 2 * j + 1;
    relator_.push_back(Letter(a, false));
    relator_.push_back(Letter(b, false));
    relator_.push_back(Letter(a, true));
    relator_.push_back(Letter(b, true));
  }
  rotations_.assign(static_cast<std::size_t>(2 * generator_count()), {});
  const Word rinv = inverse(relator_);
  for (const Word* base : {static_cast<const Word*>(&relator_), &rinv}) {
    const std::size_t n = base->size();
    for (std::size_t s = 0; s < n; ++s) {
      Word rot(n);
      for (std::size_t k = 0; k < n; ++k) rot[k] = (*base)[(s + k) % n];
      rotations_[rot[0].code()].push_back(std::move(rot));
    }
  }
}

nlohmann::json to_json(const Presentation& p) { return nlohmann::json{{"genus", p.genus()}}; }

Presentation presentation_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("genus") || !j["genus"].is_number_integer())
    throw std::invalid_argument("presentation json must be {\"genus\": g}");
  return Presentation(j["genus"].get<int>());
}

Word inverse(const Word& w) {
  Word r(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) r[w.size() - 1 - i] = w[i].inverse();
  return r;
}

Word free_reduce(const Word& w) {
  Word out;
  out.reserve(w.size());
  for (Letter l : w) {
    if (!out.empty() && out.back() == l.inverse())
      out.pop_back();
    else
      out.push_back(l);
  }
  return out;
}

Word cyclic_reduce(const Word& w) {
  Word r = free_reduce(w);
  std::size_t lo = 0, hi = r.size();
  while (hi - lo >= 2 && r[lo] == r[hi - 1].inverse()) {
    ++lo;
    --hi;
  }
  return Word(r.begin() + static_cast<std::ptrdiff_t>(lo), r.begin() + static_cast<std::ptrdiff_t>(hi));
}

Word multiply(const Word& u, const Word& v) {
  Word w = u;
  w.insert(w.end(), v.begin(), v.end());
  return free_reduce(w);
}

Word power(const Word& w, int k) {
  const Word base = k >= 0 ? w : inverse(w);
  Word out;
  for (int i = 0; i < std::abs(k); ++i) out.insert(out.end(), base.begin(), base.end());
  return free_reduce(out);
}

bool is_freely_reduced(const Word& w) {
  for (std::size_t i = 1; i < w.size(); ++i)
    if (w[i] == w[i - 1].inverse()) return false;
  return true;
}

bool is_cyclically_reduced(const Word& w) {
  return is_freely_reduced(w) && (w.size() < 2 || w.front() != w.back().inverse());
}

Word dehn_reduce(const Word& w, const Presentation& p) {
  for (Letter l : w)
    if (!p.contains(l)) throw std::invalid_argument("dehn_reduce: letter outside the presentation");
  const std::size_t half = static_cast<std::size_t>(2 * p.genus());
  const std::size_t piece = half + 1;

  // Input is consumed from the back; replacements are pushed back onto it so they
  // are processed next. The output stack never holds a piece longer than half a relator.
  Word pending(w.rbegin(), w.rend());
  Word out;
  out.reserve(w.size());
  while (!pending.empty()) {
    const Letter l = pending.back();
    pending.pop_back();
    if (!out.empty() && out.back() == l.inverse()) {
      out.pop_back();
      continue;
    }
    out.push_back(l);
    if (out.size() < piece) continue;
    const std::size_t start = out.size() - piece;
    for (const Word& rot : p.rotations_starting_with(out[start])) {
      if (!std::equal(rot.begin(), rot.begin() + static_cast<std::ptrdiff_t>(piece), out.begin() + static_cast<std::ptrdiff_t>(start)))
        continue;
      out.resize(start);
      // replacement = inverse of rot[piece..end); push so its first letter is processed first
      for (std::size_t k = piece; k < rot.size(); ++k) pending.push_back(rot[k].inverse());
      break;
    }
  }
  return out;
}

bool is_trivial(const Word& w, const Presentation& p) { return dehn_reduce(w, p).empty(); }

bool equal_in_group(const Word& u, const Word& v, const Presentation& p) {
  Word w = u;
  const Word vi = inverse(v);
  w.insert(w.end(), vi.begin(), vi.end());
  return is_trivial(w, p);
}

bool shortlex_less(const Word& u, const Word& v) {
  if (u.size() != v.size()) return u.size() < v.size();
  return std::lexicographical_compare(u.begin(), u.end(), v.begin(), v.end());
}

namespace {
struct ShortLexCmp {
  bool operator()(const Word& u, const Word& v) const { return shortlex_less(u, v); }
};
}  // namespace

Word canonical_form(const Word& w, const Presentation& p, std::size_t budget) {
  const std::size_t half = static_cast<std::size_t>(2 * p.genus());
  std::set<Word, ShortLexCmp> seen;
  std::vector<Word> queue{dehn_reduce(w, p)};
  seen.insert(queue.front());
  for (std::size_t qi = 0; qi < queue.size() && seen.size() < budget; ++qi) {
    const Word cur = queue[qi];
    if (cur.size() < half) continue;
    for (std::size_t i = 0; i + half <= cur.size(); ++i) {
      for (const Word& rot : p.rotations_starting_with(cur[i])) {
        if (!std::equal(rot.begin(), rot.begin() + static_cast<std::ptrdiff_t>(half), cur.begin() + static_cast<std::ptrdiff_t>(i)))
          continue;
        Word next(cur.begin(), cur.begin() + static_cast<std::ptrdiff_t>(i));
        for (std::size_t k = rot.size(); k-- > half;) next.push_back(rot[k].inverse());
        next.insert(next.end(), cur.begin() + static_cast<std::ptrdiff_t>(i + half), cur.end());
        next = dehn_reduce(next, p);
        if (seen.insert(next).second) {
          queue.push_back(std::move(next));
          if (seen.size() >= budget) break;
        }
      }
    }
  }
  return *seen.begin();
}

PrimitiveDecomposition primitive_decompose(const Word& w) {
  if (w.empty()) throw std::invalid_argument("primitive_decompose: empty word");
  if (!is_cyclically_reduced(w)) throw std::invalid_argument("primitive_decompose: word is not cyclically reduced");
  const std::size_t n = w.size();
  std::vector<std::size_t> fail(n, 0);
  for (std::size_t i = 1, k = 0; i < n; ++i) {
    while (k > 0 && w[i] != w[k]) k = fail[k - 1];
    if (w[i] == w[k]) ++k;
    fail[i] = k;
  }
  std::size_t period = n - fail[n - 1];
  if (n % period != 0) period = n;
  return {Word(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(period)), static_cast<int>(n / period)};
}

std::string to_string(const Word& w) {
  if (w.empty()) return "1";
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i) s += ' ';
    const int g = w[i].generator();
    const bool is_a = (g % 2) == 0;
    s += w[i].inverted() ? (is_a ? 'A' : 'B') : (is_a ? 'a' : 'b');
    s += std::to_string(g / 2 + 1);
  }
  return s;
}

Word parse_word(std::string_view text) {
  Word w;
  std::size_t i = 0;
  auto skip = [&] {
    while (i < text.size() && (std::isspace(static_cast<unsigned char>(text[i])) || text[i] == '*' || text[i] == '.')) ++i;
  };
  skip();
  if (i < text.size() && text.substr(i) == "1") return w;
  while (i < text.size()) {
    const char c = text[i];
    if (c != 'a' && c != 'A' && c != 'b' && c != 'B') throw std::invalid_argument("parse_word: unexpected character '" + std::string(1, c) + "'");
    ++i;
    std::size_t j = i;
    while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
    if (j == i) throw std::invalid_argument("parse_word: letter without index");
    const int idx = std::stoi(std::string(text.substr(i, j - i)));
    if (idx < 1) throw std::invalid_argument("parse_word: generator index starts at 1");
    const int gen = 2 * (idx - 1) + ((c == 'b' || c == 'B') ? 1 : 0);
    w.push_back(Letter(gen, c == 'A' || c == 'B'));
    i = j;
    skip();
  }
  return w;
}

Word parse_word(std::string_view text, const Presentation& p) {
  Word w = parse_word(text);
  for (Letter l : w)
    if (!p.contains(l)) throw std::invalid_argument("parse_word: generator index exceeds genus " + std::to_string(p.genus()));
  return w;
}

}  // namespace hyplab
