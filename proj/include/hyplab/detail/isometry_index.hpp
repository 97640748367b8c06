#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "hyplab/hyperbolic.hpp"

namespace hyplab::detail {

// Orbit point g x0 summarized as (distance from x0, direction seen from x0). Both are
// computed from the SU(1,1) form of g, so their absolute error stays near machine epsilon
// even when the matrix entries are huge.
struct OrbitKey {
  double dist = 0;
  double angle = 0;
};

inline OrbitKey orbit_key(const Mat2& m) {
  const double s = m.a * m.a + m.b * m.b + m.c * m.c + m.d * m.d;
  OrbitKey k;
  k.dist = 2.0 * std::asinh(std::sqrt(std::max(0.0, (s - 2.0) / 4.0)));
  // alpha = ((a+d) + i(b-c))/2, beta = ((a-d) - i(b+c))/2, direction = arg(alpha * beta)
  const double ar = 0.5 * (m.a + m.d), ai = 0.5 * (m.b - m.c);
  const double br = 0.5 * (m.a - m.d), bi = -0.5 * (m.b + m.c);
  k.angle = std::atan2(ar * bi + ai * br, ar * br - ai * bi);
  return k;
}

// Hash index over orbit keys. Candidates returned by for_each_candidate always include
// every stored element equal to the query up to an absolute key error of 1e-6; long
// products with heavy cancellation do reach 1e-7. Callers confirm matches.
class IsometryIndex {
 public:
  explicit IsometryIndex(std::size_t expected = 1024) { rehash(expected * 2 + 16); }

  void insert(const Mat2& m, std::uint32_t id) {
    if (2 * (count_ + 1) > slots_.size()) rehash(slots_.size() * 2);
    place(pack(bin(orbit_key(m))), id);
    ++count_;
  }

  template <class F>
  void for_each_candidate(const Mat2& m, F&& f) const {
    const OrbitKey k = orbit_key(m);
    const Bin b = bin(k);
    const int d_lo = b.fd < kMargin ? -1 : 0, d_hi = b.fd > 1 - kMargin ? 1 : 0;
    const int a_lo = b.fa < kMargin ? -1 : 0, a_hi = b.fa > 1 - kMargin ? 1 : 0;
    for (int dd = d_lo; dd <= d_hi; ++dd) {
      for (int da = a_lo; da <= a_hi; ++da) {
        Bin n = b;
        n.kd += dd;
        n.ka = wrap(n.ka + da);
        if (b.near_identity) n.ka = 0;
        if (n.kd < 0) continue;
        probe(pack(n), f);
        if (b.near_identity) break;
      }
    }
  }

  std::size_t size() const { return count_; }

 private:
  static constexpr double kDistQuantum = 1e-5;
  static constexpr double kMargin = 0.1;
  // Angle bins tile the circle exactly so that -pi and pi land in adjacent bins.
  static constexpr std::int64_t kAngleBins = 628'319;

  struct Bin {
    std::int64_t kd = 0, ka = 0;
    double fd = 0.5, fa = 0.5;
    bool near_identity = false;
  };
  struct Slot {
    std::uint64_t key = 0;
    std::uint32_t id = 0;
    bool used = false;
  };

  static std::int64_t wrap(std::int64_t ka) { return ((ka % kAngleBins) + kAngleBins) % kAngleBins; }

  static Bin bin(const OrbitKey& k) {
    Bin b;
    const double qd = k.dist / kDistQuantum;
    b.kd = static_cast<std::int64_t>(std::floor(qd));
    b.fd = qd - std::floor(qd);
    if (k.dist < 1e-3) {
      b.near_identity = true;
      b.kd = 0;
      b.fd = 0.5;
      return b;
    }
    const double qa = (k.angle + 3.141592653589793) / 6.283185307179586 * static_cast<double>(kAngleBins);
    b.ka = wrap(static_cast<std::int64_t>(std::floor(qa)));
    b.fa = qa - std::floor(qa);
    return b;
  }

  static std::uint64_t pack(const Bin& b) {
    return (static_cast<std::uint64_t>(b.kd) << 27) ^ static_cast<std::uint64_t>(b.ka);
  }

  static std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  template <class F>
  void probe(std::uint64_t key, F& f) const {
    const std::size_t mask = slots_.size() - 1;
    for (std::size_t i = mix(key) & mask;; i = (i + 1) & mask) {
      const Slot& s = slots_[i];
      if (!s.used) return;
      if (s.key == key) f(s.id);
    }
  }

  void place(std::uint64_t key, std::uint32_t id) {
    const std::size_t mask = slots_.size() - 1;
    std::size_t i = mix(key) & mask;
    while (slots_[i].used) i = (i + 1) & mask;
    slots_[i] = Slot{key, id, true};
  }

  void rehash(std::size_t want) {
    std::size_t cap = 16;
    while (cap < want) cap *= 2;
    std::vector<Slot> old;
    old.swap(slots_);
    slots_.assign(cap, Slot{});
    for (const Slot& s : old)
      if (s.used) place(s.key, s.id);
  }

  std::vector<Slot> slots_;
  std::size_t count_ = 0;
};

}  // namespace hyplab::detail
