#pragma once
// Exact rational arithmetic and Farey-sequence enumeration.
// Resonance bookkeeping is number-theoretic, so these stay in integers.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace qamlab {

struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  Rational() = default;
  Rational(std::int64_t n, std::int64_t d) : num(n), den(d) {
    if (den == 0) throw std::invalid_argument("Rational: zero denominator");
    if (den < 0) { num = -num; den = -den; }
    const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) { num /= g; den /= g; }
  }

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }

  // representative in [0, 1)
  Rational mod1() const {
    std::int64_t r = num % den;
    if (r < 0) r += den;
    return Rational(r, den);
  }

  friend Rational operator+(const Rational& a, const Rational& b) {
    return Rational(a.num * b.den + b.num * a.den, a.den * b.den);
  }
  friend Rational operator-(const Rational& a, const Rational& b) {
    return Rational(a.num * b.den - b.num * a.den, a.den * b.den);
  }
  friend bool operator==(const Rational& a, const Rational& b) {
    return a.num == b.num && a.den == b.den;
  }
  friend bool operator<(const Rational& a, const Rational& b) {
    return a.num * b.den < b.num * a.den;
  }
};

// Fractions p/q with q <= q_max in [x_lo, x_hi], each exactly once, ascending.
// Stern-Brocot descent locates the first term, then the Farey successor rule
// (next = (kc - a)/(kd - b), k = floor((q_max + b)/d)) walks the sequence.
inline std::vector<Rational> farey_in_window(double x_lo, double x_hi, int q_max) {
  if (q_max < 1 || !(x_lo <= x_hi)) return {};

  // bracket x_lo between Farey neighbours a/b <= x_lo < c/d of order q_max,
  // starting from consecutive integers (determinant bc - ad = 1)
  std::int64_t a = static_cast<std::int64_t>(std::floor(x_lo)), b = 1;
  std::int64_t c = a + 1, d = 1;
  while (b + d <= q_max) {
    const std::int64_t mn = a + c, md = b + d;
    if (static_cast<double>(mn) <= x_lo * static_cast<double>(md)) { a = mn; b = md; }
    else { c = mn; d = md; }
  }

  std::vector<Rational> out;
  while (static_cast<double>(a) < x_lo * static_cast<double>(b)) {
    const std::int64_t k = (q_max + b) / d;
    const std::int64_t a2 = k * c - a, b2 = k * d - b;
    a = c; b = d; c = a2; d = b2;
  }
  while (static_cast<double>(a) <= x_hi * static_cast<double>(b)) {
    out.emplace_back(a, b);
    const std::int64_t k = (q_max + b) / d;
    const std::int64_t a2 = k * c - a, b2 = k * d - b;
    a = c; b = d; c = a2; d = b2;
  }
  return out;
}

}  // namespace qamlab
