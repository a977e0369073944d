#pragma once

#include <algorithm>
#include <array>
#include <cmath>

namespace cascade {

struct ZetaValue {
  double value = 0;       // zeta(s, q)
  double derivative = 0;  // d zeta(s, q) / ds
};

// Scaled Hurwitz zeta sum_{k>=0} ((q + k) / c)^-s for s > 1, q > 0, c > 0,
// and its derivative in s. c = 1 gives the plain Hurwitz zeta; choosing c
// near q keeps large exponents from underflowing. Euler-Maclaurin: direct
// sum until q + N >= max(12, 3s), integral remainder, then eight Bernoulli
// terms.
inline ZetaValue hurwitz_zeta(double s, double q, double c = 1.0) {
  // B_{2j} / (2j)!
  static constexpr std::array<double, 8> kCoef{
      1.0 / 12.0,
      -1.0 / 720.0,
      1.0 / 30240.0,
      -1.0 / 1209600.0,
      1.0 / 47900160.0,
      -691.0 / 1307674368000.0,
      1.0 / 74724249600.0,
      -3617.0 / 10670622842880000.0,
  };
  ZetaValue z;
  double a = q;
  const double start = std::max(12.0, 3.0 * s);
  while (a < start) {
    double t = std::pow(a / c, -s);
    z.value += t;
    z.derivative -= std::log(a / c) * t;
    a += 1.0;
  }
  const double log_a = std::log(a / c);
  const double a_s = std::pow(a / c, -s);  // (a/c)^-s
  const double sm1 = s - 1.0;
  z.value += a * a_s / sm1 + 0.5 * a_s;
  z.derivative += a * a_s * (-log_a / sm1 - 1.0 / (sm1 * sm1)) - 0.5 * log_a * a_s;

  // Term j: kCoef[j] * P_j(s) * (a/c)^-s * a^(-2j-1), P_j(s) = s (s+1) ... (s+2j).
  double poly = s;              // P_0
  double dpoly_over_poly = 1.0 / s;
  double power = a_s / a;
  const double inv_a2 = 1.0 / (a * a);
  for (std::size_t j = 0; j < kCoef.size(); ++j) {
    double term = kCoef[j] * poly * power;
    z.value += term;
    z.derivative += term * (dpoly_over_poly - log_a);
    double k = 2.0 * static_cast<double>(j);
    poly *= (s + k + 1.0) * (s + k + 2.0);
    dpoly_over_poly += 1.0 / (s + k + 1.0) + 1.0 / (s + k + 2.0);
    power *= inv_a2;
  }
  return z;
}

}  // namespace cascade
