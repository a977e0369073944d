#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "cascade/error.hpp"
#include "cascade/hurwitz.hpp"
#include "cascade/parallel.hpp"
#include "cascade/rng.hpp"

namespace cascade {

struct PowerLawOptions {
  unsigned bootstrap_replicates = 100;  // 0 skips the goodness-of-fit test
  std::uint64_t seed = 0x5eed;
  std::optional<std::int64_t> fixed_xmin;  // skip the KS scan
  // Candidate cutoffs must leave at least max(min_tail, min_tail_fraction * n)
  // samples in the tail.
  std::uint64_t min_tail = 50;
  double min_tail_fraction = 0.02;
};

struct PowerLawFit {
  double alpha = 0;
  std::int64_t xmin = 0;
  double ks_distance = 0;
  double gof_p = NAN;  // NaN when no bootstrap was run
  std::uint64_t n_tail = 0;
  std::uint64_t n = 0;
  unsigned replicates = 0;
};

namespace detail {

// Sample as sorted distinct values with multiplicities.
struct ValueCounts {
  std::vector<std::int64_t> values;
  std::vector<std::uint64_t> counts;
  std::uint64_t n = 0;
};

inline ValueCounts tabulate(std::span<const std::int64_t> samples) {
  std::map<std::int64_t, std::uint64_t> m;
  for (auto v : samples) {
    if (v < 1) throw StatsError("power-law samples must be positive integers");
    ++m[v];
  }
  ValueCounts vc;
  vc.n = samples.size();
  for (auto [v, c] : m) {
    vc.values.push_back(v);
    vc.counts.push_back(c);
  }
  return vc;
}

// Discrete MLE of alpha for a tail above xmin: solves
// E_alpha[ln(X / xmin)] = mean(ln(x / xmin)); the left side is strictly
// decreasing in alpha.
inline double mle_alpha(double xmin, double mean_log_ratio) {
  auto score = [&](double alpha) {
    auto z = hurwitz_zeta(alpha, xmin, xmin);
    return -z.derivative / z.value - mean_log_ratio;
  };
  double lo = 1.0 + 1e-9;
  if (score(lo) <= 0) return lo;
  double hi = 2.0;
  while (score(hi) > 0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e4) return hi;
  }
  std::uintmax_t iters = 200;
  auto [a, b] = boost::math::tools::toms748_solve(score, lo, hi, boost::math::tools::eps_tolerance<double>(50), iters);
  return 0.5 * (a + b);
}

// Supremum over integers x >= xmin of |F_emp(x) - F_fit(x)| for the tail
// starting at index `first`. Both CDFs are step functions, so each gap
// between data values is checked at its two ends.
inline double ks_distance(const ValueCounts& vc, std::size_t first, std::uint64_t n_tail, double alpha) {
  // Zeta values are scaled by xmin^alpha throughout.
  const double xmin = static_cast<double>(vc.values[first]);
  const double z0 = hurwitz_zeta(alpha, xmin, xmin).value;
  const double inv_n = 1.0 / static_cast<double>(n_tail);
  double z = z0;  // zeta(alpha, current x)
  double worst = 0;
  std::uint64_t cum = 0;
  for (std::size_t j = first; j < vc.values.size(); ++j) {
    const double v = static_cast<double>(vc.values[j]);
    cum += vc.counts[j];
    const double emp = static_cast<double>(cum) * inv_n;
    z -= std::pow(v / xmin, -alpha);  // now zeta(alpha, v + 1)
    worst = std::max(worst, std::abs(emp - (1.0 - z / z0)));
    if (j + 1 == vc.values.size()) break;
    const std::int64_t next = vc.values[j + 1];
    const std::int64_t gap = next - vc.values[j] - 1;  // integers strictly between
    if (gap == 0) continue;
    if (gap <= 32) {
      for (std::int64_t k = vc.values[j] + 1; k < next; ++k) z -= std::pow(static_cast<double>(k) / xmin, -alpha);
    } else {
      z = hurwitz_zeta(alpha, static_cast<double>(next), xmin).value;
    }
    worst = std::max(worst, std::abs(emp - (1.0 - z / z0)));
  }
  return worst;
}

struct TailFit {
  double alpha;
  double ks;
  std::size_t first;
  std::uint64_t n_tail;
};

inline TailFit fit_tail(const ValueCounts& vc, std::size_t first, const std::vector<double>& suffix_log,
                        const std::vector<std::uint64_t>& suffix_n) {
  const std::uint64_t n_tail = suffix_n[first];
  const double xmin = static_cast<double>(vc.values[first]);
  const double mean_log = suffix_log[first] / static_cast<double>(n_tail);
  const double alpha = mle_alpha(xmin, mean_log - std::log(xmin));
  return {alpha, ks_distance(vc, first, n_tail, alpha), first, n_tail};
}

// Scans distinct values as candidate cutoffs and keeps the smallest KS
// distance. A candidate needs two distinct values at or above it and, past
// the smallest value, at least min_tail samples.
inline TailFit scan_xmin(const ValueCounts& vc, std::optional<std::int64_t> fixed_xmin, std::uint64_t min_tail) {
  const std::size_t m = vc.values.size();
  std::vector<double> suffix_log(m + 1, 0.0);
  std::vector<std::uint64_t> suffix_n(m + 1, 0);
  for (std::size_t j = m; j-- > 0;) {
    suffix_log[j] = suffix_log[j + 1] + static_cast<double>(vc.counts[j]) * std::log(static_cast<double>(vc.values[j]));
    suffix_n[j] = suffix_n[j + 1] + vc.counts[j];
  }
  if (fixed_xmin) {
    auto it = std::lower_bound(vc.values.begin(), vc.values.end(), *fixed_xmin);
    auto first = static_cast<std::size_t>(it - vc.values.begin());
    if (first + 2 > m || suffix_n[first] < 2) throw StatsError("insufficient tail above xmin");
    return fit_tail(vc, first, suffix_log, suffix_n);
  }
  if (m < 2) throw StatsError("degenerate sample: fewer than 2 distinct values");
  TailFit best = fit_tail(vc, 0, suffix_log, suffix_n);
  for (std::size_t j = 1; j + 2 <= m && suffix_n[j] >= min_tail; ++j) {
    TailFit f = fit_tail(vc, j, suffix_log, suffix_n);
    if (f.ks < best.ks) best = f;
  }
  return best;
}

// Inverse-CDF sampler for P(X = x) = x^-alpha / zeta(alpha, xmin), x >= xmin.
// P(X >= x) is tabulated for the first kTable integers; rarer draws fall back
// to a continuous guess corrected against exact zeta values.
class DiscretePowerLawSampler {
 public:
  DiscretePowerLawSampler(double alpha, std::int64_t xmin) : alpha_(alpha), xmin_(xmin) {
    const double c = static_cast<double>(xmin);
    z0_ = hurwitz_zeta(alpha, c, c).value;
    ccdf_.reserve(kTable + 1);
    double z = z0_;
    for (std::int64_t i = 0; i <= kTable; ++i) {
      if (i % 1024 == 0) z = hurwitz_zeta(alpha, static_cast<double>(xmin + i), c).value;
      ccdf_.push_back(z / z0_);
      z -= std::pow(static_cast<double>(xmin + i) / c, -alpha);
    }
  }

  std::int64_t operator()(Rng& rng) const {
    const double u = 1.0 - uniform01(rng);  // (0, 1]
    if (u > ccdf_.back()) {
      // Largest i with ccdf_[i] >= u; ccdf_ is decreasing.
      auto it = std::partition_point(ccdf_.begin(), ccdf_.end(), [u](double c) { return c >= u; });
      return xmin_ + static_cast<std::int64_t>(it - ccdf_.begin()) - 1;
    }
    return tail_draw(u);
  }

 private:
  static constexpr std::int64_t kTable = 1 << 16;

  double ccdf(std::int64_t x) const {
    return hurwitz_zeta(alpha_, static_cast<double>(x), static_cast<double>(xmin_)).value / z0_;
  }

  std::int64_t tail_draw(double u) const {
    double guess = (static_cast<double>(xmin_) - 0.5) * std::pow(u, -1.0 / (alpha_ - 1.0)) + 0.5;
    if (!(guess < 9e15)) return std::numeric_limits<std::int64_t>::max() / 2;
    auto x = std::max<std::int64_t>(xmin_ + kTable, static_cast<std::int64_t>(guess));
    while (x > xmin_ + kTable && ccdf(x) < u) --x;
    while (ccdf(x + 1) >= u) ++x;
    return x;
  }

  double alpha_;
  std::int64_t xmin_;
  double z0_;
  std::vector<double> ccdf_;
};

}  // namespace detail

// Discrete power-law fit: MLE exponent per candidate cutoff, cutoff chosen
// by minimum KS distance, goodness of fit by semi-parametric bootstrap.
inline PowerLawFit fit_power_law(std::span<const std::int64_t> samples, const PowerLawOptions& options = {}) {
  auto vc = detail::tabulate(samples);
  if (vc.values.size() < 2) throw StatsError("degenerate sample: all values are equal");
  auto min_tail_for = [&](std::uint64_t n) {
    return std::max<std::uint64_t>(
        options.min_tail, static_cast<std::uint64_t>(std::ceil(options.min_tail_fraction * static_cast<double>(n))));
  };
  auto best = detail::scan_xmin(vc, options.fixed_xmin, min_tail_for(vc.n));
  if (best.n_tail < 2) throw StatsError("insufficient tail above xmin");

  PowerLawFit fit;
  fit.alpha = best.alpha;
  fit.xmin = vc.values[best.first];
  fit.ks_distance = best.ks;
  fit.n_tail = best.n_tail;
  fit.n = vc.n;
  fit.replicates = options.bootstrap_replicates;
  if (options.bootstrap_replicates == 0) return fit;

  // Body values (below xmin) are resampled from the data; the tail is drawn
  // from the fitted law. Each replicate repeats the full xmin scan.
  std::vector<std::int64_t> body;
  for (auto v : samples)
    if (v < fit.xmin) body.push_back(v);
  std::sort(body.begin(), body.end());
  const double p_tail = static_cast<double>(fit.n_tail) / static_cast<double>(fit.n);
  const detail::DiscretePowerLawSampler sampler(fit.alpha, fit.xmin);

  std::vector<char> exceeds(options.bootstrap_replicates, 0);
  parallel_for(options.bootstrap_replicates, [&](std::size_t r) {
    Rng rng(derive_seed(options.seed, r));
    std::vector<std::int64_t> synthetic(fit.n);
    for (auto& x : synthetic) {
      if (body.empty() || uniform01(rng) < p_tail)
        x = sampler(rng);
      else
        x = body[uniform_below(rng, body.size())];
    }
    auto svc = detail::tabulate(synthetic);
    if (svc.values.size() < 2) return;  // unfittable replicate counts as a better fit
    try {
      auto sfit = detail::scan_xmin(svc, options.fixed_xmin ? std::optional<std::int64_t>(fit.xmin) : std::nullopt,
                                    min_tail_for(svc.n));
      exceeds[r] = sfit.ks >= fit.ks_distance;
    } catch (const StatsError&) {
    }
  });
  std::size_t hits = std::count(exceeds.begin(), exceeds.end(), 1);
  fit.gof_p = static_cast<double>(hits) / static_cast<double>(options.bootstrap_replicates);
  return fit;
}

}  // namespace cascade
