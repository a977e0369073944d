#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cascade/error.hpp"
#include "cascade/event_model.hpp"
#include "cascade/exposure.hpp"
#include "cascade/summary.hpp"

namespace cascade {

// ---------------------------------------------------------------------------
// Tag popularity

struct TagPopularity {
  TagId tag;
  std::uint64_t distinct_adopters = 0;
  std::uint64_t total_usages = 0;
};

// Per-tag counts, indexed by tag handle.
inline std::vector<TagPopularity> tag_popularity(const Dataset& d) {
  std::vector<TagPopularity> out(d.tag_count());
  for (std::uint32_t i = 0; i < out.size(); ++i) out[i].tag = TagId{i};
  for (const auto& e : d.events()) {
    auto& p = out[e.tag.index()];
    ++p.total_usages;
    if (e.is_first_usage) ++p.distinct_adopters;
  }
  return out;
}

// Most popular first; ties by usages, then by handle.
inline std::vector<TagPopularity> rank_frequency(std::vector<TagPopularity> pops) {
  std::sort(pops.begin(), pops.end(), [](const TagPopularity& a, const TagPopularity& b) {
    if (a.distinct_adopters != b.distinct_adopters) return a.distinct_adopters > b.distinct_adopters;
    if (a.total_usages != b.total_usages) return a.total_usages > b.total_usages;
    return a.tag < b.tag;
  });
  return pops;
}

struct HistogramBin {
  std::uint64_t value = 0;
  std::uint64_t tags = 0;
};

// Number of tags per distinct-adopter count, ascending by count.
inline std::vector<HistogramBin> popularity_histogram(std::span<const TagPopularity> pops, bool by_usages = false) {
  std::vector<std::uint64_t> values;
  values.reserve(pops.size());
  for (const auto& p : pops) values.push_back(by_usages ? p.total_usages : p.distinct_adopters);
  std::sort(values.begin(), values.end());
  std::vector<HistogramBin> out;
  for (auto v : values) {
    if (out.empty() || out.back().value != v) out.push_back({v, 0});
    ++out.back().tags;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Adoption curves

struct CurvePoint {
  Timestamp time = 0;  // bucket start
  std::uint64_t new_first_usages = 0;
  std::uint64_t cumulative_first_usages = 0;
  std::uint64_t subsequent_usages = 0;
  double saturation = 0;
};

struct AdoptionCurve {
  TagId tag;
  std::int64_t bucket_ms = 0;
  std::vector<CurvePoint> points;
};

// Bucketed adoption history of x from its first usage to its last usage.
// Empty buckets repeat the cumulative count with zero new adopters.
inline AdoptionCurve adoption_curve(const Dataset& d, TagId x, std::int64_t bucket_ms) {
  if (x.index() >= d.tag_count()) throw UsageError("unknown tag handle " + std::to_string(x.value));
  if (bucket_ms <= 0) throw UsageError("bucket duration must be positive");
  AdoptionCurve curve{x, bucket_ms, {}};
  auto times = d.usage_times(x);
  if (times.empty()) return curve;
  const Timestamp start = times.front();
  const auto n_buckets = static_cast<std::size_t>((times.back() - start) / bucket_ms) + 1;
  curve.points.resize(n_buckets);
  for (const auto& e : d.events()) {
    if (e.tag != x) continue;
    auto& p = curve.points[static_cast<std::size_t>((e.time - start) / bucket_ms)];
    (e.is_first_usage ? p.new_first_usages : p.subsequent_usages)++;
  }
  std::uint64_t cum = 0;
  const auto users = static_cast<double>(d.user_count());
  for (std::size_t b = 0; b < n_buckets; ++b) {
    auto& p = curve.points[b];
    p.time = start + static_cast<Timestamp>(b) * bucket_ms;
    cum += p.new_first_usages;
    p.cumulative_first_usages = cum;
    p.saturation = static_cast<double>(cum) / users;
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Kernel density on [0, 1]

struct DensityCurve {
  double bandwidth = 0;
  std::vector<double> x;
  std::vector<double> density;
};

inline constexpr std::size_t kDensityPoints = 512;

// Silverman's rule of thumb: 0.9 min(sd, IQR / 1.34) n^(-1/5).
inline double silverman_bandwidth(std::span<const double> values) {
  std::vector<double> v(values.begin(), values.end());
  auto s = summarize(v);
  if (s.min == s.max) return 0.0;
  double var = 0;
  for (double x : v) var += (x - s.mean) * (x - s.mean);
  double sd = std::sqrt(var / static_cast<double>(v.size() - 1));
  double iqr = (s.q3 - s.q1) / 1.34;
  double spread = iqr > 0 ? std::min(sd, iqr) : sd;
  return 0.9 * spread * std::pow(static_cast<double>(v.size()), -0.2);
}

// Gaussian KDE on [0, 1] with reflecting boundaries: each sample v
// contributes kernels at every image 2k + v and 2k - v within 10 bandwidths
// of the interval. The images' unit intervals tile the line, so the curve
// carries unit mass on [0, 1]. The bandwidth is floored at two grid steps so
// the sampled curve resolves every kernel.
inline DensityCurve smooth_distribution(std::span<const double> values, std::optional<double> bandwidth = {}) {
  if (values.size() < 2) throw StatsError("density estimate needs at least 2 values");
  for (double v : values)
    if (!(v >= 0.0 && v <= 1.0)) throw StatsError("density values must lie in [0, 1]");
  double h = bandwidth ? *bandwidth : silverman_bandwidth(values);
  if (!(h > 0)) throw StatsError("zero bandwidth: sample has no spread; pass an explicit bandwidth");
  const double step = 1.0 / static_cast<double>(kDensityPoints - 1);
  h = std::max(h, 2.0 * step);

  DensityCurve c;
  c.bandwidth = h;
  c.x.resize(kDensityPoints);
  c.density.assign(kDensityPoints, 0.0);
  for (std::size_t i = 0; i < kDensityPoints; ++i) c.x[i] = static_cast<double>(i) * step;
  const double reach = 10.0 * h;
  const double norm = 1.0 / (static_cast<double>(values.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  const auto k_max = static_cast<long>(std::ceil(reach / 2.0)) + 1;
  for (double v : values) {
    for (long k = -k_max; k <= k_max; ++k) {
      for (double image : {2.0 * static_cast<double>(k) + v, 2.0 * static_cast<double>(k) - v}) {
        if (image < -reach || image > 1.0 + reach) continue;
        auto lo = static_cast<std::size_t>(std::max(0.0, std::ceil((image - reach) / step)));
        auto hi = static_cast<std::size_t>(std::min<double>(kDensityPoints - 1, std::floor((image + reach) / step)));
        for (std::size_t i = lo; i <= hi && i < kDensityPoints; ++i) {
          double z = (c.x[i] - image) / h;
          c.density[i] += norm * std::exp(-0.5 * z * z);
        }
      }
    }
  }
  return c;
}

inline double trapezoid_mass(const DensityCurve& c) {
  double m = 0;
  for (std::size_t i = 1; i < c.x.size(); ++i) m += 0.5 * (c.density[i] + c.density[i - 1]) * (c.x[i] - c.x[i - 1]);
  return m;
}

// ---------------------------------------------------------------------------
// Correlation

enum class CorrelationMethod { spearman, pearson };

// 1-based ranks; tied values share the mean of their positions.
inline std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) throw StatsError("correlation undefined: a coordinate is constant");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline double spearman(std::span<const double> x, std::span<const double> y) {
  auto rx = average_ranks(x);
  auto ry = average_ranks(y);
  return pearson(rx, ry);
}

struct CorrelationBin {
  double popularity_lo = 0;  // inclusive
  double popularity_hi = 0;  // exclusive, except for the last bin
  double mean_exposure = NAN;
  std::uint64_t count = 0;
};

struct CorrelationReport {
  CorrelationMethod method = CorrelationMethod::spearman;
  double rho = 0;
  std::uint64_t n_pairs = 0;
  std::vector<CorrelationBin> bins;
};

// Correlation between tag popularity at adoption and exposure over defined
// records, plus mean exposure in logarithmic popularity bins. Bin edges are
// geometric in (popularity + 1) so zero popularity falls in the first bin.
inline CorrelationReport popularity_threshold_correlation(std::span<const ExposureRecord> records, std::size_t bins,
                                                          CorrelationMethod method = CorrelationMethod::spearman) {
  if (bins == 0) throw UsageError("bin count must be positive");
  std::vector<double> pop, expo;
  for (const auto& r : records) {
    if (!r.defined()) continue;
    pop.push_back(static_cast<double>(r.tag_popularity_at_adoption));
    expo.push_back(*r.exposure);
  }
  if (pop.size() < 3) throw StatsError("correlation needs at least 3 defined records");
  if (std::all_of(pop.begin(), pop.end(), [&](double p) { return p == pop.front(); }))
    throw StatsError("correlation undefined: all popularity values are identical");

  CorrelationReport rep;
  rep.method = method;
  rep.n_pairs = pop.size();
  rep.rho = method == CorrelationMethod::spearman ? spearman(pop, expo) : pearson(pop, expo);

  const double top = std::log(*std::max_element(pop.begin(), pop.end()) + 1.0);
  std::vector<double> sums(bins, 0.0);
  rep.bins.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    rep.bins[b].popularity_lo = std::exp(top * static_cast<double>(b) / static_cast<double>(bins)) - 1.0;
    rep.bins[b].popularity_hi = std::exp(top * static_cast<double>(b + 1) / static_cast<double>(bins)) - 1.0;
  }
  rep.bins.front().popularity_lo = 0.0;
  for (std::size_t i = 0; i < pop.size(); ++i) {
    auto b = static_cast<std::size_t>(std::floor(std::log(pop[i] + 1.0) / top * static_cast<double>(bins)));
    b = std::min(b, bins - 1);
    // Guard against rounding at the edges.
    while (b > 0 && pop[i] < rep.bins[b].popularity_lo) --b;
    while (b + 1 < bins && pop[i] >= rep.bins[b + 1].popularity_lo) ++b;
    ++rep.bins[b].count;
    sums[b] += expo[i];
  }
  for (std::size_t b = 0; b < bins; ++b)
    if (rep.bins[b].count) rep.bins[b].mean_exposure = sums[b] / static_cast<double>(rep.bins[b].count);
  return rep;
}

}  // namespace cascade
