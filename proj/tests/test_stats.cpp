#include <random>

#include <gsl/gsl_sf_zeta.h>
#include <gtest/gtest.h>

#include "cascade/hurwitz.hpp"
#include "cascade/power_law.hpp"
#include "cascade/stats.hpp"
#include "oracles.hpp"

using namespace cascade;

TEST(Hurwitz, MatchesGsl) {
  for (double s : {1.05, 1.5, 2.0, 2.5, 3.7, 8.0, 20.0})
    for (double q : {1.0, 2.0, 5.0, 11.0, 12.0, 100.0, 4769.0}) {
      double ref = gsl_sf_hzeta(s, q);
      EXPECT_NEAR(hurwitz_zeta(s, q).value, ref, 1e-12 * ref) << s << ' ' << q;
      // Scaled form: c^s * sum ((q+k)/c)^-s equals the unscaled sum.
      EXPECT_NEAR(hurwitz_zeta(s, q, q).value * std::pow(q, -s), ref, 1e-12 * ref);
    }
}

TEST(Hurwitz, DerivativeMatchesFiniteDifference) {
  for (double s : {1.5, 2.5, 4.0})
    for (double q : {1.0, 5.0, 40.0}) {
      double h = 1e-6;
      double fd = (gsl_sf_hzeta(s + h, q) - gsl_sf_hzeta(s - h, q)) / (2 * h);
      EXPECT_NEAR(hurwitz_zeta(s, q).derivative, fd, 1e-6 * std::abs(fd));
    }
}

TEST(TagPopularity, Counts) {
  std::vector<RawAdoption> a{{"B", "t", 1000}, {"C", "t", 2000}, {"A", "t", 4000}, {"D", "t", 5000},
                             {"B", "t", 6000}, {"A", "s", 0}};
  auto d = Dataset::build(a, std::vector<RawFollow>{});
  auto p = tag_popularity(d);
  auto t = d.find_tag("t")->index();
  auto s = d.find_tag("s")->index();
  EXPECT_EQ(p[t].distinct_adopters, 4u);
  EXPECT_EQ(p[t].total_usages, 5u);
  EXPECT_EQ(p[s].distinct_adopters, 1u);
  EXPECT_EQ(p[s].total_usages, 1u);
  auto ranked = rank_frequency(p);
  EXPECT_EQ(d.label(ranked[0].tag), "t");
  auto h = popularity_histogram(p);
  ASSERT_EQ(h.size(), 2u);
  EXPECT_EQ(h[0].value, 1u);
  EXPECT_EQ(h[1].value, 4u);
}

TEST(Curve, HandBucketing) {
  std::vector<RawAdoption> a{{"A", "t", 1}, {"B", "t", 2}, {"C", "t", 4}, {"D", "t", 5}};
  auto d = Dataset::build(a, std::vector<RawFollow>{});
  auto c = adoption_curve(d, TagId{0}, 1);
  std::vector<std::uint64_t> cum;
  for (const auto& p : c.points) cum.push_back(p.cumulative_first_usages);
  EXPECT_EQ(cum, (std::vector<std::uint64_t>{1, 2, 2, 3, 4}));
  EXPECT_DOUBLE_EQ(c.points.back().saturation, 1.0);
}

TEST(Curve, SingleUsage) {
  auto d = Dataset::build(std::vector<RawAdoption>{{"A", "t", 10}, {"B", "s", 0}}, std::vector<RawFollow>{});
  auto c = adoption_curve(d, *d.find_tag("t"), 1000);
  ASSERT_EQ(c.points.size(), 1u);
  EXPECT_DOUBLE_EQ(c.points[0].saturation, 0.5);
}

TEST(Curve, NonDecreasingAndEndsAtAdopters) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    auto m = oracle::random_micro_dataset(rng);
    auto d = Dataset::build(m.adoptions, m.follows);
    auto pops = tag_popularity(d);
    for (std::uint32_t x = 0; x < d.tag_count(); ++x) {
      auto c = adoption_curve(d, TagId{x}, 3000);
      std::uint64_t prev = 0, subsequent = 0;
      for (const auto& p : c.points) {
        EXPECT_GE(p.cumulative_first_usages, prev);
        EXPECT_LE(p.saturation, 1.0);
        prev = p.cumulative_first_usages;
        subsequent += p.subsequent_usages;
      }
      EXPECT_EQ(prev, pops[x].distinct_adopters);
      EXPECT_EQ(prev + subsequent, pops[x].total_usages);
    }
  }
}

TEST(Density, UnitMassForAnyInput) {
  std::mt19937_64 rng(12);
  std::vector<std::vector<double>> cases{{0.0, 1.0}, {0.0, 0.0, 0.5}, {1.0, 1.0, 0.999}, {0.5, 0.5000001}};
  for (int i = 0; i < 20; ++i) {
    std::vector<double> v(std::uniform_int_distribution<int>(2, 2000)(rng));
    std::gamma_distribution<double> g1(0.3), g2(3.0);
    for (auto& x : v) {
      double a = g1(rng), c = g2(rng);
      x = a / (a + c);
    }
    cases.push_back(v);
  }
  for (const auto& v : cases) {
    auto c = smooth_distribution(v);
    EXPECT_NEAR(trapezoid_mass(c), 1.0, 1e-3);
    EXPECT_EQ(c.x.size(), kDensityPoints);
    for (double y : c.density) EXPECT_GE(y, 0.0);
  }
}

TEST(Density, UniformSampleIsFlat) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(10000);
  for (auto& x : v) x = u(rng);
  auto c = smooth_distribution(v);
  for (std::size_t i = 0; i < c.x.size(); ++i)
    if (c.x[i] >= 0.1 && c.x[i] <= 0.9) {
      EXPECT_LT(std::abs(c.density[i] - 1.0), 0.1) << c.x[i];
    }
}

TEST(Density, DegenerateInputs) {
  std::vector<double> same(10, 0.3);
  EXPECT_THROW(smooth_distribution(same), StatsError);
  auto c = smooth_distribution(same, 0.05);
  auto peak = std::max_element(c.density.begin(), c.density.end()) - c.density.begin();
  EXPECT_NEAR(c.x[static_cast<std::size_t>(peak)], 0.3, 2.0 / 511.0);
  EXPECT_THROW(smooth_distribution(std::vector<double>{0.5}), StatsError);
  EXPECT_THROW(smooth_distribution(std::vector<double>{0.5, 1.5}), StatsError);
}

TEST(Correlation, HandExamples) {
  EXPECT_DOUBLE_EQ(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{0.1, 0.2, 0.3}), 1.0);
  EXPECT_DOUBLE_EQ(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{0.3, 0.2, 0.1}), -1.0);
  EXPECT_NEAR(spearman(std::vector<double>{1, 2, 3, 4}, std::vector<double>{0.2, 0.1, 0.3, 0.4}), 0.8, 1e-12);
}

TEST(Correlation, AverageRanks) {
  auto r = average_ranks(std::vector<double>{10, 20, 20, 5});
  EXPECT_EQ(r, (std::vector<double>{2, 3.5, 3.5, 1}));
}

TEST(Correlation, InvariantUnderMonotoneTransform) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(200), y(200);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = std::round(n(rng) * 4);
      y[i] = x[i] + n(rng);
    }
    double rho = spearman(x, y);
    std::vector<double> tx(x), ty(y);
    for (auto& v : tx) v = std::exp(v / 3.0);
    for (auto& v : ty) v = v * v * v + 7;
    EXPECT_NEAR(spearman(tx, ty), rho, 1e-12);
  }
}

TEST(Correlation, ReportBinsPartitionPairs) {
  std::vector<ExposureRecord> recs;
  std::mt19937_64 rng(6);
  for (int i = 0; i < 500; ++i) {
    ExposureRecord r;
    r.tag_popularity_at_adoption = rng() % 300;
    r.neighborhood_size = 10;
    r.active_alters = static_cast<std::uint32_t>(rng() % 11);
    r.exposure = r.active_alters / 10.0;
    recs.push_back(r);
  }
  recs.push_back({});  // undefined, ignored
  auto rep = popularity_threshold_correlation(recs, 7);
  EXPECT_EQ(rep.n_pairs, 500u);
  std::uint64_t total = 0;
  for (std::size_t b = 0; b < rep.bins.size(); ++b) {
    total += rep.bins[b].count;
    if (b + 1 < rep.bins.size()) {
      EXPECT_DOUBLE_EQ(rep.bins[b].popularity_hi, rep.bins[b + 1].popularity_lo);
    }
  }
  EXPECT_EQ(total, 500u);
  EXPECT_EQ(rep.bins.front().popularity_lo, 0.0);
  EXPECT_NEAR(rep.bins.back().popularity_hi, 299.0, 1e-9);
}

TEST(Correlation, IdenticalPopularityIsError) {
  std::vector<ExposureRecord> recs(5);
  for (auto& r : recs) {
    r.exposure = 0.5;
    r.tag_popularity_at_adoption = 3;
  }
  EXPECT_THROW(popularity_threshold_correlation(recs, 3), StatsError);
}

TEST(PowerLaw, DegenerateSample) {
  std::vector<std::int64_t> v(100, 7);
  EXPECT_THROW(fit_power_law(v), StatsError);
  EXPECT_THROW(fit_power_law(std::vector<std::int64_t>{1, 0, 3}), StatsError);
}

TEST(PowerLaw, InsufficientTail) {
  std::vector<std::int64_t> v{1, 1, 1, 2, 2, 9};
  EXPECT_THROW(fit_power_law(v, {.bootstrap_replicates = 0, .fixed_xmin = 9}), StatsError);
}

TEST(PowerLaw, RecoversExponent) {
  oracle::PowerLawInverseCdf draw(2.5, 5);
  std::mt19937_64 rng(1234);
  std::vector<std::int64_t> v(50000);
  for (auto& x : v) x = draw(rng);
  auto fit = fit_power_law(v, {.bootstrap_replicates = 0});
  EXPECT_NEAR(fit.alpha, 2.5, 0.1);
  EXPECT_GE(fit.xmin, 1);
  EXPECT_GT(fit.alpha, 1.0);
  EXPECT_GE(fit.n_tail, 2u);
  EXPECT_TRUE(std::isnan(fit.gof_p));
}

TEST(PowerLaw, FixedXminMleMatchesNumericalOracle) {
  // Brute maximization of the discrete log-likelihood over a fine grid.
  oracle::PowerLawInverseCdf draw(2.2, 3);
  std::mt19937_64 rng(5);
  std::vector<std::int64_t> v(5000);
  for (auto& x : v) x = draw(rng);
  auto fit = fit_power_law(v, {.bootstrap_replicates = 0, .fixed_xmin = 3});
  double sum_log = 0;
  for (auto x : v) sum_log += std::log(static_cast<double>(x));
  auto ll = [&](double a) { return -a * sum_log - static_cast<double>(v.size()) * std::log(gsl_sf_hzeta(a, 3.0)); };
  double best = 1.5, best_ll = ll(1.5);
  for (double a = 1.5; a < 3.5; a += 1e-5)
    if (ll(a) > best_ll) {
      best_ll = ll(a);
      best = a;
    }
  EXPECT_NEAR(fit.alpha, best, 2e-5);
}

TEST(PowerLaw, DuplicatingSampleLeavesFitUnchanged) {
  oracle::PowerLawInverseCdf draw(2.5, 5);
  std::mt19937_64 rng(77);
  std::vector<std::int64_t> v(5000);
  for (auto& x : v) x = draw(rng);
  auto twice = v;
  twice.insert(twice.end(), v.begin(), v.end());
  auto a = fit_power_law(v, {.bootstrap_replicates = 0});
  auto b = fit_power_law(twice, {.bootstrap_replicates = 0});
  EXPECT_EQ(a.xmin, b.xmin);
  EXPECT_LT(std::abs(a.alpha - b.alpha), 1e-9);
}

TEST(PowerLaw, BootstrapIsDeterministic) {
  oracle::PowerLawInverseCdf draw(2.5, 5);
  std::mt19937_64 rng(3);
  std::vector<std::int64_t> v(3000);
  for (auto& x : v) x = draw(rng);
  PowerLawOptions o{.bootstrap_replicates = 20, .seed = 42};
  auto a = fit_power_law(v, o);
  setenv("CASCADE_THREADS", "3", 1);
  auto b = fit_power_law(v, o);
  unsetenv("CASCADE_THREADS");
  EXPECT_EQ(a.gof_p, b.gof_p);
  EXPECT_GE(a.gof_p, 0.0);
  EXPECT_LE(a.gof_p, 1.0);
}

TEST(PowerLaw, GeometricSampleRejected) {
  std::mt19937_64 rng(2);
  std::vector<std::int64_t> v(50000);
  for (auto& x : v) x = oracle::geometric(rng, 0.1);
  auto fit = fit_power_law(v, {.bootstrap_replicates = 100, .seed = 9});
  EXPECT_LT(fit.gof_p, 0.1);
}
