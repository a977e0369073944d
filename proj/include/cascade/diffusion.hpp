#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "cascade/error.hpp"
#include "cascade/event_model.hpp"
#include "cascade/exposure.hpp"
#include "cascade/rng.hpp"
#include "cascade/stats.hpp"

namespace cascade {

// Static directed observation graph used by the simulators. Edge u -> v
// means u observes v.
class FollowerGraph {
 public:
  FollowerGraph() = default;
  FollowerGraph(std::size_t n, std::vector<std::pair<std::uint32_t, std::uint32_t>> edges) : n_(n) {
    for (auto [s, d] : edges) {
      if (s >= n || d >= n) throw UsageError("graph edge endpoint out of range");
      if (s == d) throw UsageError("graph contains a self-loop");
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    edges_ = std::move(edges);
    out_off_.assign(n + 1, 0);
    in_off_.assign(n + 1, 0);
    for (auto [s, d] : edges_) {
      ++out_off_[s + 1];
      ++in_off_[d + 1];
    }
    for (std::size_t i = 0; i < n; ++i) {
      out_off_[i + 1] += out_off_[i];
      in_off_[i + 1] += in_off_[i];
    }
    out_.resize(edges_.size());
    in_.resize(edges_.size());
    in_edge_.resize(edges_.size());
    auto ocur = out_off_, icur = in_off_;
    for (std::uint32_t e = 0; e < edges_.size(); ++e) {
      auto [s, d] = edges_[e];
      out_[ocur[s]++] = d;
      in_edge_[icur[d]] = e;
      in_[icur[d]++] = s;
    }
  }

  // Ignores edge timestamps.
  static FollowerGraph from_dataset(const Dataset& d) {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    edges.reserve(d.edges().size());
    for (const auto& e : d.edges()) edges.emplace_back(e.src.value, e.dst.value);
    return FollowerGraph(d.user_count(), std::move(edges));
  }

  std::size_t size() const { return n_; }
  std::size_t edge_count() const { return edges_.size(); }
  const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges() const { return edges_; }

  // Alters observed by u.
  std::span<const std::uint32_t> alters(std::uint32_t u) const { return {out_.data() + out_off_[u], out_.data() + out_off_[u + 1]}; }
  // Users observing u.
  std::span<const std::uint32_t> observers(std::uint32_t u) const { return {in_.data() + in_off_[u], in_.data() + in_off_[u + 1]}; }
  // Edge indices (into edges()) of the users observing u, parallel to observers(u).
  std::span<const std::uint32_t> observer_edges(std::uint32_t u) const {
    return {in_edge_.data() + in_off_[u], in_edge_.data() + in_off_[u + 1]};
  }

  std::vector<std::int64_t> in_degrees() const {
    std::vector<std::int64_t> deg(n_);
    for (std::size_t u = 0; u < n_; ++u) deg[u] = static_cast<std::int64_t>(in_off_[u + 1] - in_off_[u]);
    return deg;
  }

  friend bool operator==(const FollowerGraph& a, const FollowerGraph& b) { return a.n_ == b.n_ && a.edges_ == b.edges_; }

 private:
  std::size_t n_ = 0;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges_;
  std::vector<std::size_t> out_off_, in_off_;
  std::vector<std::uint32_t> out_, in_, in_edge_;
};

// ---------------------------------------------------------------------------
// Graph generators

struct ErdosRenyiSpec {
  std::size_t n = 0;
  double mean_out_degree = 0;
};

struct PreferentialAttachmentSpec {
  std::size_t n = 0;
  std::size_t m = 0;  // alters observed by each arriving user
};

using GraphSpec = std::variant<ErdosRenyiSpec, PreferentialAttachmentSpec>;

// Directed G(n, p) with p = mean_out_degree / (n - 1); candidate pairs are
// visited with geometric skips (Batagelj-Brandes).
inline FollowerGraph erdos_renyi(const ErdosRenyiSpec& spec, std::uint64_t seed) {
  const std::size_t n = spec.n;
  if (n < 2) throw UsageError("erdos_renyi needs n >= 2");
  if (!(spec.mean_out_degree >= 0 && spec.mean_out_degree <= static_cast<double>(n - 1)))
    throw UsageError("erdos_renyi mean_out_degree must lie in [0, n - 1]");
  const double p = spec.mean_out_degree / static_cast<double>(n - 1);
  Rng rng(seed);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  if (p > 0) {
    const std::uint64_t total = static_cast<std::uint64_t>(n) * (n - 1);  // ordered pairs, no loops
    const double log_q = std::log1p(-p);
    std::uint64_t idx = 0;
    for (;;) {
      if (p < 1) {
        double r = uniform01(rng);
        double skip = std::floor(std::log1p(-r) / log_q);
        if (skip >= static_cast<double>(total - idx)) break;
        idx += static_cast<std::uint64_t>(skip);
      }
      if (idx >= total) break;
      auto src = static_cast<std::uint32_t>(idx / (n - 1));
      auto off = static_cast<std::uint32_t>(idx % (n - 1));
      edges.emplace_back(src, off >= src ? off + 1 : off);
      ++idx;
    }
  }
  return FollowerGraph(n, std::move(edges));
}

// Users 1..m observe every earlier user; each later user observes m distinct
// existing users chosen with probability proportional to total degree.
inline FollowerGraph preferential_attachment(const PreferentialAttachmentSpec& spec, std::uint64_t seed) {
  const std::size_t n = spec.n, m = spec.m;
  if (n < 2) throw UsageError("preferential_attachment needs n >= 2");
  if (m < 1 || m >= n) throw UsageError("preferential_attachment needs 1 <= m < n");
  Rng rng(seed);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  std::vector<std::uint32_t> endpoints;  // one entry per edge end
  for (std::uint32_t i = 1; i <= m && i < n; ++i)
    for (std::uint32_t j = 0; j < i; ++j) {
      edges.emplace_back(i, j);
      endpoints.push_back(i);
      endpoints.push_back(j);
    }
  std::vector<std::uint32_t> picked;
  for (auto i = static_cast<std::uint32_t>(m + 1); i < n; ++i) {
    picked.clear();
    while (picked.size() < m) {
      auto t = endpoints[uniform_below(rng, endpoints.size())];
      if (std::find(picked.begin(), picked.end(), t) == picked.end()) picked.push_back(t);
    }
    for (auto t : picked) {
      edges.emplace_back(i, t);
      endpoints.push_back(i);
      endpoints.push_back(t);
    }
  }
  return FollowerGraph(n, std::move(edges));
}

inline FollowerGraph generate_graph(const GraphSpec& spec, std::uint64_t seed) {
  return std::visit(
      [&](const auto& s) -> FollowerGraph {
        if constexpr (std::is_same_v<std::decay_t<decltype(s)>, ErdosRenyiSpec>)
          return erdos_renyi(s, seed);
        else
          return preferential_attachment(s, seed);
      },
      spec);
}

// ---------------------------------------------------------------------------
// Model configuration

enum class ModelKind { threshold, cascade, learning };

inline const char* to_string(ModelKind m) {
  switch (m) {
    case ModelKind::threshold: return "threshold";
    case ModelKind::cascade: return "cascade";
    case ModelKind::learning: return "learning";
  }
  return "?";
}

struct ConstantThreshold {
  double value = 0.5;
};
struct UniformThreshold {
  double lo = 0, hi = 1;
};
struct TruncatedNormalThreshold {
  double mean = 0.5, sd = 0.2;
};
using ThresholdDistribution = std::variant<ConstantThreshold, UniformThreshold, TruncatedNormalThreshold>;

struct SeedSpec {
  std::size_t random_count = 1;   // used when `users` is empty
  std::vector<std::uint32_t> users;
};

struct SimConfig {
  ModelKind model = ModelKind::threshold;
  SeedSpec seeds;
  ThresholdDistribution thresholds = UniformThreshold{};
  double transmission_p = 0.1;  // cascade only
  std::size_t lag = 0;          // learning only
  std::size_t max_steps = 1000;
  std::uint64_t seed = 1;
};

// One simulated tag. adoption_step[u] is -1 for users who never adopted.
struct SimRun {
  ModelKind model = ModelKind::threshold;
  std::vector<std::uint32_t> seed_users;
  std::vector<double> thresholds;  // planted; empty for the cascade model
  std::vector<std::int64_t> adoption_step;
  std::vector<std::uint64_t> new_adopters_per_step;  // index = step, [0] = seeds
  std::size_t steps = 0;                             // last step simulated
  bool converged = false;
  double final_saturation = 0;

  friend bool operator==(const SimRun&, const SimRun&) = default;
};

namespace detail {

inline void validate(const FollowerGraph& g, const SimConfig& cfg) {
  if (g.size() == 0) throw UsageError("simulation graph is empty");
  if (cfg.max_steps < 1) throw UsageError("max_steps must be >= 1");
  if (cfg.seeds.users.empty()) {
    if (cfg.seeds.random_count < 1 || cfg.seeds.random_count > g.size())
      throw UsageError("random seed count must lie in [1, n]");
  }
  for (auto u : cfg.seeds.users)
    if (u >= g.size()) throw UsageError("seed user out of range: " + std::to_string(u));
  if (!(cfg.transmission_p >= 0 && cfg.transmission_p <= 1)) throw UsageError("transmission probability must lie in [0, 1]");
  std::visit(
      [](const auto& t) {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, ConstantThreshold>) {
          // Values above 1 are allowed and mean "never adopts by influence".
          if (!(t.value >= 0)) throw UsageError("constant threshold must be >= 0");
        } else if constexpr (std::is_same_v<T, UniformThreshold>) {
          if (!(0 <= t.lo && t.lo <= t.hi && t.hi <= 1)) throw UsageError("uniform threshold needs 0 <= lo <= hi <= 1");
        } else {
          if (!(t.sd > 0) || !std::isfinite(t.mean)) throw UsageError("truncated normal threshold needs sd > 0");
        }
      },
      cfg.thresholds);
}

// Independent streams so that, e.g., the seed set does not depend on p.
enum Stream : std::uint64_t { kSeedStream = 1, kThresholdStream = 2, kEdgeStream = 3 };

inline std::vector<std::uint32_t> pick_seeds(const FollowerGraph& g, const SimConfig& cfg) {
  std::vector<std::uint32_t> seeds = cfg.seeds.users;
  if (seeds.empty()) {
    Rng rng(derive_seed(cfg.seed, kSeedStream));
    std::vector<std::uint32_t> pool(g.size());
    for (std::uint32_t i = 0; i < pool.size(); ++i) pool[i] = i;
    for (std::size_t i = 0; i < cfg.seeds.random_count; ++i) {
      auto j = i + uniform_below(rng, pool.size() - i);
      std::swap(pool[i], pool[j]);
    }
    seeds.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(cfg.seeds.random_count));
  }
  std::sort(seeds.begin(), seeds.end());
  seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
  return seeds;
}

inline std::vector<double> draw_thresholds(std::size_t n, const SimConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, kThresholdStream));
  std::vector<double> theta(n);
  std::visit(
      [&](const auto& t) {
        using T = std::decay_t<decltype(t)>;
        for (auto& x : theta) {
          if constexpr (std::is_same_v<T, ConstantThreshold>) {
            x = t.value;
          } else if constexpr (std::is_same_v<T, UniformThreshold>) {
            x = t.lo + (t.hi - t.lo) * uniform01(rng);
          } else {
            // Inverse CDF restricted to [0, 1].
            boost::math::normal_distribution<double> z(t.mean, t.sd);
            double lo = boost::math::cdf(z, 0.0), hi = boost::math::cdf(z, 1.0);
            double u = lo + (hi - lo) * uniform01(rng);
            x = (hi - lo) > 0 && u > 0 && u < 1 ? std::clamp(boost::math::quantile(z, u), 0.0, 1.0)
                                                 : (t.mean < 0.5 ? 0.0 : 1.0);
          }
        }
      },
      cfg.thresholds);
  return theta;
}

inline SimRun start_run(const FollowerGraph& g, const SimConfig& cfg) {
  validate(g, cfg);
  SimRun run;
  run.model = cfg.model;
  run.seed_users = pick_seeds(g, cfg);
  run.adoption_step.assign(g.size(), -1);
  for (auto s : run.seed_users) run.adoption_step[s] = 0;
  run.new_adopters_per_step.push_back(run.seed_users.size());
  return run;
}

inline void finish_run(SimRun& run) {
  std::uint64_t total = 0;
  for (auto c : run.new_adopters_per_step) total += c;
  run.final_saturation = static_cast<double>(total) / static_cast<double>(run.adoption_step.size());
}

// Fraction of u's alters adopted at or before `step`; nullopt without alters.
inline std::optional<double> adopted_fraction(const FollowerGraph& g, const SimRun& run, std::uint32_t u,
                                              std::int64_t step) {
  auto alters = g.alters(u);
  if (alters.empty()) return std::nullopt;
  std::uint32_t active = 0;
  for (auto v : alters)
    if (run.adoption_step[v] >= 0 && run.adoption_step[v] <= step) ++active;
  return static_cast<double>(active) / static_cast<double>(alters.size());
}

}  // namespace detail

// Synchronous linear threshold model: at step k every non-adopter whose
// fraction of alters adopted by the end of step k-1 reaches its threshold
// adopts. Runs until a step adds nobody or max_steps is reached.
inline SimRun run_threshold_model(const FollowerGraph& g, const SimConfig& cfg) {
  SimRun run = detail::start_run(g, cfg);
  run.thresholds = detail::draw_thresholds(g.size(), cfg);
  std::vector<std::uint32_t> fresh;
  for (std::size_t k = 1; k <= cfg.max_steps; ++k) {
    fresh.clear();
    const auto prev = static_cast<std::int64_t>(k) - 1;
    for (std::uint32_t u = 0; u < g.size(); ++u) {
      if (run.adoption_step[u] >= 0) continue;
      auto frac = detail::adopted_fraction(g, run, u, prev);
      if (frac && *frac >= run.thresholds[u]) fresh.push_back(u);
    }
    run.steps = k;
    if (fresh.empty()) {
      run.converged = true;
      break;
    }
    for (auto u : fresh) run.adoption_step[u] = static_cast<std::int64_t>(k);
    run.new_adopters_per_step.push_back(fresh.size());
  }
  detail::finish_run(run);
  return run;
}

// Threshold adoption delayed by an evaluation window: u adopts at step k
// once exposure >= theta_u has held at each of the last lag + 1 steps.
// lag = 0 is the threshold model.
inline SimRun run_social_learning(const FollowerGraph& g, const SimConfig& cfg) {
  SimRun run = detail::start_run(g, cfg);
  run.thresholds = detail::draw_thresholds(g.size(), cfg);
  std::vector<std::size_t> streak(g.size(), 0);
  std::vector<std::uint32_t> fresh;
  for (std::size_t k = 1; k <= cfg.max_steps; ++k) {
    fresh.clear();
    bool pending = false;
    const auto prev = static_cast<std::int64_t>(k) - 1;
    for (std::uint32_t u = 0; u < g.size(); ++u) {
      if (run.adoption_step[u] >= 0) continue;
      auto frac = detail::adopted_fraction(g, run, u, prev);
      if (frac && *frac >= run.thresholds[u]) {
        if (++streak[u] > cfg.lag)
          fresh.push_back(u);
        else
          pending = true;
      } else {
        streak[u] = 0;
      }
    }
    run.steps = k;
    if (fresh.empty() && !pending) {
      run.converged = true;
      break;
    }
    for (auto u : fresh) run.adoption_step[u] = static_cast<std::int64_t>(k);
    run.new_adopters_per_step.push_back(fresh.size());
  }
  // Drop trailing steps that only advanced evaluation windows.
  while (run.new_adopters_per_step.size() > 1 && run.new_adopters_per_step.back() == 0)
    run.new_adopters_per_step.pop_back();
  detail::finish_run(run);
  return run;
}

// Per-edge uniforms in edges() order; an attempt across edge e succeeds
// iff uniform[e] < p. Shared across p for common random numbers.
inline std::vector<double> edge_uniforms(const FollowerGraph& g, std::uint64_t seed) {
  Rng rng(derive_seed(seed, detail::kEdgeStream));
  std::vector<double> u(g.edge_count());
  for (auto& x : u) x = uniform01(rng);
  return u;
}

// Independent cascade: a user adopting at step k gives each of its
// observers one attempt at step k + 1.
inline SimRun run_independent_cascade(const FollowerGraph& g, const SimConfig& cfg) {
  SimRun run = detail::start_run(g, cfg);
  const auto coin = edge_uniforms(g, cfg.seed);
  std::vector<std::uint32_t> frontier = run.seed_users, fresh;
  for (std::size_t k = 1; k <= cfg.max_steps; ++k) {
    fresh.clear();
    for (auto w : frontier) {
      auto obs = g.observers(w);
      auto eids = g.observer_edges(w);
      for (std::size_t i = 0; i < obs.size(); ++i) {
        auto v = obs[i];
        if (run.adoption_step[v] >= 0) continue;
        if (coin[eids[i]] < cfg.transmission_p) {
          run.adoption_step[v] = static_cast<std::int64_t>(k);
          fresh.push_back(v);
        }
      }
    }
    run.steps = k;
    if (fresh.empty()) {
      run.converged = true;
      break;
    }
    std::sort(fresh.begin(), fresh.end());
    run.new_adopters_per_step.push_back(fresh.size());
    frontier.swap(fresh);
  }
  detail::finish_run(run);
  return run;
}

inline SimRun simulate(const FollowerGraph& g, const SimConfig& cfg) {
  switch (cfg.model) {
    case ModelKind::threshold: return run_threshold_model(g, cfg);
    case ModelKind::cascade: return run_independent_cascade(g, cfg);
    case ModelKind::learning: return run_social_learning(g, cfg);
  }
  throw Error(ErrorKind::internal, "unknown model");
}

// ---------------------------------------------------------------------------
// Round trip through the measurement pipeline

// Zero-padded so lexicographic handle assignment equals the numeric index.
inline std::string sim_user_label(std::size_t u, std::size_t n) {
  std::size_t width = std::to_string(n > 0 ? n - 1 : 0).size();
  std::string s = std::to_string(u);
  return "u" + std::string(width - std::min(width, s.size()), '0') + s;
}

inline std::vector<RawAdoption> adoption_rows(const SimRun& run, const std::string& tag = "sim") {
  std::vector<RawAdoption> rows;
  const auto n = run.adoption_step.size();
  for (std::size_t u = 0; u < n; ++u)
    if (run.adoption_step[u] >= 0) rows.push_back({sim_user_label(u, n), tag, run.adoption_step[u]});
  return rows;
}

inline std::vector<RawFollow> follow_rows(const FollowerGraph& g) {
  std::vector<RawFollow> rows;
  rows.reserve(g.edge_count());
  for (auto [s, d] : g.edges()) rows.push_back({sim_user_label(s, g.size()), sim_user_label(d, g.size()), std::nullopt});
  return rows;
}

// Every graph user is labelled so handles line up with simulation indices.
inline Dataset to_dataset(const FollowerGraph& g, const SimRun& run, const std::string& tag = "sim") {
  std::vector<std::string> users(g.size());
  for (std::size_t u = 0; u < g.size(); ++u) users[u] = sim_user_label(u, g.size());
  std::vector<AdoptionEvent> events;
  std::vector<std::pair<std::int64_t, std::uint32_t>> order;
  for (std::uint32_t u = 0; u < run.adoption_step.size(); ++u)
    if (run.adoption_step[u] >= 0) order.emplace_back(run.adoption_step[u], u);
  std::sort(order.begin(), order.end());
  for (auto [t, u] : order) events.push_back({UserId{u}, TagId{0}, t, true});
  std::vector<FollowEdge> edges;
  for (auto [s, d] : g.edges()) edges.push_back({UserId{s}, UserId{d}, std::nullopt});
  std::vector<std::string> tags;
  if (!events.empty()) tags.push_back(tag);
  return Dataset(std::move(users), std::move(tags), std::move(events), std::move(edges));
}

struct RecoveryReport {
  std::uint64_t compared = 0;    // non-seed adopters
  std::uint64_t violations = 0;  // measured exposure < planted threshold
  double min_margin = NAN;       // min over compared of measured - planted
  double mean_margin = NAN;
  std::optional<double> spearman_rho;  // popularity at adoption vs exposure
  std::vector<ExposureRecord> records;
};

// Compares measured exposure at adoption with planted thresholds for every
// non-seed adopter in d. planted[u] is empty for users without a threshold.
inline RecoveryReport compare_with_planted(const Dataset& d, const std::vector<std::optional<double>>& planted,
                                           const std::vector<bool>& is_seed) {
  if (planted.size() != d.user_count() || is_seed.size() != d.user_count())
    throw UsageError("recover: planted parameters do not match the dataset");
  RecoveryReport rep;
  rep.records = all_exposures(d).records;
  double total = 0;
  for (const auto& r : rep.records) {
    const auto u = r.user.index();
    if (is_seed[u] || !planted[u]) continue;
    // A non-seed adopter had alters, so its exposure is defined; a missing
    // value still counts as a violation.
    double margin = r.exposure.value_or(NAN) - *planted[u];
    ++rep.compared;
    if (!(margin >= 0)) ++rep.violations;
    total += margin;
    rep.min_margin = rep.compared == 1 ? margin : std::min(rep.min_margin, margin);
  }
  if (rep.compared) rep.mean_margin = total / static_cast<double>(rep.compared);
  try {
    rep.spearman_rho = popularity_threshold_correlation(rep.records, 1).rho;
  } catch (const StatsError&) {
  }
  return rep;
}

// Round trip of a threshold-type run through the measurement pipeline.
inline RecoveryReport recover_thresholds(const FollowerGraph& g, const SimRun& run) {
  if (run.model == ModelKind::cascade)
    throw UsageError("recover: independent-cascade runs carry no planted thresholds");
  if (run.thresholds.size() != g.size() || run.adoption_step.size() != g.size())
    throw UsageError("recover: run does not match graph");
  auto d = to_dataset(g, run);
  std::vector<std::optional<double>> planted(run.thresholds.begin(), run.thresholds.end());
  std::vector<bool> is_seed(g.size(), false);
  for (auto s : run.seed_users) is_seed[s] = true;
  return compare_with_planted(d, planted, is_seed);
}

}  // namespace cascade
