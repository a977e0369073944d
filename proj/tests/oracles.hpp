#pragma once

// Independent reference implementations used to check the library. None of
// these share code with the headers under test beyond the raw row types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <gsl/gsl_sf_zeta.h>

#include "cascade/event_model.hpp"

namespace oracle {

struct Exposure {
  std::int64_t active = 0;
  std::int64_t neighborhood = 0;
  std::int64_t popularity = 0;
  std::int64_t time = 0;
};

using Key = std::pair<std::string, std::string>;  // (user, tag)

// Rescans every row for every first usage. Follow rows with src == dst are
// ignored; duplicate rows collapse to "present if any copy is present".
inline std::map<Key, Exposure> brute_force_exposures(const std::vector<cascade::RawAdoption>& rows,
                                                     const std::vector<cascade::RawFollow>& follows,
                                                     bool inclusive = false) {
  auto first_time = [&](const std::string& u, const std::string& x) -> std::optional<std::int64_t> {
    std::optional<std::int64_t> best;
    for (const auto& r : rows)
      if (r.user == u && r.tag == x && (!best || r.time < *best)) best = r.time;
    return best;
  };
  std::map<Key, Exposure> out;
  for (const auto& row : rows) {
    Key k{row.user, row.tag};
    if (out.count(k)) continue;
    const std::int64_t tau = *first_time(row.user, row.tag);
    Exposure e;
    e.time = tau;
    std::set<std::string> alters;
    for (const auto& f : follows)
      if (f.src == row.user && f.dst != row.user && (!f.since || *f.since <= tau)) alters.insert(f.dst);
    e.neighborhood = static_cast<std::int64_t>(alters.size());
    for (const auto& a : alters) {
      auto t = first_time(a, row.tag);
      if (t && (*t < tau || (inclusive && *t == tau))) ++e.active;
    }
    std::set<std::string> earlier;
    for (const auto& r : rows)
      if (r.tag == row.tag && *first_time(r.user, r.tag) < tau) earlier.insert(r.user);
    e.popularity = static_cast<std::int64_t>(earlier.size());
    out[k] = e;
  }
  return out;
}

struct MicroDataset {
  std::vector<cascade::RawAdoption> adoptions;
  std::vector<cascade::RawFollow> follows;
};

// Small random logs with coarse timestamps so ties are common. Includes
// self-loops, duplicate follows and mixed timestamped / static edges.
inline MicroDataset random_micro_dataset(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n_users_d(1, 30), n_tags_d(1, 10), n_events_d(0, 200);
  const int n_users = n_users_d(rng), n_tags = n_tags_d(rng), n_events = n_events_d(rng);
  std::uniform_int_distribution<int> user(0, n_users - 1), tag(0, n_tags - 1), when(0, 15);
  std::bernoulli_distribution timed(0.3);
  MicroDataset m;
  for (int i = 0; i < n_events; ++i)
    m.adoptions.push_back({"u" + std::to_string(user(rng)), "t" + std::to_string(tag(rng)), when(rng) * 1000LL});
  std::uniform_int_distribution<int> n_edges_d(0, n_users * 4);
  const int n_edges = n_edges_d(rng);
  for (int i = 0; i < n_edges; ++i) {
    cascade::RawFollow f{"u" + std::to_string(user(rng)), "u" + std::to_string(user(rng)), std::nullopt};
    if (timed(rng)) f.since = when(rng) * 1000LL;
    m.follows.push_back(f);
  }
  return m;
}

// Inverse-CDF sampler for the discrete power law P(X = k) = k^-a / zeta(a, xmin),
// k >= xmin. The survival function is tabulated from GSL's Hurwitz zeta up to
// `table` values; beyond that the continuous approximation is used.
class PowerLawInverseCdf {
 public:
  PowerLawInverseCdf(double alpha, std::int64_t xmin, std::int64_t table = 200000) : alpha_(alpha), xmin_(xmin) {
    const double z = gsl_sf_hzeta(alpha, static_cast<double>(xmin));
    surv_.reserve(static_cast<std::size_t>(table));
    for (std::int64_t k = 0; k < table; ++k)
      surv_.push_back(gsl_sf_hzeta(alpha, static_cast<double>(xmin + k)) / z);  // P(X >= xmin + k)
  }

  std::int64_t operator()(std::mt19937_64& rng) const {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    // Largest k with P(X >= k) > u.
    auto it = std::upper_bound(surv_.begin(), surv_.end(), u, std::greater<double>());
    if (it != surv_.end()) return xmin_ + (it - surv_.begin()) - 1;
    const double last = static_cast<double>(xmin_ + static_cast<std::int64_t>(surv_.size()) - 1);
    const double tail = surv_.back();
    return static_cast<std::int64_t>(std::floor((last + 0.5) * std::pow(u / tail, -1.0 / (alpha_ - 1.0)) - 0.5));
  }

 private:
  double alpha_;
  std::int64_t xmin_;
  std::vector<double> surv_;
};

// Geometric on {1, 2, ...} with success probability p.
inline std::int64_t geometric(std::mt19937_64& rng, double p) {
  std::int64_t k = 1;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  while (u(rng) >= p) ++k;
  return k;
}

// Weakly connected components by repeated BFS over an adjacency matrix.
inline std::vector<int> component_labels(int n, const std::vector<std::pair<int, int>>& edges) {
  std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
  for (auto [a, b] : edges) adj[a][b] = adj[b][a] = true;
  std::vector<int> label(n, -1);
  int next = 0;
  for (int s = 0; s < n; ++s) {
    if (label[s] >= 0) continue;
    std::vector<int> stack{s};
    label[s] = next;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int w = 0; w < n; ++w)
        if (adj[v][w] && label[w] < 0) {
          label[w] = next;
          stack.push_back(w);
        }
    }
    ++next;
  }
  return label;
}

}  // namespace oracle
