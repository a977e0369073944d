#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cascade/error.hpp"
#include "cascade/event_model.hpp"
#include "cascade/parallel.hpp"
#include "cascade/summary.hpp"

namespace cascade {

// Whether an alter whose first usage coincides with the ego's counts as
// already exposed.
enum class TieRule { strict, inclusive };

enum class PopularityMode { adopters, usages };

struct ExposureOptions {
  TieRule ties = TieRule::strict;
  PopularityMode popularity = PopularityMode::adopters;
};

// Network exposure of one first usage. exposure is empty when the ego had no
// alters at adoption time.
struct ExposureRecord {
  UserId user;
  TagId tag;
  Timestamp time = 0;
  std::uint32_t active_alters = 0;
  std::uint32_t neighborhood_size = 0;
  std::optional<double> exposure;
  std::uint64_t tag_popularity_at_adoption = 0;

  bool defined() const { return exposure.has_value(); }
  friend bool operator==(const ExposureRecord&, const ExposureRecord&) = default;
};

struct UserThreshold {
  UserId user;
  double beta = 0;
  std::uint32_t defined_adoptions = 0;
  std::uint32_t undefined_adoptions = 0;

  friend bool operator==(const UserThreshold&, const UserThreshold&) = default;
};

struct ExposureBatch {
  std::vector<ExposureRecord> records;  // (time, user, tag) order
  std::uint64_t defined = 0;
  std::uint64_t undefined = 0;
};

struct PopulationThresholds {
  std::vector<UserThreshold> users;  // users with >= 1 defined adoption, by handle
  std::uint64_t excluded_users = 0;  // adopters whose every adoption was undefined
  Summary per_user;                  // over beta
  Summary per_adoption;              // over defined raw exposures
};

namespace detail {

inline ExposureRecord compute_exposure(const Dataset& d, UserId u, TagId x, Timestamp tau,
                                       const ExposureOptions& opt) {
  ExposureRecord r;
  r.user = u;
  r.tag = x;
  r.time = tau;
  for (const auto& e : d.out_edges(u)) {
    if (e.since && *e.since > tau) continue;
    ++r.neighborhood_size;
    if (auto t = d.first_usage(e.dst, x)) {
      if (*t < tau || (opt.ties == TieRule::inclusive && *t == tau)) ++r.active_alters;
    }
  }
  if (r.neighborhood_size > 0)
    r.exposure = static_cast<double>(r.active_alters) / static_cast<double>(r.neighborhood_size);
  auto times = opt.popularity == PopularityMode::adopters ? d.first_usage_times(x) : d.usage_times(x);
  r.tag_popularity_at_adoption = static_cast<std::uint64_t>(std::lower_bound(times.begin(), times.end(), tau) - times.begin());
  return r;
}

inline double mean_of_defined(const std::vector<const ExposureRecord*>& recs) {
  double total = 0;
  std::uint32_t n = 0;
  for (const auto* r : recs)
    if (r->defined()) {
      total += *r->exposure;
      ++n;
    }
  return total / n;
}

}  // namespace detail

// Exposure of u at its first usage of x.
inline ExposureRecord exposure_at_adoption(const Dataset& d, UserId u, TagId x, const ExposureOptions& opt = {}) {
  auto tau = d.first_usage(u, x);
  if (!tau) throw NoAdoptionError("user " + d.label(u) + " never adopted tag " + d.label(x));
  return detail::compute_exposure(d, u, x, *tau, opt);
}

// One record per first usage, in (time, user, tag) order.
inline ExposureBatch all_exposures(const Dataset& d, const ExposureOptions& opt = {}) {
  std::vector<const AdoptionEvent*> firsts;
  firsts.reserve(d.counts().first_usages);
  for (const auto& e : d.events())
    if (e.is_first_usage) firsts.push_back(&e);
  ExposureBatch batch;
  batch.records.resize(firsts.size());
  parallel_for(firsts.size(), [&](std::size_t i) {
    const auto* e = firsts[i];
    batch.records[i] = detail::compute_exposure(d, e->user, e->tag, e->time, opt);
  });
  for (const auto& r : batch.records) (r.defined() ? batch.defined : batch.undefined)++;
  return batch;
}

// Mean exposure over u's defined first usages (accumulated in time order).
inline UserThreshold user_threshold(const Dataset& d, UserId u, const ExposureOptions& opt = {}) {
  std::vector<ExposureRecord> recs;
  for (const auto& e : d.events())
    if (e.is_first_usage && e.user == u) recs.push_back(detail::compute_exposure(d, u, e.tag, e.time, opt));
  UserThreshold t;
  t.user = u;
  std::vector<const ExposureRecord*> ptrs;
  for (const auto& r : recs) {
    ptrs.push_back(&r);
    (r.defined() ? t.defined_adoptions : t.undefined_adoptions)++;
  }
  if (t.defined_adoptions == 0)
    throw UndefinedThresholdError("user " + d.label(u) + " has no adoption with a non-empty neighborhood");
  t.beta = detail::mean_of_defined(ptrs);
  return t;
}

inline PopulationThresholds population_thresholds(const ExposureBatch& batch, std::size_t user_count) {
  std::vector<std::vector<const ExposureRecord*>> by_user(user_count);
  std::vector<double> raw;
  raw.reserve(batch.defined);
  for (const auto& r : batch.records) {
    by_user.at(r.user.index()).push_back(&r);
    if (r.defined()) raw.push_back(*r.exposure);
  }
  PopulationThresholds out;
  std::vector<double> betas;
  for (std::uint32_t u = 0; u < user_count; ++u) {
    const auto& recs = by_user[u];
    if (recs.empty()) continue;
    UserThreshold t;
    t.user = UserId{u};
    for (const auto* r : recs) (r->defined() ? t.defined_adoptions : t.undefined_adoptions)++;
    if (t.defined_adoptions == 0) {
      ++out.excluded_users;
      continue;
    }
    t.beta = detail::mean_of_defined(recs);
    betas.push_back(t.beta);
    out.users.push_back(t);
  }
  out.per_user = summarize(std::move(betas));
  out.per_adoption = summarize(std::move(raw));
  return out;
}

inline PopulationThresholds population_thresholds(const Dataset& d, const ExposureOptions& opt = {}) {
  return population_thresholds(all_exposures(d, opt), d.user_count());
}

}  // namespace cascade
