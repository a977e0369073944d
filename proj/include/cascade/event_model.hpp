#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "cascade/error.hpp"
#include "cascade/types.hpp"

namespace cascade {

// Raw rows as they come out of ingestion, before labels are resolved.
struct RawAdoption {
  std::string user;
  std::string tag;
  Timestamp time = 0;
};

struct RawFollow {
  std::string src;  // observer (ego)
  std::string dst;  // observed (alter)
  std::optional<Timestamp> since;
};

struct AdoptionEvent {
  UserId user;
  TagId tag;
  Timestamp time = 0;
  bool is_first_usage = false;

  friend bool operator==(const AdoptionEvent&, const AdoptionEvent&) = default;
};

// src observes dst. An edge without `since` exists at every time.
struct FollowEdge {
  UserId src;
  UserId dst;
  std::optional<Timestamp> since;

  friend bool operator==(const FollowEdge&, const FollowEdge&) = default;
};

struct DatasetOptions {
  bool reverse_edges = false;     // read "src,dst" as dst observes src
  bool symmetrize_edges = false;  // every relation is observed both ways
};

struct DatasetCounts {
  std::uint64_t users = 0;
  std::uint64_t tags = 0;
  std::uint64_t first_usages = 0;
  std::uint64_t total_usages = 0;
  std::uint64_t edges = 0;
  std::uint64_t self_loops_dropped = 0;
  std::uint64_t duplicate_edges_dropped = 0;

  friend bool operator==(const DatasetCounts&, const DatasetCounts&) = default;
};

enum class DensityScope { all, giant_component };

class Dataset {
 public:
  Dataset() { index(); }

  // Canonical constructor. Events must be sorted by (time, user, tag) with
  // first usages flagged; edges sorted by (src, dst) and unique. Used by
  // build() and by snapshot loading, which both go through validation here.
  Dataset(std::vector<std::string> user_labels, std::vector<std::string> tag_labels,
          std::vector<AdoptionEvent> events, std::vector<FollowEdge> edges,
          std::uint64_t self_loops_dropped = 0, std::uint64_t duplicate_edges_dropped = 0)
      : users_(std::move(user_labels)),
        tags_(std::move(tag_labels)),
        events_(std::move(events)),
        edges_(std::move(edges)) {
    counts_.self_loops_dropped = self_loops_dropped;
    counts_.duplicate_edges_dropped = duplicate_edges_dropped;
    validate();
    index();
  }

  static Dataset build(std::span<const RawAdoption> adoptions, std::span<const RawFollow> follows,
                       const DatasetOptions& options = {});

  const DatasetCounts& counts() const { return counts_; }
  std::size_t user_count() const { return users_.size(); }
  std::size_t tag_count() const { return tags_.size(); }

  const std::vector<std::string>& user_labels() const { return users_; }
  const std::vector<std::string>& tag_labels() const { return tags_; }
  const std::string& label(UserId u) const { return users_.at(u.index()); }
  const std::string& label(TagId x) const { return tags_.at(x.index()); }

  std::optional<UserId> find_user(const std::string& label) const {
    auto it = user_lookup_.find(label);
    if (it == user_lookup_.end()) return std::nullopt;
    return it->second;
  }
  std::optional<TagId> find_tag(const std::string& label) const {
    auto it = tag_lookup_.find(label);
    if (it == tag_lookup_.end()) return std::nullopt;
    return it->second;
  }

  const std::vector<AdoptionEvent>& events() const { return events_; }
  const std::vector<FollowEdge>& edges() const { return edges_; }
  bool has_timestamped_edges() const { return timestamped_edges_; }

  // Out-edges of u (the alters u observes), sorted by dst.
  std::span<const FollowEdge> out_edges(UserId u) const {
    check_user(u);
    return {edges_.data() + out_offsets_[u.index()], edges_.data() + out_offsets_[u.index() + 1]};
  }

  // Alters of u whose edge exists at time t.
  std::vector<UserId> neighbors_at(UserId u, Timestamp t) const {
    std::vector<UserId> out;
    for (const auto& e : out_edges(u))
      if (!e.since || *e.since <= t) out.push_back(e.dst);
    return out;
  }

  // u's first-usage time of x, if any.
  std::optional<Timestamp> first_usage(UserId u, TagId x) const {
    check_user(u);
    auto begin = user_first_tags_.begin() + static_cast<std::ptrdiff_t>(user_first_offsets_[u.index()]);
    auto end = user_first_tags_.begin() + static_cast<std::ptrdiff_t>(user_first_offsets_[u.index() + 1]);
    auto it = std::lower_bound(begin, end, x);
    if (it == end || *it != x) return std::nullopt;
    return user_first_times_[static_cast<std::size_t>(it - user_first_tags_.begin())];
  }

  // Sorted first-usage times of x (one per distinct adopter).
  std::span<const Timestamp> first_usage_times(TagId x) const {
    check_tag(x);
    return {tag_first_times_.data() + tag_first_offsets_[x.index()],
            tag_first_times_.data() + tag_first_offsets_[x.index() + 1]};
  }

  // Sorted times of every usage of x, repeats included.
  std::span<const Timestamp> usage_times(TagId x) const {
    check_tag(x);
    return {tag_usage_times_.data() + tag_usage_offsets_[x.index()],
            tag_usage_times_.data() + tag_usage_offsets_[x.index() + 1]};
  }

  // Largest weakly connected component of the follower graph, sorted.
  // Ties go to the component holding the smallest user handle.
  std::vector<UserId> giant_component() const {
    const std::size_t n = users_.size();
    std::vector<std::uint32_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0u);
    auto find = [&](std::uint32_t v) {
      while (parent[v] != v) {
        parent[v] = parent[parent[v]];
        v = parent[v];
      }
      return v;
    };
    for (const auto& e : edges_) {
      auto a = find(e.src.value), b = find(e.dst.value);
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
    // With min-root unions each root is its component's smallest handle.
    std::vector<std::uint32_t> size(n, 0);
    for (std::uint32_t v = 0; v < n; ++v) ++size[find(v)];
    std::uint32_t best = 0;
    for (std::uint32_t v = 0; v < n; ++v)
      if (size[v] > size[best]) best = v;
    std::vector<UserId> out;
    if (n == 0) return out;
    for (std::uint32_t v = 0; v < n; ++v)
      if (find(v) == best) out.emplace_back(v);
    return out;
  }

  // Directed density |E| / (n (n - 1)) over the scope's induced subgraph.
  double density(DensityScope scope = DensityScope::all) const {
    std::size_t n = users_.size();
    std::uint64_t m = edges_.size();
    if (scope == DensityScope::giant_component) {
      auto gc = giant_component();
      std::vector<bool> in(users_.size(), false);
      for (auto u : gc) in[u.index()] = true;
      n = gc.size();
      m = 0;
      for (const auto& e : edges_)
        if (in[e.src.index()] && in[e.dst.index()]) ++m;
    }
    return directed_density(n, m);
  }

  static double directed_density(std::uint64_t n, std::uint64_t m) {
    if (n < 2) throw DataError("density is undefined for fewer than 2 users");
    return static_cast<double>(m) / (static_cast<double>(n) * static_cast<double>(n - 1));
  }

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.users_ == b.users_ && a.tags_ == b.tags_ && a.events_ == b.events_ && a.edges_ == b.edges_ &&
           a.counts_ == b.counts_;
  }

 private:
  void check_user(UserId u) const {
    if (u.index() >= users_.size()) throw UsageError("user handle out of range: " + std::to_string(u.value));
  }
  void check_tag(TagId x) const {
    if (x.index() >= tags_.size()) throw UsageError("tag handle out of range: " + std::to_string(x.value));
  }

  void validate() const {
    auto fail = [](const std::string& m) { throw DataError("invalid dataset: " + m); };
    if (users_.size() > std::numeric_limits<std::uint32_t>::max() ||
        tags_.size() > std::numeric_limits<std::uint32_t>::max())
      fail("label table too large");
    for (std::size_t i = 0; i < events_.size(); ++i) {
      const auto& e = events_[i];
      if (e.user.index() >= users_.size() || e.tag.index() >= tags_.size()) fail("event id out of range");
      if (i > 0) {
        const auto& p = events_[i - 1];
        if (std::tie(p.time, p.user, p.tag) > std::tie(e.time, e.user, e.tag)) fail("events not sorted");
      }
    }
    // Exactly the earliest event of each (user, tag) pair carries the flag.
    std::unordered_map<std::uint64_t, bool> pair_started;
    pair_started.reserve(events_.size());
    for (const auto& e : events_) {
      std::uint64_t key = (std::uint64_t{e.user.value} << 32) | e.tag.value;
      if (pair_started.try_emplace(key, true).second != e.is_first_usage)
        fail("first-usage flag does not mark the earliest usage");
    }
    for (std::size_t i = 0; i < edges_.size(); ++i) {
      const auto& e = edges_[i];
      if (e.src.index() >= users_.size() || e.dst.index() >= users_.size()) fail("edge id out of range");
      if (e.src == e.dst) fail("self-loop edge");
      if (i > 0 && std::tie(edges_[i - 1].src, edges_[i - 1].dst) >= std::tie(e.src, e.dst))
        fail("edges not sorted/unique");
    }
  }

  void index() {
    user_lookup_.clear();
    tag_lookup_.clear();
    for (std::uint32_t i = 0; i < users_.size(); ++i)
      if (!user_lookup_.emplace(users_[i], UserId{i}).second) throw DataError("duplicate user label: " + users_[i]);
    for (std::uint32_t i = 0; i < tags_.size(); ++i)
      if (!tag_lookup_.emplace(tags_[i], TagId{i}).second) throw DataError("duplicate tag label: " + tags_[i]);

    const std::size_t n = users_.size(), k = tags_.size();
    out_offsets_.assign(n + 1, 0);
    timestamped_edges_ = false;
    for (const auto& e : edges_) {
      ++out_offsets_[e.src.index() + 1];
      timestamped_edges_ |= e.since.has_value();
    }
    std::partial_sum(out_offsets_.begin(), out_offsets_.end(), out_offsets_.begin());

    // Per-user first usages sorted by tag; per-tag times sorted by time.
    user_first_offsets_.assign(n + 1, 0);
    tag_first_offsets_.assign(k + 1, 0);
    tag_usage_offsets_.assign(k + 1, 0);
    std::uint64_t firsts = 0;
    for (const auto& e : events_) {
      ++tag_usage_offsets_[e.tag.index() + 1];
      if (e.is_first_usage) {
        ++firsts;
        ++user_first_offsets_[e.user.index() + 1];
        ++tag_first_offsets_[e.tag.index() + 1];
      }
    }
    std::partial_sum(user_first_offsets_.begin(), user_first_offsets_.end(), user_first_offsets_.begin());
    std::partial_sum(tag_first_offsets_.begin(), tag_first_offsets_.end(), tag_first_offsets_.begin());
    std::partial_sum(tag_usage_offsets_.begin(), tag_usage_offsets_.end(), tag_usage_offsets_.begin());

    std::vector<std::pair<TagId, Timestamp>> per_user(firsts);
    tag_first_times_.assign(firsts, 0);
    tag_usage_times_.assign(events_.size(), 0);
    {
      auto ucur = user_first_offsets_;
      auto tcur = tag_first_offsets_;
      auto acur = tag_usage_offsets_;
      for (const auto& e : events_) {
        tag_usage_times_[acur[e.tag.index()]++] = e.time;
        if (!e.is_first_usage) continue;
        per_user[ucur[e.user.index()]++] = {e.tag, e.time};
        tag_first_times_[tcur[e.tag.index()]++] = e.time;
      }
    }
    user_first_tags_.resize(firsts);
    user_first_times_.resize(firsts);
    for (std::size_t u = 0; u < n; ++u) {
      auto b = per_user.begin() + static_cast<std::ptrdiff_t>(user_first_offsets_[u]);
      auto e = per_user.begin() + static_cast<std::ptrdiff_t>(user_first_offsets_[u + 1]);
      std::sort(b, e);
    }
    for (std::size_t i = 0; i < firsts; ++i) {
      user_first_tags_[i] = per_user[i].first;
      user_first_times_[i] = per_user[i].second;
    }

    counts_.users = n;
    counts_.tags = k;
    counts_.first_usages = firsts;
    counts_.total_usages = events_.size();
    counts_.edges = edges_.size();
  }

  std::vector<std::string> users_;
  std::vector<std::string> tags_;
  std::unordered_map<std::string, UserId> user_lookup_;
  std::unordered_map<std::string, TagId> tag_lookup_;
  std::vector<AdoptionEvent> events_;
  std::vector<FollowEdge> edges_;
  DatasetCounts counts_;
  bool timestamped_edges_ = false;

  std::vector<std::size_t> out_offsets_;
  std::vector<std::size_t> user_first_offsets_;
  std::vector<TagId> user_first_tags_;
  std::vector<Timestamp> user_first_times_;
  std::vector<std::size_t> tag_first_offsets_;
  std::vector<Timestamp> tag_first_times_;
  std::vector<std::size_t> tag_usage_offsets_;
  std::vector<Timestamp> tag_usage_times_;
};

namespace detail {

inline std::vector<std::string> sorted_unique(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace detail

// Handles are assigned in lexicographic label order, so the resulting
// Dataset does not depend on input row order.
inline Dataset Dataset::build(std::span<const RawAdoption> adoptions, std::span<const RawFollow> follows,
                              const DatasetOptions& options) {
  std::vector<std::string> user_labels, tag_labels;
  user_labels.reserve(adoptions.size() + 2 * follows.size());
  tag_labels.reserve(adoptions.size());
  for (const auto& a : adoptions) {
    user_labels.push_back(a.user);
    tag_labels.push_back(a.tag);
  }
  for (const auto& f : follows) {
    user_labels.push_back(f.src);
    user_labels.push_back(f.dst);
  }
  user_labels = detail::sorted_unique(std::move(user_labels));
  tag_labels = detail::sorted_unique(std::move(tag_labels));

  auto user_of = [&](const std::string& s) {
    auto it = std::lower_bound(user_labels.begin(), user_labels.end(), s);
    return UserId{static_cast<std::uint32_t>(it - user_labels.begin())};
  };
  auto tag_of = [&](const std::string& s) {
    auto it = std::lower_bound(tag_labels.begin(), tag_labels.end(), s);
    return TagId{static_cast<std::uint32_t>(it - tag_labels.begin())};
  };

  std::vector<AdoptionEvent> events;
  events.reserve(adoptions.size());
  for (const auto& a : adoptions) events.push_back({user_of(a.user), tag_of(a.tag), a.time, false});
  std::sort(events.begin(), events.end(), [](const AdoptionEvent& l, const AdoptionEvent& r) {
    return std::tie(l.time, l.user, l.tag) < std::tie(r.time, r.user, r.tag);
  });
  {
    std::unordered_map<std::uint64_t, bool> started;
    started.reserve(events.size());
    for (auto& e : events)
      e.is_first_usage = started.try_emplace((std::uint64_t{e.user.value} << 32) | e.tag.value, true).second;
  }

  std::uint64_t self_loops = 0;
  std::vector<FollowEdge> edges;
  edges.reserve(follows.size() * (options.symmetrize_edges ? 2 : 1));
  for (const auto& f : follows) {
    UserId s = user_of(f.src), d = user_of(f.dst);
    if (s == d) {
      ++self_loops;
      continue;
    }
    if (options.reverse_edges) std::swap(s, d);
    edges.push_back({s, d, f.since});
    if (options.symmetrize_edges) edges.push_back({d, s, f.since});
  }
  // Among duplicates keep the earliest appearance; a missing `since` means
  // "always present" and sorts first.
  std::sort(edges.begin(), edges.end(), [](const FollowEdge& l, const FollowEdge& r) {
    if (l.src != r.src) return l.src < r.src;
    if (l.dst != r.dst) return l.dst < r.dst;
    return l.since < r.since;
  });
  auto before = edges.size();
  edges.erase(std::unique(edges.begin(), edges.end(),
                          [](const FollowEdge& l, const FollowEdge& r) { return l.src == r.src && l.dst == r.dst; }),
              edges.end());
  std::uint64_t duplicates = before - edges.size();

  return Dataset(std::move(user_labels), std::move(tag_labels), std::move(events), std::move(edges), self_loops,
                 duplicates);
}

}  // namespace cascade
