#pragma once

// Binary snapshot of a Dataset. All integers little-endian.
//
//   offset  size  field
//   0       4     magic "CSCD"
//   4       4     u32 format version (= 1)
//   8       8     u64 self_loops_dropped
//   16      8     u64 duplicate_edges_dropped
//   ...           user label table: u64 count, then per label u32 byte length + UTF-8 bytes
//   ...           tag label table: same layout
//   ...           events: u64 count, then per event
//                   u32 user, u32 tag, i64 time_ms, u8 is_first_usage
//   ...           edges: u64 count, then per edge
//                   u32 src, u32 dst, u8 has_since, i64 since_ms (0 when absent)
//
// Events are in (time, user, tag) order and edges in (src, dst) order; the
// loader rejects files that violate either, or that carry trailing bytes.

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "cascade/error.hpp"
#include "cascade/event_model.hpp"

namespace cascade::snapshot {

inline constexpr std::array<char, 4> kMagic{'C', 'S', 'C', 'D'};
inline constexpr std::uint32_t kVersion = 1;

namespace detail {

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  template <typename Int>
  void put(Int v) {
    using U = std::make_unsigned_t<Int>;
    auto u = static_cast<U>(v);
    char buf[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((u >> (8 * i)) & 0xff);
    out_.write(buf, sizeof(U));
  }
  void bytes(const char* p, std::size_t n) { out_.write(p, static_cast<std::streamsize>(n)); }
  void str(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  template <typename Int>
  Int get() {
    using U = std::make_unsigned_t<Int>;
    unsigned char buf[sizeof(U)];
    if (!in_.read(reinterpret_cast<char*>(buf), sizeof(U))) throw DataError("snapshot truncated");
    U u = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) u |= static_cast<U>(buf[i]) << (8 * i);
    return static_cast<Int>(u);
  }
  std::string str() {
    auto n = get<std::uint32_t>();
    std::string s(n, '\0');
    if (n && !in_.read(s.data(), n)) throw DataError("snapshot truncated");
    return s;
  }
  std::uint64_t count(std::size_t min_record_bytes) {
    auto n = get<std::uint64_t>();
    // Guard allocations against corrupt counts.
    auto pos = in_.tellg();
    if (pos >= 0) {
      in_.seekg(0, std::ios::end);
      auto end = in_.tellg();
      in_.seekg(pos);
      if (end >= pos && n > static_cast<std::uint64_t>(end - pos) / min_record_bytes)
        throw DataError("snapshot count exceeds file size");
    }
    return n;
  }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& in_;
};

}  // namespace detail

inline void write(const Dataset& d, std::ostream& out) {
  detail::Writer w(out);
  w.bytes(kMagic.data(), kMagic.size());
  w.put(kVersion);
  w.put(d.counts().self_loops_dropped);
  w.put(d.counts().duplicate_edges_dropped);
  for (const auto* table : {&d.user_labels(), &d.tag_labels()}) {
    w.put(static_cast<std::uint64_t>(table->size()));
    for (const auto& s : *table) w.str(s);
  }
  w.put(static_cast<std::uint64_t>(d.events().size()));
  for (const auto& e : d.events()) {
    w.put(e.user.value);
    w.put(e.tag.value);
    w.put(e.time);
    w.put(static_cast<std::uint8_t>(e.is_first_usage));
  }
  w.put(static_cast<std::uint64_t>(d.edges().size()));
  for (const auto& e : d.edges()) {
    w.put(e.src.value);
    w.put(e.dst.value);
    w.put(static_cast<std::uint8_t>(e.since.has_value()));
    w.put(e.since.value_or(0));
  }
  if (!out) throw Error(ErrorKind::internal, "snapshot write failed");
}

inline Dataset read(std::istream& in) {
  detail::Reader r(in);
  std::array<char, 4> magic{};
  for (auto& c : magic) c = static_cast<char>(r.get<std::uint8_t>());
  if (magic != kMagic) throw DataError("not a snapshot file (bad magic)");
  auto version = r.get<std::uint32_t>();
  if (version != kVersion)
    throw DataError("unsupported snapshot version " + std::to_string(version) + " (expected " +
                    std::to_string(kVersion) + ")");
  auto self_loops = r.get<std::uint64_t>();
  auto duplicates = r.get<std::uint64_t>();
  std::vector<std::string> tables[2];
  for (auto& table : tables) {
    auto n = r.count(4);
    table.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) table.push_back(r.str());
  }
  auto n_events = r.count(17);
  std::vector<AdoptionEvent> events;
  events.reserve(n_events);
  for (std::uint64_t i = 0; i < n_events; ++i) {
    AdoptionEvent e;
    e.user = UserId{r.get<std::uint32_t>()};
    e.tag = TagId{r.get<std::uint32_t>()};
    e.time = r.get<std::int64_t>();
    auto flag = r.get<std::uint8_t>();
    if (flag > 1) throw DataError("snapshot: bad first-usage flag");
    e.is_first_usage = flag == 1;
    events.push_back(e);
  }
  auto n_edges = r.count(17);
  std::vector<FollowEdge> edges;
  edges.reserve(n_edges);
  for (std::uint64_t i = 0; i < n_edges; ++i) {
    FollowEdge e;
    e.src = UserId{r.get<std::uint32_t>()};
    e.dst = UserId{r.get<std::uint32_t>()};
    auto has = r.get<std::uint8_t>();
    auto since = r.get<std::int64_t>();
    if (has > 1) throw DataError("snapshot: bad edge flag");
    if (has) e.since = since;
    edges.push_back(e);
  }
  if (!r.at_end()) throw DataError("snapshot has trailing bytes");
  return Dataset(std::move(tables[0]), std::move(tables[1]), std::move(events), std::move(edges), self_loops,
                 duplicates);
}

inline void save(const Dataset& d, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path);
  write(d, out);
}

inline Dataset load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open snapshot: " + path);
  return read(in);
}

// Version of an existing snapshot file, or nullopt if it is not one.
inline std::optional<std::uint32_t> probe_version(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  char head[8];
  if (!in.read(head, 8) || std::memcmp(head, kMagic.data(), 4) != 0) return std::nullopt;
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(head[4 + i])) << (8 * i);
  return v;
}

inline std::string to_bytes(const Dataset& d) {
  std::ostringstream out(std::ios::binary);
  write(d, out);
  return std::move(out).str();
}

}  // namespace cascade::snapshot
