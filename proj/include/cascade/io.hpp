#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "cascade/csv.hpp"
#include "cascade/error.hpp"
#include "cascade/event_model.hpp"
#include "cascade/types.hpp"

namespace cascade::io {

struct RowIssue {
  std::size_t line = 0;
  std::string reason;
};

template <typename Row>
struct LoadResult {
  std::vector<Row> rows;
  std::uint64_t data_rows = 0;  // non-blank rows after the header
  std::uint64_t dropped_rows = 0;
  std::vector<RowIssue> issues;
};

namespace detail {

inline void strip_bom(std::string& s) {
  if (s.size() >= 3 && static_cast<unsigned char>(s[0]) == 0xEF && static_cast<unsigned char>(s[1]) == 0xBB &&
      static_cast<unsigned char>(s[2]) == 0xBF)
    s.erase(0, 3);
}

inline std::vector<std::string> read_header(csv::Reader& reader, const std::string& what) {
  csv::Record rec;
  if (!reader.next(rec)) throw DataError(what + ": missing header");
  if (!rec.fields.empty()) strip_bom(rec.fields.front());
  for (auto& f : rec.fields) f = std::string(cascade::detail::trim(f));
  return rec.fields;
}

inline bool blank(const csv::Record& rec) { return rec.fields.size() == 1 && cascade::detail::trim(rec.fields[0]).empty(); }

template <typename Row>
void drop(LoadResult<Row>& out, std::size_t line, std::string reason, bool strict, const std::string& what) {
  if (strict) throw DataError(what + ": line " + std::to_string(line) + ": " + reason);
  ++out.dropped_rows;
  out.issues.push_back({line, std::move(reason)});
}

}  // namespace detail

// Header `user_id,tag_id,timestamp`. Bad rows are dropped and reported by
// line number, or raise DataError when strict.
inline LoadResult<RawAdoption> read_adoptions(std::istream& in, bool strict = false, const std::string& what = "adoptions") {
  csv::Reader reader(in);
  auto header = detail::read_header(reader, what);
  if (header != std::vector<std::string>{"user_id", "tag_id", "timestamp"})
    throw DataError(what + ": malformed header (expected user_id,tag_id,timestamp)");
  LoadResult<RawAdoption> out;
  csv::Record rec;
  while (reader.next(rec)) {
    if (detail::blank(rec)) continue;
    ++out.data_rows;
    if (!rec.well_formed) {
      detail::drop(out, rec.line, "unterminated quoted field", strict, what);
      continue;
    }
    if (rec.fields.size() != 3) {
      detail::drop(out, rec.line, "expected 3 fields, got " + std::to_string(rec.fields.size()), strict, what);
      continue;
    }
    if (rec.fields[0].empty() || rec.fields[1].empty()) {
      detail::drop(out, rec.line, "empty user or tag", strict, what);
      continue;
    }
    auto t = parse_timestamp(rec.fields[2]);
    if (!t) {
      detail::drop(out, rec.line, "unparsable timestamp '" + rec.fields[2] + "'", strict, what);
      continue;
    }
    out.rows.push_back({std::move(rec.fields[0]), std::move(rec.fields[1]), *t});
  }
  return out;
}

// Header `src_id,dst_id` or `src_id,dst_id,since`; an empty `since` cell
// leaves that edge untimestamped.
inline LoadResult<RawFollow> read_follows(std::istream& in, bool strict = false, const std::string& what = "follows") {
  csv::Reader reader(in);
  auto header = detail::read_header(reader, what);
  bool timed = header == std::vector<std::string>{"src_id", "dst_id", "since"};
  if (!timed && header != std::vector<std::string>{"src_id", "dst_id"})
    throw DataError(what + ": malformed header (expected src_id,dst_id[,since])");
  const std::size_t width = timed ? 3 : 2;
  LoadResult<RawFollow> out;
  csv::Record rec;
  while (reader.next(rec)) {
    if (detail::blank(rec)) continue;
    ++out.data_rows;
    if (!rec.well_formed) {
      detail::drop(out, rec.line, "unterminated quoted field", strict, what);
      continue;
    }
    if (rec.fields.size() != width) {
      detail::drop(out, rec.line,
                   "expected " + std::to_string(width) + " fields, got " + std::to_string(rec.fields.size()), strict,
                   what);
      continue;
    }
    if (rec.fields[0].empty() || rec.fields[1].empty()) {
      detail::drop(out, rec.line, "empty user id", strict, what);
      continue;
    }
    RawFollow row{std::move(rec.fields[0]), std::move(rec.fields[1]), std::nullopt};
    if (timed && !cascade::detail::trim(rec.fields[2]).empty()) {
      row.since = parse_timestamp(rec.fields[2]);
      if (!row.since) {
        detail::drop(out, rec.line, "unparsable timestamp '" + rec.fields[2] + "'", strict, what);
        continue;
      }
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read file: " + path);
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write file: " + path);
  return out;
}

inline void write_adoptions_csv(std::ostream& out, const std::vector<RawAdoption>& rows) {
  out << "user_id,tag_id,timestamp\n";
  // Times are written as whole seconds when exact, else as decimal seconds.
  for (const auto& r : rows) {
    out << csv::quote(r.user) << ',' << csv::quote(r.tag) << ',';
    if (r.time % 1000 == 0)
      out << r.time / 1000;
    else
      out << (r.time < 0 ? "-" : "") << std::llabs(r.time) / 1000 << '.' << std::setw(3) << std::setfill('0')
          << std::llabs(r.time) % 1000 << std::setfill(' ');
    out << '\n';
  }
}

inline void write_follows_csv(std::ostream& out, const std::vector<RawFollow>& rows) {
  bool timed = std::any_of(rows.begin(), rows.end(), [](const RawFollow& r) { return r.since.has_value(); });
  out << (timed ? "src_id,dst_id,since\n" : "src_id,dst_id\n");
  for (const auto& r : rows) {
    out << csv::quote(r.src) << ',' << csv::quote(r.dst);
    if (timed) {
      out << ',';
      if (r.since) out << *r.since / 1000;  // generated edges carry whole seconds
    }
    out << '\n';
  }
}

// Shortest round-trip decimal; "NA" for NaN / missing.
inline std::string fmt_double(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::string fmt_double(const std::optional<double>& v) { return v ? fmt_double(*v) : "NA"; }

// Hex SHA-256 of a file's bytes.
inline std::string sha256_file(const std::string& path) {
  auto in = open_in(path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error(ErrorKind::internal, "sha256 init failed");
  }
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return hex.str();
}

}  // namespace cascade::io
