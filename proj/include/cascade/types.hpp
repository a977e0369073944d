#pragma once

#include <charconv>
#include <chrono>
#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace cascade {

// Dense handle into a label table. Tag parameter keeps users and tags apart.
template <typename Tag>
struct Handle {
  std::uint32_t value = 0;

  constexpr Handle() = default;
  constexpr explicit Handle(std::uint32_t v) : value(v) {}

  constexpr std::size_t index() const { return value; }
  friend constexpr auto operator<=>(Handle, Handle) = default;
};

struct UserTag {};
struct TagTag {};
using UserId = Handle<UserTag>;
using TagId = Handle<TagTag>;

// Milliseconds since the Unix epoch.
using Timestamp = std::int64_t;

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

inline bool fixed_digits(std::string_view s, std::size_t pos, std::size_t n, int& out) {
  if (pos + n > s.size()) return false;
  out = 0;
  for (std::size_t i = pos; i < pos + n; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    out = out * 10 + (s[i] - '0');
  }
  return true;
}

// YYYY-MM-DD[(T| )HH:MM[:SS[.fff...]]][Z|+HH:MM|-HH:MM|+HHMM]
inline std::optional<Timestamp> parse_iso8601(std::string_view s) {
  using namespace std::chrono;
  int y = 0, mo = 0, d = 0;
  if (s.size() < 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  if (!fixed_digits(s, 0, 4, y) || !fixed_digits(s, 5, 2, mo) || !fixed_digits(s, 8, 2, d)) return std::nullopt;
  year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  std::int64_t ms = duration_cast<milliseconds>(sys_days{ymd}.time_since_epoch()).count();
  std::size_t pos = 10;
  if (pos == s.size()) return ms;
  if (s[pos] != 'T' && s[pos] != ' ') return std::nullopt;
  ++pos;
  int hh = 0, mm = 0, ss = 0;
  if (!fixed_digits(s, pos, 2, hh) || pos + 2 >= s.size() || s[pos + 2] != ':' || !fixed_digits(s, pos + 3, 2, mm))
    return std::nullopt;
  pos += 5;
  if (pos < s.size() && s[pos] == ':') {
    if (!fixed_digits(s, pos + 1, 2, ss)) return std::nullopt;
    pos += 3;
  }
  if (hh > 23 || mm > 59 || ss > 60) return std::nullopt;
  std::int64_t frac_ms = 0;
  if (pos < s.size() && (s[pos] == '.' || s[pos] == ',')) {
    ++pos;
    std::size_t digits = 0;
    std::int64_t scale = 100;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
      frac_ms += (s[pos] - '0') * scale;
      scale /= 10;
      ++pos;
      ++digits;
    }
    if (digits == 0) return std::nullopt;
  }
  std::int64_t offset_min = 0;
  if (pos < s.size()) {
    if (s[pos] == 'Z' || s[pos] == 'z') {
      ++pos;
    } else if (s[pos] == '+' || s[pos] == '-') {
      int sign = s[pos] == '-' ? -1 : 1;
      int oh = 0, om = 0;
      if (!fixed_digits(s, pos + 1, 2, oh)) return std::nullopt;
      pos += 3;
      if (pos < s.size() && s[pos] == ':') ++pos;
      if (pos < s.size()) {
        if (!fixed_digits(s, pos, 2, om)) return std::nullopt;
        pos += 2;
      }
      offset_min = sign * (oh * 60 + om);
    } else {
      return std::nullopt;
    }
  }
  if (pos != s.size()) return std::nullopt;
  ms += ((hh * 60LL + mm) * 60LL + ss) * 1000LL + frac_ms - offset_min * 60000LL;
  return ms;
}

}  // namespace detail

// Accepts integer or decimal seconds since the epoch, or an ISO-8601
// date/time. Integers are seconds, not milliseconds.
inline std::optional<Timestamp> parse_timestamp(std::string_view text) {
  auto s = detail::trim(text);
  if (s.empty()) return std::nullopt;
  std::int64_t secs = 0;
  if (detail::parse_int(s, secs)) {
    if (secs > INT64_MAX / 1000 || secs < INT64_MIN / 1000) return std::nullopt;
    return secs * 1000;
  }
  if (s.find_first_of("-:T") == std::string_view::npos || (s.size() > 0 && s[0] == '-')) {
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    if (std::abs(v) > 9.2e15) return std::nullopt;
    return static_cast<Timestamp>(std::llround(v * 1000.0));
  }
  return detail::parse_iso8601(s);
}

// "250ms", "30s", "15m", "6h", "1d", "2w", or a bare integer (milliseconds).
inline std::optional<std::int64_t> parse_duration_ms(std::string_view text) {
  auto s = detail::trim(text);
  std::size_t split = 0;
  while (split < s.size() && s[split] >= '0' && s[split] <= '9') ++split;
  std::int64_t n = 0;
  if (split == 0 || !detail::parse_int(s.substr(0, split), n)) return std::nullopt;
  auto unit = s.substr(split);
  std::int64_t scale = 0;
  if (unit.empty() || unit == "ms") scale = 1;
  else if (unit == "s") scale = 1000;
  else if (unit == "m" || unit == "min") scale = 60'000;
  else if (unit == "h") scale = 3'600'000;
  else if (unit == "d") scale = 86'400'000;
  else if (unit == "w") scale = 604'800'000;
  else return std::nullopt;
  if (n <= 0 || n > INT64_MAX / scale) return std::nullopt;
  return n * scale;
}

}  // namespace cascade

template <typename Tag>
struct std::hash<cascade::Handle<Tag>> {
  std::size_t operator()(cascade::Handle<Tag> h) const noexcept { return std::hash<std::uint32_t>{}(h.value); }
};
