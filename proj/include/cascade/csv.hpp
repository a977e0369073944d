#pragma once

#include <istream>
#include <string>
#include <vector>

namespace cascade::csv {

// One parsed record and the 1-based line number it started on.
struct Record {
  std::vector<std::string> fields;
  std::size_t line = 0;
  bool well_formed = true;  // false on an unterminated quote
};

// Minimal RFC 4180 reader: comma separator, double-quoted fields with ""
// escapes, quoted newlines allowed, CRLF tolerated.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  bool next(Record& rec) {
    rec.fields.clear();
    rec.well_formed = true;
    int c = in_.get();
    if (c == EOF) return false;
    ++line_;
    rec.line = line_;
    std::string field;
    bool quoted = false;
    bool was_quoted = false;
    for (;; c = in_.get()) {
      if (quoted) {
        if (c == EOF) {
          rec.well_formed = false;
          rec.fields.push_back(std::move(field));
          return true;
        }
        if (c == '"') {
          if (in_.peek() == '"') {
            in_.get();
            field.push_back('"');
          } else {
            quoted = false;
          }
        } else {
          if (c == '\n') ++line_;
          field.push_back(static_cast<char>(c));
        }
        continue;
      }
      if (c == EOF || c == '\n') {
        if (!was_quoted && !field.empty() && field.back() == '\r') field.pop_back();
        rec.fields.push_back(std::move(field));
        return true;
      }
      if (c == ',') {
        rec.fields.push_back(std::move(field));
        field.clear();
        was_quoted = false;
      } else if (c == '"' && field.empty() && !was_quoted) {
        quoted = true;
        was_quoted = true;
      } else if (c == '\r' && in_.peek() == '\n') {
        // swallowed; the '\n' ends the record
      } else {
        field.push_back(static_cast<char>(c));
      }
    }
  }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

inline std::string quote(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace cascade::csv
