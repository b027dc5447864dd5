#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "prognos/error.h"
#include "prognos/tabular.h"

namespace prognos {
namespace {

struct Field {
  std::string text;
  bool quoted = false;
};

// Reads one RFC 4180 record. Returns false at end of input.
bool ReadRecord(std::istream& in, std::vector<Field>& fields, size_t line) {
  fields.clear();
  if (in.peek() == std::char_traits<char>::eof()) return false;
  Field cur;
  bool in_quotes = false;
  bool after_quote = false;
  int ch;
  while ((ch = in.get()) != std::char_traits<char>::eof()) {
    const char c = static_cast<char>(ch);
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          cur.text.push_back('"');
          in.get();
        } else {
          in_quotes = false;
          after_quote = true;
        }
      } else {
        cur.text.push_back(c);
      }
      continue;
    }
    if (c == ',') {
      fields.push_back(std::move(cur));
      cur = Field{};
      after_quote = false;
    } else if (c == '\r') {
      if (in.peek() == '\n') in.get();
      break;
    } else if (c == '\n') {
      break;
    } else if (c == '"' && cur.text.empty() && !cur.quoted) {
      in_quotes = true;
      cur.quoted = true;
    } else {
      if (after_quote) {
        throw ParseError("line " + std::to_string(line) + ": text after closing quote");
      }
      cur.text.push_back(c);
    }
  }
  if (in_quotes) throw ParseError("line " + std::to_string(line) + ": unterminated quote");
  fields.push_back(std::move(cur));
  return true;
}

bool IsMissingToken(const Field& f) { return !f.quoted && (f.text.empty() || f.text == "NA"); }

std::string Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

std::string Where(size_t row, const std::string& col, const std::string& token) {
  return "row " + std::to_string(row) + ", column '" + col + "', token '" + token + "'";
}

double ParseNumber(const std::string& raw, size_t row, const std::string& col) {
  const std::string t = Trim(raw);
  double v = 0.0;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  if (!t.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (t.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw ParseError(Where(row, col, raw));
  }
  return v;
}

bool NeedsQuotes(const std::string& s) {
  return s.empty() || s == "NA" || s.find_first_of(",\"\r\n") != std::string::npos;
}

void WriteField(std::ostream& out, const std::string& s) {
  if (!NeedsQuotes(s)) {
    out << s;
    return;
  }
  out << '"';
  for (char c : s) {
    if (c == '"') out << '"';
    out << c;
  }
  out << '"';
}

std::string FormatDouble(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

Dataset ReadCsv(std::istream& in, const Schema& schema_in) {
  ValidateSchema(schema_in);
  Schema schema = schema_in;
  std::vector<Field> fields;
  if (!ReadRecord(in, fields, 1)) throw ParseError("missing header row");

  std::map<std::string, size_t> header_pos;
  for (size_t i = 0; i < fields.size(); ++i) {
    if (!header_pos.emplace(fields[i].text, i).second) {
      throw UnknownColumn("duplicate header column '" + fields[i].text + "'");
    }
  }
  std::vector<size_t> source(schema.size());
  for (size_t c = 0; c < schema.size(); ++c) {
    auto it = header_pos.find(schema[c].name);
    if (it == header_pos.end()) {
      throw UnknownColumn("header lacks schema column '" + schema[c].name + "'");
    }
    source[c] = it->second;
  }
  if (header_pos.size() != schema.size()) {
    for (const auto& [name, pos] : header_pos) {
      const bool known = std::any_of(schema.begin(), schema.end(),
                                     [&](const ColumnSchema& s) { return s.name == name; });
      if (!known) throw UnknownColumn("header column '" + name + "' is not in the schema");
    }
  }

  std::vector<std::vector<Field>> rows;
  size_t line = 1;
  while (ReadRecord(in, fields, ++line)) {
    if (fields.size() == 1 && fields[0].text.empty() && !fields[0].quoted &&
        header_pos.size() > 1) {
      continue;  // blank line
    }
    if (fields.size() != header_pos.size()) {
      throw ParseError("line " + std::to_string(line) + ": expected " +
                       std::to_string(header_pos.size()) + " fields, got " +
                       std::to_string(fields.size()));
    }
    rows.push_back(fields);
  }

  // Categorical columns without fixed levels take theirs from the data.
  for (size_t c = 0; c < schema.size(); ++c) {
    if (schema[c].kind != ColumnKind::kCategorical || !schema[c].categories.empty()) continue;
    std::set<std::string> levels;
    for (const auto& row : rows) {
      const Field& f = row[source[c]];
      if (!IsMissingToken(f)) levels.insert(f.text);
    }
    schema[c].categories.assign(levels.begin(), levels.end());
  }

  Dataset d(schema, rows.size());
  for (size_t r = 0; r < rows.size(); ++r) {
    for (size_t c = 0; c < schema.size(); ++c) {
      const Field& f = rows[r][source[c]];
      if (IsMissingToken(f)) continue;
      const auto& col = schema[c];
      switch (col.kind) {
        case ColumnKind::kNumeric: {
          const double v = ParseNumber(f.text, r, col.name);
          if (col.role == ColumnRole::kTime && !(v > 0.0)) {
            throw ParseError(Where(r, col.name, f.text) + ": durations must be positive");
          }
          d.set(r, c, v);
          break;
        }
        case ColumnKind::kBinary: {
          const double v = ParseNumber(f.text, r, col.name);
          if (v != 0.0 && v != 1.0) throw ParseError(Where(r, col.name, f.text) + ": not 0/1");
          d.set(r, c, v);
          break;
        }
        case ColumnKind::kCategorical: {
          const auto it = std::find(col.categories.begin(), col.categories.end(), f.text);
          if (it == col.categories.end()) {
            throw CategoryError("unseen level: " + Where(r, col.name, f.text));
          }
          d.set(r, c, static_cast<double>(it - col.categories.begin()));
          break;
        }
      }
    }
  }
  return d;
}

Dataset LoadCsv(const std::filesystem::path& path, const Schema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return ReadCsv(in, schema);
}

void WriteCsv(std::ostream& out, const Dataset& d) {
  for (size_t c = 0; c < d.n_cols(); ++c) {
    if (c) out << ',';
    WriteField(out, d.column(c).name);
  }
  out << '\n';
  for (size_t r = 0; r < d.n_rows(); ++r) {
    for (size_t c = 0; c < d.n_cols(); ++c) {
      if (c) out << ',';
      if (d.is_missing(r, c)) continue;
      const auto& col = d.column(c);
      const double v = d.value(r, c);
      switch (col.kind) {
        case ColumnKind::kNumeric: out << FormatDouble(v); break;
        case ColumnKind::kBinary: out << (v != 0.0 ? '1' : '0'); break;
        case ColumnKind::kCategorical:
          WriteField(out, col.categories.at(static_cast<size_t>(v)));
          break;
      }
    }
    out << '\n';
  }
}

void SaveCsv(const std::filesystem::path& path, const Dataset& d) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  WriteCsv(out, d);
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace prognos
