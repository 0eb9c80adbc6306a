// SPDX-License-Identifier: Apache-2.0

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "urae/harness.hpp"

namespace urae::harness {

namespace {

std::string_view type_name(ColumnType t) {
  switch (t) {
    case ColumnType::Real: return "real";
    case ColumnType::Integer: return "integer";
    case ColumnType::Text: return "text";
  }
  return "?";
}

bool matches(const Cell& cell, ColumnType t) {
  switch (t) {
    case ColumnType::Real: return std::holds_alternative<double>(cell);
    case ColumnType::Integer: return std::holds_alternative<std::uint64_t>(cell);
    case ColumnType::Text: return std::holds_alternative<std::string>(cell);
  }
  return false;
}

void append_text(std::string& out, const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) {
    out += s;
    return;
  }
  out += '"';
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
}

// Splits one record; `pos` is advanced past its terminating LF.
std::vector<std::string> split_record(std::string_view text, std::size_t& pos) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  while (pos < text.size()) {
    const char c = text[pos++];
    if (quoted) {
      if (c == '"') {
        if (pos < text.size() && text[pos] == '"') {
          fields.back() += '"';
          ++pos;
        } else {
          quoted = false;
        }
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c == '\n') {
      return fields;
    } else {
      fields.back() += c;
    }
  }
  if (quoted) throw ValidationError("csv: unterminated quoted field");
  return fields;
}

}  // namespace

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_csv(const std::vector<Column>& schema, const std::vector<Row>& rows) {
  std::string out;
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (c) out += ',';
    append_text(out, schema[c].name);
  }
  out += '\n';
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Row& row = rows[r];
    if (row.size() != schema.size()) {
      throw ValidationError("csv row " + std::to_string(r) + ": " + std::to_string(row.size()) +
                            " cells for " + std::to_string(schema.size()) + " columns");
    }
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (!matches(row[c], schema[c].type)) {
        throw ValidationError("csv row " + std::to_string(r) + ": column '" + schema[c].name +
                              "' expects " + std::string(type_name(schema[c].type)));
      }
      if (c) out += ',';
      if (const auto* d = std::get_if<double>(&row[c])) {
        out += format_real(*d);
      } else if (const auto* i = std::get_if<std::uint64_t>(&row[c])) {
        out += std::to_string(*i);
      } else {
        append_text(out, std::get<std::string>(row[c]));
      }
    }
    out += '\n';
  }
  return out;
}

void emit_report(const std::vector<Row>& rows, const std::vector<Column>& schema,
                 const std::filesystem::path& path) {
  const std::string text = format_csv(schema, rows);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  out.close();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

std::vector<Row> parse_csv(std::string_view text, const std::vector<Column>& schema) {
  std::size_t pos = 0;
  const auto header = split_record(text, pos);
  if (header.size() != schema.size()) throw ValidationError("csv: header does not match schema");
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (header[c] != schema[c].name) {
      throw ValidationError("csv: header column " + std::to_string(c) + " is '" + header[c] +
                            "', expected '" + schema[c].name + "'");
    }
  }
  std::vector<Row> rows;
  while (pos < text.size()) {
    const std::size_t r = rows.size();
    const auto fields = split_record(text, pos);
    if (fields.size() != schema.size()) {
      throw ValidationError("csv row " + std::to_string(r) + ": wrong number of fields");
    }
    Row row;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const std::string& f = fields[c];
      char* end = nullptr;
      errno = 0;
      switch (schema[c].type) {
        case ColumnType::Real:
          row.emplace_back(std::strtod(f.c_str(), &end));
          break;
        case ColumnType::Integer:
          row.emplace_back(static_cast<std::uint64_t>(std::strtoull(f.c_str(), &end, 10)));
          break;
        case ColumnType::Text:
          row.emplace_back(f);
          continue;
      }
      // strtod flags subnormals with ERANGE even when exact, so only integers check errno.
      const bool range = schema[c].type == ColumnType::Integer && (errno == ERANGE || f[0] == '-');
      if (f.empty() || *end != '\0' || range) {
        throw ValidationError("csv row " + std::to_string(r) + ": cannot parse '" + f +
                              "' in column '" + schema[c].name + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace urae::harness
