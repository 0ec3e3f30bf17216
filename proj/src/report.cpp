#include "knnmem/report.hpp"

#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "knnmem/error.hpp"
#include "knnmem/segment.hpp"

namespace knnmem {

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string encode_label(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '%' || c == '=' || c == ';') {
      char buf[4];
      std::snprintf(buf, sizeof(buf), "%%%02X", static_cast<unsigned char>(c));
      out += buf;
    } else {
      out += c;
    }
  }
  return out;
}

std::string decode_label(const std::string& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size()) {
      out += static_cast<char>(std::strtol(s.substr(i + 1, 2).c_str(), nullptr, 16));
      i += 2;
    } else {
      out += s[i];
    }
  }
  return out;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool row_has_data = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
      row_has_data = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      row_has_data = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (row_has_data || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      row_has_data = false;
    } else {
      field += c;
      row_has_data = true;
    }
  }
  if (row_has_data || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::uint64_t to_u64(const std::string& s, const char* column) {
  char* end = nullptr;
  const auto v = std::strtoull(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0') {
    throw Error(ErrorCode::kFormatError,
                std::string("report column ") + column + ": not an integer: '" + s + "'",
                column);
  }
  return v;
}

double to_double(const std::string& s, const char* column) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') {
    throw Error(ErrorCode::kFormatError,
                std::string("report column ") + column + ": not a number: '" + s + "'",
                column);
  }
  return v;
}

bool is_integer(const std::string& s) {
  return !s.empty() && s.find_first_not_of("0123456789") == std::string::npos;
}

}  // namespace

std::string report_to_csv(const ProtocolReport& report) {
  std::ostringstream out;
  out << kReportHeader << "\n";
  const auto tail = "," + std::to_string(report.k) + "," + std::to_string(report.seed) + ",";
  for (const auto& step : report.steps) {
    const auto head = csv_field(report.protocol) + "," + std::to_string(step.index) + "," +
                      std::to_string(step.support_size) + "," +
                      std::to_string(step.removed_or_added) + ",";
    std::string sizes;
    for (const auto& c : step.classes) {
      if (!sizes.empty()) sizes += ';';
      sizes += encode_label(c.label) + "=" + std::to_string(c.size);
    }
    out << head << csv_field(step.scope) << "," << csv_field(sizes) << ","
        << format_double(step.accuracy) << tail << step.generation << "\n";
    for (const auto& c : step.classes) {
      if (!c.accuracy) continue;
      out << head << csv_field(c.label) << "," << c.size << "," << format_double(*c.accuracy)
          << tail << step.generation << "\n";
    }
  }
  return out.str();
}

ProtocolReport report_from_csv(const std::string& csv) {
  const auto rows = parse_csv(csv);
  if (rows.empty()) {
    throw Error(ErrorCode::kFormatError, "report CSV has no header", "header");
  }
  std::string header;
  for (std::size_t i = 0; i < rows[0].size(); ++i) {
    header += (i ? "," : "") + rows[0][i];
  }
  if (header != kReportHeader) {
    throw Error(ErrorCode::kFormatError, "unexpected report header: " + header, "header");
  }

  ProtocolReport report;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != 10) {
      throw Error(ErrorCode::kFormatError,
                  "report row " + std::to_string(r) + " has " + std::to_string(row.size()) +
                      " fields, expected 10",
                  "row");
    }
    report.protocol = row[0];
    report.k = to_u64(row[7], "k");
    report.seed = to_u64(row[8], "seed");

    if (is_integer(row[5])) {
      if (report.steps.empty()) {
        throw Error(ErrorCode::kFormatError, "per-class row before any step row", "class");
      }
      auto& classes = report.steps.back().classes;
      bool matched = false;
      for (auto& c : classes) {
        if (c.label == row[4]) {
          c.accuracy = to_double(row[6], "accuracy");
          matched = true;
          break;
        }
      }
      if (!matched) {
        throw Error(ErrorCode::kFormatError,
                    "per-class row for unknown class '" + row[4] + "'", "class");
      }
      continue;
    }

    ReportStep step;
    step.index = to_u64(row[1], "step");
    step.support_size = to_u64(row[2], "support_size");
    step.removed_or_added = to_u64(row[3], "removed_or_added");
    step.scope = row[4];
    step.accuracy = to_double(row[6], "accuracy");
    step.generation = to_u64(row[9], "generation");
    std::stringstream parts(row[5]);
    std::string part;
    while (std::getline(parts, part, ';')) {
      const auto eq = part.rfind('=');
      if (eq == std::string::npos) {
        throw Error(ErrorCode::kFormatError, "bad per_class_size entry '" + part + "'",
                    "per_class_size");
      }
      step.classes.push_back(ClassStat{decode_label(part.substr(0, eq)),
                                       to_u64(part.substr(eq + 1), "per_class_size"),
                                       std::nullopt});
    }
    report.steps.push_back(std::move(step));
  }
  return report;
}

void emit_report(const ProtocolReport& report, const std::filesystem::path& path) {
  const auto text = report_to_csv(report);
  write_file_atomic(path, std::as_bytes(std::span(text.data(), text.size())));
}

ProtocolReport read_report(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return report_from_csv(std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

}  // namespace knnmem
