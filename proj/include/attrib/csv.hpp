#pragma once

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace attrib {

/// Formats a double with 17 significant digits ('.' decimal point), enough
/// to round-trip exactly; golden-file tests rely on this being stable.
inline std::string csv_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Minimal CSV writer: header row, UTF-8, fields quoted only when needed.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header)
      : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("csv: cannot open " + path);
    columns_ = header.size();
    write_row(header);
  }

  void row(const std::vector<std::string>& fields) {
    if (fields.size() != columns_) {
      throw std::logic_error("csv: column count mismatch");
    }
    write_row(fields);
  }

 private:
  void write_row(const std::vector<std::string>& fields) {
    for (size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ',';
      out_ << quoted(fields[i]);
    }
    out_ << '\n';
  }

  static std::string quoted(const std::string& f) {
    if (f.find_first_of(",\"\n") == std::string::npos) return f;
    std::string q = "\"";
    for (char c : f) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  }

  std::ofstream out_;
  size_t columns_ = 0;
};

}  // namespace attrib
