#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "skycomp/errors.hpp"

namespace skycomp {

// 9 significant digits, '.' decimal separator; diff-able golden files.
inline std::string fmt_g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

class CsvBuilder {
 public:
  void comment(const std::string& text) {
    out_ += "# " + text + "\n";
  }
  void header(const std::vector<std::string>& cols) { line(cols); }
  void row(const std::vector<std::string>& cells) { line(cells); }
  const std::string& str() const { return out_; }

 private:
  void line(const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
      if (i > 0) out_ += ',';
      out_ += cells[i];
    }
    out_ += '\n';
  }
  std::string out_;
};

// Writes via a temporary file and rename so readers never observe partial
// output.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace skycomp
