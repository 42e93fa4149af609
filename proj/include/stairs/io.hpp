#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "stairs/errors.hpp"
#include "stairs/perceptron.hpp"
#include "stairs/two_layer.hpp"

namespace stairs {

inline constexpr const char* kLibraryVersion = "0.3.0";

/// Shortest round-trip text for a double ("nan", "inf" and "-inf" for non-finite values).
inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0.0 ? "inf" : "-inf";
  char buf[32];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

inline std::string format_optional(const std::optional<std::int64_t>& v) {
  return v ? std::to_string(*v) : std::string();
}

inline void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

inline void write_text_file(const std::filesystem::path& path, const std::string& body) {
  if (path.has_parent_path()) ensure_directory(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << body;
  out.flush();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Minimal CSV builder; fields are numbers or identifiers and never need quoting.
class CsvWriter {
 public:
  explicit CsvWriter(const std::vector<std::string>& header) : columns_(header.size()) { row(header); }

  CsvWriter& row(const std::vector<std::string>& fields) {
    if (fields.size() != columns_) throw InvalidParameter("CsvWriter: row width does not match the header");
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) body_ += ',';
      body_ += fields[i];
    }
    body_ += '\n';
    return *this;
  }

  const std::string& str() const noexcept { return body_; }
  void save(const std::filesystem::path& path) const { write_text_file(path, body_); }

 private:
  std::size_t columns_;
  std::string body_;
};

inline std::string trace_csv(const OverlapTrace& trace) {
  CsvWriter csv({"t", "alpha_u", "alpha_v"});
  for (const auto& p : trace) csv.row({std::to_string(p.t), format_number(p.alpha_u), format_number(p.alpha_v)});
  return csv.str();
}

inline std::string training_log_csv(const TrainingLog& log) {
  CsvWriter csv({"step", "loss_train", "err_full", "err_mean_only", "err_mean_cov", "err_gauss_equiv", "top5_m",
                 "top5_u", "top5_v"});
  for (const auto& r : log) {
    csv.row({std::to_string(r.step), format_number(r.loss_train), format_number(r.err_full),
             format_number(r.err_mean_only), format_number(r.err_mean_cov), format_number(r.err_gauss_equiv),
             format_number(r.top5_m), format_number(r.top5_u), format_number(r.top5_v)});
  }
  return csv.str();
}

}  // namespace stairs
