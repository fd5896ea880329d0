#pragma once

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace asyncheat::cli {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 17 significant digits, enough to round-trip a double.
std::string format_double(double x);

/// RFC-4180 writer with LF line endings. The header is written on open.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

  CsvWriter& cell(const std::string& text);
  CsvWriter& cell(double x) { return cell(format_double(x)); }
  CsvWriter& cell(long long x) { return cell(std::to_string(x)); }
  CsvWriter& cell(int x) { return cell(static_cast<long long>(x)); }
  CsvWriter& cell(std::size_t x) { return cell(std::to_string(x)); }
  void end_row();

  /// Flushes and reports any write failure.
  void close();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t columns_;
  std::size_t pending_ = 0;
};

/// Creates the directory (and parents) or throws IoError.
void ensure_directory(const std::filesystem::path& dir);

/// Writes text to a file in binary mode or throws IoError.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace asyncheat::cli
