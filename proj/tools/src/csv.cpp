#include "asyncheat/cli/csv.hpp"

#include <cstdio>

namespace asyncheat::cli {

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

std::string quoted(const std::string& text) {
  if (text.find_first_of(",\"\r\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc), columns_(header.size()) {
  if (!out_) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& h : header) cell(h);
  end_row();
}

CsvWriter& CsvWriter::cell(const std::string& text) {
  if (pending_ > 0) out_ << ',';
  out_ << quoted(text);
  ++pending_;
  return *this;
}

void CsvWriter::end_row() {
  if (pending_ != columns_) {
    throw std::logic_error(path_.string() + ": row has " + std::to_string(pending_) +
                           " cells, header has " + std::to_string(columns_));
  }
  out_ << '\n';
  pending_ = 0;
}

void CsvWriter::close() {
  out_.flush();
  if (!out_) throw IoError("failed writing " + path_.string());
  out_.close();
}

void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create output directory " + dir.string() +
                  (ec ? ": " + ec.message() : ""));
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace asyncheat::cli
