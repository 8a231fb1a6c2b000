#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

namespace dendrostate {

// Minimal CSV support: UTF-8, comma separated, header row required.
// Values containing commas or quotes are double-quoted on write and
// unquoted on read. This covers every file schema the tool emits or
// consumes; it is not a general CSV parser.
class CsvTable {
 public:
  static CsvTable read_file(const std::string& path);
  static CsvTable parse(const std::string& text, const std::string& origin = "<string>");

  const std::vector<std::string>& header() const { return header_; }
  std::size_t rows() const { return cells_.size(); }
  std::size_t cols() const { return header_.size(); }

  bool has_column(const std::string& name) const;
  // Throws DataError naming the missing column.
  std::size_t column(const std::string& name) const;

  const std::string& cell(std::size_t row, std::size_t col) const;
  const std::string& cell(std::size_t row, const std::string& name) const;
  double num(std::size_t row, std::size_t col) const;
  double num(std::size_t row, const std::string& name) const;
  long long integer(std::size_t row, const std::string& name) const;

 private:
  std::string origin_;
  std::vector<std::string> header_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<std::string>> cells_;
};

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void row(const std::vector<std::string>& cells);
  void close();

 private:
  std::string path_;
  std::size_t width_ = 0;
  void* out_ = nullptr;  // FILE*
};

// Shortest round-trip decimal representation (via std::to_chars).
std::string format_number(double value);
std::string format_number(long long value);

}  // namespace dendrostate
