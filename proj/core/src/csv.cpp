#include "dendrostate/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dendrostate/errors.hpp"

namespace dendrostate {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

bool needs_quoting(const std::string& s) {
  return s.find_first_of(",\"\n") != std::string::npos;
}

}  // namespace

CsvTable CsvTable::read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open CSV file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

CsvTable CsvTable::parse(const std::string& text, const std::string& origin) {
  CsvTable t;
  t.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError(origin + ": empty CSV, header row required");
  t.header_ = split_line(line);
  for (std::size_t c = 0; c < t.header_.size(); ++c) t.index_[t.header_[c]] = c;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto cells = split_line(line);
    if (cells.size() != t.header_.size()) {
      throw DataError(origin + ":" + std::to_string(lineno) + ": expected " +
                      std::to_string(t.header_.size()) + " columns, got " +
                      std::to_string(cells.size()));
    }
    t.cells_.push_back(std::move(cells));
  }
  return t;
}

bool CsvTable::has_column(const std::string& name) const { return index_.count(name) > 0; }

std::size_t CsvTable::column(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw DataError(origin_ + ": missing column '" + name + "'");
  return it->second;
}

const std::string& CsvTable::cell(std::size_t row, std::size_t col) const {
  return cells_.at(row).at(col);
}

const std::string& CsvTable::cell(std::size_t row, const std::string& name) const {
  return cells_.at(row).at(column(name));
}

double CsvTable::num(std::size_t row, std::size_t col) const {
  const std::string& s = cells_.at(row).at(col);
  if (s == "nan" || s == "NaN" || s.empty()) return std::nan("");
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw DataError(origin_ + ": row " + std::to_string(row + 2) + " column '" +
                    header_[col] + "': not a number: '" + s + "'");
  }
  return v;
}

double CsvTable::num(std::size_t row, const std::string& name) const {
  return num(row, column(name));
}

long long CsvTable::integer(std::size_t row, const std::string& name) const {
  const std::string& s = cells_.at(row).at(column(name));
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw DataError(origin_ + ": row " + std::to_string(row + 2) + " column '" + name +
                    "': not an integer: '" + s + "'");
  }
  return v;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : path_(path), width_(header.size()) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw DataError("cannot open for writing: " + path);
  out_ = f;
  row(header);
}

CsvWriter::~CsvWriter() { close(); }

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (!out_) throw DataError("CSV writer already closed: " + path_);
  if (cells.size() != width_) {
    throw DataError(path_ + ": row width " + std::to_string(cells.size()) +
                    " does not match header width " + std::to_string(width_));
  }
  std::FILE* f = static_cast<std::FILE*>(out_);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) std::fputc(',', f);
    if (needs_quoting(cells[i])) {
      std::fputc('"', f);
      for (char c : cells[i]) {
        if (c == '"') std::fputc('"', f);
        std::fputc(c, f);
      }
      std::fputc('"', f);
    } else {
      std::fwrite(cells[i].data(), 1, cells[i].size(), f);
    }
  }
  std::fputc('\n', f);
}

void CsvWriter::close() {
  if (out_) {
    std::fclose(static_cast<std::FILE*>(out_));
    out_ = nullptr;
  }
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  (void)ec;
  return std::string(buf, ptr);
}

std::string format_number(long long value) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace dendrostate
