#include "ipfnet/io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <string_view>

namespace ipfnet {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

// Splits on runs of spaces/tabs.
std::vector<std::string_view> fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t k = 0;
  while (k < line.size()) {
    while (k < line.size() && (line[k] == ' ' || line[k] == '\t')) ++k;
    std::size_t start = k;
    while (k < line.size() && line[k] != ' ' && line[k] != '\t') ++k;
    if (k > start) out.push_back(line.substr(start, k - start));
  }
  return out;
}

template <typename T>
T parse_number(std::string_view tok, std::size_t line_no) {
  T value{};
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw InputError("line " + std::to_string(line_no) + ": cannot parse '" +
                     std::string(tok) + "'");
  }
  return value;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  return out;
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

void write_network(std::ostream& out, const SparseNetwork& net) {
  out << net.rows() << ' ' << net.cols() << ' ' << net.nnz() << '\n';
  for (const auto& e : net.entries()) {
    out << e.row << ' ' << e.col << ' ' << format_double(e.weight) << '\n';
  }
}

SparseNetwork read_network(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!trim(line).empty()) return true;
    }
    return false;
  };
  if (!next_line()) throw InputError("network file is empty");
  auto head = fields(trim(line));
  if (head.size() != 3) throw InputError("network header must be 'm n nnz'");
  auto m = parse_number<std::size_t>(head[0], line_no);
  auto n = parse_number<std::size_t>(head[1], line_no);
  auto nnz = parse_number<std::size_t>(head[2], line_no);

  std::vector<Entry> entries;
  entries.reserve(nnz);
  for (std::size_t k = 0; k < nnz; ++k) {
    if (!next_line()) {
      throw InputError("network file ends after " + std::to_string(k) + " of " +
                       std::to_string(nnz) + " entries");
    }
    auto f = fields(trim(line));
    if (f.size() != 3) {
      throw InputError("line " + std::to_string(line_no) + ": expected 'i j w'");
    }
    Entry e{parse_number<std::size_t>(f[0], line_no), parse_number<std::size_t>(f[1], line_no),
            parse_number<double>(f[2], line_no)};
    if (!entries.empty()) {
      const auto& prev = entries.back();
      if (e.row < prev.row || (e.row == prev.row && e.col <= prev.col)) {
        throw InputError("line " + std::to_string(line_no) +
                         ": entries must be row-major sorted without duplicates");
      }
    }
    if (!(e.weight > 0.0)) {
      throw InputError("line " + std::to_string(line_no) + ": weights must be positive");
    }
    entries.push_back(e);
  }
  if (next_line()) throw InputError("network file has more than nnz entries");
  return SparseNetwork::from_entries(m, n, std::move(entries));
}

void write_network(const std::filesystem::path& path, const SparseNetwork& net) {
  auto out = open_out(path);
  write_network(out, net);
}

SparseNetwork read_network(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_network(in);
}

void write_vector(std::ostream& out, const std::vector<double>& values) {
  for (double v : values) out << format_double(v) << '\n';
}

std::vector<double> read_vector(std::istream& in, std::optional<std::size_t> expected_length) {
  std::vector<double> values;
  std::string line;
  std::size_t line_no = 0;
  std::size_t blank_run = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto t = trim(line);
    if (t.empty()) {
      ++blank_run;
      continue;
    }
    if (blank_run > 0 && !values.empty()) {
      throw InputError("line " + std::to_string(line_no) + ": blank line inside marginal file");
    }
    blank_run = 0;
    values.push_back(parse_number<double>(t, line_no));
  }
  if (expected_length && values.size() != *expected_length) {
    throw InputError("marginal file has " + std::to_string(values.size()) +
                     " values, expected " + std::to_string(*expected_length));
  }
  return values;
}

void write_vector(const std::filesystem::path& path, const std::vector<double>& values) {
  auto out = open_out(path);
  write_vector(out, values);
}

std::vector<double> read_vector(const std::filesystem::path& path,
                                std::optional<std::size_t> expected_length) {
  auto in = open_in(path);
  return read_vector(in, expected_length);
}

}  // namespace ipfnet
