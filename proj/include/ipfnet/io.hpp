// Plain-text formats shared by all tools.
//
// Network triplet file (UTF-8, LF):
//   m n nnz
//   i j w        (nnz lines, 0-based indices, row-major sorted, decimal weight)
//
// Marginal file: one decimal per line.
//
// Weights are written in shortest round-trip form, so write/read reproduces
// every double bit-exactly.
#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ipfnet/network.hpp"

namespace ipfnet {

std::string format_double(double x);

void write_network(std::ostream& out, const SparseNetwork& net);
SparseNetwork read_network(std::istream& in);
void write_network(const std::filesystem::path& path, const SparseNetwork& net);
SparseNetwork read_network(const std::filesystem::path& path);

void write_vector(std::ostream& out, const std::vector<double>& values);
/// Reads one decimal per line; blank trailing lines are ignored. When
/// expected_length is given, a different count raises InputError.
std::vector<double> read_vector(std::istream& in,
                                std::optional<std::size_t> expected_length = std::nullopt);
void write_vector(const std::filesystem::path& path, const std::vector<double>& values);
std::vector<double> read_vector(const std::filesystem::path& path,
                                std::optional<std::size_t> expected_length = std::nullopt);

}  // namespace ipfnet
