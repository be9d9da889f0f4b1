#pragma once

#include "kronmem/core.hpp"

#include <map>
#include <string>
#include <vector>

namespace kronmem::io {

/// KMM1 binary matrix format: magic bytes "KMM1", two little-endian 32-bit
/// unsigned dims (rows, cols), then rows*cols little-endian 64-bit floats in
/// row-major order.
void write_matrix(const std::string& path, const Matrix& m);
Matrix read_matrix(const std::string& path);

/// Headerless comma-separated matrix files.
void write_csv_matrix(const std::string& path, const Matrix& m);
Matrix read_csv_matrix(const std::string& path);

/// Plain text key-value manifest, one "key = value" per line, keys sorted.
using Manifest = std::map<std::string, std::string>;
void write_manifest(const std::string& path, const Manifest& manifest);
Manifest read_manifest(const std::string& path);

/// Round-trip exact decimal formatting for doubles (17 significant digits).
std::string format_double(double value);

void write_index_list(const std::string& path, const std::vector<Index>& indices);
std::vector<Index> read_index_list(const std::string& path);

}  // namespace kronmem::io
