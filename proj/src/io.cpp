#include "kronmem/io.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace kronmem::io {

namespace {

constexpr char kMagic[4] = {'K', 'M', 'M', '1'};

void fail(const std::string& path, const std::string& what) {
    throw std::runtime_error(path + ": " + what);
}

}  // namespace

void write_matrix(const std::string& path, const Matrix& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(path, "cannot open for writing");
    out.write(kMagic, 4);
    const std::uint32_t rows = static_cast<std::uint32_t>(m.rows());
    const std::uint32_t cols = static_cast<std::uint32_t>(m.cols());
    out.write(reinterpret_cast<const char*>(&rows), 4);
    out.write(reinterpret_cast<const char*>(&cols), 4);
    for (Index r = 0; r < m.rows(); ++r) {
        for (Index c = 0; c < m.cols(); ++c) {
            const double v = m(r, c);
            out.write(reinterpret_cast<const char*>(&v), 8);
        }
    }
    if (!out) fail(path, "write error");
}

Matrix read_matrix(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(path, "cannot open for reading");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != std::string(kMagic, 4))
        fail(path, "not a KMM1 matrix file");
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    in.read(reinterpret_cast<char*>(&rows), 4);
    in.read(reinterpret_cast<char*>(&cols), 4);
    if (!in) fail(path, "truncated header");
    Matrix m(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r) {
        for (std::uint32_t c = 0; c < cols; ++c) {
            double v = 0.0;
            in.read(reinterpret_cast<char*>(&v), 8);
            if (!in) fail(path, "truncated data");
            m(r, c) = v;
        }
    }
    return m;
}

void write_csv_matrix(const std::string& path, const Matrix& m) {
    std::ofstream out(path);
    if (!out) fail(path, "cannot open for writing");
    for (Index r = 0; r < m.rows(); ++r) {
        for (Index c = 0; c < m.cols(); ++c) {
            if (c) out << ',';
            out << format_double(m(r, c));
        }
        out << '\n';
    }
}

Matrix read_csv_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(path, "cannot open for reading");
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (!rows.empty() && row.size() != rows.front().size())
            fail(path, "ragged CSV rows");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) fail(path, "empty CSV matrix");
    Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (Index r = 0; r < m.rows(); ++r)
        for (Index c = 0; c < m.cols(); ++c)
            m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    return m;
}

void write_manifest(const std::string& path, const Manifest& manifest) {
    std::ofstream out(path);
    if (!out) fail(path, "cannot open for writing");
    for (const auto& [key, value] : manifest) out << key << " = " << value << '\n';
}

Manifest read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(path, "cannot open for reading");
    Manifest manifest;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto pos = line.find('=');
        if (pos == std::string::npos) fail(path, "malformed manifest line: " + line);
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        manifest[trim(line.substr(0, pos))] = trim(line.substr(pos + 1));
    }
    return manifest;
}

std::string format_double(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

void write_index_list(const std::string& path, const std::vector<Index>& indices) {
    std::ofstream out(path);
    if (!out) fail(path, "cannot open for writing");
    for (Index i : indices) out << i << '\n';
}

std::vector<Index> read_index_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(path, "cannot open for reading");
    std::vector<Index> indices;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        indices.push_back(static_cast<Index>(std::stoll(line)));
    }
    return indices;
}

}  // namespace kronmem::io
