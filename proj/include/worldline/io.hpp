#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "worldline/errors.hpp"

namespace wl {

// ---------------------------------------------------------------------------
// Content hashing (FNV-1a 64). Used for manifests and covariance fingerprints.
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

inline std::uint64_t fnv1a64(const std::vector<double>& v) {
    return fnv1a64(v.data(), v.size() * sizeof(double));
}

inline std::string hex64(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::uint64_t hash_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw io_error("cannot open file for hashing: " + p.string());
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
        h = fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
    return h;
}

// ---------------------------------------------------------------------------
// Numeric formatting. 15 significant digits, locale-independent.
// ---------------------------------------------------------------------------

inline std::string fmt_g15(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.15g", x);
    return buf;
}

/// Column-oriented CSV writer: header row then one row per index.
inline void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                      const std::vector<const std::vector<double>*>& columns) {
    if (!columns.empty())
        for (const auto* c : columns)
            if (c->size() != columns.front()->size())
                throw io_error("csv columns have unequal length: " + path.string());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open for writing: " + path.string());
    for (std::size_t j = 0; j < header.size(); ++j)
        out << (j ? "," : "") << header[j];
    out << "\n";
    std::size_t rows = columns.empty() ? 0 : columns.front()->size();
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < columns.size(); ++j)
            out << (j ? "," : "") << fmt_g15((*columns[j])[i]);
        out << "\n";
    }
    if (!out) throw io_error("write failed: " + path.string());
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open for writing: " + path.string());
    out << text;
    if (!out) throw io_error("write failed: " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open for reading: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace wl
