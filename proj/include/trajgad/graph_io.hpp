#pragma once

#include "trajgad/error.hpp"
#include "trajgad/graph.hpp"

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace trajgad {

// File formats
//   edges:    one "i j" pair per line, 0-indexed, whitespace separated;
//             blank lines and lines starting with '#' are skipped
//   features: headerless CSV of floats, row i is node i
//   labels:   one integer 0/1 per line

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::ifstream open_input(const std::filesystem::path& path, std::string_view what) {
    std::ifstream in(path);
    if (!in) throw FormatError(std::string(what) + " file not found or unreadable: " + path.string());
    return in;
}

inline double parse_double(std::string_view cell, const std::string& where) {
    cell = trim(cell);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size())
        throw ParseError("non-numeric feature cell '" + std::string(cell) + "' at " + where);
    return v;
}

} // namespace detail

struct EdgeList {
    std::vector<Edge> edges;
    std::size_t max_endpoint = 0;
};

inline EdgeList read_edge_file(const std::filesystem::path& path) {
    auto in = detail::open_input(path, "edge");
    EdgeList out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = detail::trim(line);
        if (t.empty() || t.front() == '#') continue;
        std::istringstream ss{std::string(t)};
        long long a = -1, b = -1;
        std::string extra;
        if (!(ss >> a >> b) || (ss >> extra) || a < 0 || b < 0 || a > UINT32_MAX || b > UINT32_MAX)
            throw FormatError("malformed edge line " + std::to_string(lineno) + " in " +
                              path.string() + ": '" + std::string(t) + "'");
        out.edges.push_back({static_cast<NodeId>(a), static_cast<NodeId>(b)});
        out.max_endpoint = std::max<std::size_t>(out.max_endpoint, std::max(a, b));
    }
    return out;
}

inline Matrix read_feature_file(const std::filesystem::path& path) {
    auto in = detail::open_input(path, "feature");
    std::vector<double> values;
    std::size_t cols = 0, rows = 0;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = detail::trim(line);
        if (t.empty()) continue;
        std::size_t n = 0;
        std::size_t start = 0;
        while (true) {
            const auto comma = t.find(',', start);
            const auto cell = t.substr(start, comma == std::string_view::npos ? t.size() - start
                                                                              : comma - start);
            values.push_back(detail::parse_double(cell, path.string() + ":" + std::to_string(lineno)));
            ++n;
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (rows == 0) cols = n;
        else if (n != cols)
            throw ShapeError("feature row " + std::to_string(lineno) + " has " + std::to_string(n) +
                             " columns, expected " + std::to_string(cols));
        ++rows;
    }
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    std::copy(values.begin(), values.end(), m.data());
    return m;
}

inline std::vector<std::uint8_t> read_label_file(const std::filesystem::path& path) {
    auto in = detail::open_input(path, "label");
    std::vector<std::uint8_t> labels;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = detail::trim(line);
        if (t.empty()) continue;
        if (t == "0") labels.push_back(0);
        else if (t == "1") labels.push_back(1);
        else
            throw ParseError("label line " + std::to_string(lineno) + " is not 0/1: '" +
                             std::string(t) + "'");
    }
    return labels;
}

/// Loads and validates a graph. N is the feature row count; edge endpoints
/// must lie below it. Self-loops are dropped (see Graph::dropped_self_loops).
inline Graph load_graph(const std::filesystem::path& edge_path,
                        const std::filesystem::path& feature_path,
                        const std::optional<std::filesystem::path>& label_path = std::nullopt) {
    Matrix features = read_feature_file(feature_path);
    const auto n = static_cast<std::size_t>(features.rows());
    EdgeList el = read_edge_file(edge_path);
    if (!el.edges.empty() && el.max_endpoint >= n)
        throw FormatError("edge endpoint " + std::to_string(el.max_endpoint) +
                          " out of range for " + std::to_string(n) + " feature rows");
    std::optional<std::vector<std::uint8_t>> labels;
    if (label_path) {
        labels = read_label_file(*label_path);
        if (labels->size() != n)
            throw ShapeError("label file has " + std::to_string(labels->size()) +
                             " rows but feature file has " + std::to_string(n));
    }
    return Graph(n, std::move(el.edges), std::move(features), std::move(labels));
}

} // namespace trajgad
