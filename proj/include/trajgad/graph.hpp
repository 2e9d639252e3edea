#pragma once

#include "trajgad/error.hpp"
#include "trajgad/matrix.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace trajgad {

using NodeId = std::uint32_t;
using EdgeId = std::uint32_t;

struct Edge {
    NodeId u;
    NodeId v;
    friend bool operator==(const Edge&, const Edge&) = default;
};

/// Immutable undirected graph with node features and optional anomaly labels.
///
/// Edges are stored once as (u, v) with u < v, sorted lexicographically, and
/// indexed by EdgeId. Neighborhoods are CSR rows sorted by neighbor id; each
/// slot also records the EdgeId it came from so per-edge state (trust) can be
/// addressed from either endpoint. Self-loops are never stored.
class Graph {
public:
    Graph() = default;

    /// Builds from an arbitrary pair list. Duplicates (in either orientation)
    /// collapse; self-loops are dropped and counted. Throws FormatError on
    /// out-of-range endpoints and ShapeError on feature/label size mismatch.
    Graph(std::size_t num_nodes, std::vector<Edge> edges, Matrix features,
          std::optional<std::vector<std::uint8_t>> labels = std::nullopt)
        : num_nodes_(num_nodes), features_(std::move(features)), labels_(std::move(labels)) {
        if (static_cast<std::size_t>(features_.rows()) != num_nodes_)
            throw ShapeError("feature rows (" + std::to_string(features_.rows()) +
                             ") != node count (" + std::to_string(num_nodes_) + ")");
        if (num_nodes_ > 0 && features_.cols() < 1)
            throw ShapeError("feature dimension must be at least 1");
        if (labels_ && labels_->size() != num_nodes_)
            throw ShapeError("label count (" + std::to_string(labels_->size()) +
                             ") != node count (" + std::to_string(num_nodes_) + ")");
        build(std::move(edges));
    }

    [[nodiscard]] std::size_t num_nodes() const noexcept { return num_nodes_; }
    [[nodiscard]] std::size_t num_edges() const noexcept { return edges_.size(); }
    [[nodiscard]] std::size_t feature_dim() const noexcept {
        return static_cast<std::size_t>(features_.cols());
    }

    [[nodiscard]] const std::vector<Edge>& edges() const noexcept { return edges_; }
    [[nodiscard]] const Matrix& features() const noexcept { return features_; }

    [[nodiscard]] std::span<const NodeId> neighbors(NodeId i) const {
        return {adjacency_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
    }
    [[nodiscard]] std::span<const EdgeId> incident_edges(NodeId i) const {
        return {slot_edge_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
    }
    [[nodiscard]] std::size_t degree(NodeId i) const { return offsets_[i + 1] - offsets_[i]; }

    [[nodiscard]] bool has_edge(NodeId i, NodeId j) const {
        const auto nb = neighbors(i);
        return std::binary_search(nb.begin(), nb.end(), j);
    }

    [[nodiscard]] bool has_labels() const noexcept { return labels_.has_value(); }
    [[nodiscard]] const std::optional<std::vector<std::uint8_t>>& labels() const noexcept {
        return labels_;
    }
    [[nodiscard]] std::size_t num_anomalies() const {
        if (!labels_) return 0;
        return static_cast<std::size_t>(std::count(labels_->begin(), labels_->end(), 1));
    }

    [[nodiscard]] const std::optional<std::vector<std::string>>& node_ids() const noexcept {
        return node_ids_;
    }
    void set_node_ids(std::vector<std::string> ids) {
        if (ids.size() != num_nodes_) throw ShapeError("node id count != node count");
        node_ids_ = std::move(ids);
    }
    [[nodiscard]] std::string node_name(NodeId i) const {
        return node_ids_ ? (*node_ids_)[i] : std::to_string(i);
    }

    /// Number of self-loop pairs discarded at construction.
    [[nodiscard]] std::size_t dropped_self_loops() const noexcept { return dropped_self_loops_; }
    /// Number of duplicate pairs collapsed at construction.
    [[nodiscard]] std::size_t collapsed_duplicates() const noexcept { return collapsed_duplicates_; }

private:
    void build(std::vector<Edge> raw) {
        const std::size_t total = raw.size();
        std::size_t w = 0;
        for (const Edge& e : raw) {
            if (e.u >= num_nodes_ || e.v >= num_nodes_)
                throw FormatError("edge endpoint out of range: " + std::to_string(e.u) + " " +
                                  std::to_string(e.v) + " (N=" + std::to_string(num_nodes_) + ")");
            if (e.u == e.v) {
                ++dropped_self_loops_;
                continue;
            }
            raw[w++] = e.u < e.v ? e : Edge{e.v, e.u};
        }
        raw.resize(w);
        std::sort(raw.begin(), raw.end(),
                  [](const Edge& a, const Edge& b) { return a.u != b.u ? a.u < b.u : a.v < b.v; });
        raw.erase(std::unique(raw.begin(), raw.end()), raw.end());
        collapsed_duplicates_ = total - dropped_self_loops_ - raw.size();
        edges_ = std::move(raw);

        offsets_.assign(num_nodes_ + 1, 0);
        for (const Edge& e : edges_) {
            ++offsets_[e.u + 1];
            ++offsets_[e.v + 1];
        }
        for (std::size_t i = 0; i < num_nodes_; ++i) offsets_[i + 1] += offsets_[i];

        adjacency_.resize(2 * edges_.size());
        slot_edge_.resize(2 * edges_.size());
        std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
        // Edges are sorted by (u, v): filling in this order leaves each CSR row
        // sorted by neighbor id without a second pass.
        for (EdgeId id = 0; id < edges_.size(); ++id) {
            const Edge& e = edges_[id];
            const std::size_t s = cursor[e.v]++;
            adjacency_[s] = e.u;
            slot_edge_[s] = id;
        }
        for (EdgeId id = 0; id < edges_.size(); ++id) {
            const Edge& e = edges_[id];
            const std::size_t s = cursor[e.u]++;
            adjacency_[s] = e.v;
            slot_edge_[s] = id;
        }
    }

    std::size_t num_nodes_ = 0;
    std::vector<Edge> edges_;
    std::vector<std::size_t> offsets_{0};
    std::vector<NodeId> adjacency_;
    std::vector<EdgeId> slot_edge_;
    Matrix features_;
    std::optional<std::vector<std::uint8_t>> labels_;
    std::optional<std::vector<std::string>> node_ids_;
    std::size_t dropped_self_loops_ = 0;
    std::size_t collapsed_duplicates_ = 0;
};

} // namespace trajgad
