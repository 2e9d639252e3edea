#pragma once

#include "trajgad/graph.hpp"
#include "trajgad/matrix.hpp"
#include "trajgad/parallel.hpp"
#include "trajgad/rng.hpp"

#include <cmath>

namespace trajgad {

struct EncoderConfig {
    int num_layers = 2;
    std::size_t latent_dim = 16;
    Seed projection_seed = 0;
    bool use_nonlinearity = true;  // max(0, x) between layers, never after the last
};

/// One symmetric-normalized propagation with a virtual self-loop:
/// out_i = sum_{j in N(i) + {i}} h_j / sqrt(d_i d_j), d_i = deg(i) + 1.
/// Per row the self term is added first, then neighbors in ascending order.
inline Matrix normalized_propagate(const Graph& g, const Matrix& h, unsigned workers = 1) {
    if (static_cast<std::size_t>(h.rows()) != g.num_nodes())
        throw ShapeError("propagate: row count != node count");
    const auto n = static_cast<Eigen::Index>(g.num_nodes());
    std::vector<double> inv_sqrt_deg(g.num_nodes());
    for (NodeId i = 0; i < g.num_nodes(); ++i)
        inv_sqrt_deg[i] = 1.0 / std::sqrt(static_cast<double>(g.degree(i) + 1));

    Matrix out(n, h.cols());
    parallel_for(g.num_nodes(), workers, [&](std::size_t begin, std::size_t end) {
        for (auto i = static_cast<NodeId>(begin); i < end; ++i) {
            const double si = inv_sqrt_deg[i];
            out.row(i) = (si * si) * h.row(i);
            for (NodeId j : g.neighbors(i)) out.row(i) += (si * inv_sqrt_deg[j]) * h.row(j);
        }
    });
    return out;
}

/// Glorot-uniform projection for one layer: entries iid U[-s, s] with
/// s = sqrt(6 / (fan_in + fan_out)), drawn row-major from the layer's stream.
inline Matrix projection_weights(Seed projection_seed, int layer, std::size_t fan_in,
                                 std::size_t fan_out) {
    CounterRng rng(derive_seed(derive_seed(projection_seed, "encoder-layer"),
                               static_cast<std::uint64_t>(layer)));
    const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix w(static_cast<Eigen::Index>(fan_in), static_cast<Eigen::Index>(fan_out));
    for (Eigen::Index r = 0; r < w.rows(); ++r)
        for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-s, s);
    return w;
}

/// Untrained shallow GCN: each layer propagates, projects to latent_dim and
/// (except the last) applies ReLU. With zero layers the features are
/// returned as-is when the widths match, else projected once.
inline Matrix encode(const Graph& g, const EncoderConfig& cfg, unsigned workers = 1) {
    if (cfg.num_layers < 0) throw InvalidArgument("encoder num_layers must be >= 0");
    if (cfg.latent_dim < 1) throw InvalidArgument("encoder latent_dim must be >= 1");
    const Matrix& x = g.features();
    if (cfg.num_layers == 0) {
        if (g.feature_dim() == cfg.latent_dim) return x;
        return x * projection_weights(cfg.projection_seed, 0, g.feature_dim(), cfg.latent_dim);
    }
    Matrix h = x;
    for (int l = 0; l < cfg.num_layers; ++l) {
        const Matrix w = projection_weights(cfg.projection_seed, l, static_cast<std::size_t>(h.cols()),
                                            cfg.latent_dim);
        h = normalized_propagate(g, h, workers) * w;
        if (cfg.use_nonlinearity && l + 1 < cfg.num_layers) h = h.cwiseMax(0.0);
    }
    return h;
}

} // namespace trajgad
