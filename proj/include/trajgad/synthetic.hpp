#pragma once

#include "trajgad/error.hpp"
#include "trajgad/graph.hpp"
#include "trajgad/rng.hpp"

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace trajgad {

/// Stochastic block model parameters. Features of block b are drawn from
/// N(mean_b, feature_sd^2 I) where each coordinate of mean_b is drawn from
/// N(0, block_separation^2).
struct SbmSpec {
    std::size_t n_per_block = 50;
    std::size_t n_blocks = 2;
    double p_in = 0.2;
    double p_out = 0.01;
    std::size_t feature_dim = 8;
    double block_separation = 2.0;
    double feature_sd = 1.0;
};

namespace detail {

// Geometric skipping (Batagelj & Brandes 2005) over a linear index space of
// `count` candidate pairs; emit(idx) is called for each selected index in
// increasing order.
template <class Emit>
void bernoulli_skip(std::uint64_t count, double p, CounterRng& rng, Emit&& emit) {
    if (count == 0 || p <= 0.0) return;
    if (p >= 1.0) {
        for (std::uint64_t i = 0; i < count; ++i) emit(i);
        return;
    }
    const double log_q = std::log1p(-p);
    std::uint64_t idx = 0;
    while (true) {
        const double u = rng.uniform();
        const double skip = std::floor(std::log1p(-u) / log_q);
        if (skip >= static_cast<double>(count - idx)) return;
        idx += static_cast<std::uint64_t>(skip);
        emit(idx);
        if (++idx >= count) return;
    }
}

} // namespace detail

/// Deterministic SBM. Edge sampling uses one RNG stream per block pair
/// and features use a separate stream, so outputs depend only on (spec, seed).
inline Graph generate_sbm(const SbmSpec& spec, Seed seed) {
    const std::size_t n = spec.n_per_block * spec.n_blocks;
    if (n == 0) throw EmptyGraphError("SBM with zero nodes");
    if (!(spec.p_out >= 0.0 && spec.p_out < spec.p_in && spec.p_in <= 1.0))
        throw InvalidArgument("SBM requires 0 <= p_out < p_in <= 1");
    if (spec.feature_dim < 2) throw InvalidArgument("SBM feature_dim must be >= 2");

    const std::uint64_t m = spec.n_per_block;
    std::vector<Edge> edges;
    for (std::size_t a = 0; a < spec.n_blocks; ++a) {
        for (std::size_t b = a; b < spec.n_blocks; ++b) {
            CounterRng rng(derive_seed(derive_seed(seed, "sbm-edges"), a * spec.n_blocks + b));
            const auto base_a = static_cast<NodeId>(a * m);
            const auto base_b = static_cast<NodeId>(b * m);
            if (a == b) {
                // Index k enumerates pairs (i, j), j < i, row by row.
                std::uint64_t row = 1, row_start = 0;
                detail::bernoulli_skip(m * (m - 1) / 2, spec.p_in, rng, [&](std::uint64_t k) {
                    while (k >= row_start + row) {
                        row_start += row;
                        ++row;
                    }
                    edges.push_back({base_a + static_cast<NodeId>(k - row_start),
                                     base_a + static_cast<NodeId>(row)});
                });
            } else {
                detail::bernoulli_skip(m * m, spec.p_out, rng, [&](std::uint64_t k) {
                    edges.push_back({base_a + static_cast<NodeId>(k / m),
                                     base_b + static_cast<NodeId>(k % m)});
                });
            }
        }
    }

    const auto d = static_cast<Eigen::Index>(spec.feature_dim);
    Matrix features(static_cast<Eigen::Index>(n), d);
    CounterRng frng(derive_seed(seed, "sbm-features"));
    Matrix means(static_cast<Eigen::Index>(spec.n_blocks), d);
    for (Eigen::Index b = 0; b < means.rows(); ++b)
        for (Eigen::Index c = 0; c < d; ++c) means(b, c) = frng.normal(0.0, spec.block_separation);
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        const auto b = static_cast<Eigen::Index>(static_cast<std::uint64_t>(i) / m);
        for (Eigen::Index c = 0; c < d; ++c) features(i, c) = frng.normal(means(b, c), spec.feature_sd);
    }
    return Graph(n, std::move(edges), std::move(features), std::vector<std::uint8_t>(n, 0));
}

/// Planted anomaly recipe.
///
/// Contextual anomalies keep their cluster but move: each coordinate is
/// shifted by contextual_shift * feature_scale with a random sign, and extra
/// noise lifts the variance to variance_inflation * feature_scale^2. Structural
/// anomalies gain all pairwise edges among themselves.
struct AnomalyPlan {
    double contextual_fraction = 0.0;
    double structural_fraction = 0.0;
    Seed seed = 0;
    double contextual_shift = 5.0;
    double variance_inflation = 2.0;
    double feature_scale = 1.0;
};

/// max(1, floor(f * N)) for f > 0, else 0.
inline std::size_t planted_count(double fraction, std::size_t n) {
    if (fraction <= 0.0) return 0;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n))));
}

struct InjectionResult {
    Graph graph;
    std::vector<NodeId> contextual;
    std::vector<NodeId> structural;
    bool empty_plan = false;  // plan planted nothing (caller may warn)
};

inline InjectionResult inject_anomalies(const Graph& g, const AnomalyPlan& plan) {
    for (double f : {plan.contextual_fraction, plan.structural_fraction})
        if (!(f >= 0.0 && f < 0.5)) throw InvalidArgument("anomaly fractions must lie in [0, 0.5)");
    if (!(plan.variance_inflation >= 1.0)) throw InvalidArgument("variance_inflation must be >= 1");
    if (g.num_anomalies() > 0) throw InvalidArgument("input graph already carries anomaly labels");

    const std::size_t n = g.num_nodes();
    const std::size_t n_ctx = planted_count(plan.contextual_fraction, n);
    const std::size_t n_str = planted_count(plan.structural_fraction, n);
    if (n_ctx + n_str > n) throw InvalidArgument("plan requests more anomalies than nodes");

    CounterRng pick(derive_seed(plan.seed, "inject-pick"));
    std::vector<NodeId> order(n);
    std::iota(order.begin(), order.end(), NodeId{0});
    // Partial Fisher-Yates: only the first n_ctx + n_str slots are needed.
    for (std::size_t i = 0; i < n_ctx + n_str; ++i) {
        const std::size_t j = i + pick.below(n - i);
        std::swap(order[i], order[j]);
    }

    InjectionResult out{Graph{}, {order.begin(), order.begin() + n_ctx},
                        {order.begin() + n_ctx, order.begin() + n_ctx + n_str}, n_ctx + n_str == 0};
    std::sort(out.contextual.begin(), out.contextual.end());
    std::sort(out.structural.begin(), out.structural.end());

    Matrix x = g.features();
    CounterRng frng(derive_seed(plan.seed, "inject-features"));
    const double shift = plan.contextual_shift * plan.feature_scale;
    const double extra_sd = plan.feature_scale * std::sqrt(plan.variance_inflation - 1.0);
    for (NodeId i : out.contextual)
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            const double sign = (frng.next_u64() & 1U) ? 1.0 : -1.0;
            x(i, c) += sign * shift + frng.normal(0.0, extra_sd);
        }

    std::vector<Edge> edges = g.edges();
    for (std::size_t a = 0; a < out.structural.size(); ++a)
        for (std::size_t b = a + 1; b < out.structural.size(); ++b)
            edges.push_back({out.structural[a], out.structural[b]});

    std::vector<std::uint8_t> labels(n, 0);
    for (NodeId i : out.contextual) labels[i] = 1;
    for (NodeId i : out.structural) labels[i] = 1;

    out.graph = Graph(n, std::move(edges), std::move(x), std::move(labels));
    if (g.node_ids()) out.graph.set_node_ids(*g.node_ids());
    return out;
}

} // namespace trajgad
