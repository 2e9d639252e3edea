#pragma once

// Empirical check of the normal-node boundedness guarantee.
//
// With D contractive (constant L < 1) and fixed point z*, the error
// e^(k) = z^(k) - z* of any node obeys
//
//   ||e^(k+1)|| <= (1 - a + a L) ||e^(k)|| + (1 - a) ||delta^(k)||,
//   delta^(k) = c^(k) - z^(k),
//
// hence with eps = sup_k ||delta^(k)|| and rho = 1 - a + a L,
//
//   ||e^(k)|| <= rho^k ||e^(0)|| + (1 - a) eps / (1 - rho).

#include "trajgad/atc.hpp"
#include "trajgad/denoiser.hpp"
#include "trajgad/error.hpp"
#include "trajgad/graph.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace trajgad {

inline constexpr double kStabilityTolerance = 1e-9;

inline double contraction_factor(double alpha, double lipschitz) { return 1.0 - alpha + alpha * lipschitz; }

inline void check_contraction(double alpha, double lipschitz) {
    if (!(lipschitz < 1.0)) throw ContractionError("operator is not contractive (L_D = " + std::to_string(lipschitz) + " >= 1)");
    if (!(lipschitz >= 0.0)) throw InvalidArgument("Lipschitz constant must be nonnegative");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must lie in (0, 1]");
}

/// rho^k e0 + (1 - alpha) eps / (1 - rho), rho = 1 - alpha + alpha L.
inline double theoretical_bound(double alpha, double lipschitz, double epsilon, double e0, long k) {
    check_contraction(alpha, lipschitz);
    const double rho = contraction_factor(alpha, lipschitz);
    return std::pow(rho, static_cast<double>(k)) * e0 + (1.0 - alpha) * epsilon / (1.0 - rho);
}

struct StabilityCertificate {
    NodeId node = 0;
    double alpha = 0.0;
    double lipschitz = 0.0;
    double contraction_factor = 0.0;
    double epsilon_hat = 0.0;
    double initial_error = 0.0;
    std::vector<double> bound_curve;     // k = 0..K
    std::vector<double> observed_curve;  // ||e^(k)||, k = 0..K
    std::vector<double> perturbation;    // ||delta^(k)||, k = 0..K-1
    bool satisfied = false;
};

/// Runs the dynamics once and certifies every requested node. `reference`
/// is z*; it defaults to the operator's closed-form fixed point and must be
/// supplied for operators without one.
inline std::vector<StabilityCertificate> verify_stability_nodes(const Graph& g, const Matrix& z0,
                                                                const DenoiserOperator& op, const AtcConfig& cfg,
                                                                std::span<const NodeId> nodes,
                                                                std::optional<Vector> reference = std::nullopt,
                                                                unsigned workers = 1) {
    const auto l = op.lipschitz();
    if (!l || !(*l < 1.0))
        throw ContractionError("stability check needs a contractive denoiser (L_D < 1); got " +
                               (l ? std::to_string(*l) : std::string("unknown")));
    check_contraction(cfg.alpha, *l);
    if (!reference) reference = op.fixed_point();
    if (!reference) throw InvalidArgument("reference state z* required for this denoiser");
    if (reference->size() != z0.cols()) throw ShapeError("reference state dimension mismatch");
    for (NodeId i : nodes)
        if (i >= g.num_nodes()) throw InvalidArgument("node index out of range");

    const Vector& zs = *reference;
    std::vector<StabilityCertificate> certs(nodes.size());
    for (std::size_t t = 0; t < nodes.size(); ++t) {
        auto& c = certs[t];
        c.node = nodes[t];
        c.alpha = cfg.alpha;
        c.lipschitz = *l;
        c.contraction_factor = contraction_factor(cfg.alpha, *l);
        c.observed_curve.push_back((z0.row(nodes[t]).transpose() - zs).norm());
    }

    const auto observer = [&](const IterationView& v) {
        for (std::size_t t = 0; t < nodes.size(); ++t) {
            const NodeId i = nodes[t];
            certs[t].perturbation.push_back((v.consensus.row(i) - v.z.row(i)).norm());
            certs[t].observed_curve.push_back((v.next.row(i).transpose() - zs).norm());
        }
    };
    AtcConfig quiet = cfg;
    quiet.record_trace = false;
    run(g, z0, op, quiet, observer, workers);

    for (auto& c : certs) {
        c.initial_error = c.observed_curve.front();
        c.epsilon_hat = 0.0;
        for (double d : c.perturbation) c.epsilon_hat = std::max(c.epsilon_hat, d);
        c.satisfied = true;
        for (std::size_t k = 0; k < c.observed_curve.size(); ++k) {
            c.bound_curve.push_back(theoretical_bound(c.alpha, c.lipschitz, c.epsilon_hat, c.initial_error,
                                                      static_cast<long>(k)));
            if (!(c.observed_curve[k] <= c.bound_curve[k] + kStabilityTolerance)) c.satisfied = false;
        }
    }
    return certs;
}

inline StabilityCertificate verify_stability(const Graph& g, const Matrix& z0, const DenoiserOperator& op,
                                             const AtcConfig& cfg, NodeId node,
                                             std::optional<Vector> reference = std::nullopt) {
    const NodeId nodes[] = {node};
    return verify_stability_nodes(g, z0, op, cfg, nodes, std::move(reference)).front();
}

inline nlohmann::json to_json(const StabilityCertificate& c) {
    return {{"node", c.node},
            {"alpha", c.alpha},
            {"lipschitz", c.lipschitz},
            {"contraction_factor", c.contraction_factor},
            {"epsilon_hat", c.epsilon_hat},
            {"initial_error", c.initial_error},
            {"satisfied", c.satisfied},
            {"bound_curve", c.bound_curve},
            {"observed_curve", c.observed_curve}};
}

} // namespace trajgad
