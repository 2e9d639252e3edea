#pragma once

#include "trajgad/atc.hpp"
#include "trajgad/error.hpp"
#include "trajgad/graph.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace trajgad {

enum class ReliabilityMode {
    paper_literal,  // sum of incident trust / (N - 1); non-edges count as zero trust
    neighbor_mean,  // sum of incident trust / deg(i)
};

inline std::string to_string(ReliabilityMode m) {
    return m == ReliabilityMode::paper_literal ? "paper_literal" : "neighbor_mean";
}

inline ReliabilityMode reliability_mode_from_string(const std::string& s) {
    if (s == "paper_literal") return ReliabilityMode::paper_literal;
    if (s == "neighbor_mean") return ReliabilityMode::neighbor_mean;
    throw InvalidArgument("unknown reliability mode '" + s + "'");
}

struct ScoreConfig {
    double beta = 1.0;    // conflict weight
    double lambda = 1.0;  // trajectory energy weight
    ReliabilityMode reliability_mode = ReliabilityMode::paper_literal;
    bool normalize_signals = false;

    void validate() const {
        if (!(beta >= 0.0 && std::isfinite(beta)) || !(lambda >= 0.0 && std::isfinite(lambda)))
            throw InvalidArgument("score weights must be finite and nonnegative");
    }
};

/// Isolated nodes, and every node of a single-node graph, get w = 0.
inline std::vector<double> reliability_weights(const TrustState& trust, const Graph& g, ReliabilityMode mode) {
    const std::size_t n = g.num_nodes();
    std::vector<double> w(n, 0.0);
    if (n <= 1) return w;
    for (NodeId i = 0; i < n; ++i) {
        const auto inc = g.incident_edges(i);
        if (inc.empty()) continue;
        double total = 0.0;
        for (EdgeId e : inc) total += trust.values[e];
        const double denom = mode == ReliabilityMode::paper_literal ? static_cast<double>(n - 1)
                                                                    : static_cast<double>(inc.size());
        w[i] = total / denom;
    }
    return w;
}

struct ScoreReport {
    std::vector<double> inconsistency;  // r_i = accumulated / K
    std::vector<double> reliability;    // w_i
    std::vector<double> conflict;       // cumulative, not divided by K
    std::vector<double> energy;         // E_i = accumulated / K
    std::vector<double> score;
    ScoreConfig config;
    int iterations = 0;

    [[nodiscard]] std::size_t size() const noexcept { return score.size(); }
};

/// Population z-score; a constant signal maps to all zeros. A spread at
/// rounding level relative to the largest magnitude counts as constant.
inline constexpr double kConstantSignalTolerance = 1e-13;

inline std::vector<double> zscore(std::span<const double> x) {
    std::vector<double> out(x.size(), 0.0);
    if (x.empty()) return out;
    const double n = static_cast<double>(x.size());
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / n);
    double scale = 0.0;
    for (double v : x) scale = std::max(scale, std::abs(v));
    if (!(sd > kConstantSignalTolerance * scale)) return out;
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean) / sd;
    return out;
}

/// score_i = r_i + (1 - w_i) + beta * conflict_i + lambda * E_i, with r and E
/// averaged over K and the conflict left as a sum. With normalize_signals each
/// of the four terms is z-scored across nodes before weighting.
inline ScoreReport fuse_scores(const AtcState& state, std::span<const double> w, const ScoreConfig& cfg, int k) {
    cfg.validate();
    if (k < 1) throw InvalidArgument("fuse_scores needs K >= 1");
    const std::size_t n = state.inconsistency.size();
    if (w.size() != n) throw ShapeError("reliability size != node count");
    ScoreReport rep;
    rep.config = cfg;
    rep.iterations = k;
    rep.reliability.assign(w.begin(), w.end());
    rep.conflict = state.conflict;
    rep.inconsistency.resize(n);
    rep.energy.resize(n);
    const double kk = static_cast<double>(k);
    for (std::size_t i = 0; i < n; ++i) {
        rep.inconsistency[i] = state.inconsistency[i] / kk;
        rep.energy[i] = state.energy[i] / kk;
    }
    std::vector<double> unreliability(n);
    for (std::size_t i = 0; i < n; ++i) unreliability[i] = 1.0 - w[i];

    rep.score.resize(n);
    if (!cfg.normalize_signals) {
        for (std::size_t i = 0; i < n; ++i)
            rep.score[i] = rep.inconsistency[i] + unreliability[i] + cfg.beta * rep.conflict[i] +
                           cfg.lambda * rep.energy[i];
    } else {
        const auto zr = zscore(rep.inconsistency);
        const auto zu = zscore(unreliability);
        const auto zc = zscore(rep.conflict);
        const auto ze = zscore(rep.energy);
        for (std::size_t i = 0; i < n; ++i) rep.score[i] = zr[i] + zu[i] + cfg.beta * zc[i] + cfg.lambda * ze[i];
    }
    return rep;
}

/// Exact AUROC via the Mann-Whitney statistic with mid-ranks for ties:
/// P(score_anomaly > score_normal) + 0.5 P(tie).
inline double auroc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    if (scores.size() != labels.size()) throw ShapeError("auroc: scores and labels differ in length");
    std::size_t pos = 0;
    for (auto l : labels) pos += (l != 0);
    const std::size_t neg = labels.size() - pos;
    if (pos == 0 || neg == 0) throw UndefinedMetricError("AUROC needs both positive and negative labels");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // Twice the rank sum keeps every quantity an exact integer in double.
    double twice_rank_sum = 0.0;
    for (std::size_t b = 0; b < order.size();) {
        std::size_t e = b + 1;
        while (e < order.size() && scores[order[e]] == scores[order[b]]) ++e;
        // ranks b+1..e, mid-rank (b + 1 + e) / 2
        const double twice_mid = static_cast<double>(b + 1 + e);
        for (std::size_t t = b; t < e; ++t)
            if (labels[order[t]] != 0) twice_rank_sum += twice_mid;
        b = e;
    }
    const double p = static_cast<double>(pos);
    const double twice_u = twice_rank_sum - p * (p + 1.0);
    return twice_u / (2.0 * p * static_cast<double>(neg));
}

namespace detail {
inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
} // namespace detail

/// CSV: node_id,r,w,conflict,energy,score[,label]. Values use %.17g so the
/// text round-trips exactly.
inline void write_scores_csv(std::ostream& out, const Graph& g, const ScoreReport& rep) {
    const bool labels = g.has_labels();
    out << "node_id,r,w,conflict,energy,score" << (labels ? ",label" : "") << '\n';
    for (NodeId i = 0; i < rep.size(); ++i) {
        out << g.node_name(i) << ',' << detail::fmt_double(rep.inconsistency[i]) << ','
            << detail::fmt_double(rep.reliability[i]) << ',' << detail::fmt_double(rep.conflict[i]) << ','
            << detail::fmt_double(rep.energy[i]) << ',' << detail::fmt_double(rep.score[i]);
        if (labels) out << ',' << static_cast<int>((*g.labels())[i]);
        out << '\n';
    }
}

inline nlohmann::json to_json(const ScoreConfig& cfg) {
    return {{"beta", cfg.beta},
            {"lambda", cfg.lambda},
            {"reliability_mode", to_string(cfg.reliability_mode)},
            {"normalize_signals", cfg.normalize_signals}};
}

inline ScoreConfig score_config_from_json(const nlohmann::json& j) {
    ScoreConfig cfg;
    cfg.beta = j.at("beta").get<double>();
    cfg.lambda = j.at("lambda").get<double>();
    cfg.reliability_mode = reliability_mode_from_string(j.at("reliability_mode").get<std::string>());
    cfg.normalize_signals = j.at("normalize_signals").get<bool>();
    return cfg;
}

} // namespace trajgad
