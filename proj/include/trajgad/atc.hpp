#pragma once

// Adapt-then-combine dynamics with temporal trust memory.
//
// One iteration k, for every node i in lockstep (all reads from snapshot k):
//
//   psi_i    = D(z_i)                                   adapt
//   tau_ij   = exp(-||psi_i - psi_j||^2 / (2 sigma^2))  alignment, per edge
//   T_ij    <- gamma T_ij + (1 - gamma) tau_ij          trust memory
//   wbar_ij  = T_ij / sum_m T_im
//   c_i      = sum_j wbar_ij psi_j                      consensus (psi_i if isolated)
//   z_i'     = alpha psi_i + (1 - alpha) c_i            combine
//
// and the per-node signals
//
//   r_i   += ||z_i - c_i||
//   cnf_i += ||(psi_i - z_i) - (c_i - z_i)||^2
//   E_i   += ||z_i' - psi_i||^2

#include "trajgad/denoiser.hpp"
#include "trajgad/error.hpp"
#include "trajgad/graph.hpp"
#include "trajgad/matrix.hpp"
#include "trajgad/parallel.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace trajgad {

/// Kernel bandwidth: a fixed positive value or the median heuristic (median
/// edge distance of the kernel states at k = 0, then frozen).
struct Bandwidth {
    bool median = false;
    double value = 1.0;

    static Bandwidth fixed(double v) {
        if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument("sigma must be positive and finite");
        return {false, v};
    }
    static Bandwidth median_heuristic() { return {true, 0.0}; }

    static Bandwidth parse(const std::string& s) {
        if (s == "median") return median_heuristic();
        try {
            std::size_t pos = 0;
            const double v = std::stod(s, &pos);
            if (pos != s.size()) throw InvalidArgument("bad sigma '" + s + "'");
            return fixed(v);
        } catch (const std::logic_error&) {
            throw InvalidArgument("sigma must be a positive number or 'median', got '" + s + "'");
        }
    }

    [[nodiscard]] std::string to_string() const {
        if (median) return "median";
        nlohmann::json j = value;
        return j.dump();
    }
};

struct AtcConfig {
    int iterations = 20;         // K
    double alpha = 0.7;          // self-confidence
    double gamma = 0.9;          // trust memory decay
    Bandwidth sigma = Bandwidth::median_heuristic();
    bool record_trace = false;
    // Memoryless compatibility mode: kernel evaluated on z instead of psi.
    // Combine with gamma = 0 for purely instantaneous weights.
    bool kernel_on_latent = false;

    void validate() const {
        if (iterations < 1) throw InvalidArgument("K must be >= 1");
        if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must lie in (0, 1]");
        if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidArgument("gamma must lie in [0, 1)");
        if (!sigma.median && !(sigma.value > 0.0)) throw InvalidArgument("sigma must be positive");
    }
};

/// Per undirected edge trust, indexed by EdgeId.
struct TrustState {
    std::vector<double> values;
    int iteration = 0;

    static TrustState initial(const Graph& g) { return {std::vector<double>(g.num_edges(), 1.0), 0}; }
};

struct AtcState {
    Matrix z;          // z^(k)
    Matrix psi;        // psi^(k)
    Matrix consensus;  // c^(k)
    TrustState trust;
    std::vector<double> inconsistency;  // sum_k ||z - c||
    std::vector<double> energy;         // sum_k ||z' - psi||^2
    std::vector<double> conflict;       // sum_k ||Delta_D - Delta_C||^2
    std::vector<double> step_conflict;  // conflict increment of the latest iteration
    double sigma = 0.0;                 // resolved bandwidth
    int iteration = 0;                  // completed iterations

    static AtcState initial(const Graph& g, const Matrix& z0) {
        if (static_cast<std::size_t>(z0.rows()) != g.num_nodes())
            throw ShapeError("initial latent rows != node count");
        const std::size_t n = g.num_nodes();
        AtcState s;
        s.z = z0;
        s.psi = Matrix::Zero(z0.rows(), z0.cols());
        s.consensus = Matrix::Zero(z0.rows(), z0.cols());
        s.trust = TrustState::initial(g);
        s.inconsistency.assign(n, 0.0);
        s.energy.assign(n, 0.0);
        s.conflict.assign(n, 0.0);
        s.step_conflict.assign(n, 0.0);
        return s;
    }
};

/// psi_i = D(z_i) for every node.
inline void adapt_step(AtcState& state, const DenoiserOperator& op, unsigned workers = 1) {
    op.check_dim(static_cast<std::size_t>(state.z.cols()));
    state.psi.resize(state.z.rows(), state.z.cols());
    parallel_for(static_cast<std::size_t>(state.z.rows()), workers, [&](std::size_t b, std::size_t e) {
        for (auto i = static_cast<Eigen::Index>(b); i < static_cast<Eigen::Index>(e); ++i)
            op.apply(row_span(std::as_const(state.z), i), row_span(state.psi, i));
    });
}

inline double instantaneous_alignment(std::span<const double> a, std::span<const double> b, double sigma) {
    return std::exp(-squared_distance(a, b) / (2.0 * sigma * sigma));
}

/// Median of ||s_u - s_v|| over edges; falls back to 1 when there are no
/// edges or the median distance is zero.
inline double median_edge_distance(const Graph& g, const Matrix& states) {
    std::vector<double> d;
    d.reserve(g.num_edges());
    for (const Edge& e : g.edges()) d.push_back(std::sqrt(squared_distance(row_span(states, e.u), row_span(states, e.v))));
    if (d.empty()) return 1.0;
    const std::size_t mid = d.size() / 2;
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
    double med = d[mid];
    if (d.size() % 2 == 0) {
        const double lower = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid));
        med = 0.5 * (lower + med);
    }
    return med > 0.0 && std::isfinite(med) ? med : 1.0;
}

/// T_ij <- gamma T_ij + (1 - gamma) tau_ij on every edge, with tau computed on
/// `kernel_states` (psi by default).
inline void trust_update(TrustState& trust, const Graph& g, const Matrix& kernel_states, double gamma,
                         double sigma, unsigned workers = 1) {
    if (trust.values.size() != g.num_edges()) throw ShapeError("trust state does not cover the edge set");
    const auto& edges = g.edges();
    parallel_for(edges.size(), workers, [&](std::size_t b, std::size_t e) {
        for (std::size_t id = b; id < e; ++id) {
            const double tau = instantaneous_alignment(row_span(kernel_states, edges[id].u),
                                                       row_span(kernel_states, edges[id].v), sigma);
            trust.values[id] = gamma * trust.values[id] + (1.0 - gamma) * tau;
        }
    });
    ++trust.iteration;
}

/// Normalized weights wbar_ij for node i, in neighbor order. Empty if isolated.
inline std::vector<double> normalized_weights(const Graph& g, const TrustState& trust, NodeId i) {
    const auto inc = g.incident_edges(i);
    double total = 0.0;
    for (EdgeId e : inc) total += trust.values[e];
    std::vector<double> w;
    w.reserve(inc.size());
    for (EdgeId e : inc) w.push_back(trust.values[e] / total);
    return w;
}

/// c_i = sum_j wbar_ij psi_j; isolated nodes fall back to c_i = psi_i.
inline void compute_consensus(const Graph& g, const TrustState& trust, const Matrix& psi, Matrix& out,
                              unsigned workers = 1) {
    out.resize(psi.rows(), psi.cols());
    const auto d = static_cast<std::size_t>(psi.cols());
    parallel_for(g.num_nodes(), workers, [&](std::size_t b, std::size_t e) {
        for (auto i = static_cast<NodeId>(b); i < e; ++i) {
            auto c = row_span(out, i);
            const auto nb = g.neighbors(i);
            if (nb.empty()) {
                const auto p = row_span(psi, i);
                std::copy(p.begin(), p.end(), c.begin());
                continue;
            }
            const auto inc = g.incident_edges(i);
            double total = 0.0;
            for (EdgeId id : inc) total += trust.values[id];
            std::fill(c.begin(), c.end(), 0.0);
            for (std::size_t s = 0; s < nb.size(); ++s) {
                const double w = trust.values[inc[s]] / total;
                const auto p = row_span(psi, nb[s]);
                for (std::size_t k = 0; k < d; ++k) c[k] += w * p[k];
            }
        }
    });
}

/// Computes consensus into state.consensus from the already updated trust,
/// then returns z^(k+1) = alpha psi + (1 - alpha) c.
inline Matrix combine_step(AtcState& state, const Graph& g, const AtcConfig& cfg, unsigned workers = 1) {
    compute_consensus(g, state.trust, state.psi, state.consensus, workers);
    Matrix next(state.psi.rows(), state.psi.cols());
    const double a = cfg.alpha;
    parallel_for(static_cast<std::size_t>(next.rows()), workers, [&](std::size_t b, std::size_t e) {
        for (auto i = static_cast<Eigen::Index>(b); i < static_cast<Eigen::Index>(e); ++i)
            next.row(i) = a * state.psi.row(i) + (1.0 - a) * state.consensus.row(i);
    });
    return next;
}

/// Collapsed single-expression update alpha D(z_i) + (1 - alpha) c_i.
inline Vector collapsed_form(const Vector& z_i, const Vector& c_i, const DenoiserOperator& op, double alpha) {
    if (z_i.size() != c_i.size()) throw ShapeError("collapsed_form: dimension mismatch");
    return alpha * op.apply(z_i) + (1.0 - alpha) * c_i;
}

/// Adds iteration k's contributions to r, E and the conflict energy, using
/// state.z (= z^(k)), state.psi, state.consensus and z_next.
inline void accumulate_signals(AtcState& state, const Matrix& z_next, unsigned workers = 1) {
    const auto d = static_cast<std::size_t>(state.z.cols());
    state.step_conflict.resize(static_cast<std::size_t>(state.z.rows()));
    parallel_for(static_cast<std::size_t>(state.z.rows()), workers, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            const auto row = static_cast<Eigen::Index>(i);
            const auto z = row_span(std::as_const(state.z), row);
            const auto p = row_span(std::as_const(state.psi), row);
            const auto c = row_span(std::as_const(state.consensus), row);
            const auto zn = row_span(z_next, row);
            double conflict = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double delta_d = p[k] - z[k];
                const double delta_c = c[k] - z[k];
                conflict += (delta_d - delta_c) * (delta_d - delta_c);
            }
            state.inconsistency[i] += std::sqrt(squared_distance(z, c));
            state.conflict[i] += conflict;
            state.energy[i] += squared_distance(zn, p);
            state.step_conflict[i] = conflict;
        }
    });
}

/// Read-only view of one finished iteration, handed to observers before the
/// state advances: z is z^(k), next is z^(k+1).
struct IterationView {
    int k;
    const Matrix& z;
    const Matrix& psi;
    const Matrix& consensus;
    const Matrix& next;
    std::span<const double> step_conflict;
    const TrustState& trust;
};

using IterationObserver = std::function<void(const IterationView&)>;

/// Per-iteration snapshots (z, psi, c, step conflict). Memory is K * N * d.
struct TrajectoryTrace {
    std::vector<Matrix> z;
    std::vector<Matrix> psi;
    std::vector<Matrix> consensus;
    std::vector<std::vector<double>> step_conflict;

    void record(const IterationView& v) {
        z.push_back(v.z);
        psi.push_back(v.psi);
        consensus.push_back(v.consensus);
        step_conflict.emplace_back(v.step_conflict.begin(), v.step_conflict.end());
    }

    [[nodiscard]] std::size_t iterations() const noexcept { return z.size(); }
};

struct AtcResult {
    AtcState state;
    std::optional<TrajectoryTrace> trace;
};

inline void check_finite(const Matrix& m, int iteration) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        if (!all_finite(row_span(m, i))) throw DivergenceError(iteration, static_cast<std::size_t>(i));
}

/// Executes K synchronous iterations of adapt, trust update, combine and
/// accumulate. Output is bitwise independent of `workers`: every per-node
/// and per-edge quantity is reduced in a fixed order by a single thread.
inline AtcResult run(const Graph& g, const Matrix& z0, const DenoiserOperator& op, const AtcConfig& cfg,
                     const IterationObserver& observer = {}, unsigned workers = 1) {
    cfg.validate();
    op.check_dim(static_cast<std::size_t>(z0.cols()));
    check_finite(z0, 0);
    AtcResult result{AtcState::initial(g, z0), std::nullopt};
    if (cfg.record_trace) result.trace.emplace();
    AtcState& s = result.state;

    for (int k = 0; k < cfg.iterations; ++k) {
        adapt_step(s, op, workers);
        check_finite(s.psi, k);
        const Matrix& kernel = cfg.kernel_on_latent ? s.z : s.psi;
        if (k == 0) s.sigma = cfg.sigma.median ? median_edge_distance(g, kernel) : cfg.sigma.value;
        trust_update(s.trust, g, kernel, cfg.gamma, s.sigma, workers);
        Matrix next = combine_step(s, g, cfg, workers);
        check_finite(next, k);
        accumulate_signals(s, next, workers);

        const IterationView view{k, s.z, s.psi, s.consensus, next, s.step_conflict, s.trust};
        if (result.trace) result.trace->record(view);
        if (observer) observer(view);

        s.z = std::move(next);
        s.iteration = k + 1;
    }
    return result;
}

/// One JSON line per (iteration, node): {"k","node","z","psi","c","conflict"}.
inline void write_trace_jsonl(std::ostream& out, const TrajectoryTrace& trace) {
    for (std::size_t k = 0; k < trace.iterations(); ++k) {
        const Matrix& z = trace.z[k];
        for (Eigen::Index i = 0; i < z.rows(); ++i) {
            const auto zr = row_span(z, i);
            const auto pr = row_span(trace.psi[k], i);
            const auto cr = row_span(trace.consensus[k], i);
            nlohmann::json rec;
            rec["k"] = k;
            rec["node"] = i;
            rec["z"] = std::vector<double>(zr.begin(), zr.end());
            rec["psi"] = std::vector<double>(pr.begin(), pr.end());
            rec["c"] = std::vector<double>(cr.begin(), cr.end());
            rec["conflict"] = trace.step_conflict[k][static_cast<std::size_t>(i)];
            out << rec.dump() << '\n';
        }
    }
}

inline nlohmann::json to_json(const AtcConfig& cfg) {
    return {{"K", cfg.iterations},
            {"alpha", cfg.alpha},
            {"gamma", cfg.gamma},
            {"sigma", cfg.sigma.median ? nlohmann::json("median") : nlohmann::json(cfg.sigma.value)},
            {"kernel_on_latent", cfg.kernel_on_latent}};
}

inline AtcConfig atc_config_from_json(const nlohmann::json& j) {
    AtcConfig cfg;
    cfg.iterations = j.at("K").get<int>();
    cfg.alpha = j.at("alpha").get<double>();
    cfg.gamma = j.at("gamma").get<double>();
    const auto& s = j.at("sigma");
    cfg.sigma = s.is_string() ? Bandwidth::parse(s.get<std::string>()) : Bandwidth::fixed(s.get<double>());
    cfg.kernel_on_latent = j.value("kernel_on_latent", false);
    return cfg;
}

/// Final-state checkpoint: latents, per-edge trust, accumulators, config echo.
inline nlohmann::json checkpoint_json(const Graph& g, const AtcState& s, const AtcConfig& cfg) {
    nlohmann::json j;
    j["config"] = to_json(cfg);
    j["sigma_resolved"] = s.sigma;
    j["iterations"] = s.iteration;
    nlohmann::json z = nlohmann::json::array();
    for (Eigen::Index i = 0; i < s.z.rows(); ++i) {
        const auto r = row_span(s.z, i);
        z.push_back(std::vector<double>(r.begin(), r.end()));
    }
    j["z"] = std::move(z);
    nlohmann::json trust = nlohmann::json::array();
    for (EdgeId e = 0; e < g.num_edges(); ++e)
        trust.push_back({g.edges()[e].u, g.edges()[e].v, s.trust.values[e]});
    j["trust"] = std::move(trust);
    j["inconsistency_sum"] = s.inconsistency;
    j["energy_sum"] = s.energy;
    j["conflict_sum"] = s.conflict;
    return j;
}

} // namespace trajgad
