#pragma once

#include "trajgad/atc.hpp"
#include "trajgad/denoiser.hpp"
#include "trajgad/encoder.hpp"
#include "trajgad/error.hpp"
#include "trajgad/graph.hpp"
#include "trajgad/graph_io.hpp"
#include "trajgad/rng.hpp"
#include "trajgad/scoring.hpp"
#include "trajgad/synthetic.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace trajgad {

inline constexpr const char* kVersion = "0.3.0";

/// Failure inside one pipeline stage; what() names the stage.
class StageError : public Error {
public:
    StageError(std::string stage, const std::exception& cause, bool input_error)
        : Error(stage + " stage failed: " + cause.what()), stage_(std::move(stage)), input_error_(input_error) {}

    [[nodiscard]] const std::string& stage() const noexcept { return stage_; }
    /// True for unreadable/malformed inputs and invalid arguments.
    [[nodiscard]] bool input_error() const noexcept { return input_error_; }

private:
    std::string stage_;
    bool input_error_;
};

struct SyntheticInput {
    SbmSpec sbm;
    double contextual_fraction = 0.0;
    double structural_fraction = 0.0;
    double contextual_shift = 5.0;
    double variance_inflation = 2.0;
};

struct DenoiserSettings {
    DenoiserKind kind = DenoiserKind::shrinkage;
    double ratio = 0.9;                // shrinkage rho; center = mean latent
    std::size_t schedule_steps = 100;  // linear_trained fitting
    double beta_start = 1e-4;
    double beta_end = 2e-2;
    std::size_t noise_step = 50;
    std::optional<double> ridge;       // default 1e-3 * N
    bool exclude_anomalies = false;    // fit / center on label-0 nodes only
    std::optional<std::string> file;   // load a persisted operator instead
};

/// Everything that determines a run. Re-running a manifest reproduces its
/// outputs byte for byte, independent of the worker count.
struct RunManifest {
    std::optional<std::string> edges_path;
    std::optional<std::string> features_path;
    std::optional<std::string> labels_path;
    std::optional<SyntheticInput> synthetic;
    Seed seed = 0;
    EncoderConfig encoder;
    DenoiserSettings denoiser;
    AtcConfig atc;
    ScoreConfig score;
    std::string out_dir = "out";
    bool write_trace = false;
    bool write_checkpoint = false;
    std::optional<std::string> save_denoiser;
};

// Sub-seeds are derived from the single run seed by label.
inline Seed sbm_seed(Seed s) { return derive_seed(s, "sbm"); }
inline Seed inject_seed(Seed s) { return derive_seed(s, "inject"); }
inline Seed encoder_seed(Seed s) { return derive_seed(s, "encoder"); }
inline Seed denoiser_seed(Seed s) { return derive_seed(s, "denoiser"); }

/// "sbm:NxB" or "sbm:NxB:p_in:p_out" (N nodes per block, B blocks).
inline SbmSpec parse_sbm_spec(const std::string& text, SbmSpec base = {}) {
    const auto fail = [&] { return InvalidArgument("synthetic spec must look like sbm:50x2[:p_in:p_out], got '" + text + "'"); };
    if (text.rfind("sbm:", 0) != 0) throw fail();
    std::vector<std::string> parts;
    std::stringstream ss(text.substr(4));
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 1 && parts.size() != 3) throw fail();
    const auto x = parts[0].find('x');
    if (x == std::string::npos) throw fail();
    try {
        base.n_per_block = std::stoul(parts[0].substr(0, x));
        base.n_blocks = std::stoul(parts[0].substr(x + 1));
        if (parts.size() == 3) {
            base.p_in = std::stod(parts[1]);
            base.p_out = std::stod(parts[2]);
        }
    } catch (const std::logic_error&) {
        throw fail();
    }
    return base;
}

/// "contextual:0.05", "structural:0.02" or both joined by ','.
inline void parse_inject_spec(const std::string& text, SyntheticInput& in) {
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw InvalidArgument("inject item must be kind:fraction, got '" + item + "'");
        const std::string kind = item.substr(0, colon);
        double f = 0.0;
        try {
            f = std::stod(item.substr(colon + 1));
        } catch (const std::logic_error&) {
            throw InvalidArgument("bad inject fraction in '" + item + "'");
        }
        if (kind == "contextual") in.contextual_fraction = f;
        else if (kind == "structural") in.structural_fraction = f;
        else throw InvalidArgument("unknown anomaly kind '" + kind + "'");
    }
}

inline nlohmann::json to_json(const RunManifest& m) {
    nlohmann::json j;
    j["tool"] = "trajgad";
    j["version"] = kVersion;
    j["seed"] = m.seed;
    nlohmann::json in;
    if (m.synthetic) {
        const auto& s = *m.synthetic;
        in["synthetic"] = {{"n_per_block", s.sbm.n_per_block}, {"n_blocks", s.sbm.n_blocks},
                           {"p_in", s.sbm.p_in},               {"p_out", s.sbm.p_out},
                           {"feature_dim", s.sbm.feature_dim}, {"block_separation", s.sbm.block_separation},
                           {"feature_sd", s.sbm.feature_sd},   {"contextual_fraction", s.contextual_fraction},
                           {"structural_fraction", s.structural_fraction},
                           {"contextual_shift", s.contextual_shift},
                           {"variance_inflation", s.variance_inflation}};
    }
    if (m.edges_path) in["edges"] = *m.edges_path;
    if (m.features_path) in["features"] = *m.features_path;
    if (m.labels_path) in["labels"] = *m.labels_path;
    j["input"] = in;
    j["encoder"] = {{"num_layers", m.encoder.num_layers},
                    {"latent_dim", m.encoder.latent_dim},
                    {"use_nonlinearity", m.encoder.use_nonlinearity}};
    const auto& d = m.denoiser;
    j["denoiser"] = {{"kind", to_string(d.kind)},
                     {"ratio", d.ratio},
                     {"schedule_steps", d.schedule_steps},
                     {"beta_start", d.beta_start},
                     {"beta_end", d.beta_end},
                     {"noise_step", d.noise_step},
                     {"ridge", d.ridge ? nlohmann::json(*d.ridge) : nlohmann::json(nullptr)},
                     {"exclude_anomalies", d.exclude_anomalies},
                     {"file", d.file ? nlohmann::json(*d.file) : nlohmann::json(nullptr)}};
    j["atc"] = to_json(m.atc);
    j["score"] = to_json(m.score);
    j["output"] = {{"dir", m.out_dir},
                   {"trace", m.write_trace},
                   {"checkpoint", m.write_checkpoint},
                   {"save_denoiser", m.save_denoiser ? nlohmann::json(*m.save_denoiser) : nlohmann::json(nullptr)}};
    return j;
}

inline RunManifest manifest_from_json(const nlohmann::json& j) {
    try {
        RunManifest m;
        m.seed = j.at("seed").get<Seed>();
        const auto& in = j.at("input");
        if (in.contains("synthetic")) {
            const auto& s = in["synthetic"];
            SyntheticInput si;
            si.sbm.n_per_block = s.at("n_per_block").get<std::size_t>();
            si.sbm.n_blocks = s.at("n_blocks").get<std::size_t>();
            si.sbm.p_in = s.at("p_in").get<double>();
            si.sbm.p_out = s.at("p_out").get<double>();
            si.sbm.feature_dim = s.at("feature_dim").get<std::size_t>();
            si.sbm.block_separation = s.at("block_separation").get<double>();
            si.sbm.feature_sd = s.at("feature_sd").get<double>();
            si.contextual_fraction = s.at("contextual_fraction").get<double>();
            si.structural_fraction = s.at("structural_fraction").get<double>();
            si.contextual_shift = s.at("contextual_shift").get<double>();
            si.variance_inflation = s.at("variance_inflation").get<double>();
            m.synthetic = si;
        }
        if (in.contains("edges")) m.edges_path = in["edges"].get<std::string>();
        if (in.contains("features")) m.features_path = in["features"].get<std::string>();
        if (in.contains("labels")) m.labels_path = in["labels"].get<std::string>();
        const auto& e = j.at("encoder");
        m.encoder.num_layers = e.at("num_layers").get<int>();
        m.encoder.latent_dim = e.at("latent_dim").get<std::size_t>();
        m.encoder.use_nonlinearity = e.at("use_nonlinearity").get<bool>();
        const auto& d = j.at("denoiser");
        m.denoiser.kind = denoiser_kind_from_string(d.at("kind").get<std::string>());
        m.denoiser.ratio = d.at("ratio").get<double>();
        m.denoiser.schedule_steps = d.at("schedule_steps").get<std::size_t>();
        m.denoiser.beta_start = d.at("beta_start").get<double>();
        m.denoiser.beta_end = d.at("beta_end").get<double>();
        m.denoiser.noise_step = d.at("noise_step").get<std::size_t>();
        if (!d.at("ridge").is_null()) m.denoiser.ridge = d["ridge"].get<double>();
        m.denoiser.exclude_anomalies = d.at("exclude_anomalies").get<bool>();
        if (!d.at("file").is_null()) m.denoiser.file = d["file"].get<std::string>();
        m.atc = atc_config_from_json(j.at("atc"));
        m.score = score_config_from_json(j.at("score"));
        const auto& o = j.at("output");
        m.out_dir = o.at("dir").get<std::string>();
        m.write_trace = o.at("trace").get<bool>();
        m.write_checkpoint = o.at("checkpoint").get<bool>();
        if (!o.at("save_denoiser").is_null()) m.save_denoiser = o["save_denoiser"].get<std::string>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed manifest: ") + e.what());
    }
}

struct PipelineResult {
    Graph graph;
    Matrix z0;
    DenoiserOperator denoiser = DenoiserOperator::identity();
    AtcResult atc;
    ScoreReport report;
    std::optional<double> auroc;
};

namespace detail {

template <class Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const FormatError& e) {
        throw StageError(name, e, true);
    } catch (const ParseError& e) {
        throw StageError(name, e, true);
    } catch (const ShapeError& e) {
        throw StageError(name, e, true);
    } catch (const InvalidArgument& e) {
        throw StageError(name, e, true);
    } catch (const std::exception& e) {
        throw StageError(name, e, false);
    }
}

inline Vector mean_row(const Matrix& z, const std::vector<Eigen::Index>& rows) {
    Vector m = Vector::Zero(z.cols());
    for (Eigen::Index i : rows) m += z.row(i).transpose();
    return m / static_cast<double>(rows.size());
}

} // namespace detail

inline Graph load_input(const RunManifest& m) {
    return detail::stage("load", [&] {
        if (m.synthetic) {
            const auto& s = *m.synthetic;
            Graph g = generate_sbm(s.sbm, sbm_seed(m.seed));
            AnomalyPlan plan;
            plan.contextual_fraction = s.contextual_fraction;
            plan.structural_fraction = s.structural_fraction;
            plan.contextual_shift = s.contextual_shift;
            plan.variance_inflation = s.variance_inflation;
            plan.feature_scale = s.sbm.feature_sd;
            plan.seed = inject_seed(m.seed);
            return inject_anomalies(g, plan).graph;
        }
        if (!m.features_path) throw InvalidArgument("no feature file given (use --features or --synthetic)");
        if (!m.edges_path) throw InvalidArgument("no edge file given (use --edges or --synthetic)");
        std::optional<std::filesystem::path> labels;
        if (m.labels_path) labels = *m.labels_path;
        return load_graph(*m.edges_path, *m.features_path, labels);
    });
}

inline DenoiserOperator build_denoiser(const RunManifest& m, const Graph& g, const Matrix& z0) {
    return detail::stage("denoiser", [&] {
        const auto& d = m.denoiser;
        if (d.file) {
            std::ifstream in(*d.file);
            if (!in) throw FormatError("denoiser file not found: " + *d.file);
            return denoiser_from_json(nlohmann::json::parse(in));
        }
        std::vector<Eigen::Index> rows;
        for (Eigen::Index i = 0; i < z0.rows(); ++i)
            if (!(d.exclude_anomalies && g.has_labels() && (*g.labels())[static_cast<std::size_t>(i)] != 0))
                rows.push_back(i);
        if (rows.empty()) throw InvalidArgument("no nodes available to fit the denoiser");
        switch (d.kind) {
        case DenoiserKind::identity: return DenoiserOperator::identity();
        case DenoiserKind::shrinkage: return DenoiserOperator::shrinkage(detail::mean_row(z0, rows), d.ratio);
        case DenoiserKind::linear_trained: {
            Matrix clean(static_cast<Eigen::Index>(rows.size()), z0.cols());
            for (std::size_t t = 0; t < rows.size(); ++t) clean.row(static_cast<Eigen::Index>(t)) = z0.row(rows[t]);
            const auto sched = NoiseSchedule::linear(d.schedule_steps, d.beta_start, d.beta_end);
            const double ridge = d.ridge.value_or(1e-3 * static_cast<double>(rows.size()));
            return fit_linear_denoiser(clean, sched, d.noise_step, ridge, denoiser_seed(m.seed));
        }
        }
        throw InvalidArgument("unknown denoiser kind");
    });
}

inline PipelineResult run_pipeline(const RunManifest& m, unsigned workers = 0) {
    workers = resolve_workers(workers);
    PipelineResult r;
    r.graph = load_input(m);
    r.z0 = detail::stage("encode", [&] {
        EncoderConfig ec = m.encoder;
        ec.projection_seed = encoder_seed(m.seed);
        return encode(r.graph, ec, workers);
    });
    r.denoiser = build_denoiser(m, r.graph, r.z0);
    r.atc = detail::stage("dynamics", [&] { return run(r.graph, r.z0, r.denoiser, m.atc, {}, workers); });
    r.report = detail::stage("score", [&] {
        const auto w = reliability_weights(r.atc.state.trust, r.graph, m.score.reliability_mode);
        return fuse_scores(r.atc.state, w, m.score, m.atc.iterations);
    });
    if (r.graph.has_labels()) {
        const auto& labels = *r.graph.labels();
        const std::size_t pos = r.graph.num_anomalies();
        if (pos > 0 && pos < labels.size()) r.auroc = auroc(r.report.score, labels);
    }
    return r;
}

/// Writes to `path.tmp` and renames over `path`, so readers never observe a
/// partially written file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw FormatError("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw FormatError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline nlohmann::json metrics_json(const RunManifest& m, const PipelineResult& r) {
    return {{"auroc", r.auroc ? nlohmann::json(*r.auroc) : nlohmann::json(nullptr)},
            {"n", r.graph.num_nodes()},
            {"n_edges", r.graph.num_edges()},
            {"n_anomalies", r.graph.num_anomalies()},
            {"sigma_resolved", r.atc.state.sigma},
            {"config", to_json(m)}};
}

/// scores.csv, metrics.json, manifest.json and the optional trace,
/// checkpoint and denoiser documents under m.out_dir.
inline void write_outputs(const RunManifest& m, const PipelineResult& r) {
    detail::stage("write", [&] {
        const std::filesystem::path dir(m.out_dir);
        std::ostringstream csv;
        write_scores_csv(csv, r.graph, r.report);
        write_file_atomic(dir / "scores.csv", csv.str());
        write_file_atomic(dir / "metrics.json", metrics_json(m, r).dump(2) + "\n");
        if (m.write_trace && r.atc.trace) {
            std::ostringstream t;
            write_trace_jsonl(t, *r.atc.trace);
            write_file_atomic(dir / "trace.jsonl", t.str());
        }
        if (m.write_checkpoint)
            write_file_atomic(dir / "checkpoint.json", checkpoint_json(r.graph, r.atc.state, m.atc).dump() + "\n");
        if (m.save_denoiser) write_file_atomic(*m.save_denoiser, to_json(r.denoiser).dump(2) + "\n");
        write_file_atomic(dir / "manifest.json", to_json(m).dump(2) + "\n");
        return 0;
    });
}

/// Hyperparameter grid; empty axes keep the base manifest's value.
struct SweepGrid {
    std::vector<int> iterations;
    std::vector<double> alpha;
    std::vector<double> gamma;
    std::vector<Bandwidth> sigma;
    std::vector<double> beta;
    std::vector<double> lambda;

    [[nodiscard]] bool empty() const {
        return iterations.empty() && alpha.empty() && gamma.empty() && sigma.empty() && beta.empty() &&
               lambda.empty();
    }
};

struct SweepRow {
    AtcConfig atc;
    ScoreConfig score;
    double auroc_mean = 0.0;
    double auroc_min = 0.0;
    double auroc_max = 0.0;
};

/// Runs every grid point over `num_seeds` consecutive seeds starting at
/// base.seed and reports the AUROC spread. Rows follow the nested order
/// K, alpha, gamma, sigma, beta, lambda.
inline std::vector<SweepRow> run_sweep(const RunManifest& base, const SweepGrid& grid, std::size_t num_seeds,
                                       unsigned workers = 0) {
    if (grid.empty()) throw InvalidArgument("sweep grid is empty");
    if (num_seeds == 0) throw InvalidArgument("sweep needs at least one seed");
    const auto axis = [](const auto& values, auto fallback) {
        using T = std::decay_t<decltype(fallback)>;
        return values.empty() ? std::vector<T>{fallback} : std::vector<T>(values.begin(), values.end());
    };
    std::vector<SweepRow> rows;
    for (int k : axis(grid.iterations, base.atc.iterations))
        for (double a : axis(grid.alpha, base.atc.alpha))
            for (double gm : axis(grid.gamma, base.atc.gamma))
                for (const Bandwidth& s : axis(grid.sigma, base.atc.sigma))
                    for (double b : axis(grid.beta, base.score.beta))
                        for (double l : axis(grid.lambda, base.score.lambda)) {
                            RunManifest m = base;
                            m.atc.iterations = k;
                            m.atc.alpha = a;
                            m.atc.gamma = gm;
                            m.atc.sigma = s;
                            m.atc.record_trace = false;
                            m.score.beta = b;
                            m.score.lambda = l;
                            SweepRow row{m.atc, m.score, 0.0, 1.0, 0.0};
                            for (std::size_t t = 0; t < num_seeds; ++t) {
                                m.seed = base.seed + t;
                                const auto r = run_pipeline(m, workers);
                                if (!r.auroc) throw UndefinedMetricError("sweep fixture has no usable labels");
                                row.auroc_mean += *r.auroc;
                                row.auroc_min = std::min(row.auroc_min, *r.auroc);
                                row.auroc_max = std::max(row.auroc_max, *r.auroc);
                            }
                            row.auroc_mean /= static_cast<double>(num_seeds);
                            rows.push_back(row);
                        }
    return rows;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream out;
    out << "K,alpha,gamma,sigma,beta,lambda,auroc_mean,auroc_min,auroc_max\n";
    for (const auto& r : rows)
        out << r.atc.iterations << ',' << detail::fmt_double(r.atc.alpha) << ',' << detail::fmt_double(r.atc.gamma)
            << ',' << r.atc.sigma.to_string() << ',' << detail::fmt_double(r.score.beta) << ','
            << detail::fmt_double(r.score.lambda) << ',' << detail::fmt_double(r.auroc_mean) << ','
            << detail::fmt_double(r.auroc_min) << ',' << detail::fmt_double(r.auroc_max) << '\n';
    return out.str();
}

} // namespace trajgad
