// trajgad: command-line front end.
//
//   trajgad run               load/generate -> encode -> denoiser -> dynamics -> scores
//   trajgad verify-stability  certify the boundedness bound on a synthetic fixture
//   trajgad sweep             AUROC over a hyperparameter grid
//
// Exit codes: 0 success, 1 runtime failure, 2 bad input or usage.

#include "trajgad/trajgad.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

using namespace trajgad;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitInput = 2;

struct CommonOptions {
    std::string synthetic;
    std::string inject;
    std::size_t feature_dim = 8;
    double contextual_shift = 5.0;
    std::string denoiser = "shrinkage";
    std::string sigma = "median";
    std::string reliability = "paper_literal";
    bool no_nonlinearity = false;
};

void add_model_options(CLI::App& cmd, RunManifest& m, CommonOptions& o) {
    cmd.add_option("--synthetic", o.synthetic, "Synthetic input, e.g. sbm:50x2 or sbm:50x2:0.2:0.01");
    cmd.add_option("--inject", o.inject, "Planted anomalies, e.g. contextual:0.05,structural:0.02");
    cmd.add_option("--feature-dim", o.feature_dim, "Feature width of synthetic graphs")->capture_default_str();
    cmd.add_option("--contextual-shift", o.contextual_shift, "Contextual anomaly shift in within-cluster sd")
        ->capture_default_str();
    cmd.add_option("--seed", m.seed, "Master seed; all randomness derives from it")->capture_default_str();

    cmd.add_option("--layers", m.encoder.num_layers, "Encoder propagation layers")->capture_default_str();
    cmd.add_option("--latent-dim", m.encoder.latent_dim, "Latent width d_z")->capture_default_str();
    cmd.add_flag("--no-nonlinearity", o.no_nonlinearity, "Disable ReLU between encoder layers");

    cmd.add_option("--denoiser", o.denoiser, "identity | shrinkage | linear")->capture_default_str();
    cmd.add_option("--rho", m.denoiser.ratio, "Shrinkage ratio (center = mean latent)")->capture_default_str();
    cmd.add_option("--noise-step", m.denoiser.noise_step, "Noise level index for the linear fit")
        ->capture_default_str();
    cmd.add_option("--schedule-steps", m.denoiser.schedule_steps, "Noise schedule length")->capture_default_str();
    cmd.add_option("--ridge", m.denoiser.ridge, "Ridge strength for the linear fit (default 1e-3 N)");
    cmd.add_flag("--fit-exclude-anomalies", m.denoiser.exclude_anomalies,
                 "Fit/center the denoiser on label-0 nodes only");

    cmd.add_option("--K", m.atc.iterations, "Iterations")->capture_default_str();
    cmd.add_option("--alpha", m.atc.alpha, "Self-confidence in (0, 1]")->capture_default_str();
    cmd.add_option("--gamma", m.atc.gamma, "Trust memory decay in [0, 1)")->capture_default_str();
    cmd.add_option("--sigma", o.sigma, "Kernel bandwidth or 'median'")->capture_default_str();
    cmd.add_flag("--kernel-on-latent", m.atc.kernel_on_latent, "Memoryless mode: kernel on z instead of psi");
}

void finalize_model_options(RunManifest& m, const CommonOptions& o) {
    if (!o.synthetic.empty()) {
        SyntheticInput si;
        si.sbm = parse_sbm_spec(o.synthetic);
        si.sbm.feature_dim = o.feature_dim;
        si.contextual_shift = o.contextual_shift;
        if (!o.inject.empty()) parse_inject_spec(o.inject, si);
        m.synthetic = si;
    } else if (!o.inject.empty()) {
        throw InvalidArgument("--inject requires --synthetic");
    }
    m.encoder.use_nonlinearity = !o.no_nonlinearity;
    m.denoiser.kind = denoiser_kind_from_string(o.denoiser);
    m.atc.sigma = Bandwidth::parse(o.sigma);
    m.score.reliability_mode = reliability_mode_from_string(o.reliability);
    m.atc.validate();
}

int report(const std::exception& e, int code) {
    std::cerr << "trajgad: " << e.what() << '\n';
    return code;
}

template <class Fn>
int guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const StageError& e) {
        return report(e, e.input_error() ? kExitInput : kExitRuntime);
    } catch (const InvalidArgument& e) {
        return report(e, kExitInput);
    } catch (const FormatError& e) {
        return report(e, kExitInput);
    } catch (const ContractionError& e) {
        return report(e, kExitInput);
    } catch (const std::exception& e) {
        return report(e, kExitRuntime);
    }
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');)
        if (!item.empty()) out.push_back(item);
    return out;
}

template <class T>
std::vector<T> parse_list(const std::string& s) {
    std::vector<T> out;
    for (const auto& item : split_list(s)) {
        try {
            if constexpr (std::is_same_v<T, int>) out.push_back(std::stoi(item));
            else out.push_back(std::stod(item));
        } catch (const std::logic_error&) {
            throw InvalidArgument("bad grid value '" + item + "'");
        }
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Trajectory-dynamics graph anomaly detection"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    // run
    RunManifest run_m;
    CommonOptions run_o;
    std::string manifest_path;
    unsigned workers = 0;
    auto* run_cmd = app.add_subcommand("run", "Score every node of a graph");
    add_model_options(*run_cmd, run_m, run_o);
    run_cmd->add_option("--edges", run_m.edges_path, "Edge list file");
    run_cmd->add_option("--features", run_m.features_path, "Feature CSV file");
    run_cmd->add_option("--labels", run_m.labels_path, "Optional 0/1 label file");
    run_cmd->add_option("--beta", run_m.score.beta, "Conflict energy weight")->capture_default_str();
    run_cmd->add_option("--lambda", run_m.score.lambda, "Trajectory energy weight")->capture_default_str();
    run_cmd->add_option("--reliability-mode", run_o.reliability, "paper_literal | neighbor_mean")
        ->capture_default_str();
    run_cmd->add_flag("--normalize-signals", run_m.score.normalize_signals, "z-score signals before fusion");
    run_cmd->add_option("--denoiser-file", run_m.denoiser.file, "Load a persisted denoiser JSON");
    run_cmd->add_option("--save-denoiser", run_m.save_denoiser, "Write the denoiser JSON here");
    run_cmd->add_option("--out", run_m.out_dir, "Output directory")->capture_default_str();
    run_cmd->add_flag("--trace", run_m.write_trace, "Write trace.jsonl (memory K*N*d)");
    run_cmd->add_flag("--checkpoint", run_m.write_checkpoint, "Write checkpoint.json");
    run_cmd->add_option("--manifest", manifest_path, "Re-run a manifest.json (other model flags ignored)");
    run_cmd->add_option("--workers", workers, "Worker threads (default: $TRAJGAD_WORKERS or all cores)");

    // verify-stability
    RunManifest vs_m;
    vs_m.atc.alpha = 0.8;
    vs_m.denoiser.ratio = 0.5;
    CommonOptions vs_o;
    vs_o.synthetic = "sbm:50x2";
    std::optional<NodeId> vs_node;
    std::string cert_path = "certificate.json";
    auto* vs_cmd = app.add_subcommand("verify-stability", "Check the error bound for normal nodes");
    add_model_options(*vs_cmd, vs_m, vs_o);
    vs_cmd->add_option("--node", vs_node, "Certify a single node (default: every normal node)");
    vs_cmd->add_option("--certificate", cert_path, "Certificate JSON path")->capture_default_str();
    vs_cmd->add_option("--workers", workers, "Worker threads");

    // sweep
    RunManifest sw_m;
    CommonOptions sw_o;
    sw_o.synthetic = "sbm:50x2";
    sw_o.inject = "contextual:0.05";
    std::string g_alpha, g_gamma, g_sigma, g_beta, g_lambda, g_k;
    std::size_t sw_seeds = 1;
    std::string sweep_out = "sweep.csv";
    auto* sw_cmd = app.add_subcommand("sweep", "AUROC over a hyperparameter grid");
    add_model_options(*sw_cmd, sw_m, sw_o);
    sw_cmd->add_option("--grid-alpha", g_alpha, "Comma-separated alpha values");
    sw_cmd->add_option("--grid-gamma", g_gamma, "Comma-separated gamma values");
    sw_cmd->add_option("--grid-sigma", g_sigma, "Comma-separated sigma values ('median' allowed)");
    sw_cmd->add_option("--grid-beta", g_beta, "Comma-separated beta values");
    sw_cmd->add_option("--grid-lambda", g_lambda, "Comma-separated lambda values");
    sw_cmd->add_option("--grid-K", g_k, "Comma-separated iteration counts");
    sw_cmd->add_option("--beta", sw_m.score.beta, "Conflict energy weight")->capture_default_str();
    sw_cmd->add_option("--lambda", sw_m.score.lambda, "Trajectory energy weight")->capture_default_str();
    sw_cmd->add_option("--reliability-mode", sw_o.reliability, "paper_literal | neighbor_mean");
    sw_cmd->add_flag("--normalize-signals", sw_m.score.normalize_signals, "z-score signals before fusion");
    sw_cmd->add_option("--seeds", sw_seeds, "Seeds per grid point (seed, seed+1, ...)")->capture_default_str();
    sw_cmd->add_option("--out", sweep_out, "Output CSV")->capture_default_str();
    sw_cmd->add_option("--workers", workers, "Worker threads");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitInput;
    }

    if (*run_cmd) {
        return guarded([&] {
            RunManifest m;
            if (!manifest_path.empty()) {
                std::ifstream in(manifest_path);
                if (!in) throw FormatError("manifest file not found: " + manifest_path);
                m = manifest_from_json(nlohmann::json::parse(in));
                if (run_cmd->count("--out") > 0) m.out_dir = run_m.out_dir;
            } else {
                m = run_m;
                finalize_model_options(m, run_o);
            }
            m.atc.record_trace = m.write_trace;
            const auto result = run_pipeline(m, workers);
            write_outputs(m, result);
            std::cout << "nodes " << result.graph.num_nodes() << ", edges " << result.graph.num_edges()
                      << ", K " << m.atc.iterations << ", sigma " << result.atc.state.sigma << '\n';
            if (result.auroc) std::cout << "auroc " << *result.auroc << '\n';
            std::cout << "wrote " << m.out_dir << "/scores.csv\n";
            return 0;
        });
    }

    if (*vs_cmd) {
        return guarded([&] {
            finalize_model_options(vs_m, vs_o);
            const Graph g = load_input(vs_m);
            EncoderConfig ec = vs_m.encoder;
            ec.projection_seed = encoder_seed(vs_m.seed);
            const Matrix z0 = encode(g, ec, resolve_workers(workers));
            const DenoiserOperator op = build_denoiser(vs_m, g, z0);
            if (!op.is_contractive())
                throw ContractionError("denoiser '" + to_string(op.kind()) +
                                       "' is not contractive (L_D >= 1); refusing to certify");
            std::optional<Vector> reference = op.fixed_point();
            if (!reference && op.kind() == DenoiserKind::linear_trained) {
                // Fixed point of z = M z + b.
                const Matrix a = Matrix::Identity(op.matrix().rows(), op.matrix().cols()) - op.matrix();
                reference = a.fullPivLu().solve(op.bias());
            }
            std::vector<NodeId> nodes;
            if (vs_node) nodes.push_back(*vs_node);
            else
                for (NodeId i = 0; i < g.num_nodes(); ++i)
                    if (!g.has_labels() || (*g.labels())[i] == 0) nodes.push_back(i);
            const auto certs = verify_stability_nodes(g, z0, op, vs_m.atc, nodes, reference, resolve_workers(workers));
            bool all = true;
            double eps = 0.0;
            nlohmann::json doc;
            doc["alpha"] = vs_m.atc.alpha;
            doc["lipschitz"] = *op.lipschitz();
            doc["contraction_factor"] = contraction_factor(vs_m.atc.alpha, *op.lipschitz());
            doc["nodes"] = nlohmann::json::array();
            for (const auto& c : certs) {
                all = all && c.satisfied;
                eps = std::max(eps, c.epsilon_hat);
                doc["nodes"].push_back(to_json(c));
            }
            doc["epsilon_hat_max"] = eps;
            doc["satisfied"] = all;
            write_file_atomic(cert_path, doc.dump(2) + "\n");
            std::printf("contraction_factor %.6g\n", contraction_factor(vs_m.atc.alpha, *op.lipschitz()));
            std::printf("epsilon_hat %.6g\n", eps);
            std::printf("nodes %zu\n", certs.size());
            std::printf("satisfied %s\n", all ? "true" : "false");
            return all ? 0 : kExitRuntime;
        });
    }

    if (*sw_cmd) {
        return guarded([&] {
            finalize_model_options(sw_m, sw_o);
            SweepGrid grid;
            grid.alpha = parse_list<double>(g_alpha);
            grid.gamma = parse_list<double>(g_gamma);
            grid.beta = parse_list<double>(g_beta);
            grid.lambda = parse_list<double>(g_lambda);
            grid.iterations = parse_list<int>(g_k);
            for (const auto& s : split_list(g_sigma)) grid.sigma.push_back(Bandwidth::parse(s));
            if (grid.empty()) throw InvalidArgument("sweep needs at least one --grid-* axis");
            const auto rows = run_sweep(sw_m, grid, sw_seeds, workers);
            write_file_atomic(sweep_out, sweep_csv(rows));
            std::cout << "wrote " << rows.size() << " rows to " << sweep_out << '\n';
            return 0;
        });
    }
    return kExitInput;
}
