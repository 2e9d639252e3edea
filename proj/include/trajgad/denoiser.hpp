#pragma once

#include "trajgad/error.hpp"
#include "trajgad/matrix.hpp"
#include "trajgad/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace trajgad {

enum class DenoiserKind { identity, shrinkage, linear_trained };

inline std::string to_string(DenoiserKind k) {
    switch (k) {
    case DenoiserKind::identity: return "identity";
    case DenoiserKind::shrinkage: return "shrinkage";
    case DenoiserKind::linear_trained: return "linear_trained";
    }
    return "unknown";
}

inline DenoiserKind denoiser_kind_from_string(const std::string& s) {
    if (s == "identity") return DenoiserKind::identity;
    if (s == "shrinkage") return DenoiserKind::shrinkage;
    if (s == "linear_trained" || s == "linear") return DenoiserKind::linear_trained;
    throw InvalidArgument("unknown denoiser kind '" + s + "'");
}

/// Adaptation operator D applied to every latent vector in the Adapt step.
///
///   identity        D(z) = z                  (L_D = 1, not contractive)
///   shrinkage       D(z) = m + rho (z - m)    (L_D = rho, fixed point m)
///   linear_trained  D(z) = M z + b            (L_D = ||M||_2 when declared)
///
/// The operator is time-invariant and immutable once built.
class DenoiserOperator {
public:
    static DenoiserOperator identity() { return DenoiserOperator(DenoiserKind::identity); }

    static DenoiserOperator shrinkage(Vector center, double ratio) {
        if (!(ratio >= 0.0 && ratio < 1.0)) throw InvalidArgument("shrinkage ratio must lie in [0, 1)");
        if (center.size() < 1) throw InvalidArgument("shrinkage center must be non-empty");
        DenoiserOperator op(DenoiserKind::shrinkage);
        op.center_ = std::move(center);
        op.ratio_ = ratio;
        op.declared_lipschitz_ = ratio;
        return op;
    }

    static DenoiserOperator linear(Matrix m, Vector bias, std::optional<double> lipschitz = std::nullopt) {
        if (m.rows() != m.cols() || m.rows() != bias.size() || m.rows() < 1)
            throw ShapeError("linear denoiser needs a square matrix and matching bias");
        DenoiserOperator op(DenoiserKind::linear_trained);
        op.matrix_ = std::move(m);
        op.bias_ = std::move(bias);
        op.declared_lipschitz_ = lipschitz;
        return op;
    }

    [[nodiscard]] DenoiserKind kind() const noexcept { return kind_; }

    /// Latent width the operator accepts; nullopt for identity (any width).
    [[nodiscard]] std::optional<std::size_t> dim() const {
        switch (kind_) {
        case DenoiserKind::identity: return std::nullopt;
        case DenoiserKind::shrinkage: return static_cast<std::size_t>(center_.size());
        case DenoiserKind::linear_trained: return static_cast<std::size_t>(matrix_.rows());
        }
        return std::nullopt;
    }

    /// Known contraction constant: 1 for identity, rho for shrinkage, the
    /// fitted spectral norm (if any) for linear_trained.
    [[nodiscard]] std::optional<double> lipschitz() const {
        if (kind_ == DenoiserKind::identity) return 1.0;
        return declared_lipschitz_;
    }

    [[nodiscard]] bool is_contractive() const {
        const auto l = lipschitz();
        return l.has_value() && *l < 1.0;
    }

    /// Fixed point when it is known in closed form (shrinkage center).
    [[nodiscard]] std::optional<Vector> fixed_point() const {
        if (kind_ == DenoiserKind::shrinkage) return center_;
        return std::nullopt;
    }

    [[nodiscard]] const Vector& center() const noexcept { return center_; }
    [[nodiscard]] double ratio() const noexcept { return ratio_; }
    [[nodiscard]] const Matrix& matrix() const noexcept { return matrix_; }
    [[nodiscard]] const Vector& bias() const noexcept { return bias_; }

    void check_dim(std::size_t d) const {
        if (const auto w = dim(); w && *w != d)
            throw ShapeError("denoiser expects dimension " + std::to_string(*w) + ", got " +
                             std::to_string(d));
    }

    /// out = D(z). out must not alias z.
    void apply(std::span<const double> z, std::span<double> out) const {
        if (out.size() != z.size()) throw ShapeError("denoiser output size mismatch");
        check_dim(z.size());
        switch (kind_) {
        case DenoiserKind::identity:
            std::copy(z.begin(), z.end(), out.begin());
            break;
        case DenoiserKind::shrinkage:
            for (std::size_t k = 0; k < z.size(); ++k) {
                const double m = center_[static_cast<Eigen::Index>(k)];
                out[k] = m + ratio_ * (z[k] - m);
            }
            break;
        case DenoiserKind::linear_trained: {
            const auto d = static_cast<Eigen::Index>(z.size());
            for (Eigen::Index r = 0; r < d; ++r) {
                double s = bias_[r];
                for (Eigen::Index c = 0; c < d; ++c) s += matrix_(r, c) * z[static_cast<std::size_t>(c)];
                out[static_cast<std::size_t>(r)] = s;
            }
            break;
        }
        }
    }

    [[nodiscard]] Vector apply(const Vector& z) const {
        Vector out(z.size());
        apply(std::span<const double>(z.data(), static_cast<std::size_t>(z.size())),
              std::span<double>(out.data(), static_cast<std::size_t>(out.size())));
        return out;
    }

private:
    explicit DenoiserOperator(DenoiserKind k) : kind_(k) {}

    DenoiserKind kind_;
    Vector center_;
    double ratio_ = 1.0;
    Matrix matrix_;
    Vector bias_;
    std::optional<double> declared_lipschitz_;
};

/// Linear beta schedule for the forward noising process.
struct NoiseSchedule {
    std::vector<double> betas;

    static NoiseSchedule linear(std::size_t steps = 100, double beta_start = 1e-4, double beta_end = 2e-2) {
        if (steps == 0) throw InvalidArgument("noise schedule needs at least one step");
        if (!(beta_start > 0.0 && beta_end < 1.0 && beta_start <= beta_end))
            throw InvalidArgument("noise schedule needs 0 < beta_start <= beta_end < 1");
        NoiseSchedule s;
        s.betas.resize(steps);
        for (std::size_t t = 0; t < steps; ++t)
            s.betas[t] = steps == 1 ? beta_start
                                    : beta_start + (beta_end - beta_start) * static_cast<double>(t) /
                                                       static_cast<double>(steps - 1);
        return s;
    }

    [[nodiscard]] std::size_t steps() const noexcept { return betas.size(); }

    /// Cumulative signal retention prod_{s <= t} (1 - beta_s).
    [[nodiscard]] double alpha_bar(std::size_t t) const {
        double a = 1.0;
        for (std::size_t s = 0; s <= t; ++s) a *= 1.0 - betas[s];
        return a;
    }
};

inline double spectral_norm(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    return svd.singularValues()(0);
}

/// Ridge regression from noised latents back to clean ones, standing in for a
/// learned reverse-process mean. Noised samples follow the closed form of the
/// forward process after t + 1 steps: z_t = sqrt(abar) z + sqrt(1 - abar) eps.
/// Solves min sum ||M z_t + b - z||^2 + ridge ||M||_F^2 with b unpenalized.
inline DenoiserOperator fit_linear_denoiser(const Matrix& clean, const NoiseSchedule& schedule,
                                            std::size_t noise_level_t, double ridge, Seed seed) {
    const auto n = clean.rows();
    const auto d = clean.cols();
    if (d < 1 || n <= d) throw InvalidArgument("linear denoiser fit needs more rows than columns");
    if (noise_level_t >= schedule.steps()) throw InvalidArgument("noise level outside the schedule");
    if (!(ridge > 0.0)) throw InvalidArgument("ridge must be positive");

    const double abar = schedule.alpha_bar(noise_level_t);
    const double keep = std::sqrt(abar);
    const double noise = std::sqrt(1.0 - abar);
    CounterRng rng(derive_seed(seed, "denoiser-fit"));
    Eigen::MatrixXd noisy(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index c = 0; c < d; ++c) noisy(i, c) = keep * clean(i, c) + noise * rng.normal();

    const Eigen::RowVectorXd mean_x = noisy.colwise().mean();
    const Eigen::RowVectorXd mean_y = clean.colwise().mean();
    const Eigen::MatrixXd xc = noisy.rowwise() - mean_x;
    const Eigen::MatrixXd yc = clean.rowwise() - mean_y;

    Eigen::MatrixXd gram = xc.transpose() * xc;
    gram.diagonal().array() += ridge;
    Eigen::LDLT<Eigen::MatrixXd> solver(gram);
    if (solver.info() != Eigen::Success || !solver.isPositive())
        throw NumericalError("ridge normal equations are singular");
    // M^T = gram^{-1} Xc^T Yc
    const Eigen::MatrixXd mt = solver.solve(xc.transpose() * yc);
    if (!mt.allFinite()) throw NumericalError("ridge solution is not finite");
    Matrix m = mt.transpose();
    Vector b = mean_y.transpose() - m * mean_x.transpose();
    const double l = spectral_norm(m);
    return DenoiserOperator::linear(std::move(m), std::move(b), l);
}

/// Empirical Lipschitz constant: max ||D(u) - D(v)|| / ||u - v|| over
/// probe_count pairs with u, v ~ N(0, radius^2 I).
inline double estimate_lipschitz(const DenoiserOperator& op, std::size_t probe_count, double radius,
                                 Seed seed, std::size_t dim_hint = 1) {
    if (probe_count < 2) throw InvalidArgument("estimate_lipschitz needs at least two probes");
    const std::size_t d = op.dim().value_or(std::max<std::size_t>(1, dim_hint));
    CounterRng rng(derive_seed(seed, "lipschitz-probe"));
    std::vector<double> u(d), v(d), du(d), dv(d);
    double best = 0.0;
    for (std::size_t p = 0; p < probe_count; ++p) {
        for (std::size_t k = 0; k < d; ++k) {
            u[k] = radius * rng.normal();
            v[k] = radius * rng.normal();
        }
        const double den = std::sqrt(squared_distance(u, v));
        if (den == 0.0) continue;
        op.apply(u, du);
        op.apply(v, dv);
        best = std::max(best, std::sqrt(squared_distance(du, dv)) / den);
    }
    return best;
}

// JSON persistence: {"kind", "center"/"ratio" | "matrix"/"bias", "declared_lipschitz"}.

inline nlohmann::json to_json(const DenoiserOperator& op) {
    nlohmann::json j;
    j["kind"] = to_string(op.kind());
    switch (op.kind()) {
    case DenoiserKind::identity: break;
    case DenoiserKind::shrinkage:
        j["center"] = std::vector<double>(op.center().begin(), op.center().end());
        j["ratio"] = op.ratio();
        break;
    case DenoiserKind::linear_trained: {
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index r = 0; r < op.matrix().rows(); ++r) {
            std::vector<double> row(op.matrix().row(r).begin(), op.matrix().row(r).end());
            rows.push_back(row);
        }
        j["matrix"] = rows;
        j["bias"] = std::vector<double>(op.bias().begin(), op.bias().end());
        break;
    }
    }
    if (const auto l = op.lipschitz()) j["declared_lipschitz"] = *l;
    else j["declared_lipschitz"] = nullptr;
    return j;
}

inline DenoiserOperator denoiser_from_json(const nlohmann::json& j) {
    try {
        const auto kind = denoiser_kind_from_string(j.at("kind").get<std::string>());
        switch (kind) {
        case DenoiserKind::identity: return DenoiserOperator::identity();
        case DenoiserKind::shrinkage: {
            const auto c = j.at("center").get<std::vector<double>>();
            return DenoiserOperator::shrinkage(Eigen::Map<const Vector>(c.data(), static_cast<Eigen::Index>(c.size())),
                                               j.at("ratio").get<double>());
        }
        case DenoiserKind::linear_trained: {
            const auto rows = j.at("matrix").get<std::vector<std::vector<double>>>();
            const auto b = j.at("bias").get<std::vector<double>>();
            Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
            for (std::size_t r = 0; r < rows.size(); ++r) {
                if (rows[r].size() != rows.size()) throw ShapeError("denoiser matrix is not square");
                for (std::size_t c = 0; c < rows.size(); ++c)
                    m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
            }
            std::optional<double> l;
            if (j.contains("declared_lipschitz") && !j["declared_lipschitz"].is_null())
                l = j["declared_lipschitz"].get<double>();
            return DenoiserOperator::linear(std::move(m),
                                            Eigen::Map<const Vector>(b.data(), static_cast<Eigen::Index>(b.size())), l);
        }
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed denoiser document: ") + e.what());
    }
    throw FormatError("malformed denoiser document");
}

} // namespace trajgad
