#pragma once

// Straight-line reference for the full dynamics: dense adjacency, scalar
// loops, no shared code with the library. Shrinkage denoiser only.

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

namespace naive {

using Rows = std::vector<std::vector<double>>;

struct Result {
    Rows z;
    std::vector<std::vector<double>> trust;  // dense N x N, 0 off the edge set
    std::vector<double> r, energy, conflict;
};

inline Result run(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges, Rows z,
                  const std::vector<double>& center, double rho, double alpha, double gamma, double sigma,
                  int iterations) {
    const std::size_t d = center.size();
    std::vector<std::vector<int>> adj(n, std::vector<int>(n, 0));
    for (auto [a, b] : edges) {
        if (a == b) continue;
        adj[a][b] = 1;
        adj[b][a] = 1;
    }
    Result out;
    out.trust.assign(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (adj[i][j]) out.trust[i][j] = 1.0;
    out.r.assign(n, 0.0);
    out.energy.assign(n, 0.0);
    out.conflict.assign(n, 0.0);

    for (int k = 0; k < iterations; ++k) {
        Rows psi(n, std::vector<double>(d));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t t = 0; t < d; ++t) psi[i][t] = center[t] + rho * (z[i][t] - center[t]);

        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                if (!adj[i][j]) continue;
                double dist2 = 0.0;
                for (std::size_t t = 0; t < d; ++t) dist2 += (psi[i][t] - psi[j][t]) * (psi[i][t] - psi[j][t]);
                const double tau = std::exp(-dist2 / (2.0 * sigma * sigma));
                out.trust[i][j] = gamma * out.trust[i][j] + (1.0 - gamma) * tau;
            }

        Rows next(n, std::vector<double>(d));
        for (std::size_t i = 0; i < n; ++i) {
            double total = 0.0;
            for (std::size_t j = 0; j < n; ++j) total += out.trust[i][j];
            std::vector<double> c(d, 0.0);
            if (total == 0.0) {
                c = psi[i];
            } else {
                for (std::size_t j = 0; j < n; ++j)
                    for (std::size_t t = 0; t < d; ++t) c[t] += out.trust[i][j] / total * psi[j][t];
            }
            double dist = 0.0, cnf = 0.0, en = 0.0;
            for (std::size_t t = 0; t < d; ++t) {
                next[i][t] = alpha * psi[i][t] + (1.0 - alpha) * c[t];
                dist += (z[i][t] - c[t]) * (z[i][t] - c[t]);
                const double dd = psi[i][t] - z[i][t];
                const double dc = c[t] - z[i][t];
                cnf += (dd - dc) * (dd - dc);
                en += (next[i][t] - psi[i][t]) * (next[i][t] - psi[i][t]);
            }
            out.r[i] += std::sqrt(dist);
            out.conflict[i] += cnf;
            out.energy[i] += en;
        }
        z = std::move(next);
    }
    out.z = std::move(z);
    return out;
}

} // namespace naive
