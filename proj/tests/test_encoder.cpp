#include "trajgad/encoder.hpp"
#include "trajgad/synthetic.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

using namespace trajgad;

namespace {

using Dense = std::vector<std::vector<double>>;

Graph random_graph(std::size_t n, double p, std::size_t d, Seed seed) {
    CounterRng rng(seed);
    std::vector<Edge> edges;
    for (NodeId i = 0; i < n; ++i)
        for (NodeId j = i + 1; j < n; ++j)
            if (rng.uniform() < p) edges.push_back({i, j});
    Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index c = 0; c < x.cols(); ++c) x(i, c) = rng.normal();
    return Graph(n, edges, x);
}

Dense to_dense(const Matrix& m) {
    Dense out(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index c = 0; c < m.cols(); ++c) out[i][c] = m(i, c);
    return out;
}

Dense matmul(const Dense& a, const Dense& b) {
    Dense out(a.size(), std::vector<double>(b[0].size(), 0.0));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t k = 0; k < b.size(); ++k)
            for (std::size_t j = 0; j < b[0].size(); ++j) out[i][j] += a[i][k] * b[k][j];
    return out;
}

// D^(-1/2) (A + I) D^(-1/2) built from scratch.
Dense normalized_adjacency(const Graph& g) {
    const std::size_t n = g.num_nodes();
    Dense a(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) a[i][i] = 1.0;
    for (const Edge& e : g.edges()) a[e.u][e.v] = a[e.v][e.u] = 1.0;
    std::vector<double> deg(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) deg[i] = std::accumulate(a[i].begin(), a[i].end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a[i][j] /= std::sqrt(deg[i] * deg[j]);
    return a;
}

double max_abs_diff(const Matrix& m, const Dense& d) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index c = 0; c < m.cols(); ++c) worst = std::max(worst, std::abs(m(i, c) - d[i][c]));
    return worst;
}

} // namespace

TEST_CASE("propagate on a single edge") {
    Matrix x(2, 2);
    x << 1, 0, 0, 1;
    const Graph g(2, {{0, 1}}, x);
    const Matrix out = normalized_propagate(g, x);
    Matrix expected(2, 2);
    expected << 0.5, 0.5, 0.5, 0.5;
    CHECK((out - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("propagate leaves an isolated node unchanged") {
    Matrix x(3, 2);
    x << 1, 2, 3, 4, -7.25, 0.5;
    const Graph g(3, {{0, 1}}, x);
    const Matrix out = normalized_propagate(g, x);
    CHECK(out.row(2) == x.row(2));
}

TEST_CASE("propagate matches the dense normalized adjacency") {
    for (Seed s = 0; s < 5; ++s) {
        const Graph g = random_graph(10, 0.3, 3, s);
        const Matrix out = normalized_propagate(g, g.features());
        const Dense expected = matmul(normalized_adjacency(g), to_dense(g.features()));
        CHECK(max_abs_diff(out, expected) < 1e-12);
    }
}

TEST_CASE("propagate is linear") {
    const Graph g = random_graph(25, 0.2, 4, 3);
    CounterRng rng(4);
    Matrix h1(25, 4), h2(25, 4);
    for (Eigen::Index i = 0; i < 25; ++i)
        for (Eigen::Index c = 0; c < 4; ++c) {
            h1(i, c) = rng.normal();
            h2(i, c) = rng.normal();
        }
    const double a = 1.7, b = -0.3;
    const Matrix lhs = normalized_propagate(g, a * h1 + b * h2);
    const Matrix rhs = a * normalized_propagate(g, h1) + b * normalized_propagate(g, h2);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("propagate is local to the closed neighborhood") {
    // Path 0-1-2-3-4: row 0 cannot see rows 2..4.
    Matrix x = Matrix::Ones(5, 2);
    const Graph g(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}}, x);
    const Matrix base = normalized_propagate(g, x);
    for (Eigen::Index far = 2; far < 5; ++far) {
        Matrix y = x;
        y.row(far) *= 100.0;
        const Matrix out = normalized_propagate(g, y);
        CHECK(out.row(0) == base.row(0));
    }
    Matrix y = x;
    y.row(1) *= 100.0;
    CHECK(normalized_propagate(g, y).row(0) != base.row(0));
}

TEST_CASE("propagate is permutation equivariant") {
    const Graph g = random_graph(15, 0.25, 3, 8);
    const std::size_t n = g.num_nodes();
    std::vector<NodeId> perm(n);
    std::iota(perm.begin(), perm.end(), NodeId{0});
    CounterRng rng(1);
    for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);

    std::vector<Edge> edges;
    for (const Edge& e : g.edges()) edges.push_back({perm[e.u], perm[e.v]});
    Matrix x(g.features().rows(), g.features().cols());
    for (NodeId i = 0; i < n; ++i) x.row(perm[i]) = g.features().row(i);
    const Graph pg(n, edges, x);

    const Matrix out = normalized_propagate(g, g.features());
    const Matrix pout = normalized_propagate(pg, pg.features());
    for (NodeId i = 0; i < n; ++i) CHECK((pout.row(perm[i]) - out.row(i)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("propagate is worker-count independent") {
    const Graph g = generate_sbm({400, 3, 0.05, 0.002, 6}, 2);
    const Matrix one = normalized_propagate(g, g.features(), 1);
    for (unsigned w : {2u, 3u, 8u}) CHECK(normalized_propagate(g, g.features(), w) == one);
}

TEST_CASE("zero-layer encoder is the identity when widths match") {
    const Graph g = random_graph(12, 0.3, 5, 1);
    EncoderConfig cfg;
    cfg.num_layers = 0;
    cfg.latent_dim = 5;
    CHECK(encode(g, cfg) == g.features());
    cfg.latent_dim = 3;
    const Matrix z = encode(g, cfg);
    CHECK(z.cols() == 3);
    const Matrix w = projection_weights(cfg.projection_seed, 0, 5, 3);
    CHECK((z - g.features() * w).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("projection weights follow the Glorot range and are seeded") {
    const Matrix w = projection_weights(7, 1, 40, 24);
    const double s = std::sqrt(6.0 / 64.0);
    CHECK(w.cwiseAbs().maxCoeff() <= s);
    CHECK(w.cwiseAbs().maxCoeff() > 0.9 * s);
    CHECK(std::abs(w.mean()) < 0.05);
    CHECK(projection_weights(7, 1, 40, 24) == w);
    CHECK(projection_weights(7, 2, 40, 24) != w);
    CHECK(projection_weights(8, 1, 40, 24) != w);
}

TEST_CASE("encoder is deterministic") {
    const Graph g = random_graph(30, 0.2, 6, 5);
    EncoderConfig cfg;
    cfg.projection_seed = 17;
    CHECK(encode(g, cfg) == encode(g, cfg));
    EncoderConfig other = cfg;
    other.projection_seed = 18;
    CHECK(encode(g, other) != encode(g, cfg));
}

TEST_CASE("two-layer encoder matches a dense straight-line pipeline") {
    const Graph g = random_graph(20, 0.25, 6, 12);
    EncoderConfig cfg;
    cfg.num_layers = 2;
    cfg.latent_dim = 4;
    cfg.projection_seed = 31;
    const Matrix z = encode(g, cfg);

    const Dense a = normalized_adjacency(g);
    const Dense w0 = to_dense(projection_weights(31, 0, 6, 4));
    const Dense w1 = to_dense(projection_weights(31, 1, 4, 4));
    Dense h = matmul(matmul(a, to_dense(g.features())), w0);
    for (auto& row : h)
        for (double& v : row) v = v > 0.0 ? v : 0.0;
    h = matmul(matmul(a, h), w1);
    CHECK(max_abs_diff(z, h) < 1e-12);

    cfg.use_nonlinearity = false;
    const Matrix zl = encode(g, cfg);
    const Dense hl = matmul(matmul(a, matmul(matmul(a, to_dense(g.features())), w0)), w1);
    CHECK(max_abs_diff(zl, hl) < 1e-12);
}

TEST_CASE("encoder rejects invalid configs") {
    const Graph g = random_graph(4, 0.5, 2, 1);
    EncoderConfig cfg;
    cfg.num_layers = -1;
    CHECK_THROWS_AS(encode(g, cfg), InvalidArgument);
    cfg.num_layers = 1;
    cfg.latent_dim = 0;
    CHECK_THROWS_AS(encode(g, cfg), InvalidArgument);
    CHECK_THROWS_AS(normalized_propagate(g, Matrix::Zero(3, 2)), ShapeError);
}
