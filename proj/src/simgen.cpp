#include "qgm/simgen.hpp"

#include <cmath>
#include <string>

#include "qgm/mathx.hpp"
#include "qgm/rng.hpp"

namespace qgm {

TrueGraph TrueGraph::from_edges(int d, std::vector<std::pair<int, int>> edges) {
    TrueGraph g;
    g.d = d;
    g.adjacency = Eigen::MatrixXi::Zero(d, d);
    for (auto& e : edges) {
        if (e.first > e.second) std::swap(e.first, e.second);
        if (e.first == e.second || e.first < 0 || e.second >= d)
            throw Error("invalid edge in true graph");
        g.adjacency(e.first, e.second) = 1;
        g.adjacency(e.second, e.first) = 1;
    }
    g.edges = std::move(edges);
    return g;
}

TrueGraph gen_hub_graph(int d) {
    const int group = d < 20 ? 10 : 20;
    if (d <= 0 || d % group != 0)
        throw IndivisibleD("d = " + std::to_string(d) +
                           " is not divisible into groups of " + std::to_string(group));
    std::vector<std::pair<int, int>> edges;
    for (int g0 = 0; g0 < d; g0 += group) {
        for (int j = g0 + 1; j < g0 + group; ++j) edges.emplace_back(g0, j);
    }
    return TrueGraph::from_edges(d, std::move(edges));
}

PrecisionPair make_precision(const TrueGraph& graph) {
    const int d = graph.d;
    Eigen::MatrixXd A = graph.adjacency.cast<double>() * 0.3;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    const double lmin = es.eigenvalues().minCoeff();
    Eigen::MatrixXd inner =
        A + (std::abs(lmin) + 0.2) * Eigen::MatrixXd::Identity(d, d);
    Eigen::VectorXd D(d);
    const int half = (d + 1) / 2;
    for (int j = 0; j < d; ++j) D[j] = j < half ? 1.0 : 1.5;
    PrecisionPair out;
    out.theta = D.asDiagonal() * inner * D.asDiagonal();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> check(out.theta);
    const double dmin = D.minCoeff();
    if (check.eigenvalues().minCoeff() < 0.2 * dmin * dmin - 1e-10)
        throw NotPositiveDefinite("precision matrix lost definiteness");

    Eigen::LLT<Eigen::MatrixXd> llt(out.theta);
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefinite("precision matrix is not SPD");
    out.sigma = llt.solve(Eigen::MatrixXd::Identity(d, d));
    return out;
}

namespace {

std::vector<std::string> default_names(int d) {
    std::vector<std::string> names(d);
    for (int j = 0; j < d; ++j) names[j] = "x" + std::to_string(j + 1);
    return names;
}

}  // namespace

SampleMatrix sample_mvn(const Eigen::MatrixXd& sigma, int n, std::uint64_t seed) {
    const int d = static_cast<int>(sigma.rows());
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success)
        throw CholeskyFailure("covariance matrix is not SPD");
    const Eigen::MatrixXd L = llt.matrixL();
    Rng rng(seed, {static_cast<std::uint64_t>(StreamPurpose::SimReplication)});
    SampleMatrix s;
    s.values.resize(n, d);
    Eigen::VectorXd z(d);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) z[j] = rng.normal();
        s.values.row(i) = (L * z).transpose();
    }
    s.names = default_names(d);
    return s;
}

std::pair<SampleMatrix, TrueGraph> gen_nongaussian_iso(int n, int d,
                                                       std::uint64_t seed) {
    if (d < 3) throw Error("gen_nongaussian_iso needs d >= 3");
    const double pi = 3.14159265358979323846;
    const double c0 = -std::sqrt(2.0 / (3.0 * pi - 2.0));
    const double c1 = std::sqrt(pi / (3.0 * pi - 2.0));
    Rng rng(seed, {static_cast<std::uint64_t>(StreamPurpose::SimReplication)});
    SampleMatrix s;
    s.values.resize(n, d);
    for (int i = 0; i < n; ++i) {
        double wd1 = 0.0, wd = 0.0;
        for (int j = 0; j < d; ++j) {
            const double w = rng.normal();
            if (j < d - 1) s.values(i, j) = w;
            if (j == d - 2) wd1 = w;
            if (j == d - 1) wd = w;
        }
        s.values(i, d - 1) = c0 + c1 * wd1 * wd1 * std::abs(wd);
    }
    s.names = default_names(d);
    TrueGraph truth = TrueGraph::from_edges(d, {{d - 2, d - 1}});
    return {std::move(s), std::move(truth)};
}

OracleCoefs gaussian_oracle_coefs(const Eigen::MatrixXd& sigma, int a, double tau) {
    const int d = static_cast<int>(sigma.rows());
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success)
        throw CholeskyFailure("sigma is not SPD");
    const Eigen::MatrixXd theta = llt.solve(Eigen::MatrixXd::Identity(d, d));
    OracleCoefs out;
    out.intercept = normal_quantile(tau) / std::sqrt(theta(a, a));
    out.slopes.resize(d - 1);
    int idx = 0;
    for (int j = 0; j < d; ++j) {
        if (j == a) continue;
        out.slopes[idx++] = -theta(a, j) / theta(a, a);
    }
    return out;
}

FpFn fp_fn(const Eigen::MatrixXi& estimated_directed, const TrueGraph& truth,
           bool directed_count) {
    const int d = truth.d;
    if (estimated_directed.rows() != d || estimated_directed.cols() != d)
        throw DimensionMismatch("estimated graph dimension mismatch");
    FpFn out;
    for (int a = 0; a < d; ++a) {
        for (int b = 0; b < d; ++b) {
            if (a == b) continue;
            const bool est = estimated_directed(a, b) != 0;
            const bool tru = truth.adjacency(a, b) != 0;
            if (directed_count) {
                if (est && !tru) ++out.fp;
                if (!est && tru) ++out.fn;
            } else if (a < b) {
                const bool est_u = est || estimated_directed(b, a) != 0;
                if (est_u && !tru) ++out.fp;
                if (!est_u && tru) ++out.fn;
            }
        }
    }
    return out;
}

int undirected_fp_collapse(const Eigen::MatrixXi& estimated_directed,
                           const TrueGraph& truth) {
    const int d = truth.d;
    int count = 0;
    for (int a = 0; a < d; ++a)
        for (int b = a + 1; b < d; ++b) {
            if (truth.adjacency(a, b) != 0) continue;
            if (estimated_directed(a, b) != 0 || estimated_directed(b, a) != 0)
                ++count;
        }
    return count;
}

}  // namespace qgm
