#include <doctest.h>

#include <cmath>

#include "qgm/lasso.hpp"
#include "qgm/rng.hpp"

using namespace qgm;

namespace {

PenaltyChoice level(double v) {
    PenaltyChoice pc;
    pc.value = v;
    return pc;
}

}  // namespace

TEST_CASE("post-lasso recovers a single linear signal") {
    Rng rng(12, {3});
    const int n = 200, p = 8;
    Eigen::MatrixXd Z(n, p);
    Eigen::VectorXd exact(n), noisy(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) Z(i, j) = rng.normal();
        exact[i] = 1.5 * Z(i, 2);
        noisy[i] = exact[i] + 0.3 * rng.normal();
    }
    QgmConfig cfg;
    Eigen::VectorXd k = Eigen::VectorXd::Ones(n);
    SUBCASE("exactly linear target") {
        LassoFit fit = weighted_post_lasso(exact, Z, k, level(0.15), cfg);
        CHECK(fit.support == std::vector<int>{2});
        CHECK(fit.gamma[2] == doctest::Approx(1.5).epsilon(1e-10));
        CHECK(std::sqrt(fit.v_hat.cwiseAbs2().mean()) <= 1e-10);
    }
    SUBCASE("noisy target") {
        // penalty at the scale the analytic rule gives for n = 200
        LassoFit fit = weighted_post_lasso(noisy, Z, k, level(0.6), cfg);
        CHECK(fit.support == std::vector<int>{2});
        CHECK(fit.gamma[2] == doctest::Approx(1.5).epsilon(0.05));
        CHECK(std::sqrt(fit.v_hat.cwiseAbs2().mean()) < 0.4);
    }
}

TEST_CASE("huge lambda empties the support and keeps the target as residual") {
    Rng rng(9, {14});
    const int n = 60, p = 4;
    Eigen::MatrixXd Z(n, p);
    Eigen::VectorXd t(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) Z(i, j) = rng.normal();
        t[i] = rng.normal();
    }
    QgmConfig cfg;
    Eigen::VectorXd k = Eigen::VectorXd::Ones(n);
    LassoFit fit = weighted_post_lasso(t, Z, k, level(1e8), cfg);
    CHECK(fit.support.empty());
    CHECK((fit.v_hat - t).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("lambda zero equals ordinary least squares") {
    Rng rng(4, {44});
    const int n = 20, p = 4;
    Eigen::MatrixXd Z(n, p);
    Eigen::VectorXd t(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) Z(i, j) = rng.normal();
        t[i] = 0.3 * Z(i, 0) - 0.7 * Z(i, 3) + 0.5 * rng.normal();
    }
    QgmConfig cfg;
    Eigen::VectorXd k = Eigen::VectorXd::Ones(n);
    LassoFit fit = weighted_post_lasso(t, Z, k, level(0.0), cfg);
    // normal-equations oracle
    Eigen::VectorXd ols = (Z.transpose() * Z).ldlt().solve(Z.transpose() * t);
    for (int j = 0; j < p; ++j)
        CHECK(fit.gamma[j] == doctest::Approx(ols[j]).epsilon(1e-8));
}

TEST_CASE("refit residuals are orthogonal to the support columns") {
    Rng rng(31, {2});
    const int n = 150, p = 6;
    Eigen::MatrixXd Z(n, p);
    Eigen::VectorXd t(n), k(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) Z(i, j) = rng.normal();
        t[i] = 0.9 * Z(i, 1) + 0.8 * Z(i, 4) + rng.normal();
        k[i] = rng.uniform() < 0.85 ? 1.0 : 0.0;
    }
    QgmConfig cfg;
    LassoFit fit = weighted_post_lasso(t, Z, k, level(0.05), cfg);
    for (int j : fit.support) {
        const double dot = Z.col(j).cwiseProduct(k).dot(fit.v_hat) / n;
        CHECK(std::abs(dot) <= 1e-8);
    }
}

TEST_CASE("residual-based loadings shrink below the conservative initials") {
    Rng rng(8, {81});
    const int n = 300, p = 5;
    Eigen::MatrixXd Z(n, p);
    Eigen::VectorXd t(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) Z(i, j) = rng.normal();
        t[i] = Z(i, 0) * 0.5 + rng.normal();
    }
    QgmConfig cfg;
    Eigen::VectorXd k = Eigen::VectorXd::Ones(n);
    LassoFit fit = weighted_post_lasso(t, Z, k, level(0.08), cfg);
    // reconstruct the pass-0 loadings for comparison
    double row_max = 0.0;
    for (int i = 0; i < n; ++i)
        row_max = std::max(
            row_max, std::max(std::abs(t[i]), Z.row(i).cwiseAbs().maxCoeff()));
    for (int j = 0; j < p; ++j) {
        const double rms = std::sqrt(Z.col(j).cwiseAbs2().mean());
        CHECK(fit.loadings_final[j] <= row_max * rms + 1e-12);
    }
}

TEST_CASE("lasso coordinate descent certificate") {
    Rng rng(5, {51});
    const int n = 80, p = 10;
    Eigen::MatrixXd Z(n, p);
    Eigen::VectorXd t(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) Z(i, j) = rng.normal();
        t[i] = rng.normal();
    }
    Eigen::VectorXd k = Eigen::VectorXd::Ones(n);
    Eigen::VectorXd w = Eigen::VectorXd::Ones(p);
    Eigen::VectorXd g = lasso_cd(t, Z, k, 0.1, w, 1e-8);
    // verify the subgradient condition from scratch
    const Eigen::VectorXd r = t - Z * g;
    for (int j = 0; j < p; ++j) {
        const double grad = -2.0 * Z.col(j).dot(r) / n;
        if (g[j] != 0.0) {
            CHECK(std::abs(grad + 0.1 * (g[j] > 0 ? 1.0 : -1.0)) <= 1e-7);
        } else {
            CHECK(std::abs(grad) <= 0.1 + 1e-7);
        }
    }
}
