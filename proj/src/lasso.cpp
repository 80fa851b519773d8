#include "qgm/lasso.hpp"

#include <algorithm>
#include <cmath>

namespace qgm {

namespace {

double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

// Least squares of target on the support columns over the active rows;
// drops the newest support columns until the system has full rank.
void refit_ls(const Eigen::VectorXd& target, const Eigen::MatrixXd& Z,
              const Eigen::VectorXd& k, std::vector<int>& support,
              std::vector<int>& dropped, Eigen::VectorXd& gamma) {
    const int n = static_cast<int>(target.size());
    gamma = Eigen::VectorXd::Zero(Z.cols());
    while (!support.empty()) {
        const int s = static_cast<int>(support.size());
        Eigen::MatrixXd M(n, s);
        for (int j = 0; j < s; ++j) M.col(j) = Z.col(support[j]).cwiseProduct(k);
        Eigen::VectorXd ky = target.cwiseProduct(k);
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(M);
        qr.setThreshold(1e-10);
        if (qr.rank() == s) {
            Eigen::VectorXd g = qr.solve(ky);
            for (int j = 0; j < s; ++j) gamma[support[j]] = g[j];
            return;
        }
        dropped.push_back(support.back());
        support.pop_back();
    }
}

}  // namespace

Eigen::VectorXd lasso_cd(const Eigen::VectorXd& target,
                         const Eigen::MatrixXd& regressors,
                         const Eigen::VectorXd& k, double lambda,
                         const Eigen::VectorXd& loadings, double kkt_tol) {
    const int n = static_cast<int>(target.size());
    const int p = static_cast<int>(regressors.cols());
    const double dn = static_cast<double>(n);
    Eigen::VectorXd gamma = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd r = target;  // residual target - Z gamma (gamma = 0)

    // Column second moments (2/n) sum k z^2; zero-variance columns stay out.
    Eigen::VectorXd a(p);
    for (int j = 0; j < p; ++j)
        a[j] = 2.0 * regressors.col(j).cwiseAbs2().dot(k) / dn;

    const int max_sweeps = 10000;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double worst = 0.0;
        for (int j = 0; j < p; ++j) {
            if (a[j] <= 0.0) continue;
            const double rho =
                2.0 * regressors.col(j).cwiseProduct(k).dot(r) / dn + a[j] * gamma[j];
            const double g_new = soft_threshold(rho, lambda * loadings[j]) / a[j];
            const double delta = g_new - gamma[j];
            if (delta != 0.0) {
                r -= delta * regressors.col(j);
                gamma[j] = g_new;
            }
        }
        // Subgradient certificate on all coordinates.
        for (int j = 0; j < p; ++j) {
            if (a[j] <= 0.0) continue;
            const double grad = -2.0 * regressors.col(j).cwiseProduct(k).dot(r) / dn;
            double viol;
            if (gamma[j] != 0.0) {
                viol = std::abs(grad + lambda * loadings[j] *
                                           (gamma[j] > 0.0 ? 1.0 : -1.0));
            } else {
                viol = std::max(0.0, std::abs(grad) - lambda * loadings[j]);
            }
            worst = std::max(worst, viol);
        }
        if (worst <= kkt_tol) return gamma;
    }
    throw MaxIterations("lasso coordinate descent did not certify optimality");
}

LassoFit weighted_post_lasso(const Eigen::VectorXd& target,
                             const Eigen::MatrixXd& regressors,
                             const Eigen::VectorXd& k,
                             const PenaltyChoice& lambda,
                             const QgmConfig& config) {
    const int n = static_cast<int>(target.size());
    const int p = static_cast<int>(regressors.cols());
    const double dn = static_cast<double>(n);
    if (regressors.rows() != n) throw DimensionMismatch("regressors rows != n");

    // Initial conservative loadings: max_i row-sup-norm (target included)
    // times the column root mean square, on the event rows.
    double row_max = 0.0;
    for (int i = 0; i < n; ++i) {
        if (k[i] <= 0.0) continue;
        double m = std::abs(target[i]);
        m = std::max(m, regressors.row(i).cwiseAbs().maxCoeff());
        row_max = std::max(row_max, m);
    }
    Eigen::VectorXd rms(p);
    for (int j = 0; j < p; ++j)
        rms[j] = std::sqrt(regressors.col(j).cwiseAbs2().dot(k) / dn);
    if ((rms.array() > 0.0).count() == 0)
        throw DegenerateDesign("all regressor columns vanish on the event");
    Eigen::VectorXd load0 = row_max * rms;

    auto one_pass = [&](const Eigen::VectorXd& loadings, LassoFit& fit) {
        Eigen::VectorXd g =
            lasso_cd(target, regressors, k, lambda.value, loadings, config.kkt_tol);
        fit.support.clear();
        for (int j = 0; j < p; ++j)
            if (g[j] != 0.0) fit.support.push_back(j);
        fit.dropped.clear();
        refit_ls(target, regressors, k, fit.support, fit.dropped, fit.gamma);
        fit.v_hat = (target - regressors * fit.gamma).cwiseProduct(k);
        fit.loadings_final = loadings;
    };

    LassoFit pass1;
    one_pass(load0, pass1);

    // A (numerically) perfect pass-1 fit voids the residual-based loadings;
    // keep the conservative pass in that case.
    const double v_scale2 = pass1.v_hat.cwiseAbs2().dot(k) / dn;
    const double t_scale2 = target.cwiseAbs2().dot(k) / dn;
    if (v_scale2 <= 1e-20 * (1.0 + t_scale2)) {
        pass1.objective =
            v_scale2 +
            lambda.value * (load0.array() * pass1.gamma.array().abs()).sum();
        return pass1;
    }

    // Residual-based loadings E_n[(k z_j)^2 v^2]^{1/2} from the pass-1 refit.
    Eigen::VectorXd load1(p);
    for (int j = 0; j < p; ++j) {
        const Eigen::VectorXd zv = regressors.col(j).cwiseProduct(pass1.v_hat);
        load1[j] = std::sqrt(zv.cwiseAbs2().dot(k) / dn);
    }
    // Columns with zero residual loading cannot be penalized; exclude them by
    // an effectively infinite loading instead of failing the whole pass.
    for (int j = 0; j < p; ++j)
        if (load1[j] == 0.0 && rms[j] > 0.0) load1[j] = 1e300;

    LassoFit fit;
    one_pass(load1, fit);
    fit.objective = fit.v_hat.cwiseAbs2().sum() / dn +
                    lambda.value * (load1.array() * fit.gamma.array().abs()).sum();
    return fit;
}

}  // namespace qgm
