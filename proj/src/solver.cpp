#include "qgm/solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qgm {

namespace {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

double interval_gap(const Interval& iv) {
    if (iv.lo > 0.0) return iv.lo;
    if (iv.hi < 0.0) return -iv.hi;
    return 0.0;
}

// Vertex simplex on the weighted heterogeneous-quantile formulation
//   min_beta sum_i m_i rho_{t_i}(y_i - a_i'beta)
// where the l1 penalty enters as pseudo-rows (y=0, a = w_j e_j, t=1/2,
// m=2*lambda). A vertex interpolates h rows exactly; optimality is checked
// through the basic rows' subgradient multipliers.
class QrSimplex {
public:
    QrSimplex(Eigen::MatrixXd rows, Eigen::VectorXd y, Eigen::VectorXd m,
              Eigen::VectorXd t)
        : A_(std::move(rows)),
          y_(std::move(y)),
          m_(std::move(m)),
          t_(std::move(t)),
          N_(static_cast<int>(A_.rows())),
          h_(static_cast<int>(A_.cols())) {
        row_scale_.resize(N_);
        for (int i = 0; i < N_; ++i)
            row_scale_[i] = 1.0 + A_.row(i).cwiseAbs().maxCoeff();
        snap_tol_ = 1e-12 * (1.0 + y_.cwiseAbs().maxCoeff());
    }

    // Initial basis: every penalty row, completed by active data rows that
    // span the unpenalized coordinates.
    void init_basis(const std::vector<int>& penalty_rows, int n_data) {
        std::vector<char> covered(h_, 0);
        basis_.clear();
        for (int r : penalty_rows) {
            basis_.push_back(r);
            for (int j = 0; j < h_; ++j)
                if (A_(r, j) != 0.0) covered[j] = 1;
        }
        std::vector<int> free_cols;
        for (int j = 0; j < h_; ++j)
            if (!covered[j]) free_cols.push_back(j);
        if (!free_cols.empty()) {
            std::vector<int> chosen = select_spanning_rows(free_cols, n_data);
            basis_.insert(basis_.end(), chosen.begin(), chosen.end());
        }
        if (static_cast<int>(basis_.size()) != h_)
            throw DegenerateDesign("could not assemble an invertible starting basis");
        in_basis_.assign(N_, 0);
        for (int r : basis_) in_basis_[r] = 1;
        refresh();
    }

    void run(int max_iter) {
        int stall = 0;
        int refreshed_checks = 0;
        const int stall_limit = 20 * h_ + 50;
        while (true) {
            if (iterations_ >= max_iter)
                throw_max_iterations("pivot budget exhausted");
            Eigen::VectorXd u = -(Binv_.transpose() * G_);
            int worst = -1;
            double worst_viol = 0.0;
            bool bland = stall > stall_limit;
            for (int b = 0; b < h_; ++b) {
                const int row = basis_[b];
                const double zeta = u[b] / m_[row];
                const double viol =
                    std::max(zeta - (1.0 - t_[row]), -t_[row] - zeta);
                if (viol > 1e-9 && (worst == -1 || (bland ? row < basis_[worst]
                                                          : viol > worst_viol))) {
                    worst = b;
                    worst_viol = viol;
                }
            }
            if (worst == -1) {
                // Claimed optimality must survive a fresh factorization; rows
                // below the event tolerance may have crossed silently.
                if (pivots_since_refresh_ > 0 && refreshed_checks < 3) {
                    refresh();
                    ++refreshed_checks;
                    continue;
                }
                return;
            }
            refreshed_checks = 0;
            const int leave_row = basis_[worst];
            const double zeta_w = u[worst] / m_[leave_row];
            const double sigma = zeta_w > 1.0 - t_[leave_row] ? 1.0 : -1.0;
            Eigen::VectorXd dir = sigma * Binv_.col(worst);
            Eigen::VectorXd c = A_ * dir;

            // Breakpoints along the edge, ordered; slope starts negative and
            // gains m_i |c_i| at each crossing.
            events_.clear();
            const double dinf = dir.cwiseAbs().maxCoeff();
            for (int i = 0; i < N_; ++i) {
                if (in_basis_[i] || m_[i] <= 0.0) continue;
                const double ci = c[i];
                // rows nearly orthogonal to the edge cannot enter: they would
                // leave the next basis ill conditioned
                if (std::abs(ci) <= 1e-8 * row_scale_[i] * (1.0 + dinf)) continue;
                const double ri = r_[i];
                double theta;
                if (ri == 0.0) {
                    if (sign_[i] * ci <= 0.0) continue;  // moves onto its assigned side
                    theta = 0.0;
                } else {
                    theta = ri / ci;
                    if (theta <= 0.0) continue;
                }
                events_.push_back({theta, i});
            }
            std::sort(events_.begin(), events_.end());
            double slope = -m_[leave_row] * worst_viol;
            int enter_row = -1;
            double step = 0.0;
            std::size_t consumed = 0;
            for (std::size_t e = 0; e < events_.size(); ++e) {
                const int i = events_[e].second;
                slope += m_[i] * std::abs(c[i]);
                if (slope >= -1e-14 || (bland && events_[e].first == 0.0)) {
                    enter_row = i;
                    step = events_[e].first;
                    consumed = e;
                    break;
                }
            }
            if (enter_row == -1) {
                // A coercive objective cannot be unbounded along an edge of an
                // invertible basis; reaching this point means the basis has
                // degenerated numerically. Rebuild it around the current
                // residuals and resume; only repeated failures abort.
                if (pivots_since_refresh_ > 0) {
                    refresh();
                    continue;
                }
                if (++rebuilds_ <= 3) {
                    rebuild_basis();
                    continue;
                }
                throw Unbounded("quantile regression objective unbounded along an edge");
            }

            // Crossed rows flip their residual sign; update G accordingly.
            for (std::size_t e = 0; e < consumed; ++e) {
                const int i = events_[e].second;
                G_ += sign_[i] > 0 ? m_[i] * A_.row(i).transpose()
                                   : -m_[i] * A_.row(i).transpose();
                sign_[i] = -sign_[i];
            }
            G_ -= contribution(enter_row, sign_[enter_row]);
            G_ += contribution(leave_row, static_cast<int>(-sigma));

            if (step > 0.0) {
                beta_ += step * dir;
                r_ -= step * c;
                stall = 0;
            } else {
                ++stall;
            }
            for (int b = 0; b < h_; ++b) r_[basis_[b]] = 0.0;
            r_[enter_row] = 0.0;
            r_[leave_row] = -sigma * step;
            sign_[leave_row] = static_cast<int>(-sigma);

            // Row replacement in the basis; Sherman-Morrison on the inverse.
            Eigen::VectorXd v =
                (A_.row(enter_row) - A_.row(leave_row)).transpose();
            Eigen::VectorXd ucol = Binv_.col(worst);
            const double denom = 1.0 + v.dot(ucol);
            in_basis_[leave_row] = 0;
            in_basis_[enter_row] = 1;
            basis_[worst] = enter_row;
            ++iterations_;
            if (std::abs(denom) < 1e-10 || ++pivots_since_refresh_ >= 64) {
                refresh();
            } else {
                Eigen::RowVectorXd vB = v.transpose() * Binv_;
                Binv_.noalias() -= (ucol * vB) / denom;
            }
        }
    }

    // Exact solution read off the final basis: coordinates pinned by basic
    // penalty rows are identically zero; the rest interpolate the basic data
    // rows.
    Eigen::VectorXd extract_beta(int n_data) const {
        std::vector<char> pinned(h_, 0);
        std::vector<int> data_rows;
        for (int r : basis_) {
            if (r >= n_data) {
                pinned[penalty_coord_of_row(r, n_data)] = 1;
            } else {
                data_rows.push_back(r);
            }
        }
        std::vector<int> free_cols;
        for (int j = 0; j < h_; ++j)
            if (!pinned[j]) free_cols.push_back(j);
        Eigen::VectorXd beta = Eigen::VectorXd::Zero(h_);
        if (free_cols.empty()) return beta;
        Eigen::MatrixXd S(free_cols.size(), free_cols.size());
        Eigen::VectorXd ys(free_cols.size());
        for (std::size_t i = 0; i < data_rows.size(); ++i) {
            for (std::size_t j = 0; j < free_cols.size(); ++j)
                S(i, j) = A_(data_rows[i], free_cols[j]);
            ys[i] = y_[data_rows[i]];
        }
        Eigen::VectorXd sol = S.partialPivLu().solve(ys);
        for (std::size_t j = 0; j < free_cols.size(); ++j)
            beta[free_cols[j]] = sol[j];
        return beta;
    }

    int iterations() const { return iterations_; }
    std::vector<int> basic_data_rows() const {
        std::vector<int> out;
        for (int r : basis_)
            if (r < n_data_) out.push_back(r);
        return out;
    }
    const Eigen::VectorXd& beta_approx() const { return beta_; }
    void set_penalty_coord_base(int n_data, std::vector<int> coord_of_row) {
        n_data_ = n_data;
        penalty_coord_ = std::move(coord_of_row);
    }

private:
    int penalty_coord_of_row(int row, int n_data) const {
        return penalty_coord_[row - n_data];
    }

    Eigen::VectorXd contribution(int i, int sign) const {
        const double g = (sign < 0 ? 1.0 : 0.0) - t_[i];
        return m_[i] * g * A_.row(i).transpose();
    }

    std::vector<int> select_spanning_rows(const std::vector<int>& cols, int n_data) {
        const int f = static_cast<int>(cols.size());
        std::vector<int> active;
        for (int i = 0; i < n_data; ++i)
            if (m_[i] > 0.0) active.push_back(i);
        if (static_cast<int>(active.size()) < f)
            throw DegenerateDesign("fewer active rows than free coordinates");
        Eigen::MatrixXd M(active.size(), f);
        for (std::size_t i = 0; i < active.size(); ++i)
            for (int j = 0; j < f; ++j) M(i, j) = A_(active[i], cols[j]);
        const double scale = 1.0 + M.cwiseAbs().maxCoeff();
        std::vector<char> used(active.size(), 0);
        std::vector<int> chosen;
        for (int col = 0; col < f; ++col) {
            int pivot = -1;
            double best = 1e-11 * scale;
            for (std::size_t i = 0; i < active.size(); ++i) {
                if (used[i]) continue;
                if (std::abs(M(i, col)) > best) {
                    best = std::abs(M(i, col));
                    pivot = static_cast<int>(i);
                }
            }
            if (pivot < 0)
                throw DegenerateDesign("design rank-deficient on the event rows");
            used[pivot] = 1;
            chosen.push_back(active[pivot]);
            for (std::size_t i = 0; i < active.size(); ++i) {
                if (used[i] || M(i, col) == 0.0) continue;
                M.row(i) -= (M(i, col) / M(pivot, col)) * M.row(pivot);
            }
        }
        return chosen;
    }

    // Re-selects a well-conditioned basis near the current point: penalty
    // rows pinning zero coordinates first, then data rows by residual size.
    void rebuild_basis() {
        std::vector<int> order;
        const double zero_tol = 1e-12 * (1.0 + beta_.cwiseAbs().maxCoeff());
        for (int row = n_data_; row < N_; ++row) {
            const int coord = penalty_coord_[row - n_data_];
            if (std::abs(beta_[coord]) <= zero_tol) order.push_back(row);
        }
        std::vector<std::pair<double, int>> data_rows;
        for (int i = 0; i < n_data_; ++i)
            if (m_[i] > 0.0) data_rows.emplace_back(std::abs(r_[i]), i);
        std::sort(data_rows.begin(), data_rows.end());
        for (const auto& pr : data_rows) order.push_back(pr.second);
        for (int row = n_data_; row < N_; ++row) {
            const int coord = penalty_coord_[row - n_data_];
            if (std::abs(beta_[coord]) > zero_tol) order.push_back(row);
        }

        Eigen::MatrixXd work(order.size(), h_);
        for (std::size_t i = 0; i < order.size(); ++i) work.row(i) = A_.row(order[i]);
        const double scale = 1.0 + work.cwiseAbs().maxCoeff();
        std::vector<int> chosen;
        std::vector<char> used(order.size(), 0);
        for (int col = 0; col < h_ && static_cast<int>(chosen.size()) < h_; ++col) {
            // greedy elimination in the candidate order
            int pivot = -1;
            for (std::size_t i = 0; i < order.size(); ++i) {
                if (used[i]) continue;
                if (std::abs(work(i, col)) > 1e-8 * scale) {
                    pivot = static_cast<int>(i);
                    break;
                }
            }
            if (pivot < 0) continue;
            used[pivot] = 1;
            chosen.push_back(order[pivot]);
            for (std::size_t i = 0; i < order.size(); ++i) {
                if (used[i] || work(i, col) == 0.0) continue;
                work.row(i) -= (work(i, col) / work(pivot, col)) * work.row(pivot);
            }
        }
        if (static_cast<int>(chosen.size()) != h_)
            throw DegenerateDesign("could not rebuild a well-conditioned basis");
        basis_ = chosen;
        in_basis_.assign(N_, 0);
        for (int r : basis_) in_basis_[r] = 1;
        refresh();
    }

    void refresh() {
        Eigen::MatrixXd XB(h_, h_);
        Eigen::VectorXd yB(h_);
        for (int b = 0; b < h_; ++b) {
            XB.row(b) = A_.row(basis_[b]);
            yB[b] = y_[basis_[b]];
        }
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(XB);
        Binv_ = lu.inverse();
        beta_ = lu.solve(yB);
        r_ = y_ - A_ * beta_;
        if (static_cast<int>(sign_.size()) != N_) sign_.assign(N_, 1);
        for (int i = 0; i < N_; ++i) {
            if (in_basis_[i]) {
                r_[i] = 0.0;
                continue;
            }
            if (std::abs(r_[i]) <= snap_tol_) {
                r_[i] = 0.0;  // keep previous sign assignment
            } else {
                sign_[i] = r_[i] > 0.0 ? 1 : -1;
            }
        }
        G_ = Eigen::VectorXd::Zero(h_);
        for (int i = 0; i < N_; ++i) {
            if (in_basis_[i] || m_[i] <= 0.0) continue;
            G_ += contribution(i, sign_[i]);
        }
        pivots_since_refresh_ = 0;
    }

    void throw_max_iterations(const std::string& why) {
        QrFit best;
        best.beta = extract_beta(n_data_);
        best.iterations = iterations_;
        throw QrMaxIterations("quantile regression: " + why + " after " +
                                  std::to_string(iterations_) + " pivots",
                              std::move(best));
    }

    Eigen::MatrixXd A_;
    Eigen::VectorXd y_, m_, t_;
    int N_, h_;
    int n_data_ = 0;
    std::vector<int> penalty_coord_;
    std::vector<int> basis_;
    std::vector<char> in_basis_;
    std::vector<int> sign_;
    Eigen::MatrixXd Binv_;
    Eigen::VectorXd beta_, r_, G_;
    std::vector<double> row_scale_;
    std::vector<std::pair<double, int>> events_;
    double snap_tol_ = 0.0;
    int iterations_ = 0;
    int pivots_since_refresh_ = 0;
    int rebuilds_ = 0;
};

Eigen::VectorXd resolved_weights(const QrProblem& pr) {
    if (pr.k.size() == 0) return Eigen::VectorXd::Ones(pr.n());
    if (pr.k.size() != pr.y.size())
        throw DimensionMismatch("event weights length mismatch");
    return pr.k;
}

Eigen::VectorXd resolved_loadings(const QrProblem& pr) {
    if (pr.loadings.size() == 0) return Eigen::VectorXd::Zero(pr.p());
    if (pr.loadings.size() != pr.X.cols())
        throw DimensionMismatch("loadings length mismatch");
    return pr.loadings;
}

double objective_value(const QrProblem& pr, const Eigen::VectorXd& beta,
                       const Eigen::VectorXd& r, const Eigen::VectorXd& k,
                       const Eigen::VectorXd& w) {
    const double n = static_cast<double>(pr.n());
    double loss = 0.0;
    for (int i = 0; i < pr.n(); ++i)
        if (k[i] > 0.0) loss += k[i] * check_loss(r[i], pr.tau);
    double pen = 0.0;
    for (int j = 0; j < pr.p(); ++j) pen += w[j] * std::abs(beta[j]);
    return loss / n + pr.lambda * pen / n;
}

double kkt_gap_impl(const QrProblem& problem, const Eigen::VectorXd& beta,
                    const Eigen::VectorXd& r, const std::vector<int>& cols) {
    const double tie_tol = 1e-10;
    const int n = problem.n();
    const double dn = static_cast<double>(n);
    const Eigen::VectorXd k =
        problem.k.size() ? problem.k : Eigen::VectorXd::Ones(n);
    const Eigen::VectorXd w = problem.loadings.size()
                                  ? problem.loadings
                                  : Eigen::VectorXd::Zero(problem.p());
    const double tau = problem.tau;
    double gap = 0.0;
    for (int j : cols) {
        Interval iv;
        for (int i = 0; i < n; ++i) {
            if (k[i] <= 0.0) continue;
            const double x = k[i] * problem.X(i, j) / dn;
            if (r[i] > tie_tol) {
                iv.lo += -tau * x;
                iv.hi += -tau * x;
            } else if (r[i] < -tie_tol) {
                iv.lo += (1.0 - tau) * x;
                iv.hi += (1.0 - tau) * x;
            } else {
                const double a = -tau * x;
                const double b = (1.0 - tau) * x;
                iv.lo += std::min(a, b);
                iv.hi += std::max(a, b);
            }
        }
        if (problem.lambda > 0.0 && w[j] > 0.0) {
            const double pw = problem.lambda * w[j] / dn;
            if (beta[j] > 0.0) {
                iv.lo += pw;
                iv.hi += pw;
            } else if (beta[j] < 0.0) {
                iv.lo -= pw;
                iv.hi -= pw;
            } else {
                iv.lo -= pw;
                iv.hi += pw;
            }
        }
        gap = std::max(gap, interval_gap(iv));
    }
    return gap;
}

QrFit solve_base(const QrProblem& pr, const QgmConfig& config,
                 const std::vector<int>* restrict_cols) {
    const int n = pr.n();
    const int p = pr.p();
    if (pr.X.rows() != n) throw DimensionMismatch("X rows != y length");
    if (!(pr.tau > 0.0 && pr.tau < 1.0)) throw Error("tau outside (0,1)");
    if (pr.lambda < 0.0) throw Error("lambda must be nonnegative");
    const Eigen::VectorXd k = resolved_weights(pr);
    const Eigen::VectorXd w = resolved_loadings(pr);
    if ((k.array() > 0.0).count() == 0)
        throw DegenerateDesign("no active rows");

    std::vector<int> cols;
    if (restrict_cols) {
        cols = *restrict_cols;
    } else {
        cols.resize(p);
        std::iota(cols.begin(), cols.end(), 0);
    }
    const int h = static_cast<int>(cols.size());
    if (h == 0) throw DegenerateDesign("no columns to fit");

    std::vector<int> pen_coords;
    if (pr.lambda > 0.0) {
        for (int j = 0; j < h; ++j)
            if (w[cols[j]] > 0.0) pen_coords.push_back(j);
    }
    const int N = n + static_cast<int>(pen_coords.size());

    Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(N, h);
    Eigen::VectorXd y(N), m(N), t(N);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < h; ++j) rows(i, j) = pr.X(i, cols[j]);
        y[i] = pr.y[i];
        m[i] = k[i];
        t[i] = pr.tau;
    }
    std::vector<int> penalty_rows;
    std::vector<int> penalty_coord_of_row;
    for (std::size_t q = 0; q < pen_coords.size(); ++q) {
        const int row = n + static_cast<int>(q);
        const int j = pen_coords[q];
        rows(row, j) = w[cols[j]];
        y[row] = 0.0;
        m[row] = 2.0 * pr.lambda;
        t[row] = 0.5;
        penalty_rows.push_back(row);
        penalty_coord_of_row.push_back(j);
    }

    QrSimplex simplex(std::move(rows), std::move(y), std::move(m), std::move(t));
    simplex.set_penalty_coord_base(n, penalty_coord_of_row);
    simplex.init_basis(penalty_rows, n);
    const int max_iter = config.max_qr_iterations > 0
                             ? config.max_qr_iterations
                             : 200 * (N + h) + 2000;
    simplex.run(max_iter);

    Eigen::VectorXd beta_cols = simplex.extract_beta(n);
    QrFit fit;
    fit.beta = Eigen::VectorXd::Zero(p);
    for (int j = 0; j < h; ++j) fit.beta[cols[j]] = beta_cols[j];
    fit.residuals = pr.y - pr.X * fit.beta;
    // basic rows are interpolated exactly; report their true residual value
    for (int row : simplex.basic_data_rows()) fit.residuals[row] = 0.0;
    fit.objective = objective_value(pr, fit.beta, fit.residuals, k, w);
    for (int j = 0; j < p; ++j)
        if (fit.beta[j] != 0.0) fit.support.push_back(j);
    fit.iterations = simplex.iterations();
    fit.kkt_gap = kkt_gap_impl(pr, fit.beta, fit.residuals, cols);
    if (fit.kkt_gap > config.kkt_tol)
        throw QrMaxIterations("optimality certificate failed: kkt_gap = " +
                                  std::to_string(fit.kkt_gap),
                              fit);
    return fit;
}

}  // namespace

QrFit qr_solve(const QrProblem& problem, const QgmConfig& config) {
    if (problem.support_restriction)
        return qr_refit(problem, *problem.support_restriction, config);
    return solve_base(problem, config, nullptr);
}

QrFit qr_refit(const QrProblem& problem, const std::vector<int>& support,
               const QgmConfig& config, std::vector<int>* dropped) {
    QrProblem reduced = problem;
    reduced.lambda = 0.0;
    reduced.loadings = Eigen::VectorXd();
    reduced.support_restriction.reset();

    std::vector<int> cols{0};
    for (int j : support)
        if (j != 0) cols.push_back(j);
    std::sort(cols.begin() + 1, cols.end());
    cols.erase(std::unique(cols.begin(), cols.end()), cols.end());

    // Prune collinear support columns (earliest kept) so the vertex basis is
    // well posed on the active rows.
    const Eigen::VectorXd k = resolved_weights(problem);
    std::vector<int> kept;
    std::vector<Eigen::VectorXd> ortho;
    for (int j : cols) {
        Eigen::VectorXd v = problem.X.col(j).cwiseProduct(k);
        const double norm0 = v.norm();
        for (const auto& q : ortho) v -= q.dot(v) * q;
        if (v.norm() > 1e-10 * (1.0 + norm0)) {
            ortho.push_back(v.normalized());
            kept.push_back(j);
        } else if (dropped) {
            dropped->push_back(j);
        }
    }
    return solve_base(reduced, config, &kept);
}

std::vector<int> threshold_support(const QrFit& fit, double level,
                                   const Eigen::VectorXd& loadings) {
    std::vector<int> out;
    for (int j = 0; j < fit.beta.size(); ++j) {
        if (fit.beta[j] == 0.0) continue;
        const double w = j < loadings.size() ? loadings[j] : 0.0;
        if (std::abs(fit.beta[j]) * w >= level) out.push_back(j);
    }
    return out;
}

double qr_kkt_gap(const QrProblem& problem, const Eigen::VectorXd& beta,
                  const std::vector<int>* active_cols) {
    std::vector<int> cols;
    if (active_cols) {
        cols = *active_cols;
    } else {
        cols.resize(problem.p());
        std::iota(cols.begin(), cols.end(), 0);
    }
    const Eigen::VectorXd r = problem.y - problem.X * beta;
    return kkt_gap_impl(problem, beta, r, cols);
}

}  // namespace qgm
