#include "ivsynth/linalg.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ivsynth {

namespace {

void require_finite(const Eigen::MatrixXd& m, const char* what) {
    if (!m.allFinite()) throw std::invalid_argument(std::string(what) + " contains NaN or Inf");
}

// Orthonormal basis of the subspace {d : sum(d) = 0} in R^n.
Eigen::MatrixXd sum_zero_basis(Eigen::Index n) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, 1);
    a.col(0).setOnes();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
    return q.rightCols(n - 1);
}

// Primal active-set refinement for the simplex QP, started from a feasible
// point. Each round solves the equality-constrained problem on the current
// face in the sum-zero subspace; an infeasible face optimum (or an unbounded
// face, when the reduced Hessian is singular and the linear term tilts along
// its null space) walks to the boundary and drops the blocking coordinate,
// and the round ends with a KKT multiplier check that admits the most
// violating inactive coordinate. Deterministic in (m, b, w); the caller
// gates adoption on objective and residual, so a capped round count is safe
// even in degenerate cycles.
Eigen::VectorXd active_set_refine(const Eigen::MatrixXd& m, const Eigen::VectorXd& b,
                                  Eigen::VectorXd w) {
    const Eigen::Index n = w.size();
    const double scale = 1.0 + m.cwiseAbs().maxCoeff() + b.cwiseAbs().maxCoeff();
    std::vector<Eigen::Index> act;
    for (Eigen::Index j = 0; j < n; ++j)
        if (w[j] > 0.0) act.push_back(j);
    const int max_rounds = static_cast<int>(3 * n + 8);
    for (int round = 0; round < max_rounds && !act.empty(); ++round) {
        bool face_optimal = false;
        while (!face_optimal && !act.empty()) {
            const Eigen::Index k = static_cast<Eigen::Index>(act.size());
            if (k == 1) {
                w.setZero();
                w[act[0]] = 1.0;
                face_optimal = true;
                break;
            }
            Eigen::MatrixXd maa(k, k);
            Eigen::VectorXd wa(k), ba(k);
            for (Eigen::Index r = 0; r < k; ++r) {
                const Eigen::Index jr = act[static_cast<std::size_t>(r)];
                wa[r] = w[jr];
                ba[r] = b[jr];
                for (Eigen::Index s = 0; s < k; ++s)
                    maa(r, s) = m(jr, act[static_cast<std::size_t>(s)]);
            }
            const Eigen::MatrixXd z = sum_zero_basis(k);
            const Eigen::MatrixXd h = z.transpose() * maa * z;
            const Eigen::VectorXd rhs = -z.transpose() * (maa * wa - ba);
            const Eigen::VectorXd u = h.completeOrthogonalDecomposition().solve(rhs);
            const Eigen::VectorXd null_part = rhs - h * u;
            const bool unbounded = null_part.cwiseAbs().maxCoeff() > 1e-11 * scale;
            const Eigen::VectorXd d = z * (unbounded ? null_part.eval() : u);
            double t_max = std::numeric_limits<double>::infinity();
            Eigen::Index blocker = -1;
            for (Eigen::Index r = 0; r < k; ++r) {
                if (d[r] < 0.0 && wa[r] < -t_max * d[r]) {
                    t_max = wa[r] / -d[r];
                    blocker = r;
                }
            }
            if (unbounded && blocker < 0) {
                face_optimal = true;  // numerically flat; keep the point
                break;
            }
            const double t = unbounded ? t_max : std::min(1.0, t_max);
            for (Eigen::Index r = 0; r < k; ++r)
                w[act[static_cast<std::size_t>(r)]] = std::max(wa[r] + t * d[r], 0.0);
            if (!unbounded && t_max >= 1.0) {
                face_optimal = true;
            } else {
                w[act[static_cast<std::size_t>(blocker)]] = 0.0;
                act.erase(act.begin() + blocker);
            }
        }
        if (act.empty()) break;
        const Eigen::VectorXd g = 2.0 * (m * w - b);
        double nu = std::numeric_limits<double>::infinity();
        for (Eigen::Index j : act) nu = std::min(nu, g[j]);
        Eigen::Index add = -1;
        double worst = -1e-10 * scale;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (w[j] > 0.0) continue;
            if (g[j] - nu < worst) {
                worst = g[j] - nu;
                add = j;
            }
        }
        if (add < 0) break;
        act.insert(std::lower_bound(act.begin(), act.end(), add), add);
    }
    const double s = w.sum();
    if (s > 0.0) return w / s;
    return w;
}

}  // namespace

std::vector<int> WeightVector::support(double threshold) const {
    std::vector<int> s;
    for (Eigen::Index i = 0; i < values.size(); ++i)
        if (values[i] > threshold) s.push_back(static_cast<int>(i));
    return s;
}

double SimplexQp::objective(const Eigen::VectorXd& w) const {
    return w.dot(M * w) - 2.0 * b.dot(w) + c;
}

Eigen::VectorXd project_simplex(const Eigen::VectorXd& v) {
    require_finite(v, "project_simplex input");
    const Eigen::Index n = v.size();
    if (n == 0) throw std::invalid_argument("project_simplex: empty input");
    std::vector<double> u(v.data(), v.data() + n);
    std::sort(u.begin(), u.end(), std::greater<double>());
    double css = 0.0, tau = 0.0;
    Eigen::Index rho = 0;
    for (Eigen::Index k = 0; k < n; ++k) {
        css += u[k];
        const double t = (css - 1.0) / static_cast<double>(k + 1);
        if (u[k] - t > 0.0) {
            rho = k + 1;
            tau = t;
        }
    }
    (void)rho;
    return (v.array() - tau).cwiseMax(0.0);
}

QpSolution solve_simplex_qp(const SimplexQp& qp, const QpOptions& opt) {
    require_finite(qp.M, "simplex QP matrix");
    require_finite(qp.b, "simplex QP vector");
    const Eigen::Index J = qp.b.size();
    if (J == 0) throw std::invalid_argument("simplex QP: empty problem");
    if (qp.M.rows() != J || qp.M.cols() != J)
        throw std::invalid_argument("simplex QP: dimension mismatch");
    if (!(opt.tol > 0.0) || !std::isfinite(opt.tol))
        throw std::invalid_argument("simplex QP: tolerance must be positive");
    if (opt.max_iter <= 0)
        throw std::invalid_argument("simplex QP: max_iter must be positive");

    QpSolution sol;
    if (J == 1) {
        sol.weights.values = Eigen::VectorXd::Ones(1);
        sol.objective = qp.objective(sol.weights.values);
        return sol;
    }

    const Eigen::MatrixXd M = 0.5 * (qp.M + qp.M.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
    const double lmax = es.eigenvalues().maxCoeff();
    const double L = std::max(2.0 * lmax, 1e-12);
    const double step = 1.0 / L;

    auto fval = [&](const Eigen::VectorXd& w) { return qp.objective(w); };
    auto residual_at = [&](const Eigen::VectorXd& w) {
        const Eigen::VectorXd g = 2.0 * (M * w - qp.b);
        return (w - project_simplex(w - step * g)).cwiseAbs().maxCoeff();
    };

    Eigen::VectorXd w = Eigen::VectorXd::Constant(J, 1.0 / static_cast<double>(J));
    // Restart points: converge, then verify against the uniform point and
    // every vertex; adopt any strictly better candidate and continue.
    // Objective comparisons carry a machine-precision slack: near the optimum
    // successive iterates tie in f to the last ulp while their KKT residuals
    // keep improving, and rejecting those ties stalls the iteration.
    const auto slack = [](double f) { return 1e-13 * (1.0 + std::abs(f)); };
    int iterations = 0;
    double res = 0.0;
    for (int attempt = 0; attempt < 3; ++attempt) {
        Eigen::VectorXd y = w;
        double fw = fval(w);
        double theta = 1.0;
        Eigen::VectorXd w_prev = w;
        bool converged = false;
        while (iterations < opt.max_iter) {
            ++iterations;
            const Eigen::VectorXd g = 2.0 * (M * y - qp.b);
            Eigen::VectorXd wn = project_simplex(y - step * g);
            const double fn = fval(wn);
            if (fn > fw + slack(fw)) {
                y = wn;
                theta = 1.0;
            } else {
                w = wn;
                fw = std::min(fw, fn);
            }
            const double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
            y = wn + ((theta - 1.0) / theta_next) * (wn - w_prev);
            theta = theta_next;
            w_prev = wn;
            if (iterations % 8 == 0 || iterations >= opt.max_iter) {
                res = residual_at(w);
                if (res <= opt.tol) {
                    converged = true;
                    break;
                }
                // Slow tail on a hard face: an exact active-set refinement
                // costs O(J^3) per face and finishes those instances. Adopt
                // it only when it does not hurt the objective and helps the
                // KKT residual.
                if (iterations % 1024 == 0) {
                    const Eigen::VectorXd polished = active_set_refine(M, qp.b, w);
                    const double fp = fval(polished);
                    const double pres = residual_at(polished);
                    if (fp <= fw + slack(fw) && pres < res) {
                        w = polished;
                        fw = std::min(fw, fp);
                        res = pres;
                        y = w;
                        w_prev = w;
                        theta = 1.0;
                        if (res <= opt.tol) {
                            converged = true;
                            break;
                        }
                    }
                }
            }
        }
        if (!converged && iterations >= opt.max_iter) {
            res = residual_at(w);
            if (res > opt.tol)
                throw std::runtime_error(
                    "simplex QP did not converge after " + std::to_string(iterations) +
                    " iterations, residual " + std::to_string(res));
        }

        // Candidate sweep at O(J) cost per vertex.
        double best = fval(w);
        int best_vertex = -1;
        const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(J, 1.0 / static_cast<double>(J));
        if (fval(uniform) < best) {
            best = fval(uniform);
            best_vertex = -2;
        }
        for (Eigen::Index j = 0; j < J; ++j) {
            const double fj = M(j, j) - 2.0 * qp.b[j] + qp.c;
            if (fj < best - 1e-15 * (1.0 + std::abs(best))) {
                best = fj;
                best_vertex = static_cast<int>(j);
            }
        }
        if (best_vertex == -1) break;
        w = best_vertex == -2 ? uniform : Eigen::VectorXd::Unit(J, best_vertex).eval();
    }

    w = w.cwiseMax(0.0);
    const double s = w.sum();
    if (s <= 0.0) throw std::runtime_error("simplex QP produced a zero weight vector");
    w /= s;

    // One exact refinement on the final face snaps coordinates that are zero
    // in exact arithmetic to exact zeros, so downstream support thresholds do
    // not pick up iteration dust.
    {
        const double fw = fval(w);
        const Eigen::VectorXd polished = active_set_refine(M, qp.b, w);
        if (fval(polished) <= fw + slack(fw) &&
            residual_at(polished) <= std::max(residual_at(w), opt.tol)) {
            w = polished;
        }
    }

    sol.weights.values = w;
    sol.weights.on_simplex = true;
    sol.objective = fval(w);
    sol.kkt_residual = residual_at(w);
    sol.iterations = iterations;

    std::vector<int> act = sol.weights.support(opt.support_threshold);
    if (act.size() > 1) {
        Eigen::MatrixXd Mss(act.size(), act.size());
        for (std::size_t r = 0; r < act.size(); ++r)
            for (std::size_t cidx = 0; cidx < act.size(); ++cidx)
                Mss(r, cidx) = M(act[r], act[cidx]);
        const Eigen::MatrixXd z = sum_zero_basis(static_cast<Eigen::Index>(act.size()));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> fes(z.transpose() * Mss * z,
                                                           Eigen::EigenvaluesOnly);
        sol.face_degenerate = fes.eigenvalues().minCoeff() < 1e-8;
    }
    return sol;
}

Eigen::VectorXd project_simplex(const Eigen::VectorXd& v, const Eigen::MatrixXd& metric,
                                const QpOptions& opt) {
    require_finite(v, "project_simplex input");
    require_finite(metric, "projection metric");
    if (metric.rows() != v.size() || metric.cols() != v.size())
        throw std::invalid_argument("project_simplex: metric dimension mismatch");
    SimplexQp qp;
    qp.M = 0.5 * (metric + metric.transpose());
    qp.b = qp.M * v;
    qp.c = v.dot(qp.M * v);
    return solve_simplex_qp(qp, opt).weights.values;
}

Eigen::VectorXd min_norm_quadratic(const SimplexQp& qp) {
    require_finite(qp.M, "quadratic matrix");
    require_finite(qp.b, "quadratic vector");
    const Eigen::MatrixXd M = 0.5 * (qp.M + qp.M.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    const Eigen::VectorXd ev = es.eigenvalues();
    const double smax = ev.cwiseAbs().maxCoeff();
    const double cutoff =
        static_cast<double>(M.rows()) * std::numeric_limits<double>::epsilon() * smax;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(qp.b.size());
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev[i] > cutoff) {
            const Eigen::VectorXd u = es.eigenvectors().col(i);
            w += (u.dot(qp.b) / ev[i]) * u;
        }
    }
    return w;
}

HullResult in_convex_hull(const Eigen::VectorXd& target, const Eigen::MatrixXd& points,
                          double tol, const QpOptions& opt) {
    require_finite(target, "hull target");
    require_finite(points, "hull points");
    if (points.rows() != target.size())
        throw std::invalid_argument("in_convex_hull: dimension mismatch");
    if (points.cols() == 0) throw std::invalid_argument("in_convex_hull: no points");
    SimplexQp qp;
    qp.M = points.transpose() * points;
    qp.b = points.transpose() * target;
    qp.c = target.squaredNorm();
    HullResult h;
    h.weights = solve_simplex_qp(qp, opt).weights.values;
    h.distance = (target - points * h.weights).norm();
    h.inside = h.distance <= tol;
    return h;
}

int hac_auto_bandwidth(Eigen::Index T) {
    return static_cast<int>(
        std::floor(4.0 * std::pow(static_cast<double>(T) / 100.0, 2.0 / 9.0)));
}

Eigen::MatrixXd hac_lrv(const Eigen::MatrixXd& series, int bandwidth) {
    require_finite(series, "hac series");
    const Eigen::Index T = series.rows();
    const Eigen::Index d = series.cols();
    if (T < 1 || d < 1) throw std::invalid_argument("hac_lrv: empty series");
    const int B = bandwidth < 0 ? hac_auto_bandwidth(T) : bandwidth;

    Eigen::MatrixXd x = series.rowwise() - series.colwise().mean();
    Eigen::MatrixXd lrv = x.transpose() * x / static_cast<double>(T);
    for (int l = 1; l <= B && l < T; ++l) {
        const Eigen::MatrixXd gl =
            x.bottomRows(T - l).transpose() * x.topRows(T - l) / static_cast<double>(T);
        const double wl = 1.0 - static_cast<double>(l) / static_cast<double>(B + 1);
        lrv += wl * (gl + gl.transpose());
    }
    lrv = 0.5 * (lrv + lrv.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(lrv);
    const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

FactorFit svd_pca(const Eigen::MatrixXd& data, int rank) {
    require_finite(data, "pca data");
    const Eigen::Index N = data.rows();
    const Eigen::Index T = data.cols();
    if (N == 0 || T == 0) throw std::invalid_argument("svd_pca: empty data");
    if (rank < 0 || rank > std::min(N, T))
        throw std::invalid_argument("svd_pca: rank out of range");

    FactorFit fit;
    fit.rank = rank;
    fit.factors = Eigen::MatrixXd::Zero(T, rank);
    fit.loadings = Eigen::MatrixXd::Zero(rank, N);
    Eigen::BDCSVD<Eigen::MatrixXd> svd(data.transpose(),
                                       Eigen::ComputeThinU | Eigen::ComputeThinV);
    fit.singular_values = svd.singularValues();
    if (rank == 0) return fit;

    const double sqrt_t = std::sqrt(static_cast<double>(T));
    fit.factors = sqrt_t * svd.matrixU().leftCols(rank);
    fit.loadings = (svd.singularValues().head(rank).asDiagonal() *
                    svd.matrixV().leftCols(rank).transpose()) /
                   sqrt_t;

    for (int f = 0; f < rank; ++f) {
        const double scale = fit.loadings.row(f).cwiseAbs().maxCoeff();
        for (Eigen::Index i = 0; i < N; ++i) {
            if (std::abs(fit.loadings(f, i)) > 1e-12 * std::max(scale, 1.0)) {
                if (fit.loadings(f, i) < 0.0) {
                    fit.loadings.row(f) *= -1.0;
                    fit.factors.col(f) *= -1.0;
                }
                break;
            }
        }
    }
    return fit;
}

int estimate_rank_svt(const Eigen::MatrixXd& data) {
    require_finite(data, "svt data");
    if (data.rows() == 0 || data.cols() == 0)
        throw std::invalid_argument("estimate_rank_svt: empty data");
    Eigen::BDCSVD<Eigen::MatrixXd> svd(data);
    Eigen::VectorXd sv = svd.singularValues();
    std::vector<double> s(sv.data(), sv.data() + sv.size());
    std::sort(s.begin(), s.end());
    const std::size_t n = s.size();
    const double median =
        n % 2 == 1 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
    const double threshold = 2.858 * median;
    int rank = 0;
    for (double v : s)
        if (v > threshold) ++rank;
    return rank;
}

}  // namespace ivsynth
