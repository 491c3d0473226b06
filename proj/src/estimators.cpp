#include "ivsynth/estimators.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace ivsynth {

namespace {

std::vector<int> sorted_copy(const std::vector<int>& v) {
    std::vector<int> out = v;
    std::sort(out.begin(), out.end());
    return out;
}

Eigen::VectorXd resolve_v(const Eigen::VectorXd& v, std::size_t t1) {
    const auto n = static_cast<Eigen::Index>(t1);
    if (v.size() == 0) {
        return Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(t1));
    }
    if (v.size() != n) throw std::invalid_argument("effect weights v have wrong length");
    if (v.minCoeff() < 0.0) throw std::invalid_argument("effect weights v must be nonnegative");
    if (std::abs(v.sum() - 1.0) > 1e-8)
        throw std::invalid_argument("effect weights v must sum to one");
    return v;
}

// Rows of the panel's outcomes for the given units over the given periods.
Eigen::MatrixXd outcome_block(const PanelData& panel, const std::vector<int>& units,
                              const std::vector<int>& periods) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(units.size()),
                        static_cast<Eigen::Index>(periods.size()));
    for (std::size_t i = 0; i < units.size(); ++i)
        for (std::size_t t = 0; t < periods.size(); ++t)
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) =
                panel.outcomes(units[i], periods[t]);
    return out;
}

Eigen::VectorXd outcome_row(const PanelData& panel, int unit, const std::vector<int>& periods) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(periods.size()));
    for (std::size_t t = 0; t < periods.size(); ++t)
        out(static_cast<Eigen::Index>(t)) = panel.outcomes(unit, periods[t]);
    return out;
}

}  // namespace

std::string method_name(Method m) {
    switch (m) {
        case Method::gmm: return "gmm";
        case Method::ols: return "ols";
        case Method::uniform: return "uniform";
        case Method::factor: return "factor";
        case Method::powell: return "powell";
    }
    throw std::logic_error("unknown method");
}

EffectsSummary effects_and_average(const Eigen::VectorXd& weights, const PanelData& panel,
                                   const RoleAssignment& roles, const Eigen::VectorXd& v) {
    require_valid_roles(panel, roles);
    if (weights.size() != static_cast<Eigen::Index>(roles.controls.size()))
        throw std::invalid_argument("weight vector length must match the control count");

    const std::vector<int> pre = sorted_copy(roles.pre_periods);
    const std::vector<int> post = sorted_copy(roles.post_periods);
    EffectsSummary s;
    s.v = resolve_v(v, post.size());

    s.gap_periods = pre;
    s.gap_periods.insert(s.gap_periods.end(), post.begin(), post.end());
    const Eigen::MatrixXd controls = outcome_block(panel, roles.controls, s.gap_periods);
    const Eigen::VectorXd actual =
        outcome_row(panel, roles.unit_of_interest, s.gap_periods);
    s.synthetic = controls.transpose() * weights;
    s.gap_series = actual - s.synthetic;
    s.effects = s.gap_series.tail(static_cast<Eigen::Index>(post.size()));
    s.weighted_average = s.v.dot(s.effects);
    return s;
}

namespace {

EstimationResult from_weights(const Eigen::VectorXd& w, bool on_simplex, double objective,
                              Method method, const PanelData& panel,
                              const RoleAssignment& roles, const Eigen::VectorXd& v) {
    EffectsSummary s = effects_and_average(w, panel, roles, v);
    EstimationResult r;
    WeightVector wv;
    wv.values = w;
    wv.on_simplex = on_simplex;
    r.weights = std::move(wv);
    r.weight_units = roles.controls;
    r.effects = std::move(s.effects);
    r.weighted_average = s.weighted_average;
    r.v = std::move(s.v);
    r.objective = objective;
    r.method = method;
    r.gap_series = std::move(s.gap_series);
    r.synthetic = std::move(s.synthetic);
    r.gap_periods = std::move(s.gap_periods);
    return r;
}

}  // namespace

EstimationResult gmm_sce(const PanelData& panel, const RoleAssignment& roles,
                         const GmmOptions& opt, const Eigen::VectorXd& v) {
    const Eigen::MatrixXd* custom =
        opt.weighting == Weighting::custom ? &opt.custom_weighting : nullptr;
    MomentSystem ms = build_moment_system(panel, roles, opt.weighting, custom);

    auto solve_stage = [&](const MomentSystem& sys) {
        const SimplexQp qp = as_simplex_qp(sys);
        struct Stage {
            Eigen::VectorXd w;
            bool on_simplex = true;
            double objective = 0.0;
        } st;
        if (opt.constrained) {
            const QpSolution sol = solve_simplex_qp(qp, opt.qp);
            st.w = sol.weights.values;
            st.objective = std::max(0.0, sol.objective);
        } else {
            st.w = min_norm_quadratic(qp);
            st.on_simplex = st.w.minCoeff() >= -opt.qp.support_threshold &&
                            std::abs(st.w.sum() - 1.0) <= opt.qp.support_threshold;
            st.objective = std::max(0.0, qp.objective(st.w));
        }
        return st;
    };

    auto stage = solve_stage(ms);
    std::vector<std::string> warnings;
    if (ms.kind == Weighting::two_step) {
        ms = reweight_two_step(ms, stage.w, opt.bandwidth);
        warnings = ms.warnings;
        stage = solve_stage(ms);
    }

    EstimationResult r =
        from_weights(stage.w, stage.on_simplex, stage.objective, Method::gmm, panel, roles, v);
    r.warnings.insert(r.warnings.end(), warnings.begin(), warnings.end());
    if (!opt.constrained && !stage.on_simplex) {
        r.warnings.push_back("unconstrained weights lie off the simplex");
    }
    return r;
}

EstimationResult ols_sce(const PanelData& panel, const RoleAssignment& roles,
                         const Eigen::VectorXd& v, const QpOptions& qp_opt) {
    require_valid_roles(panel, roles);
    const std::vector<int> pre = sorted_copy(roles.pre_periods);
    const Eigen::MatrixXd c = outcome_block(panel, roles.controls, pre);
    const Eigen::VectorXd y0 = outcome_row(panel, roles.unit_of_interest, pre);
    const double t0 = static_cast<double>(pre.size());

    SimplexQp qp;
    qp.M = c * c.transpose() / t0;
    qp.M = 0.5 * (qp.M + qp.M.transpose()).eval();
    qp.b = c * y0 / t0;
    qp.c = y0.squaredNorm() / t0;
    const QpSolution sol = solve_simplex_qp(qp, qp_opt);
    return from_weights(sol.weights.values, true, std::max(0.0, sol.objective), Method::ols,
                        panel, roles, v);
}

EstimationResult uniform_sce(const PanelData& panel, const RoleAssignment& roles,
                             const Eigen::VectorXd& v) {
    require_valid_roles(panel, roles);
    const auto j = static_cast<Eigen::Index>(roles.controls.size());
    const Eigen::VectorXd w = Eigen::VectorXd::Constant(j, 1.0 / static_cast<double>(j));
    EstimationResult r = from_weights(w, true, 0.0, Method::uniform, panel, roles, v);
    const auto t0 = static_cast<Eigen::Index>(roles.pre_periods.size());
    r.objective = r.gap_series.head(t0).squaredNorm() / static_cast<double>(t0);
    return r;
}

FactorEstimate factor_estimator(const PanelData& panel, const RoleAssignment& roles,
                                const Eigen::VectorXd& v, int rank_override) {
    require_valid_roles(panel, roles);
    std::vector<int> donors;
    for (int u = 0; u < panel.n_units(); ++u) {
        if (u == roles.unit_of_interest) continue;
        bool ever_treated = false;
        for (int t = 0; t < panel.n_periods() && !ever_treated; ++t)
            ever_treated = panel.treated(u, t);
        if (!ever_treated) donors.push_back(u);
    }
    if (donors.empty()) throw std::invalid_argument("factor estimator needs never-treated units");

    const std::vector<int> pre = sorted_copy(roles.pre_periods);
    const std::vector<int> post = sorted_copy(roles.post_periods);
    std::vector<int> periods = pre;
    periods.insert(periods.end(), post.begin(), post.end());

    const Eigen::MatrixXd block = outcome_block(panel, donors, periods);
    const int rank = rank_override >= 0 ? rank_override : estimate_rank_svt(block);

    FactorEstimate fe;
    fe.fit = svd_pca(block, rank);
    fe.fit.units = donors;
    const Eigen::MatrixXd resid =
        block - (fe.fit.factors * fe.fit.loadings).transpose();
    fe.fit.residual_variances.resize(resid.rows());
    for (Eigen::Index i = 0; i < resid.rows(); ++i) {
        const Eigen::VectorXd row = resid.row(i);
        const double mean = row.mean();
        fe.fit.residual_variances(i) =
            (row.array() - mean).square().sum() / static_cast<double>(row.size());
    }

    EstimationResult& r = fe.result;
    r.method = Method::factor;
    r.gap_periods = periods;
    const auto t0 = static_cast<Eigen::Index>(pre.size());
    const Eigen::VectorXd actual = outcome_row(panel, roles.unit_of_interest, periods);
    Eigen::VectorXd mu0 = Eigen::VectorXd::Zero(rank);
    if (rank == 0) {
        r.warnings.push_back("estimated factor rank is zero; counterfactual is zero");
        r.synthetic = Eigen::VectorXd::Zero(actual.size());
    } else {
        const Eigen::MatrixXd pre_factors = fe.fit.factors.topRows(t0);
        mu0 = pre_factors.completeOrthogonalDecomposition().solve(actual.head(t0));
        r.synthetic = fe.fit.factors * mu0;
    }
    r.gap_series = actual - r.synthetic;
    r.effects = r.gap_series.tail(static_cast<Eigen::Index>(post.size()));
    r.v = resolve_v(v, post.size());
    r.weighted_average = r.v.dot(r.effects);
    r.objective = r.gap_series.head(t0).squaredNorm() / static_cast<double>(t0);
    return fe;
}

PowellResult powell_estimator(const PanelData& panel, const RoleAssignment& roles,
                              const Eigen::VectorXd& v, const PowellOptions& opt) {
    require_valid_roles(panel, roles);
    if (opt.n_iter < 0) throw std::invalid_argument("n_iter must be nonnegative");

    PowellResult pr;
    pr.units.push_back(roles.unit_of_interest);
    pr.units.insert(pr.units.end(), roles.controls.begin(), roles.controls.end());
    const auto n = static_cast<Eigen::Index>(pr.units.size());  // N0 + 1

    const std::vector<int> pre = sorted_copy(roles.pre_periods);
    const std::vector<int> post = sorted_copy(roles.post_periods);
    std::vector<int> periods = pre;
    periods.insert(periods.end(), post.begin(), post.end());
    const auto t0 = static_cast<Eigen::Index>(pre.size());
    const double t0d = static_cast<double>(t0);

    const Eigen::MatrixXd y_pre = outcome_block(panel, pr.units, pre);
    const Eigen::MatrixXd y_all = outcome_block(panel, pr.units, periods);

    Eigen::MatrixXd w = Eigen::MatrixXd::Constant(n, n, n > 1 ? 1.0 / double(n - 1) : 0.0);
    w.diagonal().setZero();
    Eigen::VectorXd a = Eigen::VectorXd::Ones(n);
    Eigen::MatrixXd y_hat = y_pre;
    std::vector<std::string> warnings;
    std::set<int> skipped;

    for (int iter = 0; iter < opt.n_iter; ++iter) {
        // Estimated versions: pointwise weighted least squares solution given
        // the current weights and fit weights; uses actual outcomes only.
        Eigen::MatrixXd y_next = y_hat;
        for (Eigen::Index j = 0; j < n; ++j) {
            double denom = a(j);
            for (Eigen::Index i = 0; i < n; ++i)
                if (i != j) denom += a(i) * w(i, j) * w(i, j);
            if (denom < 1e-12) {
                if (skipped.insert(pr.units[static_cast<std::size_t>(j)]).second) {
                    warnings.push_back("estimated-version update skipped for unit " +
                                       std::to_string(pr.units[static_cast<std::size_t>(j)]) +
                                       ": vanishing denominator");
                }
                continue;
            }
            Eigen::RowVectorXd num = a(j) * (w.row(j) * y_pre);
            for (Eigen::Index i = 0; i < n; ++i) {
                if (i == j || w(i, j) == 0.0) continue;
                const Eigen::RowVectorXd resid =
                    y_pre.row(i) - w.row(i) * y_pre + w(i, j) * y_pre.row(j);
                num += a(i) * w(i, j) * resid;
            }
            y_next.row(j) = num / denom;
        }
        y_hat = y_next;

        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::MatrixXd bmat(n - 1, n - 1);
            Eigen::VectorXd cvec(n - 1);
            Eigen::Index p = 0;
            for (Eigen::Index jj = 0; jj < n; ++jj) {
                if (jj == i) continue;
                Eigen::Index q = 0;
                for (Eigen::Index hh = 0; hh < n; ++hh) {
                    if (hh == i) continue;
                    const auto& reg = hh == jj ? y_hat : y_pre;
                    bmat(p, q) = y_pre.row(jj).dot(reg.row(hh)) / t0d;
                    ++q;
                }
                cvec(p) = y_pre.row(jj).dot(y_pre.row(i)) / t0d;
                ++p;
            }
            SimplexQp qp;
            qp.M = bmat.transpose() * bmat;
            qp.M = 0.5 * (qp.M + qp.M.transpose()).eval();
            qp.b = bmat.transpose() * cvec;
            qp.c = cvec.squaredNorm();
            const QpSolution sol = solve_simplex_qp(qp, opt.qp);
            Eigen::Index q = 0;
            for (Eigen::Index hh = 0; hh < n; ++hh) {
                if (hh == i) continue;
                w(i, hh) = sol.weights.values(q++);
            }
            a(i) = std::max(0.0, sol.objective);
        }
    }

    // Pooled weighted least squares of the differenced outcome on the
    // differenced treatment indicator; only post periods contribute.
    const auto t1 = static_cast<Eigen::Index>(post.size());
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    x(0) = 1.0;
    for (Eigen::Index i = 1; i < n; ++i) x(i) = -w(i, 0);
    Eigen::VectorXd y_tilde_post_sum = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::RowVectorXd diff = y_all.row(i) - w.row(i) * y_all;
        y_tilde_post_sum(i) = diff.tail(t1).sum();
    }
    const double t1d = static_cast<double>(t1);
    double denom_w = 0.0, denom_u = 0.0, numer_w = 0.0, numer_u = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double xx = x(i) * x(i) * t1d;
        const double xy = x(i) * y_tilde_post_sum(i);
        denom_w += a(i) * xx;
        numer_w += a(i) * xy;
        denom_u += xx;
        numer_u += xy;
    }
    double beta;
    if (denom_w <= 1e-12 * denom_u) {
        warnings.push_back("all fit weights vanished; using unweighted least squares");
        beta = numer_u / denom_u;
    } else {
        beta = numer_w / denom_w;
    }

    pr.all_weights = w;
    pr.fit_weights = a;
    pr.estimated_pre = y_hat;

    const Eigen::VectorXd w0 = w.row(0).tail(n - 1);
    pr.result = from_weights(w0, true, a(0), Method::powell, panel, roles, v);
    pr.result.effects.setConstant(beta);
    pr.result.weighted_average = pr.result.v.dot(pr.result.effects);
    pr.result.warnings.insert(pr.result.warnings.end(), warnings.begin(), warnings.end());
    return pr;
}

}  // namespace ivsynth
