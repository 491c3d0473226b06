#include "ivsynth/moments.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace ivsynth {

namespace {

void check_weighting(const Eigen::MatrixXd& a, Eigen::Index n_moments) {
    if (a.rows() != n_moments || a.cols() != n_moments) {
        throw std::invalid_argument("custom weighting must be " + std::to_string(n_moments) +
                                    "x" + std::to_string(n_moments));
    }
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale) {
        throw std::invalid_argument("custom weighting must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    if (es.eigenvalues().minCoeff() < -1e-10 * scale) {
        throw std::invalid_argument("custom weighting must be positive semidefinite");
    }
}

}  // namespace

MomentSystem build_moment_system(const PanelData& panel, const RoleAssignment& roles,
                                 Weighting kind, const Eigen::MatrixXd* custom_weighting) {
    require_valid_roles(panel, roles);
    MomentSystem ms;
    ms.kind = kind;
    ms.control_units = roles.controls;
    ms.instrument_units = roles.instruments;
    ms.pre_periods = roles.pre_periods;

    const auto t0 = static_cast<Eigen::Index>(roles.pre_periods.size());
    const auto j = static_cast<Eigen::Index>(roles.controls.size());
    const auto k = static_cast<Eigen::Index>(roles.instruments.size());
    if (kind == Weighting::two_step && t0 < 2) {
        throw std::invalid_argument("two-step weighting needs at least 2 pre periods");
    }

    ms.target.resize(t0);
    ms.control_block.resize(j, t0);
    ms.instrument_block.resize(k + 1, t0);
    ms.instrument_block.row(0).setOnes();
    for (Eigen::Index s = 0; s < t0; ++s) {
        const int t = roles.pre_periods[static_cast<std::size_t>(s)];
        ms.target(s) = panel.outcomes(roles.unit_of_interest, t);
        for (Eigen::Index a = 0; a < j; ++a) {
            ms.control_block(a, s) = panel.outcomes(roles.controls[static_cast<std::size_t>(a)], t);
        }
        for (Eigen::Index a = 0; a < k; ++a) {
            ms.instrument_block(a + 1, s) =
                panel.outcomes(roles.instruments[static_cast<std::size_t>(a)], t);
        }
    }

    if (kind == Weighting::custom) {
        if (custom_weighting == nullptr) {
            throw std::invalid_argument("custom weighting requested but none supplied");
        }
        check_weighting(*custom_weighting, k + 1);
        ms.weighting = 0.5 * (*custom_weighting + custom_weighting->transpose());
    } else {
        ms.weighting = Eigen::MatrixXd::Identity(k + 1, k + 1);
    }
    return ms;
}

Eigen::VectorXd sample_moments(const MomentSystem& ms, const Eigen::VectorXd& w) {
    if (w.size() != ms.n_controls()) {
        throw std::invalid_argument("weight vector has wrong length");
    }
    const Eigen::VectorXd resid = ms.target - ms.control_block.transpose() * w;
    return ms.instrument_block * resid / static_cast<double>(ms.t0());
}

double gmm_objective(const MomentSystem& ms, const Eigen::VectorXd& w) {
    const Eigen::VectorXd g = sample_moments(ms, w);
    return g.dot(ms.weighting * g);
}

SimplexQp as_simplex_qp(const MomentSystem& ms) {
    const double t0 = static_cast<double>(ms.t0());
    const Eigen::MatrixXd d = ms.instrument_block * ms.control_block.transpose() / t0;
    const Eigen::VectorXd e = ms.instrument_block * ms.target / t0;
    SimplexQp qp;
    qp.M = d.transpose() * ms.weighting * d;
    qp.M = 0.5 * (qp.M + qp.M.transpose()).eval();
    qp.b = d.transpose() * (ms.weighting * e);
    qp.c = e.dot(ms.weighting * e);
    return qp;
}

MomentSystem reweight_two_step(const MomentSystem& ms, const Eigen::VectorXd& w_first,
                               int bandwidth) {
    if (ms.t0() < 2) {
        throw std::invalid_argument("two-step reweighting needs at least 2 pre periods");
    }
    const Eigen::VectorXd resid = ms.target - ms.control_block.transpose() * w_first;
    // Per-period contributions g_t = G_t * resid_t, stacked as a T0 x (K+1) series.
    const Eigen::MatrixXd series =
        resid.asDiagonal() * Eigen::MatrixXd(ms.instrument_block.transpose());
    const Eigen::MatrixXd lrv = hac_lrv(series, bandwidth);

    MomentSystem out = ms;
    const Eigen::Index dim = lrv.rows();
    if (lrv.cwiseAbs().maxCoeff() <= 0.0) {
        out.weighting = Eigen::MatrixXd::Identity(dim, dim);
        out.warnings.push_back(
            "two-step variance is zero; falling back to the identity weighting");
        return out;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(lrv);
    const double lmax = es.eigenvalues().maxCoeff();
    const double lmin = es.eigenvalues().minCoeff();
    Eigen::MatrixXd v = lrv;
    if (!(lmin > 0.0) || lmax / lmin > 1e12) {
        const double ridge = 1e-8 * lrv.trace() / static_cast<double>(dim);
        v += ridge * Eigen::MatrixXd::Identity(dim, dim);
        out.warnings.push_back("two-step variance is near-singular; applied a ridge");
    }
    Eigen::MatrixXd a = v.ldlt().solve(Eigen::MatrixXd::Identity(dim, dim));
    out.weighting = 0.5 * (a + a.transpose());
    return out;
}

SarganHansen sargan_hansen(const MomentSystem& ms, const QpOptions& opt) {
    const SimplexQp qp = as_simplex_qp(ms);
    const QpSolution sol = solve_simplex_qp(qp, opt);
    SarganHansen sh;
    sh.statistic = static_cast<double>(ms.t0()) * std::max(0.0, sol.objective);
    sh.w_min = sol.weights;
    return sh;
}

}  // namespace ivsynth
