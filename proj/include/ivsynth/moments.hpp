#pragma once

#include "ivsynth/linalg.hpp"
#include "ivsynth/panel.hpp"

#include <Eigen/Core>
#include <string>
#include <vector>

namespace ivsynth {

enum class Weighting { identity, two_step, custom };

// Sample moment data for one estimation problem:
//   g(w) = (1/T0) * instrument_block * (target - control_block' w)
// objective(w) = g(w)' A g(w) with A = weighting.
struct MomentSystem {
    Eigen::MatrixXd instrument_block;  // (K+1) x T0, first row ones
    Eigen::MatrixXd control_block;     // J x T0
    Eigen::VectorXd target;            // T0
    Eigen::MatrixXd weighting;         // (K+1) x (K+1), symmetric PSD
    Weighting kind = Weighting::identity;
    std::vector<int> control_units;
    std::vector<int> instrument_units;
    std::vector<int> pre_periods;
    std::vector<std::string> warnings;

    Eigen::Index t0() const { return target.size(); }
    Eigen::Index n_controls() const { return control_block.rows(); }
    Eigen::Index n_moments() const { return instrument_block.rows(); }
};

// weighting=identity sets A = I; two_step also starts from A = I and defers
// the variance weighting to reweight_two_step (requires T0 >= 2); custom
// takes the caller's PSD matrix.
MomentSystem build_moment_system(const PanelData& panel, const RoleAssignment& roles,
                                 Weighting kind,
                                 const Eigen::MatrixXd* custom_weighting = nullptr);

Eigen::VectorXd sample_moments(const MomentSystem& ms, const Eigen::VectorXd& w);

double gmm_objective(const MomentSystem& ms, const Eigen::VectorXd& w);

// M = C G'AG C'/T0^2, b = C G'AG y0/T0^2, c = y0' G'AG y0/T0^2.
SimplexQp as_simplex_qp(const MomentSystem& ms);

// Replaces the weighting with the inverse HAC long-run variance of the
// per-period contributions g_t(w) = G_t * (y0_t - C_t' w). Near-singular
// variance gets ridge eps*trace/dim with eps = 1e-8; an all-zero variance
// falls back to the identity with a warning.
MomentSystem reweight_two_step(const MomentSystem& ms, const Eigen::VectorXd& w_first,
                               int bandwidth = -1);

struct SarganHansen {
    double statistic = 0.0;
    WeightVector w_min;
};

// SH = T0 * min over the simplex of the GMM objective.
SarganHansen sargan_hansen(const MomentSystem& ms, const QpOptions& opt = {});

}  // namespace ivsynth
