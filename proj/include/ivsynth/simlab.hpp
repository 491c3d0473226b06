#pragma once

#include "ivsynth/estimators.hpp"
#include "ivsynth/panel.hpp"
#include "ivsynth/selection.hpp"

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ivsynth {

// AR(p) on the d-times differenced series, with intercept:
//   z_t = intercept + sum_k coefficients[k] z_{t-k} + e_t,  e ~ N(0, var).
struct ArSpec {
    int p = 0;
    int d = 0;
    Eigen::VectorXd coefficients;
    double intercept = 0.0;
    double innovation_variance = 0.0;
};

// All AR roots strictly outside the unit circle (companion spectral radius
// below 1 - 1e-8).
bool ar_stationary(const Eigen::VectorXd& coefficients);

// Joint (p, d) selection over p in 0..5, d in {0,1} by corrected Akaike
// criterion under the Gaussian conditional likelihood, all candidates
// conditioned on the same first 6 observations; the best stationary
// candidate wins, with a random-walk fallback if none is.
ArSpec fit_ar(const Eigen::VectorXd& series, std::vector<std::string>* warnings = nullptr);

struct FittedDgp {
    Eigen::MatrixXd loadings;            // rank x units, held fixed
    std::vector<ArSpec> factor_models;   // one per factor
    Eigen::VectorXd shock_variances;     // per unit
    int rank = 0;
    std::vector<std::string> unit_ids;
    std::vector<std::string> warnings;

    Eigen::Index n_units() const { return loadings.cols(); }
};

// Fits the factor structure of an untreated balanced panel: rank by singular
// value thresholding (unless overridden), loadings and factors by PCA, one
// AR model per factor, and per-unit residual shock variances.
FittedDgp fit_dgp(const PanelData& panel, int rank_override = -1);

struct TreatmentPlan {
    std::vector<int> treated_units;
    int unit_of_interest = -1;
};

struct SimTruth {
    Eigen::VectorXd effects;  // injected effect per post period
    double average = 0.0;     // uniform mean of effects
};

struct SimulatedPanel {
    PanelData panel;
    SimTruth truth;
    Eigen::MatrixXd factors;  // (T0+T1) x rank, realized factor path
};

// Simulates T0 + T1 periods from the fitted DGP: factors follow their AR
// models (200 burn-in periods plus history_pad discarded), shocks are iid
// Normal(0, shock_variance), and the true effect path is added to every
// treated unit's post periods. Innovation counters are anchored at absolute
// time so that runs differing only in T0 (with history_pad making
// 200 + history_pad + T0 equal) share their post-period data bit for bit.
SimulatedPanel simulate_panel(const FittedDgp& dgp, int t0, int t1, const TreatmentPlan& plan,
                              const Eigen::VectorXd& true_effects, std::uint64_t seed,
                              int history_pad = 0);

enum class AssignmentMode { uniform, logistic };

struct TreatmentAssignment {
    std::vector<int> treated_units;  // sorted ascending
    int unit_of_interest = -1;
    Eigen::VectorXd probabilities;   // per-unit sampling weight
};

// Ridge-regularized logistic regression fitted by Newton iterations;
// x rows are observations. Throws after 100 iterations without convergence.
Eigen::VectorXd logistic_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                             double ridge = 1e-6, int max_iter = 100);

// Samples n_treated units without replacement, uniformly or proportional to
// a logistic regression of the supplied binary labels on the unit loadings;
// the unit of interest is uniform among the treated.
TreatmentAssignment assign_treatment(const FittedDgp& dgp, int n_treated, AssignmentMode mode,
                                     std::uint64_t seed, const std::vector<int>& labels = {});

enum class EstimatorKind { gmm, ols, uniform, factor, powell, oracle };

std::string estimator_kind_name(EstimatorKind k);

struct StudyCell {
    int t0 = 0;
    int t1 = 0;
    int n0 = 0;  // candidate pool size
    int n1 = 0;  // fixed instrument count
};

struct StudyDesign {
    std::vector<StudyCell> cells;
    int reps = 1000;
    int n_treated = 1;
    std::vector<EstimatorKind> estimators;
    std::optional<SelectionMethod> selection;  // partition selection for gmm
    Weighting weighting = Weighting::identity;
    double alpha = 0.05;                       // sequential test level
    AssignmentMode assignment = AssignmentMode::uniform;
    std::vector<int> labels;                   // logistic assignment labels
    Eigen::VectorXd true_effects;              // per post period; empty = zeros
    int powell_iters = 10;
    int factor_rank = -1;
    bool detail = false;
};

struct CellMetrics {
    StudyCell cell;
    EstimatorKind estimator = EstimatorKind::gmm;
    int reps_completed = 0;
    int failures = 0;
    double bias_magnitude = 0.0;
    double mse_alpha_t = 0.0;
    double mse_alpha_bar = 0.0;
    double feasibility_rate = 0.0;
};

struct RepDetail {
    int cell_index = 0;
    int rep = 0;
    EstimatorKind estimator = EstimatorKind::gmm;
    bool failed = false;
    double alpha_bar_hat = 0.0;
    double true_average = 0.0;
    bool feasible = false;
};

struct SimReport {
    std::vector<CellMetrics> rows;     // one per cell x estimator
    std::vector<RepDetail> details;    // when design.detail
    std::vector<std::string> warnings;
};

// Placebo study: per replication, assign treatment, draw the donor pool and
// instruments among the untreated, simulate, and score every estimator.
// Replications run on per-rep seed substreams independent of the cell, so
// the report is invariant to execution order and thread count.
SimReport run_study(const FittedDgp& dgp, const StudyDesign& design, std::uint64_t seed,
                    int n_threads = 1);

}  // namespace ivsynth
