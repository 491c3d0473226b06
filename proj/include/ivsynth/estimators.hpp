#pragma once

#include "ivsynth/linalg.hpp"
#include "ivsynth/moments.hpp"
#include "ivsynth/panel.hpp"

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

namespace ivsynth {

enum class Method { gmm, ols, uniform, factor, powell };

std::string method_name(Method m);

struct EstimationResult {
    std::optional<WeightVector> weights;  // absent for the factor method
    std::vector<int> weight_units;        // unit index per weight entry
    Eigen::VectorXd effects;              // one per post period
    double weighted_average = 0.0;
    Eigen::VectorXd v;                    // effect weights over post periods
    double objective = 0.0;
    Method method = Method::gmm;
    Eigen::VectorXd gap_series;           // actual minus synthetic, pre + post
    Eigen::VectorXd synthetic;            // aligned with gap_periods
    std::vector<int> gap_periods;         // sorted pre + post period indices
    std::vector<std::string> warnings;
};

struct EffectsSummary {
    Eigen::VectorXd effects;
    double weighted_average = 0.0;
    Eigen::VectorXd v;
    Eigen::VectorXd gap_series;
    Eigen::VectorXd synthetic;
    std::vector<int> gap_periods;
};

// Effects of a weight-based synthetic control: alpha_t = Y0t - Y_{J,t}' w on
// post periods, gap series over pre + post. v defaults to uniform 1/T1.
EffectsSummary effects_and_average(const Eigen::VectorXd& weights, const PanelData& panel,
                                   const RoleAssignment& roles,
                                   const Eigen::VectorXd& v = Eigen::VectorXd());

struct GmmOptions {
    Weighting weighting = Weighting::identity;
    bool constrained = true;
    Eigen::MatrixXd custom_weighting;  // used when weighting == custom
    int bandwidth = -1;                // HAC bandwidth for the two-step variance
    QpOptions qp;
};

// Eq.-style GMM synthetic control: minimizes g(W)'A g(W) over the simplex
// (constrained) or reports the minimum-norm stationary point (unconstrained,
// flagged off-simplex). Two-step weighting reweights once and re-solves.
EstimationResult gmm_sce(const PanelData& panel, const RoleAssignment& roles,
                         const GmmOptions& opt = {},
                         const Eigen::VectorXd& v = Eigen::VectorXd());

// Pre-treatment least squares on the simplex: M = Y_J Y_J'/T0, b = Y_J y0/T0.
EstimationResult ols_sce(const PanelData& panel, const RoleAssignment& roles,
                         const Eigen::VectorXd& v = Eigen::VectorXd(),
                         const QpOptions& qp = {});

EstimationResult uniform_sce(const PanelData& panel, const RoleAssignment& roles,
                             const Eigen::VectorXd& v = Eigen::VectorXd());

struct FactorEstimate {
    EstimationResult result;
    FactorFit fit;
};

// Fits factors to the never-treated block over pre + post periods, regresses
// the unit of interest's pre outcomes on the pre factors, and uses the fitted
// factor path as the counterfactual. rank_override < 0 selects the rank by
// singular value thresholding.
FactorEstimate factor_estimator(const PanelData& panel, const RoleAssignment& roles,
                                const Eigen::VectorXd& v = Eigen::VectorXd(),
                                int rank_override = -1);

struct PowellOptions {
    int n_iter = 10;
    QpOptions qp;
};

struct PowellResult {
    EstimationResult result;          // unit of interest's weights and effects
    Eigen::MatrixXd all_weights;      // (N0+1) x (N0+1), row i = W^i, zero diagonal
    Eigen::VectorXd fit_weights;      // a_i per unit
    std::vector<int> units;           // unit of interest first, then controls
    Eigen::MatrixXd estimated_pre;    // Yhat over pre periods, rows follow units
};

// Alternating estimator over the unit of interest plus all never-treated
// units (the roles' controls): each unit gets a simplex-QP synthetic weight
// vector against the others with estimated versions substituting for the
// own column, fit weights a_i equal the minimized objectives, and the final
// effect is a pooled weighted least squares slope on the differenced
// treatment indicator.
PowellResult powell_estimator(const PanelData& panel, const RoleAssignment& roles,
                              const Eigen::VectorXd& v = Eigen::VectorXd(),
                              const PowellOptions& opt = {});

}  // namespace ivsynth
