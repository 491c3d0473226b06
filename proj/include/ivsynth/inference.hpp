#pragma once

#include "ivsynth/estimators.hpp"
#include "ivsynth/panel.hpp"
#include "ivsynth/selection.hpp"

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace ivsynth {

struct SubsampleOptions {
    int m = -1;                 // block length; -1 selects floor(T0^0.7)
    int n_draws = 1000;
    double level = 0.10;        // delta: nominal miscoverage
    int sigma_bandwidth = -1;   // HAC bandwidth for sigma_v; -1 auto
    bool reselect_per_block = false;
    bool iid_blocks = false;    // subsample random period subsets instead of blocks
};

struct SigmaV {
    double value = 0.0;
    bool degenerate = false;
};

// Long-run variance of sqrt(T1) * sum_t v_t (alpha_t - alpha_bar), estimated
// from the deviation series. Constant effects give 0 with the degenerate flag.
SigmaV estimate_sigma_v(const Eigen::VectorXd& effects, double weighted_average,
                        const Eigen::VectorXd& v, int bandwidth = -1);

// Selection context for re-running partition selection inside each block.
struct ReselectSpec {
    RoleAssignment pool_roles;  // candidate pool as controls, fixed instruments
    SelectionMethod method = SelectionMethod::two_step;
    SelectionOptions options;
};

struct BlockWeights {
    Eigen::MatrixXd weights;        // one row per block, columns = pool units
    std::vector<int> pool;          // unit indices behind the columns
    std::vector<int> starts;        // 0-based offsets into the sorted pre periods
    std::vector<char> usable;       // 0: excluded (zero outcome variance)
    std::vector<std::string> warnings;
};

// Re-estimates the weights on every contiguous pre-treatment block of length
// m. With a reselect spec the partition selection is re-run per block and the
// weights are embedded over the candidate pool (zeros off-support).
BlockWeights subsample_weights(const PanelData& panel, const RoleAssignment& roles, int m,
                               const GmmOptions& gmm = {},
                               const ReselectSpec* reselect = nullptr);

struct ConfidenceInterval {
    double lower = 0.0;
    double upper = 0.0;
    double point = 0.0;        // weighted average effect
    double sigma_v_hat = 0.0;
    bool sigma_degenerate = false;
    int m = 0;                 // resolved block length
    double level = 0.0;
    Eigen::VectorXd draws;     // subsampling statistics, in draw order
    std::vector<std::string> warnings;
};

// Block-subsampling confidence interval for the weighted average effect.
// Each draw picks a usable block uniformly and adds an independent
// Normal(0, sigma_v) perturbation; the interval inverts the order statistics
// at ceil((delta/2)N) and ceil((1-delta/2)N). Requires constrained weights.
ConfidenceInterval subsampling_ci(const PanelData& panel, const RoleAssignment& roles,
                                  const EstimationResult& est, const SubsampleOptions& cfg,
                                  std::uint64_t seed, const GmmOptions& gmm = {},
                                  const ReselectSpec* reselect = nullptr);

// Default block length floor(T0^0.7).
int default_block_length(int t0);

}  // namespace ivsynth
