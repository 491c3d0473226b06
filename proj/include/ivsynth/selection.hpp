#pragma once

#include "ivsynth/moments.hpp"
#include "ivsynth/panel.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ivsynth {

struct PartitionCandidate {
    std::vector<int> controls;
    std::vector<int> instruments;
    std::optional<double> sh_statistic;
    std::optional<double> critical_value;
};

enum class SelectionMethod { sequential, two_step };

std::string selection_method_name(SelectionMethod m);

struct SelectionResult {
    PartitionCandidate chosen;
    std::vector<PartitionCandidate> trace;  // tested candidates, in order
    SelectionMethod method = SelectionMethod::sequential;
    bool no_pass = false;     // sequential: every candidate failed the test
    bool degenerate = false;  // two-step: stage-1 support was empty
    std::vector<std::string> warnings;
};

struct SelectionOptions {
    Weighting weighting = Weighting::identity;
    double alpha = 0.05;  // sequential test level
    int bandwidth = -1;   // HAC bandwidth for two-step weighting
    double support_threshold = 1e-10;
    QpOptions qp;
};

// Candidate pool units (roles.controls) sorted ascending by pre-treatment
// MSE against the unit of interest, ties broken by unit index.
std::vector<int> mse_ordering(const PanelData& panel, const RoleAssignment& roles);

// Candidate n (1-based) takes the first n ordered units as controls and the
// remaining ordered units plus the fixed instruments n1 as instruments.
std::vector<PartitionCandidate> build_sequential_candidates(const std::vector<int>& ordering,
                                                            const std::vector<int>& n1);

// Downward testing: accepts the first candidate whose overidentification
// statistic falls below the chi-squared critical value with
// df = max{1, K+1-J}. If none passes, returns the full-control partition
// with no_pass set.
SelectionResult sequential_select(const PanelData& panel, const RoleAssignment& roles,
                                  const SelectionOptions& opt = {});

// Stage 1 estimates on the full pool; stage 2 keeps the weight support as
// controls and moves zero-weight units to the instruments.
SelectionResult two_step_select(const PanelData& panel, const RoleAssignment& roles,
                                const SelectionOptions& opt = {});

// Inverse CDF of the chi-squared distribution, df >= 1, 0 < prob < 1.
double chi2_quantile(int df, double prob);

}  // namespace ivsynth
