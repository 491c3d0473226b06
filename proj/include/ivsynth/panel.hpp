#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

namespace ivsynth {

using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

// Balanced panel. Rows are units, columns are periods in strictly increasing
// label order. Treat as immutable once loaded or built.
struct PanelData {
    Eigen::MatrixXd outcomes;
    BoolMatrix treated;
    std::vector<std::string> unit_ids;
    std::vector<std::string> period_ids;
    std::vector<long long> period_keys;  // sort keys, strictly increasing

    Eigen::Index n_units() const { return outcomes.rows(); }
    Eigen::Index n_periods() const { return outcomes.cols(); }
    int unit_index(const std::string& id) const;         // throws if unknown
    int period_index(const std::string& label) const;    // throws if unknown
};

// Index-based role partition for one estimation problem.
struct RoleAssignment {
    int unit_of_interest = -1;
    std::vector<int> controls;      // J, donor units
    std::vector<int> instruments;   // K, instrument units (may be empty)
    std::vector<int> pre_periods;
    std::vector<int> post_periods;
};

struct RoleViolation {
    std::string rule;
    std::string unit;
    std::string period;
    std::string message;
};

enum class PanelFormat { long_csv, wide_csv };

// Long CSV: header unit,period,outcome[,treated]. Missing treated column
// means never treated. Wide CSV: header unit,<period>...; treatment comes
// from an optional sidecar CSV with header unit,first_treated_period.
PanelData load_panel(const std::string& path, PanelFormat format,
                     const std::optional<std::string>& treatment_path = std::nullopt);

void save_panel(const PanelData& panel, const std::string& path, PanelFormat format,
                const std::optional<std::string>& treatment_path = std::nullopt);

// Checks the role preconditions and returns every violation found:
// disjoint roles, index bounds, pre before post, unit of interest and
// controls untreated where required, instruments untreated pre-treatment.
std::vector<RoleViolation> validate_roles(const PanelData& panel,
                                          const RoleAssignment& roles);

// Throws std::invalid_argument listing the violations, if any.
void require_valid_roles(const PanelData& panel, const RoleAssignment& roles);

// Builds the role assignment used throughout: pre periods are those before
// the first period at which `unit` is treated (or before `first_post` when
// given). Control and instrument ids must name existing units.
RoleAssignment make_roles(const PanelData& panel, const std::string& unit,
                          const std::vector<std::string>& control_ids,
                          const std::vector<std::string>& instrument_ids,
                          const std::optional<std::string>& first_post = std::nullopt);

}  // namespace ivsynth
