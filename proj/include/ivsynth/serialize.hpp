#pragma once

#include "ivsynth/estimators.hpp"
#include "ivsynth/inference.hpp"
#include "ivsynth/selection.hpp"
#include "ivsynth/simlab.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>

namespace ivsynth {

using Json = nlohmann::json;

// Shortest round-trip decimal representation.
std::string format_double(double x);

// FNV-1a 64-bit over raw bytes, for input provenance hashes.
std::uint64_t fnv1a64(const std::string& bytes);
std::string fnv1a64_hex(const std::string& bytes);

// CSV field escaping (quotes fields containing separators or quotes).
std::string csv_escape(const std::string& field);

Json vec_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vec_from_json(const Json& j);
Json mat_to_json(const Eigen::MatrixXd& m);
// cols disambiguates an empty matrix (zero rows).
Eigen::MatrixXd mat_from_json(const Json& j, Eigen::Index cols = 0);

std::string weighting_name(Weighting w);
Weighting weighting_from_name(const std::string& name);
Method method_from_name(const std::string& name);
SelectionMethod selection_method_from_name(const std::string& name);
EstimatorKind estimator_kind_from_name(const std::string& name);

Json result_to_json(const EstimationResult& est, const PanelData& panel);
std::string gap_to_csv(const EstimationResult& est, const PanelData& panel,
                       const RoleAssignment& roles);

Json selection_to_json(const SelectionResult& sel, const PanelData& panel);

Json interval_to_json(const ConfidenceInterval& ci);

Json dgp_to_json(const FittedDgp& dgp);
FittedDgp dgp_from_json(const Json& j);

Json design_to_json(const StudyDesign& design);
StudyDesign design_from_json(const Json& j);

std::string report_to_csv(const SimReport& report);
Json details_to_json(const SimReport& report);

}  // namespace ivsynth
