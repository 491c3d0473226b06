#include "ivsynth/serialize.hpp"

#include <array>
#include <charconv>
#include <sstream>
#include <stdexcept>

namespace ivsynth {

std::string format_double(double x) {
    std::array<char, 40> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return std::string(buf.data(), res.ptr);
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

std::string fnv1a64_hex(const std::string& bytes) {
    static const char* digits = "0123456789abcdef";
    std::uint64_t h = fnv1a64(bytes);
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[h & 0xF];
        h >>= 4;
    }
    return out;
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

Json vec_to_json(const Eigen::VectorXd& v) {
    Json arr = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

Eigen::VectorXd vec_from_json(const Json& j) {
    if (!j.is_array()) throw std::invalid_argument("expected a JSON array of numbers");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    Eigen::Index i = 0;
    for (const Json& x : j) v(i++) = x.get<double>();
    return v;
}

Json mat_to_json(const Eigen::MatrixXd& m) {
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(row);
    }
    return rows;
}

Eigen::MatrixXd mat_from_json(const Json& j, Eigen::Index cols) {
    if (!j.is_array()) throw std::invalid_argument("expected a JSON array of rows");
    const auto n_rows = static_cast<Eigen::Index>(j.size());
    if (n_rows == 0) return Eigen::MatrixXd(0, cols);
    const auto n_cols = static_cast<Eigen::Index>(j.at(0).size());
    Eigen::MatrixXd m(n_rows, n_cols);
    for (Eigen::Index r = 0; r < n_rows; ++r) {
        const Json& row = j.at(static_cast<std::size_t>(r));
        if (static_cast<Eigen::Index>(row.size()) != n_cols) {
            throw std::invalid_argument("ragged JSON matrix");
        }
        for (Eigen::Index c = 0; c < n_cols; ++c) {
            m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
        }
    }
    return m;
}

std::string weighting_name(Weighting w) {
    switch (w) {
        case Weighting::identity: return "identity";
        case Weighting::two_step: return "two-step";
        case Weighting::custom: return "custom";
    }
    throw std::logic_error("unknown weighting");
}

Weighting weighting_from_name(const std::string& name) {
    if (name == "identity") return Weighting::identity;
    if (name == "two-step" || name == "two_step") return Weighting::two_step;
    if (name == "custom") return Weighting::custom;
    throw std::invalid_argument("unknown weighting: " + name);
}

Method method_from_name(const std::string& name) {
    if (name == "gmm") return Method::gmm;
    if (name == "ols") return Method::ols;
    if (name == "uniform") return Method::uniform;
    if (name == "factor") return Method::factor;
    if (name == "powell") return Method::powell;
    throw std::invalid_argument("unknown method: " + name);
}

SelectionMethod selection_method_from_name(const std::string& name) {
    if (name == "sequential") return SelectionMethod::sequential;
    if (name == "two-step" || name == "two_step") return SelectionMethod::two_step;
    throw std::invalid_argument("unknown selection method: " + name);
}

EstimatorKind estimator_kind_from_name(const std::string& name) {
    if (name == "gmm") return EstimatorKind::gmm;
    if (name == "ols") return EstimatorKind::ols;
    if (name == "uniform") return EstimatorKind::uniform;
    if (name == "factor") return EstimatorKind::factor;
    if (name == "powell") return EstimatorKind::powell;
    if (name == "oracle") return EstimatorKind::oracle;
    throw std::invalid_argument("unknown estimator: " + name);
}

namespace {

Json ids_for(const std::vector<int>& indices, const PanelData& panel, bool units) {
    Json arr = Json::array();
    for (int idx : indices) {
        arr.push_back(units ? panel.unit_ids[static_cast<std::size_t>(idx)]
                            : panel.period_ids[static_cast<std::size_t>(idx)]);
    }
    return arr;
}

}  // namespace

Json result_to_json(const EstimationResult& est, const PanelData& panel) {
    Json j;
    j["method"] = method_name(est.method);
    if (est.weights.has_value()) {
        j["weights"] = vec_to_json(est.weights->values);
        j["on_simplex"] = est.weights->on_simplex;
    } else {
        j["weights"] = nullptr;
    }
    j["weight_units"] = ids_for(est.weight_units, panel, true);
    j["effects"] = vec_to_json(est.effects);
    j["weighted_average"] = est.weighted_average;
    j["v"] = vec_to_json(est.v);
    j["objective"] = est.objective;
    j["gap_periods"] = ids_for(est.gap_periods, panel, false);
    j["gap_series"] = vec_to_json(est.gap_series);
    j["synthetic"] = vec_to_json(est.synthetic);
    j["warnings"] = est.warnings;
    return j;
}

std::string gap_to_csv(const EstimationResult& est, const PanelData& panel,
                       const RoleAssignment& roles) {
    std::ostringstream out;
    out << "period,actual,synthetic,gap\n";
    for (std::size_t i = 0; i < est.gap_periods.size(); ++i) {
        const int t = est.gap_periods[i];
        const double actual = panel.outcomes(roles.unit_of_interest, t);
        out << csv_escape(panel.period_ids[static_cast<std::size_t>(t)]) << ','
            << format_double(actual) << ','
            << format_double(est.synthetic(static_cast<Eigen::Index>(i))) << ','
            << format_double(est.gap_series(static_cast<Eigen::Index>(i))) << '\n';
    }
    return out.str();
}

namespace {

Json candidate_to_json(const PartitionCandidate& cand, const PanelData& panel) {
    Json j;
    j["controls"] = ids_for(cand.controls, panel, true);
    j["instruments"] = ids_for(cand.instruments, panel, true);
    if (cand.sh_statistic.has_value()) j["sh_statistic"] = *cand.sh_statistic;
    else j["sh_statistic"] = nullptr;
    if (cand.critical_value.has_value()) j["critical_value"] = *cand.critical_value;
    else j["critical_value"] = nullptr;
    return j;
}

}  // namespace

Json selection_to_json(const SelectionResult& sel, const PanelData& panel) {
    Json j;
    j["method"] = selection_method_name(sel.method);
    j["chosen"] = candidate_to_json(sel.chosen, panel);
    Json trace = Json::array();
    for (const PartitionCandidate& cand : sel.trace) {
        trace.push_back(candidate_to_json(cand, panel));
    }
    j["trace"] = trace;
    j["no_pass"] = sel.no_pass;
    j["degenerate"] = sel.degenerate;
    j["warnings"] = sel.warnings;
    return j;
}

Json interval_to_json(const ConfidenceInterval& ci) {
    Json j;
    j["lower"] = ci.lower;
    j["upper"] = ci.upper;
    j["point"] = ci.point;
    j["sigma_v_hat"] = ci.sigma_v_hat;
    j["sigma_degenerate"] = ci.sigma_degenerate;
    j["m"] = ci.m;
    j["level"] = ci.level;
    j["draws"] = vec_to_json(ci.draws);
    j["warnings"] = ci.warnings;
    return j;
}

Json dgp_to_json(const FittedDgp& dgp) {
    Json j;
    j["rank"] = dgp.rank;
    j["loadings"] = mat_to_json(dgp.loadings);
    Json models = Json::array();
    for (const ArSpec& m : dgp.factor_models) {
        Json mj;
        mj["p"] = m.p;
        mj["d"] = m.d;
        mj["coefficients"] = vec_to_json(m.coefficients);
        mj["intercept"] = m.intercept;
        mj["innovation_variance"] = m.innovation_variance;
        models.push_back(mj);
    }
    j["factor_models"] = models;
    j["shock_variances"] = vec_to_json(dgp.shock_variances);
    j["unit_ids"] = dgp.unit_ids;
    j["warnings"] = dgp.warnings;
    return j;
}

FittedDgp dgp_from_json(const Json& j) {
    FittedDgp dgp;
    dgp.rank = j.at("rank").get<int>();
    dgp.shock_variances = vec_from_json(j.at("shock_variances"));
    dgp.loadings = mat_from_json(j.at("loadings"), dgp.shock_variances.size());
    if (dgp.loadings.rows() != dgp.rank ||
        dgp.loadings.cols() != dgp.shock_variances.size()) {
        throw std::invalid_argument("loading matrix shape disagrees with rank or units");
    }
    for (const Json& mj : j.at("factor_models")) {
        ArSpec m;
        m.p = mj.at("p").get<int>();
        m.d = mj.at("d").get<int>();
        m.coefficients = vec_from_json(mj.at("coefficients"));
        m.intercept = mj.at("intercept").get<double>();
        m.innovation_variance = mj.at("innovation_variance").get<double>();
        if (m.coefficients.size() != m.p) {
            throw std::invalid_argument("AR coefficient count disagrees with p");
        }
        dgp.factor_models.push_back(m);
    }
    if (static_cast<int>(dgp.factor_models.size()) != dgp.rank) {
        throw std::invalid_argument("factor model count disagrees with rank");
    }
    if (j.contains("unit_ids")) {
        dgp.unit_ids = j.at("unit_ids").get<std::vector<std::string>>();
    }
    if (j.contains("warnings")) {
        dgp.warnings = j.at("warnings").get<std::vector<std::string>>();
    }
    return dgp;
}

Json design_to_json(const StudyDesign& design) {
    Json j;
    Json cells = Json::array();
    for (const StudyCell& cell : design.cells) {
        cells.push_back(Json{{"t0", cell.t0}, {"t1", cell.t1}, {"n0", cell.n0},
                             {"n1", cell.n1}});
    }
    j["cells"] = cells;
    j["reps"] = design.reps;
    j["n_treated"] = design.n_treated;
    Json est = Json::array();
    for (EstimatorKind k : design.estimators) est.push_back(estimator_kind_name(k));
    j["estimators"] = est;
    if (design.selection.has_value()) {
        j["selection"] = selection_method_name(*design.selection);
    } else {
        j["selection"] = nullptr;
    }
    j["weighting"] = weighting_name(design.weighting);
    j["alpha"] = design.alpha;
    j["assignment"] = design.assignment == AssignmentMode::uniform ? "uniform" : "logistic";
    j["labels"] = design.labels;
    j["true_effects"] = vec_to_json(design.true_effects);
    j["powell_iters"] = design.powell_iters;
    j["factor_rank"] = design.factor_rank;
    j["detail"] = design.detail;
    return j;
}

StudyDesign design_from_json(const Json& j) {
    StudyDesign design;
    if (!j.contains("cells") || !j.at("cells").is_array()) {
        throw std::invalid_argument("study design needs a cells array");
    }
    for (const Json& cj : j.at("cells")) {
        StudyCell cell;
        cell.t0 = cj.at("t0").get<int>();
        cell.t1 = cj.at("t1").get<int>();
        cell.n0 = cj.at("n0").get<int>();
        cell.n1 = cj.value("n1", 0);
        design.cells.push_back(cell);
    }
    design.reps = j.value("reps", 1000);
    design.n_treated = j.value("n_treated", 1);
    if (j.contains("estimators")) {
        for (const Json& name : j.at("estimators")) {
            design.estimators.push_back(estimator_kind_from_name(name.get<std::string>()));
        }
    }
    if (j.contains("selection") && !j.at("selection").is_null()) {
        design.selection = selection_method_from_name(j.at("selection").get<std::string>());
    }
    if (j.contains("weighting")) {
        design.weighting = weighting_from_name(j.at("weighting").get<std::string>());
    }
    design.alpha = j.value("alpha", 0.05);
    if (j.contains("assignment")) {
        const std::string mode = j.at("assignment").get<std::string>();
        if (mode == "uniform") design.assignment = AssignmentMode::uniform;
        else if (mode == "logistic") design.assignment = AssignmentMode::logistic;
        else throw std::invalid_argument("unknown assignment mode: " + mode);
    }
    if (j.contains("labels")) design.labels = j.at("labels").get<std::vector<int>>();
    if (j.contains("true_effects")) design.true_effects = vec_from_json(j.at("true_effects"));
    design.powell_iters = j.value("powell_iters", 10);
    design.factor_rank = j.value("factor_rank", -1);
    design.detail = j.value("detail", false);
    return design;
}

std::string report_to_csv(const SimReport& report) {
    std::ostringstream out;
    out << "t0,t1,n0,n1,estimator,reps_completed,failures,bias_magnitude,"
           "mse_alpha_t,mse_alpha_bar,feasibility_rate\n";
    for (const CellMetrics& row : report.rows) {
        out << row.cell.t0 << ',' << row.cell.t1 << ',' << row.cell.n0 << ','
            << row.cell.n1 << ',' << estimator_kind_name(row.estimator) << ','
            << row.reps_completed << ',' << row.failures << ','
            << format_double(row.bias_magnitude) << ','
            << format_double(row.mse_alpha_t) << ','
            << format_double(row.mse_alpha_bar) << ','
            << format_double(row.feasibility_rate) << '\n';
    }
    return out.str();
}

Json details_to_json(const SimReport& report) {
    Json arr = Json::array();
    for (const RepDetail& d : report.details) {
        Json j;
        j["cell"] = d.cell_index;
        j["rep"] = d.rep;
        j["estimator"] = estimator_kind_name(d.estimator);
        j["failed"] = d.failed;
        j["alpha_bar_hat"] = d.alpha_bar_hat;
        j["true_average"] = d.true_average;
        j["feasible"] = d.feasible;
        arr.push_back(j);
    }
    return arr;
}

}  // namespace ivsynth
