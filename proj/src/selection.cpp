#include "ivsynth/selection.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>

namespace ivsynth {

namespace {

struct ShOutcome {
    double statistic = 0.0;
    Eigen::VectorXd weights;
    std::vector<std::string> warnings;
};

// Overidentification statistic of one partition, using the same weighting
// scheme the estimator would use (two-step reweights once before the test).
ShOutcome sh_for_partition(const PanelData& panel, const RoleAssignment& base,
                           const std::vector<int>& controls,
                           const std::vector<int>& instruments, const SelectionOptions& opt) {
    RoleAssignment roles = base;
    roles.controls = controls;
    roles.instruments = instruments;
    MomentSystem ms = build_moment_system(panel, roles, opt.weighting);
    ShOutcome out;
    if (opt.weighting == Weighting::two_step) {
        const SarganHansen first = sargan_hansen(ms, opt.qp);
        ms = reweight_two_step(ms, first.w_min.values, opt.bandwidth);
        out.warnings = ms.warnings;
    }
    const SarganHansen sh = sargan_hansen(ms, opt.qp);
    out.statistic = sh.statistic;
    out.weights = sh.w_min.values;
    return out;
}

void check_weighting_kind(Weighting kind) {
    if (kind == Weighting::custom) {
        throw std::invalid_argument("selection supports identity or two-step weighting only");
    }
}

}  // namespace

std::string selection_method_name(SelectionMethod m) {
    return m == SelectionMethod::sequential ? "sequential" : "two-step";
}

std::vector<int> mse_ordering(const PanelData& panel, const RoleAssignment& roles) {
    require_valid_roles(panel, roles);
    struct Entry {
        double mse;
        int unit;
    };
    std::vector<Entry> entries;
    entries.reserve(roles.controls.size());
    const double t0 = static_cast<double>(roles.pre_periods.size());
    for (int u : roles.controls) {
        double sum = 0.0;
        for (int t : roles.pre_periods) {
            const double d = panel.outcomes(roles.unit_of_interest, t) - panel.outcomes(u, t);
            sum += d * d;
        }
        entries.push_back({sum / t0, u});
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        return a.mse != b.mse ? a.mse < b.mse : a.unit < b.unit;
    });
    std::vector<int> out;
    out.reserve(entries.size());
    for (const Entry& e : entries) out.push_back(e.unit);
    return out;
}

std::vector<PartitionCandidate> build_sequential_candidates(const std::vector<int>& ordering,
                                                            const std::vector<int>& n1) {
    std::vector<PartitionCandidate> out;
    out.reserve(ordering.size());
    for (std::size_t n = 1; n <= ordering.size(); ++n) {
        PartitionCandidate cand;
        cand.controls.assign(ordering.begin(), ordering.begin() + static_cast<long>(n));
        cand.instruments.assign(ordering.begin() + static_cast<long>(n), ordering.end());
        cand.instruments.insert(cand.instruments.end(), n1.begin(), n1.end());
        out.push_back(std::move(cand));
    }
    return out;
}

SelectionResult sequential_select(const PanelData& panel, const RoleAssignment& roles,
                                  const SelectionOptions& opt) {
    check_weighting_kind(opt.weighting);
    if (!(opt.alpha > 0.0 && opt.alpha < 1.0)) {
        throw std::invalid_argument("alpha must lie in (0,1)");
    }
    const std::vector<int> ordering = mse_ordering(panel, roles);
    std::vector<PartitionCandidate> candidates =
        build_sequential_candidates(ordering, roles.instruments);

    SelectionResult result;
    result.method = SelectionMethod::sequential;
    for (PartitionCandidate& cand : candidates) {
        const auto j = cand.controls.size();
        const auto k = cand.instruments.size();
        const int df = std::max<long>(1, static_cast<long>(k) + 1 - static_cast<long>(j));
        ShOutcome sh = sh_for_partition(panel, roles, cand.controls, cand.instruments, opt);
        cand.sh_statistic = sh.statistic;
        cand.critical_value = chi2_quantile(df, 1.0 - opt.alpha);
        result.warnings.insert(result.warnings.end(), sh.warnings.begin(), sh.warnings.end());
        result.trace.push_back(cand);
        if (sh.statistic < *cand.critical_value) {
            result.chosen = cand;
            return result;
        }
    }
    result.chosen = result.trace.back();
    result.no_pass = true;
    result.warnings.push_back("no partition passed the overidentification test; "
                              "returning the full-control partition");
    return result;
}

SelectionResult two_step_select(const PanelData& panel, const RoleAssignment& roles,
                                const SelectionOptions& opt) {
    check_weighting_kind(opt.weighting);
    require_valid_roles(panel, roles);

    SelectionResult result;
    result.method = SelectionMethod::two_step;
    if (roles.instruments.empty()) {
        result.warnings.push_back("no fixed instruments; first stage uses the mean moment only");
    }

    PartitionCandidate stage1;
    stage1.controls = roles.controls;
    stage1.instruments = roles.instruments;
    ShOutcome sh1 = sh_for_partition(panel, roles, stage1.controls, stage1.instruments, opt);
    stage1.sh_statistic = sh1.statistic;
    result.warnings.insert(result.warnings.end(), sh1.warnings.begin(), sh1.warnings.end());
    result.trace.push_back(stage1);

    std::vector<int> support, dropped;
    for (std::size_t i = 0; i < roles.controls.size(); ++i) {
        if (sh1.weights(static_cast<Eigen::Index>(i)) > opt.support_threshold) {
            support.push_back(roles.controls[i]);
        } else {
            dropped.push_back(roles.controls[i]);
        }
    }
    if (support.empty()) {
        Eigen::Index top;
        sh1.weights.maxCoeff(&top);
        const int keep = roles.controls[static_cast<std::size_t>(top)];
        support.push_back(keep);
        dropped.erase(std::find(dropped.begin(), dropped.end(), keep));
        result.degenerate = true;
        result.warnings.push_back("stage-1 support is empty; keeping the largest-weight unit");
    }

    PartitionCandidate stage2;
    stage2.controls = support;
    stage2.instruments = dropped;
    stage2.instruments.insert(stage2.instruments.end(), roles.instruments.begin(),
                              roles.instruments.end());
    ShOutcome sh2 = sh_for_partition(panel, roles, stage2.controls, stage2.instruments, opt);
    stage2.sh_statistic = sh2.statistic;
    result.warnings.insert(result.warnings.end(), sh2.warnings.begin(), sh2.warnings.end());
    result.trace.push_back(stage2);
    result.chosen = stage2;
    return result;
}

double chi2_quantile(int df, double prob) {
    if (df < 1) throw std::invalid_argument("chi2_quantile: df must be at least 1");
    if (!(prob > 0.0 && prob < 1.0)) {
        throw std::invalid_argument("chi2_quantile: prob must lie in (0,1)");
    }
    return boost::math::quantile(boost::math::chi_squared(static_cast<double>(df)), prob);
}

}  // namespace ivsynth
