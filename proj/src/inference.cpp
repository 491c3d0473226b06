#include "ivsynth/inference.hpp"

#include "ivsynth/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ivsynth {

namespace {

std::vector<int> sorted_copy(const std::vector<int>& v) {
    std::vector<int> out = v;
    std::sort(out.begin(), out.end());
    return out;
}

bool has_outcome_variation(const PanelData& panel, const std::vector<int>& units,
                           const std::vector<int>& periods) {
    for (int u : units) {
        const double first = panel.outcomes(u, periods.front());
        for (int t : periods) {
            if (panel.outcomes(u, t) != first) return true;
        }
    }
    return false;
}

// Weights for one period window, embedded over the pool coordinates. With a
// reselect spec the partition is re-chosen inside the window first.
Eigen::VectorXd window_weights(const PanelData& panel, const RoleAssignment& roles,
                               const std::vector<int>& window, const std::vector<int>& pool,
                               const GmmOptions& gmm, const ReselectSpec* reselect) {
    RoleAssignment local = reselect != nullptr ? reselect->pool_roles : roles;
    local.pre_periods = window;
    if (reselect != nullptr) {
        const SelectionResult sel = reselect->method == SelectionMethod::sequential
                                        ? sequential_select(panel, local, reselect->options)
                                        : two_step_select(panel, local, reselect->options);
        local.controls = sel.chosen.controls;
        local.instruments = sel.chosen.instruments;
    }
    GmmOptions opts = gmm;
    opts.constrained = true;
    const EstimationResult est = gmm_sce(panel, local, opts);

    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(pool.size()));
    for (std::size_t i = 0; i < local.controls.size(); ++i) {
        const auto it = std::find(pool.begin(), pool.end(), local.controls[i]);
        if (it == pool.end()) {
            throw std::logic_error("selected control is missing from the candidate pool");
        }
        out(it - pool.begin()) = est.weights->values(static_cast<Eigen::Index>(i));
    }
    return out;
}

std::vector<int> resolve_pool(const RoleAssignment& roles, const ReselectSpec* reselect) {
    return reselect != nullptr ? reselect->pool_roles.controls : roles.controls;
}

std::vector<int> relevant_units(const RoleAssignment& roles, const ReselectSpec* reselect) {
    const RoleAssignment& r = reselect != nullptr ? reselect->pool_roles : roles;
    std::vector<int> units;
    units.push_back(r.unit_of_interest);
    units.insert(units.end(), r.controls.begin(), r.controls.end());
    units.insert(units.end(), r.instruments.begin(), r.instruments.end());
    return units;
}

}  // namespace

int default_block_length(int t0) {
    return static_cast<int>(std::floor(std::pow(static_cast<double>(t0), 0.7)));
}

SigmaV estimate_sigma_v(const Eigen::VectorXd& effects, double weighted_average,
                        const Eigen::VectorXd& v, int bandwidth) {
    const Eigen::Index t1 = effects.size();
    if (t1 < 2) throw std::invalid_argument("estimate_sigma_v needs at least 2 post periods");
    Eigen::VectorXd vv = v;
    if (vv.size() == 0) vv = Eigen::VectorXd::Constant(t1, 1.0 / static_cast<double>(t1));
    if (vv.size() != t1) throw std::invalid_argument("effect weights v have wrong length");

    const double sqrt_t1 = std::sqrt(static_cast<double>(t1));
    const Eigen::MatrixXd series =
        (sqrt_t1 * vv.array() * (effects.array() - weighted_average)).matrix();
    SigmaV out;
    out.value = static_cast<double>(t1) * hac_lrv(series, bandwidth)(0, 0);
    if (!(out.value > 0.0)) {
        out.value = 0.0;
        out.degenerate = true;
    }
    return out;
}

BlockWeights subsample_weights(const PanelData& panel, const RoleAssignment& roles, int m,
                               const GmmOptions& gmm, const ReselectSpec* reselect) {
    require_valid_roles(panel, roles);
    const std::vector<int> pre = sorted_copy(roles.pre_periods);
    const auto t0 = static_cast<int>(pre.size());
    if (m < 1 || m > t0) throw std::invalid_argument("block length m must lie in [1, T0]");

    BlockWeights bw;
    bw.pool = resolve_pool(roles, reselect);
    const std::vector<int> units = relevant_units(roles, reselect);
    const int n_blocks = t0 - m + 1;
    bw.weights = Eigen::MatrixXd::Zero(n_blocks, static_cast<Eigen::Index>(bw.pool.size()));
    bw.starts.resize(static_cast<std::size_t>(n_blocks));
    bw.usable.assign(static_cast<std::size_t>(n_blocks), 1);

    for (int b = 0; b < n_blocks; ++b) {
        bw.starts[static_cast<std::size_t>(b)] = b;
        const std::vector<int> window(pre.begin() + b, pre.begin() + b + m);
        if (!has_outcome_variation(panel, units, window)) {
            bw.usable[static_cast<std::size_t>(b)] = 0;
            bw.warnings.push_back("block starting at offset " + std::to_string(b) +
                                  " excluded: zero outcome variance");
            continue;
        }
        bw.weights.row(b) = window_weights(panel, roles, window, bw.pool, gmm, reselect);
    }
    return bw;
}

ConfidenceInterval subsampling_ci(const PanelData& panel, const RoleAssignment& roles,
                                  const EstimationResult& est, const SubsampleOptions& cfg,
                                  std::uint64_t seed, const GmmOptions& gmm,
                                  const ReselectSpec* reselect) {
    require_valid_roles(panel, roles);
    if (!est.weights.has_value() || !est.weights->on_simplex) {
        throw std::invalid_argument("subsampling requires constrained simplex weights");
    }
    if (cfg.reselect_per_block && reselect == nullptr) {
        throw std::invalid_argument("reselect_per_block set but no selection context given");
    }
    const ReselectSpec* resel = cfg.reselect_per_block ? reselect : nullptr;

    const std::vector<int> pre = sorted_copy(roles.pre_periods);
    const std::vector<int> post = sorted_copy(roles.post_periods);
    const auto t0 = static_cast<int>(pre.size());
    const auto t1 = static_cast<int>(post.size());
    const int m = cfg.m < 0 ? default_block_length(t0) : cfg.m;
    if (m < 2 || m > t0) throw std::invalid_argument("block length m must lie in [2, T0]");
    if (!(cfg.level > 0.0 && cfg.level < 1.0)) {
        throw std::invalid_argument("level must lie in (0,1)");
    }
    if (cfg.n_draws < 100) throw std::invalid_argument("n_draws must be at least 100");

    ConfidenceInterval ci;
    ci.m = m;
    ci.level = cfg.level;
    ci.point = est.weighted_average;
    const SigmaV sigma = estimate_sigma_v(est.effects, est.weighted_average, est.v,
                                          cfg.sigma_bandwidth);
    ci.sigma_v_hat = sigma.value;
    ci.sigma_degenerate = sigma.degenerate;

    const std::vector<int> pool = resolve_pool(roles, resel);
    Eigen::VectorXd w_hat = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(pool.size()));
    for (std::size_t i = 0; i < roles.controls.size(); ++i) {
        const auto it = std::find(pool.begin(), pool.end(), roles.controls[i]);
        if (it == pool.end()) {
            throw std::invalid_argument("estimation controls must come from the candidate pool");
        }
        w_hat(it - pool.begin()) = est.weights->values(static_cast<Eigen::Index>(i));
    }

    // q = sum over post periods of v_t * Y_{pool,t}.
    Eigen::VectorXd q = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(pool.size()));
    if (est.v.size() != t1) throw std::invalid_argument("estimate carries mismatched v");
    for (int s = 0; s < t1; ++s) {
        for (std::size_t i = 0; i < pool.size(); ++i) {
            q(static_cast<Eigen::Index>(i)) +=
                est.v(s) * panel.outcomes(pool[i], post[static_cast<std::size_t>(s)]);
        }
    }

    const double sqrt_t0 = std::sqrt(static_cast<double>(t0));
    const double sqrt_t1 = std::sqrt(static_cast<double>(t1));
    const double sqrt_m = std::sqrt(static_cast<double>(m));
    const double sigma_sd = std::sqrt(sigma.value);
    const CounterRng rng(seed);
    ci.draws.resize(cfg.n_draws);

    if (!cfg.iid_blocks) {
        const BlockWeights bw = subsample_weights(panel, roles, m, gmm, resel);
        ci.warnings.insert(ci.warnings.end(), bw.warnings.begin(), bw.warnings.end());
        std::vector<int> usable;
        for (std::size_t b = 0; b < bw.usable.size(); ++b) {
            if (bw.usable[b]) usable.push_back(static_cast<int>(b));
        }
        if (usable.size() < 2) {
            throw std::runtime_error("fewer than 2 usable subsample blocks; reduce the block "
                                     "length m");
        }
        for (int d = 0; d < cfg.n_draws; ++d) {
            const CounterRng sub = rng.substream(static_cast<std::uint64_t>(d));
            const auto pick = sub.uniform_index(0, usable.size());
            const double s_star = sigma_sd * sub.normal(1);
            const Eigen::VectorXd delta =
                bw.weights.row(usable[static_cast<std::size_t>(pick)]).transpose() - w_hat;
            ci.draws(d) = -q.dot(sqrt_m * delta) / sqrt_t0 + s_star / sqrt_t1;
        }
    } else {
        const std::vector<int> units = relevant_units(roles, resel);
        for (int d = 0; d < cfg.n_draws; ++d) {
            const CounterRng sub = rng.substream(static_cast<std::uint64_t>(d));
            bool done = false;
            for (int attempt = 0; attempt < 100 && !done; ++attempt) {
                const CounterRng at = sub.substream(static_cast<std::uint64_t>(attempt));
                std::vector<int> idx(pre.size());
                std::iota(idx.begin(), idx.end(), 0);
                for (int i = 0; i < m; ++i) {
                    const auto j = i + static_cast<int>(at.uniform_index(
                                           static_cast<std::uint64_t>(i),
                                           static_cast<std::uint64_t>(t0 - i)));
                    std::swap(idx[static_cast<std::size_t>(i)],
                              idx[static_cast<std::size_t>(j)]);
                }
                std::vector<int> window;
                for (int i = 0; i < m; ++i) window.push_back(pre[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])]);
                std::sort(window.begin(), window.end());
                if (!has_outcome_variation(panel, units, window)) continue;
                const Eigen::VectorXd wb =
                    window_weights(panel, roles, window, pool, gmm, resel);
                const double s_star =
                    sigma_sd * at.normal(static_cast<std::uint64_t>(m));
                ci.draws(d) = -q.dot(sqrt_m * (wb - w_hat)) / sqrt_t0 + s_star / sqrt_t1;
                done = true;
            }
            if (!done) {
                throw std::runtime_error("could not draw a subsample with outcome variation");
            }
        }
    }

    Eigen::VectorXd sorted = ci.draws;
    std::sort(sorted.data(), sorted.data() + sorted.size());
    const int n = cfg.n_draws;
    const auto clamp_idx = [n](double x) {
        return std::min<long>(n, std::max<long>(1, static_cast<long>(std::ceil(x))));
    };
    const long lo = clamp_idx(cfg.level / 2.0 * n);
    const long hi = clamp_idx((1.0 - cfg.level / 2.0) * n);
    ci.lower = ci.point - sorted(hi - 1);
    ci.upper = ci.point - sorted(lo - 1);
    return ci;
}

}  // namespace ivsynth
