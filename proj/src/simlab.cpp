#include "ivsynth/simlab.hpp"

#include "ivsynth/rng.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace ivsynth {

namespace {

constexpr int kBurnIn = 200;
constexpr int kMaxArOrder = 5;
constexpr int kCommonLags = 6;  // d_max + p_max, shared conditioning window

struct Kahan {
    double sum = 0.0;
    double carry = 0.0;
    void add(double x) {
        const double y = x - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
};

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

bool ar_stationary(const Eigen::VectorXd& coefficients) {
    const Eigen::Index p = coefficients.size();
    if (p == 0) return true;
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(p, p);
    companion.row(0) = coefficients.transpose();
    if (p > 1) companion.block(1, 0, p - 1, p - 1).setIdentity();
    return companion.eigenvalues().cwiseAbs().maxCoeff() < 1.0 - 1e-8;
}

ArSpec fit_ar(const Eigen::VectorXd& series, std::vector<std::string>* warnings) {
    const Eigen::Index t = series.size();
    if (t < kCommonLags + 4) {
        throw std::invalid_argument("factor series too short to fit an AR model");
    }
    const Eigen::Index n = t - kCommonLags;

    struct Candidate {
        double aicc = 0.0;
        int d = 0;
        int p = 0;
        Eigen::VectorXd beta;  // intercept first
        double s2 = 0.0;
    };
    std::vector<Candidate> candidates;

    for (int d = 0; d <= 1; ++d) {
        // z is the d-times differenced series; z[k] sits at time k + d.
        Eigen::VectorXd z;
        if (d == 0) {
            z = series;
        } else {
            z = series.tail(t - 1) - series.head(t - 1);
        }
        for (int p = 0; p <= kMaxArOrder; ++p) {
            const int k = p + 2;  // intercept, AR coefficients, variance
            if (n - k - 1 < 1) continue;
            Eigen::MatrixXd x(n, p + 1);
            Eigen::VectorXd y(n);
            for (Eigen::Index row = 0; row < n; ++row) {
                const Eigen::Index time = kCommonLags + row;  // target time index
                const Eigen::Index zi = time - d;
                y(row) = z(zi);
                x(row, 0) = 1.0;
                for (int lag = 1; lag <= p; ++lag) x(row, lag) = z(zi - lag);
            }
            const Eigen::VectorXd beta = x.colPivHouseholderQr().solve(y);
            const double rss = (y - x * beta).squaredNorm();
            const double s2 = rss / static_cast<double>(n);
            const double s2f = std::max(s2, 1e-300);
            const double loglik =
                -0.5 * static_cast<double>(n) * (std::log(2.0 * M_PI * s2f) + 1.0);
            const double aicc = 2.0 * k - 2.0 * loglik +
                                2.0 * k * (k + 1) / static_cast<double>(n - k - 1);
            candidates.push_back({aicc, d, p, beta, s2});
        }
    }
    if (candidates.empty()) {
        throw std::invalid_argument("factor series too short to fit an AR model");
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.aicc != b.aicc) return a.aicc < b.aicc;
        if (a.d != b.d) return a.d < b.d;
        return a.p < b.p;
    });

    for (const Candidate& c : candidates) {
        if (!ar_stationary(c.beta.tail(c.p))) continue;
        ArSpec spec;
        spec.p = c.p;
        spec.d = c.d;
        spec.intercept = c.beta(0);
        spec.coefficients = c.beta.tail(c.p);
        spec.innovation_variance = c.s2;
        return spec;
    }

    // Unreachable in practice (p = 0 is always stationary); kept as a guard.
    if (warnings != nullptr) {
        warnings->push_back("no stationary AR candidate; falling back to a random walk");
    }
    const Eigen::VectorXd dz = series.tail(t - 1) - series.head(t - 1);
    ArSpec spec;
    spec.p = 0;
    spec.d = 1;
    spec.intercept = dz.mean();
    spec.coefficients = Eigen::VectorXd();
    spec.innovation_variance = (dz.array() - dz.mean()).square().sum() / double(dz.size());
    return spec;
}

FittedDgp fit_dgp(const PanelData& panel, int rank_override) {
    if (panel.treated.any()) {
        throw std::invalid_argument("fit_dgp expects an untreated panel");
    }
    const int rank = rank_override >= 0 ? rank_override : estimate_rank_svt(panel.outcomes);

    FittedDgp dgp;
    dgp.rank = rank;
    dgp.unit_ids = panel.unit_ids;
    const FactorFit fit = svd_pca(panel.outcomes, rank);
    dgp.loadings = fit.loadings;
    for (int f = 0; f < rank; ++f) {
        dgp.factor_models.push_back(fit_ar(fit.factors.col(f), &dgp.warnings));
    }
    const Eigen::MatrixXd resid =
        panel.outcomes - (fit.factors * fit.loadings).transpose();
    dgp.shock_variances.resize(resid.rows());
    for (Eigen::Index i = 0; i < resid.rows(); ++i) {
        const double mean = resid.row(i).mean();
        dgp.shock_variances(i) =
            (resid.row(i).array() - mean).square().sum() / double(resid.cols());
    }
    return dgp;
}

SimulatedPanel simulate_panel(const FittedDgp& dgp, int t0, int t1, const TreatmentPlan& plan,
                              const Eigen::VectorXd& true_effects, std::uint64_t seed,
                              int history_pad) {
    if (t0 < 1 || t1 < 1) throw std::invalid_argument("t0 and t1 must be positive");
    if (history_pad < 0) throw std::invalid_argument("history_pad must be nonnegative");
    const auto n = static_cast<int>(dgp.n_units());
    const int rank = dgp.rank;
    if (static_cast<int>(dgp.factor_models.size()) != rank) {
        throw std::invalid_argument("factor model count must equal the rank");
    }
    if (dgp.shock_variances.size() != n) {
        throw std::invalid_argument("shock variance count must equal the unit count");
    }
    if (true_effects.size() != 0 && true_effects.size() != t1) {
        throw std::invalid_argument("true effect path must have one entry per post period");
    }
    std::vector<char> is_treated(static_cast<std::size_t>(n), 0);
    for (int u : plan.treated_units) {
        if (u < 0 || u >= n) throw std::invalid_argument("treated unit out of range");
        if (is_treated[static_cast<std::size_t>(u)]) {
            throw std::invalid_argument("duplicate treated unit");
        }
        is_treated[static_cast<std::size_t>(u)] = 1;
    }
    if (!plan.treated_units.empty()) {
        if (plan.unit_of_interest < 0 ||
            !is_treated[static_cast<std::size_t>(plan.unit_of_interest)]) {
            throw std::invalid_argument("unit of interest must be one of the treated units");
        }
    }

    const int t_obs = t0 + t1;
    const int total = kBurnIn + history_pad + t_obs;
    const int offset = kBurnIn + history_pad;
    const CounterRng rng(seed);

    SimulatedPanel sim;
    sim.factors.resize(t_obs, rank);
    for (int f = 0; f < rank; ++f) {
        const ArSpec& m = dgp.factor_models[static_cast<std::size_t>(f)];
        const CounterRng stream = rng.substream(static_cast<std::uint64_t>(f));
        const double sd = std::sqrt(std::max(0.0, m.innovation_variance));
        std::vector<double> z(static_cast<std::size_t>(total), 0.0);
        std::vector<double> level(static_cast<std::size_t>(total), 0.0);
        for (int a = 0; a < total; ++a) {
            double value = m.intercept + sd * stream.normal(static_cast<std::uint64_t>(a));
            for (int lag = 1; lag <= m.p; ++lag) {
                if (a - lag >= 0) {
                    value += m.coefficients(lag - 1) * z[static_cast<std::size_t>(a - lag)];
                }
            }
            z[static_cast<std::size_t>(a)] = value;
            level[static_cast<std::size_t>(a)] =
                m.d == 1 ? (a > 0 ? level[static_cast<std::size_t>(a - 1)] : 0.0) + value
                         : value;
        }
        for (int t = 0; t < t_obs; ++t) {
            sim.factors(t, f) = level[static_cast<std::size_t>(offset + t)];
        }
    }

    Eigen::MatrixXd outcomes(n, t_obs);
    for (int i = 0; i < n; ++i) {
        const CounterRng stream = rng.substream(static_cast<std::uint64_t>(rank + i));
        const double sd = std::sqrt(std::max(0.0, dgp.shock_variances(i)));
        for (int t = 0; t < t_obs; ++t) {
            double value = sd * stream.normal(static_cast<std::uint64_t>(offset + t));
            if (rank > 0) value += sim.factors.row(t).dot(dgp.loadings.col(i));
            outcomes(i, t) = value;
        }
    }

    sim.truth.effects = true_effects.size() == t1 ? true_effects : Eigen::VectorXd::Zero(t1);
    sim.truth.average = sim.truth.effects.mean();
    for (int u : plan.treated_units) {
        for (int s = 0; s < t1; ++s) outcomes(u, t0 + s) += sim.truth.effects(s);
    }

    PanelData& panel = sim.panel;
    panel.outcomes = std::move(outcomes);
    panel.treated = BoolMatrix::Constant(n, t_obs, false);
    for (int u : plan.treated_units) {
        for (int s = 0; s < t1; ++s) panel.treated(u, t0 + s) = true;
    }
    if (static_cast<int>(dgp.unit_ids.size()) == n) {
        panel.unit_ids = dgp.unit_ids;
    } else {
        for (int i = 0; i < n; ++i) panel.unit_ids.push_back("u" + std::to_string(i));
    }
    for (int t = 0; t < t_obs; ++t) {
        panel.period_ids.push_back(std::to_string(t + 1));
        panel.period_keys.push_back(t + 1);
    }
    return sim;
}

Eigen::VectorXd logistic_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double ridge,
                             int max_iter) {
    if (x.rows() != y.size()) throw std::invalid_argument("logistic_fit: size mismatch");
    const Eigen::Index k = x.cols();
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
    for (int it = 0; it < max_iter; ++it) {
        const Eigen::VectorXd eta = x * beta;
        const Eigen::VectorXd p = eta.unaryExpr([](double v) { return sigmoid(v); });
        const Eigen::VectorXd grad = x.transpose() * (y - p) - ridge * beta;
        const Eigen::VectorXd w = p.array() * (1.0 - p.array());
        const Eigen::MatrixXd hess = x.transpose() * w.asDiagonal() * x +
                                     ridge * Eigen::MatrixXd::Identity(k, k);
        const Eigen::VectorXd step = hess.ldlt().solve(grad);
        beta += step;
        if (step.cwiseAbs().maxCoeff() < 1e-10) return beta;
    }
    throw std::runtime_error("logistic regression did not converge");
}

TreatmentAssignment assign_treatment(const FittedDgp& dgp, int n_treated, AssignmentMode mode,
                                     std::uint64_t seed, const std::vector<int>& labels) {
    const auto n = static_cast<int>(dgp.n_units());
    if (n_treated < 1 || n_treated > n) {
        throw std::invalid_argument("n_treated must lie in [1, units]");
    }

    TreatmentAssignment out;
    if (mode == AssignmentMode::uniform) {
        out.probabilities = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    } else {
        if (static_cast<int>(labels.size()) != n) {
            throw std::invalid_argument("logistic mode needs one binary label per unit");
        }
        Eigen::MatrixXd x(n, dgp.rank + 1);
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) {
            const int label = labels[static_cast<std::size_t>(i)];
            if (label != 0 && label != 1) {
                throw std::invalid_argument("labels must be 0 or 1");
            }
            y(i) = label;
            x(i, 0) = 1.0;
            for (int f = 0; f < dgp.rank; ++f) x(i, f + 1) = dgp.loadings(f, i);
        }
        const Eigen::VectorXd beta = logistic_fit(x, y);
        // Separable labels push |eta| past the point where sigmoid rounds to
        // an exact 0 or 1; capped logits keep every sampling weight interior.
        out.probabilities = (x * beta).unaryExpr(
            [](double v) { return sigmoid(std::clamp(v, -30.0, 30.0)); });
    }

    // Sequential weighted sampling without replacement.
    const CounterRng rng(seed);
    std::vector<int> remaining(static_cast<std::size_t>(n));
    std::iota(remaining.begin(), remaining.end(), 0);
    std::vector<double> weight(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) weight[static_cast<std::size_t>(i)] = out.probabilities(i);
    for (int pick = 0; pick < n_treated; ++pick) {
        double total = 0.0;
        for (int u : remaining) total += weight[static_cast<std::size_t>(u)];
        const double target = rng.uniform(static_cast<std::uint64_t>(pick)) * total;
        double cum = 0.0;
        std::size_t chosen = remaining.size() - 1;
        for (std::size_t idx = 0; idx < remaining.size(); ++idx) {
            cum += weight[static_cast<std::size_t>(remaining[idx])];
            if (target < cum) {
                chosen = idx;
                break;
            }
        }
        out.treated_units.push_back(remaining[chosen]);
        remaining.erase(remaining.begin() + static_cast<long>(chosen));
    }
    std::sort(out.treated_units.begin(), out.treated_units.end());
    const auto uoi_pick = rng.uniform_index(static_cast<std::uint64_t>(n_treated),
                                            static_cast<std::uint64_t>(n_treated));
    out.unit_of_interest = out.treated_units[uoi_pick];
    return out;
}

std::string estimator_kind_name(EstimatorKind k) {
    switch (k) {
        case EstimatorKind::gmm: return "gmm";
        case EstimatorKind::ols: return "ols";
        case EstimatorKind::uniform: return "uniform";
        case EstimatorKind::factor: return "factor";
        case EstimatorKind::powell: return "powell";
        case EstimatorKind::oracle: return "oracle";
    }
    throw std::logic_error("unknown estimator kind");
}

namespace {

PanelData subset_panel(const PanelData& panel, const std::vector<int>& units) {
    PanelData out;
    out.outcomes.resize(static_cast<Eigen::Index>(units.size()), panel.n_periods());
    out.treated.resize(static_cast<Eigen::Index>(units.size()), panel.n_periods());
    for (std::size_t i = 0; i < units.size(); ++i) {
        out.outcomes.row(static_cast<Eigen::Index>(i)) = panel.outcomes.row(units[i]);
        out.treated.row(static_cast<Eigen::Index>(i)) = panel.treated.row(units[i]);
        out.unit_ids.push_back(panel.unit_ids[static_cast<std::size_t>(units[i])]);
    }
    out.period_ids = panel.period_ids;
    out.period_keys = panel.period_keys;
    return out;
}

struct EstSlot {
    char failed = 0;
    double abar = 0.0;
    double mse_t = 0.0;
};

struct CellState {
    std::vector<EstSlot> slots;       // reps x estimators
    std::vector<char> feasible;       // per rep
    std::vector<char> rep_ok;         // per rep
    std::vector<std::string> errors;  // per rep, empty when fine
};

}  // namespace

SimReport run_study(const FittedDgp& dgp, const StudyDesign& design, std::uint64_t seed,
                    int n_threads) {
    if (design.cells.empty()) throw std::invalid_argument("study needs at least one cell");
    if (design.reps < 1) throw std::invalid_argument("reps must be positive");
    if (design.estimators.empty()) throw std::invalid_argument("study needs estimators");
    if (design.n_treated < 1) throw std::invalid_argument("n_treated must be positive");
    const auto n_units = static_cast<int>(dgp.n_units());
    int max_t0 = 0;
    for (const StudyCell& cell : design.cells) {
        if (cell.t0 < 1 || cell.t1 < 1) throw std::invalid_argument("cell needs t0,t1 >= 1");
        if (cell.n0 < 1) throw std::invalid_argument("cell needs a nonempty pool");
        if (cell.n1 < 0) throw std::invalid_argument("cell instrument count negative");
        if (design.n_treated + cell.n0 + cell.n1 > n_units) {
            throw std::invalid_argument("cell draws more units than the DGP has");
        }
        if (design.true_effects.size() != 0 && design.true_effects.size() != cell.t1) {
            throw std::invalid_argument("true effect path must match every cell's t1");
        }
        max_t0 = std::max(max_t0, cell.t0);
    }

    const auto n_cells = design.cells.size();
    const auto n_est = design.estimators.size();
    const int reps = design.reps;
    std::vector<CellState> states(n_cells);
    for (CellState& st : states) {
        st.slots.assign(static_cast<std::size_t>(reps) * n_est, EstSlot{});
        st.feasible.assign(static_cast<std::size_t>(reps), 0);
        st.rep_ok.assign(static_cast<std::size_t>(reps), 0);
        st.errors.assign(static_cast<std::size_t>(reps), std::string());
    }

    auto run_one = [&](std::size_t c, int rep) {
        const StudyCell& cell = design.cells[c];
        CellState& st = states[c];
        try {
            const std::uint64_t rep_seed = derive_seed(seed, static_cast<std::uint64_t>(rep));
            const TreatmentAssignment asg =
                assign_treatment(dgp, design.n_treated, design.assignment,
                                 derive_seed(rep_seed, 1), design.labels);

            std::vector<int> never;
            {
                std::vector<char> is_treated(static_cast<std::size_t>(n_units), 0);
                for (int u : asg.treated_units) is_treated[static_cast<std::size_t>(u)] = 1;
                for (int u = 0; u < n_units; ++u) {
                    if (!is_treated[static_cast<std::size_t>(u)]) never.push_back(u);
                }
            }
            const CounterRng pool_rng(derive_seed(rep_seed, 2));
            const int draw = cell.n0 + cell.n1;
            for (int i = 0; i < draw; ++i) {
                const auto j = i + static_cast<int>(pool_rng.uniform_index(
                                       static_cast<std::uint64_t>(i),
                                       static_cast<std::uint64_t>(never.size() - i)));
                std::swap(never[static_cast<std::size_t>(i)],
                          never[static_cast<std::size_t>(j)]);
            }
            std::vector<int> pool(never.begin(), never.begin() + cell.n0);
            std::vector<int> instr(never.begin() + cell.n0, never.begin() + draw);
            std::sort(pool.begin(), pool.end());
            std::sort(instr.begin(), instr.end());

            TreatmentPlan plan;
            plan.treated_units = asg.treated_units;
            plan.unit_of_interest = asg.unit_of_interest;
            const SimulatedPanel sim =
                simulate_panel(dgp, cell.t0, cell.t1, plan, design.true_effects,
                               derive_seed(rep_seed, 3), max_t0 - cell.t0);

            std::vector<int> units;
            units.push_back(asg.unit_of_interest);
            units.insert(units.end(), pool.begin(), pool.end());
            units.insert(units.end(), instr.begin(), instr.end());
            const PanelData sub = subset_panel(sim.panel, units);

            RoleAssignment base;
            base.unit_of_interest = 0;
            for (int i = 0; i < cell.n0; ++i) base.controls.push_back(1 + i);
            for (int i = 0; i < cell.n1; ++i) base.instruments.push_back(1 + cell.n0 + i);
            for (int t = 0; t < cell.t0; ++t) base.pre_periods.push_back(t);
            for (int t = 0; t < cell.t1; ++t) base.post_periods.push_back(cell.t0 + t);

            if (dgp.rank == 0) {
                st.feasible[static_cast<std::size_t>(rep)] = 1;
            } else {
                Eigen::MatrixXd points(dgp.rank, cell.n0);
                for (int i = 0; i < cell.n0; ++i) {
                    points.col(i) = dgp.loadings.col(pool[static_cast<std::size_t>(i)]);
                }
                const HullResult hull =
                    in_convex_hull(dgp.loadings.col(asg.unit_of_interest), points, 1e-6);
                st.feasible[static_cast<std::size_t>(rep)] = hull.inside ? 1 : 0;
            }

            for (std::size_t e = 0; e < n_est; ++e) {
                EstSlot& slot = st.slots[static_cast<std::size_t>(rep) * n_est + e];
                try {
                    Eigen::VectorXd effects;
                    double abar = 0.0;
                    switch (design.estimators[e]) {
                        case EstimatorKind::gmm: {
                            RoleAssignment roles = base;
                            if (design.selection.has_value()) {
                                SelectionOptions sopt;
                                sopt.weighting = design.weighting;
                                sopt.alpha = design.alpha;
                                const SelectionResult sel =
                                    *design.selection == SelectionMethod::sequential
                                        ? sequential_select(sub, base, sopt)
                                        : two_step_select(sub, base, sopt);
                                roles.controls = sel.chosen.controls;
                                roles.instruments = sel.chosen.instruments;
                            }
                            GmmOptions gopt;
                            gopt.weighting = design.weighting;
                            const EstimationResult est = gmm_sce(sub, roles, gopt);
                            effects = est.effects;
                            abar = est.weighted_average;
                            break;
                        }
                        case EstimatorKind::ols: {
                            RoleAssignment roles = base;
                            roles.instruments.clear();
                            const EstimationResult est = ols_sce(sub, roles);
                            effects = est.effects;
                            abar = est.weighted_average;
                            break;
                        }
                        case EstimatorKind::uniform: {
                            RoleAssignment roles = base;
                            roles.instruments.clear();
                            const EstimationResult est = uniform_sce(sub, roles);
                            effects = est.effects;
                            abar = est.weighted_average;
                            break;
                        }
                        case EstimatorKind::factor: {
                            RoleAssignment roles = base;
                            roles.instruments.clear();
                            const FactorEstimate est = factor_estimator(
                                sub, roles, Eigen::VectorXd(), design.factor_rank);
                            effects = est.result.effects;
                            abar = est.result.weighted_average;
                            break;
                        }
                        case EstimatorKind::powell: {
                            RoleAssignment roles = base;
                            roles.controls.clear();
                            for (int i = 0; i < cell.n0 + cell.n1; ++i) {
                                roles.controls.push_back(1 + i);
                            }
                            roles.instruments.clear();
                            PowellOptions popt;
                            popt.n_iter = design.powell_iters;
                            const PowellResult est = powell_estimator(sub, roles,
                                                                      Eigen::VectorXd(), popt);
                            effects = est.result.effects;
                            abar = est.result.weighted_average;
                            break;
                        }
                        case EstimatorKind::oracle: {
                            effects = sim.truth.effects;
                            abar = sim.truth.average;
                            break;
                        }
                    }
                    slot.abar = abar;
                    slot.mse_t = (effects - sim.truth.effects).squaredNorm() /
                                 static_cast<double>(cell.t1);
                } catch (const std::exception&) {
                    slot.failed = 1;
                }
            }
            st.rep_ok[static_cast<std::size_t>(rep)] = 1;
        } catch (const std::exception& ex) {
            st.errors[static_cast<std::size_t>(rep)] = ex.what();
        }
    };

    const std::size_t jobs = n_cells * static_cast<std::size_t>(reps);
    if (n_threads <= 1) {
        for (std::size_t g = 0; g < jobs; ++g) {
            run_one(g / static_cast<std::size_t>(reps),
                    static_cast<int>(g % static_cast<std::size_t>(reps)));
        }
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            for (;;) {
                const std::size_t g = next.fetch_add(1);
                if (g >= jobs) return;
                run_one(g / static_cast<std::size_t>(reps),
                        static_cast<int>(g % static_cast<std::size_t>(reps)));
            }
        };
        std::vector<std::thread> threads;
        const auto count = std::min<std::size_t>(static_cast<std::size_t>(n_threads), jobs);
        threads.reserve(count);
        for (std::size_t i = 0; i < count; ++i) threads.emplace_back(worker);
        for (std::thread& th : threads) th.join();
    }

    SimReport report;
    const double true_average =
        design.true_effects.size() > 0 ? design.true_effects.mean() : 0.0;
    for (std::size_t c = 0; c < n_cells; ++c) {
        const CellState& st = states[c];
        int ok_reps = 0, feasible_count = 0;
        for (int rep = 0; rep < reps; ++rep) {
            if (st.rep_ok[static_cast<std::size_t>(rep)]) {
                ++ok_reps;
                feasible_count += st.feasible[static_cast<std::size_t>(rep)];
            } else {
                report.warnings.push_back("cell " + std::to_string(c) + " rep " +
                                          std::to_string(rep) + " failed: " +
                                          st.errors[static_cast<std::size_t>(rep)]);
            }
        }
        const double feasibility =
            ok_reps > 0 ? static_cast<double>(feasible_count) / ok_reps : 0.0;
        for (std::size_t e = 0; e < n_est; ++e) {
            Kahan bias, mse_bar, mse_t;
            int completed = 0, failures = reps - ok_reps;
            for (int rep = 0; rep < reps; ++rep) {
                if (!st.rep_ok[static_cast<std::size_t>(rep)]) continue;
                const EstSlot& slot = st.slots[static_cast<std::size_t>(rep) * n_est + e];
                if (slot.failed) {
                    ++failures;
                    continue;
                }
                ++completed;
                const double err = slot.abar - true_average;
                bias.add(err);
                mse_bar.add(err * err);
                mse_t.add(slot.mse_t);
            }
            CellMetrics row;
            row.cell = design.cells[c];
            row.estimator = design.estimators[e];
            row.reps_completed = completed;
            row.failures = failures;
            if (completed > 0) {
                row.bias_magnitude = std::abs(bias.sum / completed);
                row.mse_alpha_bar = mse_bar.sum / completed;
                row.mse_alpha_t = mse_t.sum / completed;
            }
            row.feasibility_rate = feasibility;
            report.rows.push_back(row);

            if (design.detail) {
                for (int rep = 0; rep < reps; ++rep) {
                    const EstSlot& slot =
                        st.slots[static_cast<std::size_t>(rep) * n_est + e];
                    RepDetail d;
                    d.cell_index = static_cast<int>(c);
                    d.rep = rep;
                    d.estimator = design.estimators[e];
                    d.failed = !st.rep_ok[static_cast<std::size_t>(rep)] || slot.failed;
                    d.alpha_bar_hat = slot.abar;
                    d.true_average = true_average;
                    d.feasible = st.feasible[static_cast<std::size_t>(rep)] != 0;
                    report.details.push_back(d);
                }
            }
        }
    }
    return report;
}

}  // namespace ivsynth
