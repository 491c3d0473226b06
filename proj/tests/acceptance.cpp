// Acceptance suite: ten end-to-end checks, one printed line each. The exit
// code is the number of failed criteria, so ctest fails iff a line fails.

#include "ivsynth/estimators.hpp"
#include "ivsynth/inference.hpp"
#include "ivsynth/linalg.hpp"
#include "ivsynth/moments.hpp"
#include "ivsynth/panel.hpp"
#include "ivsynth/rng.hpp"
#include "ivsynth/selection.hpp"
#include "ivsynth/serialize.hpp"
#include "ivsynth/simlab.hpp"

#include "oracles.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <initializer_list>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <thread>
#include <vector>

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Check {
    bool ok = true;
    std::vector<std::string> faults;
    std::string detail;

    void require(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            faults.push_back(what);
        }
    }
};

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

double secs_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// Counter-walking adapter over the deterministic generator.
struct Draw {
    ivsynth::CounterRng rng;
    std::uint64_t k = 0;

    explicit Draw(std::uint64_t seed) : rng(seed) {}
    double normal() { return rng.normal(k++); }
    double uniform() { return rng.uniform(k++); }
    std::uint64_t index(std::uint64_t n) { return rng.uniform_index(k++, n); }
};

int hw_threads() {
    const unsigned h = std::thread::hardware_concurrency();
    return h == 0 ? 4 : static_cast<int>(h);
}

void parallel_for(int n, const std::function<void(int)>& fn) {
    std::atomic<int> next{0};
    auto work = [&] {
        for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    };
    const int k = std::max(1, std::min(hw_threads(), n));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) pool.emplace_back(work);
    for (auto& t : pool) t.join();
}

// Factor panel outcomes = loadings * factors + noise, unit 0 treated from t0.
ivsynth::PanelData factor_panel(const Eigen::MatrixXd& loadings,
                                const Eigen::MatrixXd& factors, double sigma, Draw& d,
                                int t0) {
    Eigen::MatrixXd y = loadings * factors;
    for (Eigen::Index i = 0; i < y.rows(); ++i)
        for (Eigen::Index t = 0; t < y.cols(); ++t) y(i, t) += sigma * d.normal();
    ivsynth::PanelData panel = oracles::make_panel(y);
    oracles::treat_from(panel, 0, t0);
    return panel;
}

Eigen::MatrixXd iid_factors(int t, double mean, Draw& d) {
    Eigen::MatrixXd lam(2, t);
    lam.row(0).setOnes();
    for (int s = 0; s < t; ++s) lam(1, s) = mean + d.normal();
    return lam;
}

std::vector<int> iota_vec(int first, int count) {
    std::vector<int> v(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) v[static_cast<std::size_t>(i)] = first + i;
    return v;
}

// ---------------------------------------------------------------------------
// 1. Constrained weights equal the metric projection of the min-norm point.

Check criterion1() {
    Check c;
    const auto start = Clock::now();
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
        Draw d(ivsynth::derive_seed(901, static_cast<std::uint64_t>(i)));
        const int j = 2 + static_cast<int>(d.index(19));
        const int k = static_cast<int>(d.index(11));
        const int t0 = 5 + static_cast<int>(d.index(196));
        Eigen::MatrixXd y(1 + j + k, t0 + 1);
        for (Eigen::Index u = 0; u < y.rows(); ++u)
            for (Eigen::Index t = 0; t < y.cols(); ++t) y(u, t) = d.normal();
        ivsynth::PanelData panel = oracles::make_panel(y);
        oracles::treat_from(panel, 0, t0);
        const ivsynth::RoleAssignment roles =
            oracles::make_roles(0, iota_vec(1, j), iota_vec(1 + j, k), t0, t0 + 1);

        ivsynth::GmmOptions unconstrained;
        unconstrained.constrained = false;
        const Eigen::VectorXd wc = ivsynth::gmm_sce(panel, roles).weights->values;
        const Eigen::VectorXd wu =
            ivsynth::gmm_sce(panel, roles, unconstrained).weights->values;
        const ivsynth::SimplexQp qp = ivsynth::as_simplex_qp(
            ivsynth::build_moment_system(panel, roles, ivsynth::Weighting::identity));
        const Eigen::VectorXd proj = ivsynth::project_simplex(wu, qp.M);
        worst = std::max(worst, (wc - proj).cwiseAbs().maxCoeff());
    }
    const double secs = secs_since(start);
    c.require(worst <= 1e-6, "max weight deviation " + fmt(worst) + " exceeds 1e-6");
    c.require(secs < 30.0, "runtime " + fmt(secs) + " s exceeds 30 s");
    c.detail = "max gap " + fmt(worst) + " over 200 instances, " + fmt(secs) + " s";
    return c;
}

// ---------------------------------------------------------------------------
// 2. Solver objective matches a step-1e-3 grid search on J=3 problems.

Check criterion2() {
    Check c;
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        Draw d(ivsynth::derive_seed(902, static_cast<std::uint64_t>(i)));
        Eigen::MatrixXd a(3, 3);
        for (Eigen::Index r = 0; r < 3; ++r)
            for (Eigen::Index s = 0; s < 3; ++s) a(r, s) = d.normal();
        const Eigen::MatrixXd m = a.transpose() * a;
        Eigen::VectorXd b(3);
        if (i % 2 == 0) {
            Eigen::VectorXd x(3);
            for (Eigen::Index r = 0; r < 3; ++r) x(r) = 2.0 * d.uniform() - 0.5;
            b = m * x;
        } else {
            for (Eigen::Index r = 0; r < 3; ++r) b(r) = d.normal();
        }
        const ivsynth::SimplexQp qp{m, b, 0.0};
        const ivsynth::QpSolution sol = ivsynth::solve_simplex_qp(qp);
        const double grid = oracles::grid_qp_min(m, b, 0.0, 1e-3);
        worst = std::max(worst, std::fabs(sol.objective - grid));
    }
    c.require(worst <= 1e-4, "objective gap " + fmt(worst) + " exceeds 1e-4");
    c.detail = "max |qp - grid| " + fmt(worst) + " over 100 instances";
    return c;
}

// ---------------------------------------------------------------------------
// 3. Noiseless interior combination is recovered exactly.

Check criterion3() {
    Check c;
    Draw d(903);
    const int t0 = 40;
    const int t = t0 + 5;
    Eigen::MatrixXd mu(6, 3);
    mu.row(1) << 1.0, 0.6, 2.0;
    mu.row(2) << 2.5, -0.8, 0.4;
    mu.row(3) << 0.3, 1.4, -1.2;
    mu.row(0) = 0.5 * mu.row(1) + 0.3 * mu.row(2) + 0.2 * mu.row(3);
    mu.row(4) << 0.8, 1.2, -0.5;
    mu.row(5) << 1.5, -0.7, 0.9;
    Eigen::MatrixXd lam(3, t);
    lam.row(0).setOnes();
    for (int s = 0; s < t; ++s) {
        lam(1, s) = d.normal();
        lam(2, s) = d.normal();
    }
    ivsynth::PanelData panel = factor_panel(mu, lam, 0.0, d, t0);
    const ivsynth::RoleAssignment roles =
        oracles::make_roles(0, {1, 2, 3}, {4, 5}, t0, t);

    Eigen::Vector3d wstar(0.5, 0.3, 0.2);
    const Eigen::MatrixXd pre_ctrl = panel.outcomes.block(1, 0, 3, t0);
    const Eigen::RowVectorXd pre_target = panel.outcomes.row(0).head(t0);
    for (const char* name : {"gmm", "ols"}) {
        const ivsynth::EstimationResult res =
            std::string(name) == "gmm" ? ivsynth::gmm_sce(panel, roles)
                                       : ivsynth::ols_sce(panel, roles);
        const Eigen::VectorXd w = res.weights->values;
        const double werr = (w - wstar).cwiseAbs().maxCoeff();
        const double gap =
            (pre_target - w.transpose() * pre_ctrl).cwiseAbs().maxCoeff();
        c.require(werr <= 1e-5,
                  std::string(name) + " weight error " + fmt(werr) + " exceeds 1e-5");
        c.require(gap <= 1e-8,
                  std::string(name) + " pre gap " + fmt(gap) + " exceeds 1e-8");
    }
    c.detail = "gmm and ols on a noiseless 3-factor mix";
    return c;
}

// ---------------------------------------------------------------------------
// 4. Attenuation ordering under a 2-factor iid DGP with a boundary target.

Eigen::MatrixXd attenuation_mu() {
    Eigen::MatrixXd mu(6, 2);
    mu.row(1) << 0.5, -1.5;
    mu.row(2) << 3.0, -4.0;
    mu.row(0) = 0.6 * mu.row(1) + 0.4 * mu.row(2);
    mu.row(3) = mu.row(0);
    mu(3, 0) += 2.0;
    mu.row(4) << -0.5, 2.0;
    mu.row(5) << 2.5, -1.0;
    return mu;
}

std::pair<double, double> attenuation_bias(int t0, int reps, std::uint64_t seed) {
    const Eigen::MatrixXd mu = attenuation_mu();
    const int t1 = 1600;
    std::vector<double> bias_g(static_cast<std::size_t>(reps));
    std::vector<double> bias_o(static_cast<std::size_t>(reps));
    parallel_for(reps, [&](int r) {
        Draw d(ivsynth::derive_seed(seed, static_cast<std::uint64_t>(r)));
        const Eigen::MatrixXd lam = iid_factors(t0 + t1, 1.0, d);
        const ivsynth::PanelData panel = factor_panel(mu, lam, 1.0, d, t0);
        const ivsynth::RoleAssignment roles =
            oracles::make_roles(0, {1, 2, 3}, {4, 5}, t0, t0 + t1);
        bias_g[static_cast<std::size_t>(r)] =
            ivsynth::gmm_sce(panel, roles).weighted_average;
        bias_o[static_cast<std::size_t>(r)] =
            ivsynth::ols_sce(panel, roles).weighted_average;
    });
    const double n = static_cast<double>(reps);
    double sg = 0.0;
    double so = 0.0;
    for (double v : bias_g) sg += v;
    for (double v : bias_o) so += v;
    return {sg / n, so / n};
}

Check criterion4() {
    Check c;
    const auto start = Clock::now();
    const auto [g50, o50] = attenuation_bias(50, 1000, 904);
    const auto [g400, o400] = attenuation_bias(400, 1000, 914);
    const double secs = secs_since(start);
    c.require(std::fabs(g50) < std::fabs(o50),
              "T0=50: |gmm " + fmt(g50) + "| not below |ols " + fmt(o50) + "|");
    c.require(std::fabs(g400) < std::fabs(o400),
              "T0=400: |gmm " + fmt(g400) + "| not below |ols " + fmt(o400) + "|");
    c.require(std::fabs(g400) < 0.5 * std::fabs(g50),
              "|gmm@400 " + fmt(g400) + "| not below half of |gmm@50 " + fmt(g50) + "|");
    c.require(secs < 600.0, "runtime " + fmt(secs) + " s exceeds 600 s");
    c.detail = "bias gmm " + fmt(g50) + "/" + fmt(g400) + ", ols " + fmt(o50) + "/" +
               fmt(o400) + " at T0=50/400, " + fmt(secs) + " s";
    return c;
}

// ---------------------------------------------------------------------------
// 5. Selection picks the true partition at T0=2000.

Check criterion5() {
    Check c;
    Eigen::MatrixXd mu(9, 2);
    mu.row(1) << 0.8, 0.9;
    mu.row(2) << 1.2, 0.1;
    mu.row(0) = 0.5 * mu.row(1) + 0.5 * mu.row(2);
    mu.row(3) << 2.2, 1.4;
    mu.row(4) << -0.4, 1.8;
    mu.row(5) << 2.0, -1.0;
    mu.row(6) << 0.1, -1.2;
    mu.row(7) << 1.5, 1.5;
    mu.row(8) << -1.0, 0.6;

    const int reps = 200;
    const int t0 = 2000;
    const int t = t0 + 20;
    std::vector<int> seq_hit(reps, 0);
    std::vector<int> two_hit(reps, 0);
    parallel_for(reps, [&](int r) {
        Draw d(ivsynth::derive_seed(905, static_cast<std::uint64_t>(r)));
        const Eigen::MatrixXd lam = iid_factors(t, 1.0, d);
        const ivsynth::PanelData panel = factor_panel(mu, lam, 0.3, d, t0);
        const ivsynth::RoleAssignment pool =
            oracles::make_roles(0, iota_vec(1, 6), {7, 8}, t0, t);
        ivsynth::SelectionOptions opt;
        opt.alpha = 0.05;
        const ivsynth::SelectionResult seq = ivsynth::sequential_select(panel, pool, opt);
        seq_hit[static_cast<std::size_t>(r)] =
            seq.chosen.controls == std::vector<int>{1, 2} && !seq.no_pass;
        const ivsynth::SelectionResult two = ivsynth::two_step_select(panel, pool, opt);
        const auto& ctrl = two.chosen.controls;
        two_hit[static_cast<std::size_t>(r)] =
            std::find(ctrl.begin(), ctrl.end(), 1) != ctrl.end() &&
            std::find(ctrl.begin(), ctrl.end(), 2) != ctrl.end();
    });
    int seq_ok = 0;
    int two_ok = 0;
    for (int v : seq_hit) seq_ok += v;
    for (int v : two_hit) two_ok += v;
    const double seq_rate = seq_ok / static_cast<double>(reps);
    const double two_rate = two_ok / static_cast<double>(reps);
    c.require(seq_rate >= 0.95,
              "sequential hit rate " + fmt(seq_rate) + " below 0.95");
    c.require(two_rate >= 0.95,
              "two-step support rate " + fmt(two_rate) + " below 0.95");
    c.detail = "sequential " + fmt(seq_rate) + ", two-step support " + fmt(two_rate) +
               " over 200 reps";
    return c;
}

// ---------------------------------------------------------------------------
// 6. Subsampling interval covers the null at close to the nominal rate.

Check criterion6() {
    Check c;
    const auto start = Clock::now();
    Eigen::MatrixXd mu(6, 2);
    mu.row(1) << 0.5, -1.5;
    mu.row(2) << 3.0, 3.0;
    mu.row(3) << 2.5, 5.0;
    mu.row(0) = 0.55 * mu.row(1) + 0.30 * mu.row(2) + 0.15 * mu.row(3);
    mu.row(4) << -0.5, 2.0;
    mu.row(5) << 2.5, -1.0;

    const int reps = 500;
    const int t0 = 400;
    const int t = t0 + 400;
    std::vector<int> covered(reps, 0);
    parallel_for(reps, [&](int r) {
        Draw d(ivsynth::derive_seed(906, static_cast<std::uint64_t>(r)));
        const Eigen::MatrixXd lam = iid_factors(t, 1.0, d);
        const ivsynth::PanelData panel = factor_panel(mu, lam, 0.5, d, t0);
        const ivsynth::RoleAssignment roles =
            oracles::make_roles(0, {1, 2, 3}, {4, 5}, t0, t);
        const ivsynth::EstimationResult est = ivsynth::gmm_sce(panel, roles);
        ivsynth::SubsampleOptions cfg;
        cfg.m = 66;
        cfg.n_draws = 500;
        cfg.level = 0.10;
        const ivsynth::ConfidenceInterval ci = ivsynth::subsampling_ci(
            panel, roles, est, cfg, ivsynth::derive_seed(9906, static_cast<std::uint64_t>(r)));
        covered[static_cast<std::size_t>(r)] = ci.lower <= 0.0 && 0.0 <= ci.upper;
    });
    int hits = 0;
    for (int v : covered) hits += v;
    const double rate = hits / static_cast<double>(reps);
    const double secs = secs_since(start);
    c.require(rate >= 0.86 && rate <= 0.94,
              "coverage " + fmt(rate) + " outside [0.86, 0.94]");
    c.require(secs < 1800.0, "runtime " + fmt(secs) + " s exceeds 1800 s");
    c.detail = "coverage " + fmt(rate) + " at delta 0.10, m=66, 500 reps, " +
               fmt(secs) + " s";
    return c;
}

// ---------------------------------------------------------------------------
// 7. Singular value thresholding recovers rank 4 and the exact rule.

Check criterion7() {
    Check c;
    int hits = 0;
    for (int i = 0; i < 200; ++i) {
        Draw d(ivsynth::derive_seed(907, static_cast<std::uint64_t>(i)));
        Eigen::MatrixXd loadings(40, 4);
        for (Eigen::Index r = 0; r < loadings.rows(); ++r)
            for (Eigen::Index s = 0; s < 4; ++s) loadings(r, s) = 2.0 * d.normal();
        Eigen::MatrixXd factors(4, 160);
        for (Eigen::Index r = 0; r < 4; ++r)
            for (Eigen::Index s = 0; s < 160; ++s) factors(r, s) = d.normal();
        Eigen::MatrixXd x = loadings * factors;
        for (Eigen::Index r = 0; r < x.rows(); ++r)
            for (Eigen::Index s = 0; s < x.cols(); ++s) x(r, s) += 0.5 * d.normal();
        hits += ivsynth::estimate_rank_svt(x) == 4;
    }
    const double rate = hits / 200.0;
    c.require(rate >= 0.95, "rank-4 recovery rate " + fmt(rate) + " below 0.95");

    const auto rank_of = [](std::initializer_list<double> values) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(
            static_cast<Eigen::Index>(values.size()),
            static_cast<Eigen::Index>(values.size()));
        Eigen::Index i = 0;
        for (double v : values) m(i, i) = v, ++i;
        return ivsynth::estimate_rank_svt(m);
    };
    const struct {
        std::initializer_list<double> values;
        int want;
    } cases[] = {
        {{9.0, 5.0, 1.0, 1.0, 1.0}, 2},
        {{2.8, 1.0, 1.0, 1.0, 1.0}, 0},
        {{12.0, 10.0, 4.0, 3.0, 2.0, 1.0}, 1},
        {{8.0, 8.0, 8.0, 8.0, 2.0, 2.0, 2.0, 2.0}, 0},
        {{3.0, 3.0, 3.0}, 0},
        {{100.0, 90.0, 80.0, 70.0, 1.0, 1.0, 1.0, 0.5, 0.5}, 4},
    };
    for (const auto& t : cases) {
        const int got = rank_of(t.values);
        c.require(got == t.want, "hand list gave rank " + std::to_string(got) +
                                     ", wanted " + std::to_string(t.want));
    }
    c.detail = "recovery " + fmt(rate) + ", 6 exact threshold lists";
    return c;
}

// ---------------------------------------------------------------------------
// 8. Uniform-weight study metrics do not depend on T0.

Check criterion8() {
    Check c;
    ivsynth::FittedDgp dgp;
    dgp.rank = 1;
    dgp.loadings.resize(1, 6);
    dgp.loadings << 0.8, 0.95, 1.1, 1.25, 0.9, 1.05;
    ivsynth::ArSpec ar;
    ar.p = 1;
    ar.d = 0;
    ar.coefficients = Eigen::VectorXd::Constant(1, 0.6);
    ar.innovation_variance = 1.0;
    dgp.factor_models.push_back(ar);
    dgp.shock_variances = Eigen::VectorXd::Constant(6, 0.04);
    for (int i = 0; i < 6; ++i) dgp.unit_ids.push_back("s" + std::to_string(i));

    ivsynth::StudyDesign design;
    design.cells = {{20, 4, 4, 0}, {45, 4, 4, 0}};
    design.reps = 60;
    design.estimators = {ivsynth::EstimatorKind::uniform};
    const ivsynth::SimReport report = ivsynth::run_study(dgp, design, 908, hw_threads());

    c.require(report.rows.size() == 2, "expected one row per cell");
    if (report.rows.size() == 2) {
        const auto& a = report.rows[0];
        const auto& b = report.rows[1];
        c.require(a.reps_completed == 60 && b.reps_completed == 60,
                  "not every replication completed");
        c.require(a.failures == 0 && b.failures == 0, "replications failed");
        c.require(a.bias_magnitude == b.bias_magnitude,
                  "bias differs across T0: " + fmt(a.bias_magnitude) + " vs " +
                      fmt(b.bias_magnitude));
        c.require(a.mse_alpha_t == b.mse_alpha_t, "mse_alpha_t differs across T0");
        c.require(a.mse_alpha_bar == b.mse_alpha_bar, "mse_alpha_bar differs across T0");
        c.require(a.feasibility_rate == b.feasibility_rate,
                  "feasibility differs across T0");
        c.detail = "T0 20 vs 45: bias " + fmt(a.bias_magnitude) + ", mse " +
                   fmt(a.mse_alpha_t) + ", seed-exact equal";
    }
    return c;
}

// ---------------------------------------------------------------------------
// 9. Hull feasibility rates for 4-factor loading clusters.

Check criterion9() {
    Check c;
    Draw d(909);
    Eigen::MatrixXd centers(4, 12);
    for (Eigen::Index s = 0; s < centers.cols(); ++s) {
        for (Eigen::Index r = 0; r < 4; ++r) centers(r, s) = d.normal();
        centers.col(s) *= 2.0 / centers.col(s).norm();
    }
    for (Eigen::Index j = 0; j < centers.cols(); ++j) {
        Eigen::MatrixXd others(4, centers.cols() - 1);
        Eigen::Index k = 0;
        for (Eigen::Index s = 0; s < centers.cols(); ++s)
            if (s != j) others.col(k++) = centers.col(s);
        c.require(!ivsynth::in_convex_hull(centers.col(j), others, 1e-6).inside,
                  "center " + std::to_string(j) + " is not an extreme point");
    }

    ivsynth::FittedDgp dgp;
    dgp.rank = 4;
    dgp.loadings.resize(4, 96);
    for (int s = 0; s < 96; ++s) dgp.loadings.col(s) = centers.col(s / 8);
    for (int f = 0; f < 4; ++f) {
        ivsynth::ArSpec ar;
        ar.innovation_variance = 1.0;
        dgp.factor_models.push_back(ar);
    }
    dgp.shock_variances = Eigen::VectorXd::Constant(96, 0.05);
    for (int i = 0; i < 96; ++i) dgp.unit_ids.push_back("s" + std::to_string(i));

    ivsynth::StudyDesign design;
    design.cells = {{8, 2, 10, 0}, {8, 2, 50, 0}};
    design.reps = 4000;
    design.estimators = {ivsynth::EstimatorKind::uniform};
    const ivsynth::SimReport report = ivsynth::run_study(dgp, design, 9090, hw_threads());

    c.require(report.rows.size() == 2, "expected one row per cell");
    if (report.rows.size() == 2) {
        const double r10 = report.rows[0].feasibility_rate;
        const double r50 = report.rows[1].feasibility_rate;
        c.require(report.rows[0].reps_completed == 4000 &&
                      report.rows[1].reps_completed == 4000,
                  "not every replication completed");
        c.require(r10 >= 0.4 && r10 <= 0.7,
                  "N0=10 feasibility " + fmt(r10) + " outside [0.4, 0.7]");
        c.require(r50 >= 0.99, "N0=50 feasibility " + fmt(r50) + " below 0.99");
        c.detail = "feasibility " + fmt(r10) + " at N0=10, " + fmt(r50) +
                   " at N0=50, 4000 reps";
    }
    return c;
}

// ---------------------------------------------------------------------------
// 10. Byte-identical artifacts across repeat runs and thread counts.

std::string sh_quote(const std::string& s) {
    std::string q = "'";
    for (char ch : s) q += ch == '\'' ? std::string("'\\''") : std::string(1, ch);
    q += "'";
    return q;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

int run_cli(const std::vector<std::string>& args, const fs::path& scratch) {
    std::string cmd = sh_quote(IVSYNTH_CLI_PATH);
    for (const std::string& a : args) cmd += " " + sh_quote(a);
    cmd += " >" + sh_quote((scratch / "_out.txt").string()) + " 2>" +
           sh_quote((scratch / "_err.txt").string());
    const int status = std::system(cmd.c_str());
    return status != -1 && WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Check criterion10() {
    Check c;
    const fs::path work = fs::path(IVSYNTH_WORK_DIR) / "determinism";
    fs::remove_all(work);
    fs::create_directories(work);

    Draw d(910);
    Eigen::MatrixXd mu(6, 2);
    mu.row(1) << 0.5, -1.5;
    mu.row(2) << 3.0, 3.0;
    mu.row(0) = 0.5 * mu.row(1) + 0.5 * mu.row(2);
    mu.row(3) << 2.5, 5.0;
    mu.row(4) << -0.5, 2.0;
    mu.row(5) << 2.5, -1.0;
    const int t0 = 24;
    ivsynth::PanelData panel =
        factor_panel(mu, iid_factors(t0 + 6, 1.0, d), 0.2, d, t0);
    const fs::path panel_path = work / "panel.csv";
    ivsynth::save_panel(panel, panel_path.string(), ivsynth::PanelFormat::long_csv);

    const auto twice_equal = [&](const std::string& tag,
                                 const std::vector<std::string>& args,
                                 const std::vector<std::string>& files) {
        for (const char* run : {"r1", "r2"}) {
            std::vector<std::string> a = args;
            a.push_back("--out-dir");
            a.push_back((work / (tag + "_" + run)).string());
            const int code = run_cli(a, work);
            c.require(code == 0, tag + " exited with " + std::to_string(code));
        }
        for (const std::string& f : files) {
            const std::string lhs = slurp(work / (tag + "_r1") / f);
            c.require(!lhs.empty(), tag + "/" + f + " is empty");
            c.require(lhs == slurp(work / (tag + "_r2") / f),
                      tag + "/" + f + " differs between runs");
        }
    };

    twice_equal("estimate",
                {"estimate", "--panel", panel_path.string(), "--unit", "u0",
                 "--controls", "u1,u2,u3", "--instruments", "u4,u5"},
                {"estimate.json", "gap.csv"});
    twice_equal("select",
                {"select", "--panel", panel_path.string(), "--unit", "u0",
                 "--controls", "u1,u2,u3", "--instruments", "u4,u5", "--method",
                 "sequential"},
                {"selection.json"});
    twice_equal("infer",
                {"infer", "--panel", panel_path.string(), "--unit", "u0",
                 "--controls", "u1,u2", "--instruments", "u4,u5", "--m", "8",
                 "--draws", "120", "--seed", "5", "--draws-out", "draws.csv"},
                {"interval.json", "draws.csv"});

    ivsynth::PanelData untreated = panel;
    untreated.treated.setConstant(false);
    const fs::path plain_path = work / "plain.csv";
    ivsynth::save_panel(untreated, plain_path.string(), ivsynth::PanelFormat::long_csv);
    twice_equal("fit-dgp",
                {"fit-dgp", "--panel", plain_path.string(), "--rank", "2"},
                {"dgp.json"});

    ivsynth::FittedDgp dgp;
    dgp.rank = 1;
    dgp.loadings.resize(1, 8);
    dgp.loadings << 0.8, 0.85, 0.9, 0.95, 1.0, 1.05, 1.1, 1.15;
    ivsynth::ArSpec ar;
    ar.p = 1;
    ar.d = 0;
    ar.coefficients = Eigen::VectorXd::Constant(1, 0.5);
    ar.innovation_variance = 1.0;
    dgp.factor_models.push_back(ar);
    dgp.shock_variances = Eigen::VectorXd::Constant(8, 0.04);
    for (int i = 0; i < 8; ++i) dgp.unit_ids.push_back("s" + std::to_string(i));
    const fs::path dgp_path = work / "dgp.json";
    std::ofstream(dgp_path) << ivsynth::dgp_to_json(dgp).dump(2);
    const fs::path design_path = work / "design.json";
    std::ofstream(design_path) << R"({
        "cells": [{"t0": 12, "t1": 3, "n0": 3, "n1": 2}],
        "reps": 8,
        "estimators": ["gmm", "uniform"],
        "true_effects": [1.0, 1.0, 1.0],
        "detail": true
    })";
    for (const char* tag : {"sim_t1", "sim_t8", "sim_again"}) {
        const int code =
            run_cli({"simulate", "--dgp", dgp_path.string(), "--config",
                     design_path.string(), "--seed", "9", "--threads",
                     std::string(tag) == "sim_t8" ? "8" : "1", "--out-dir",
                     (work / tag).string()},
                    work);
        c.require(code == 0, std::string(tag) + " exited with " + std::to_string(code));
    }
    for (const char* f : {"report.csv", "details.json"}) {
        const std::string base = slurp(work / "sim_t1" / f);
        c.require(!base.empty(), std::string("sim_t1/") + f + " is empty");
        c.require(base == slurp(work / "sim_t8" / f),
                  std::string(f) + " differs between 1 and 8 threads");
        c.require(base == slurp(work / "sim_again" / f),
                  std::string(f) + " differs between repeat runs");
    }
    c.detail = "estimate, select, infer, fit-dgp, simulate across reruns and threads";
    return c;
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* label;
        std::function<Check()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "constrained weights equal the metric projection of the min-norm point",
         criterion1},
        {2, "simplex solver matches a 1e-3 grid on random J=3 problems", criterion2},
        {3, "noiseless interior combination recovered exactly", criterion3},
        {4, "gmm attenuation bias below ols and shrinking in T0", criterion4},
        {5, "partition selection finds the true donors at T0=2000", criterion5},
        {6, "subsampling coverage near nominal at T0=T1=400", criterion6},
        {7, "singular value threshold recovers rank 4 and the exact rule", criterion7},
        {8, "uniform-weight study metrics invariant to T0", criterion8},
        {9, "hull feasibility rates at N0=10 and N0=50", criterion9},
        {10, "byte-identical artifacts across reruns and thread counts", criterion10},
    };

    int failures = 0;
    for (const Criterion& cr : criteria) {
        const auto start = Clock::now();
        Check c;
        try {
            c = cr.run();
        } catch (const std::exception& e) {
            c.ok = false;
            c.faults.push_back(std::string("exception: ") + e.what());
        }
        const double secs = secs_since(start);
        std::printf("criterion %2d %s  %s", cr.id, c.ok ? "PASS" : "FAIL", cr.label);
        if (!c.detail.empty()) std::printf("  [%s]", c.detail.c_str());
        std::printf("  (%.1f s)\n", secs);
        for (const std::string& f : c.faults) std::printf("              - %s\n", f.c_str());
        std::fflush(stdout);
        failures += c.ok ? 0 : 1;
    }
    std::printf("%d of 10 criteria passed\n", 10 - failures);
    return failures;
}
