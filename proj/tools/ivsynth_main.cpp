#include "ivsynth/serialize.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace {

using ivsynth::Json;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path.string());
    out << content;
}

void write_json(const std::filesystem::path& path, const Json& j) {
    write_file(path, j.dump(2) + "\n");
}

Json load_json(const std::string& path) { return Json::parse(read_file(path)); }

struct CommonArgs {
    std::string panel_path;
    std::string config_path;
    std::string treatment_path;
    std::string format = "long";
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    int threads = 0;
};

struct RoleArgs {
    std::string unit;
    std::vector<std::string> controls;
    std::vector<std::string> instruments;
    std::string first_post;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_panel) {
    auto* panel = cmd->add_option("--panel", args.panel_path, "panel CSV file");
    if (needs_panel) panel->check(CLI::ExistingFile);
    cmd->add_option("--config", args.config_path, "JSON config; flags override its values");
    cmd->add_option("--treatment", args.treatment_path,
                    "treatment sidecar CSV for wide panels");
    cmd->add_option("--format", args.format, "panel layout: long or wide")
        ->check(CLI::IsMember({"long", "wide"}));
    cmd->add_option("--out-dir", args.out_dir, "output directory");
    cmd->add_option("--seed", args.seed, "random seed");
    cmd->add_option("--threads", args.threads, "worker threads (0: hardware)");
}

void add_roles(CLI::App* cmd, RoleArgs& args) {
    cmd->add_option("--unit", args.unit, "unit of interest id");
    cmd->add_option("--controls", args.controls, "control unit ids")->delimiter(',');
    cmd->add_option("--instruments", args.instruments, "instrument unit ids")
        ->delimiter(',');
    cmd->add_option("--first-post", args.first_post,
                    "first post-treatment period label (default: from treatment flags)");
}

// Flags override config values: fill from config only where no flag was given.
template <typename T>
void merge(const Json& cfg, const CLI::App* cmd, const std::string& flag, const char* key,
           T& dst) {
    if (cmd->count(flag) == 0 && cfg.contains(key)) dst = cfg.at(key).get<T>();
}

Json resolve_config(const CommonArgs& common) {
    if (common.config_path.empty()) return Json::object();
    return load_json(common.config_path);
}

struct LoadedPanel {
    ivsynth::PanelData panel;
    std::string hash;
};

LoadedPanel load_panel_arg(const CommonArgs& common) {
    if (common.panel_path.empty()) {
        throw std::invalid_argument("--panel is required");
    }
    const ivsynth::PanelFormat format = common.format == "wide"
                                            ? ivsynth::PanelFormat::wide_csv
                                            : ivsynth::PanelFormat::long_csv;
    std::optional<std::string> treatment;
    if (!common.treatment_path.empty()) treatment = common.treatment_path;
    LoadedPanel loaded;
    loaded.panel = ivsynth::load_panel(common.panel_path, format, treatment);
    std::string bytes = read_file(common.panel_path);
    if (treatment.has_value()) bytes += read_file(*treatment);
    loaded.hash = ivsynth::fnv1a64_hex(bytes);
    return loaded;
}

ivsynth::RoleAssignment resolve_roles(const ivsynth::PanelData& panel, const RoleArgs& args) {
    if (args.unit.empty()) throw std::invalid_argument("--unit is required");
    std::optional<std::string> first_post;
    if (!args.first_post.empty()) first_post = args.first_post;
    return ivsynth::make_roles(panel, args.unit, args.controls, args.instruments, first_post);
}

Json ids_json(const ivsynth::PanelData& panel, const std::vector<int>& units) {
    Json arr = Json::array();
    for (int u : units) arr.push_back(panel.unit_ids[static_cast<std::size_t>(u)]);
    return arr;
}

std::string csv_provenance(const Json& config, const std::string& hash) {
    return "# config: " + config.dump() + "\n# panel_hash: " + hash + "\n";
}

struct EstimateParams {
    std::string method = "gmm";
    std::string weighting = "identity";
    bool unconstrained = false;
    int bandwidth = -1;
    std::vector<double> v;
    int powell_iters = 10;
    int factor_rank = -1;
};

Json estimate_config(const ivsynth::PanelData& panel, const std::string& panel_path,
                     const ivsynth::RoleAssignment& roles, const EstimateParams& p,
                     const std::string& selection_method) {
    Json cfg;
    cfg["panel"] = panel_path;
    cfg["unit"] = panel.unit_ids[static_cast<std::size_t>(roles.unit_of_interest)];
    cfg["controls"] = ids_json(panel, roles.controls);
    cfg["instruments"] = ids_json(panel, roles.instruments);
    cfg["method"] = p.method;
    cfg["weighting"] = p.weighting;
    cfg["constrained"] = !p.unconstrained;
    cfg["bandwidth"] = p.bandwidth;
    cfg["v"] = p.v;
    if (selection_method.empty()) cfg["selection"] = nullptr;
    else cfg["selection"] = selection_method;
    return cfg;
}

ivsynth::EstimationResult run_estimate(const ivsynth::PanelData& panel,
                                       const ivsynth::RoleAssignment& roles,
                                       const EstimateParams& p) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(p.v.size()));
    for (std::size_t i = 0; i < p.v.size(); ++i) v(static_cast<Eigen::Index>(i)) = p.v[i];
    const ivsynth::Method method = ivsynth::method_from_name(p.method);
    switch (method) {
        case ivsynth::Method::gmm: {
            ivsynth::GmmOptions opt;
            opt.weighting = ivsynth::weighting_from_name(p.weighting);
            opt.constrained = !p.unconstrained;
            opt.bandwidth = p.bandwidth;
            return ivsynth::gmm_sce(panel, roles, opt, v);
        }
        case ivsynth::Method::ols: return ivsynth::ols_sce(panel, roles, v);
        case ivsynth::Method::uniform: return ivsynth::uniform_sce(panel, roles, v);
        case ivsynth::Method::factor:
            return ivsynth::factor_estimator(panel, roles, v, p.factor_rank).result;
        case ivsynth::Method::powell: {
            ivsynth::PowellOptions opt;
            opt.n_iter = p.powell_iters;
            return ivsynth::powell_estimator(panel, roles, v, opt).result;
        }
    }
    throw std::logic_error("unknown method");
}

void write_estimate_artifacts(const std::filesystem::path& out_dir,
                              const ivsynth::PanelData& panel, const std::string& panel_path,
                              const std::string& hash, const ivsynth::RoleAssignment& roles,
                              const EstimateParams& p, const std::string& selection_method,
                              const ivsynth::EstimationResult& result) {
    const Json cfg = estimate_config(panel, panel_path, roles, p, selection_method);
    Json artifact;
    artifact["config"] = cfg;
    artifact["panel_hash"] = hash;
    artifact["result"] = ivsynth::result_to_json(result, panel);
    write_json(out_dir / "estimate.json", artifact);
    write_file(out_dir / "gap.csv",
               csv_provenance(cfg, hash) + ivsynth::gap_to_csv(result, panel, roles));
}

struct SelectParams {
    std::string method = "two-step";
    std::string weighting = "identity";
    double alpha = 0.05;
    int bandwidth = -1;
};

Json select_config(const ivsynth::PanelData& panel, const std::string& panel_path,
                   const ivsynth::RoleAssignment& pool, const SelectParams& p) {
    Json cfg;
    cfg["panel"] = panel_path;
    cfg["unit"] = panel.unit_ids[static_cast<std::size_t>(pool.unit_of_interest)];
    cfg["pool"] = ids_json(panel, pool.controls);
    cfg["instruments"] = ids_json(panel, pool.instruments);
    cfg["method"] = p.method;
    cfg["weighting"] = p.weighting;
    cfg["alpha"] = p.alpha;
    cfg["bandwidth"] = p.bandwidth;
    return cfg;
}

ivsynth::SelectionResult run_selection(const ivsynth::PanelData& panel,
                                       const ivsynth::RoleAssignment& pool,
                                       const SelectParams& p) {
    ivsynth::SelectionOptions opt;
    opt.weighting = ivsynth::weighting_from_name(p.weighting);
    opt.alpha = p.alpha;
    opt.bandwidth = p.bandwidth;
    const ivsynth::SelectionMethod method = ivsynth::selection_method_from_name(p.method);
    return method == ivsynth::SelectionMethod::sequential
               ? ivsynth::sequential_select(panel, pool, opt)
               : ivsynth::two_step_select(panel, pool, opt);
}

void write_selection_artifact(const std::filesystem::path& out_dir,
                              const ivsynth::PanelData& panel, const std::string& panel_path,
                              const std::string& hash, const ivsynth::RoleAssignment& pool,
                              const SelectParams& p, const ivsynth::SelectionResult& sel) {
    Json artifact;
    artifact["config"] = select_config(panel, panel_path, pool, p);
    artifact["panel_hash"] = hash;
    artifact["selection"] = ivsynth::selection_to_json(sel, panel);
    write_json(out_dir / "selection.json", artifact);
}

int dispatch(int argc, char** argv) {
    CLI::App app{"Synthetic control estimation with instrument-unit moments"};
    app.require_subcommand(1);

    // estimate
    auto* est_cmd = app.add_subcommand("estimate", "fit a synthetic control and write the gap");
    CommonArgs est_common;
    RoleArgs est_roles;
    EstimateParams est_params;
    std::string est_select;
    add_common(est_cmd, est_common, true);
    add_roles(est_cmd, est_roles);
    est_cmd->add_option("--method", est_params.method, "gmm|ols|uniform|factor|powell");
    est_cmd->add_option("--weighting", est_params.weighting, "identity|two-step");
    est_cmd->add_flag("--unconstrained", est_params.unconstrained,
                      "report the unconstrained minimum-norm solution");
    est_cmd->add_option("--bandwidth", est_params.bandwidth, "HAC bandwidth (-1 auto)");
    est_cmd->add_option("--v", est_params.v, "effect weights over post periods")
        ->delimiter(',');
    est_cmd->add_option("--powell-iters", est_params.powell_iters, "alternating iterations");
    est_cmd->add_option("--rank", est_params.factor_rank, "factor rank override (-1 auto)");
    est_cmd->add_option("--select", est_select,
                        "run partition selection first: sequential|two-step");
    SelectParams est_sel_params;
    est_cmd->add_option("--alpha", est_sel_params.alpha, "sequential test level");

    // select
    auto* sel_cmd = app.add_subcommand("select", "choose a control/instrument partition");
    CommonArgs sel_common;
    RoleArgs sel_roles;
    SelectParams sel_params;
    bool sel_estimate = false;
    EstimateParams sel_est_params;
    add_common(sel_cmd, sel_common, true);
    add_roles(sel_cmd, sel_roles);
    sel_cmd->add_option("--method", sel_params.method, "sequential|two-step");
    sel_cmd->add_option("--weighting", sel_params.weighting, "identity|two-step");
    sel_cmd->add_option("--alpha", sel_params.alpha, "sequential test level");
    sel_cmd->add_option("--bandwidth", sel_params.bandwidth, "HAC bandwidth (-1 auto)");
    sel_cmd->add_flag("--estimate", sel_estimate, "chain an estimation on the chosen roles");
    sel_cmd->add_option("--estimate-method", sel_est_params.method,
                        "method for the chained estimation");

    // infer
    auto* inf_cmd = app.add_subcommand("infer", "subsampling confidence interval");
    CommonArgs inf_common;
    RoleArgs inf_roles;
    EstimateParams inf_params;
    ivsynth::SubsampleOptions inf_cfg;
    std::string inf_reselect;
    std::string inf_draws_out;
    add_common(inf_cmd, inf_common, true);
    add_roles(inf_cmd, inf_roles);
    inf_cmd->add_option("--weighting", inf_params.weighting, "identity|two-step");
    inf_cmd->add_option("--m", inf_cfg.m, "block length (-1: floor(T0^0.7))");
    inf_cmd->add_option("--draws", inf_cfg.n_draws, "subsampling draws");
    inf_cmd->add_option("--level", inf_cfg.level, "nominal miscoverage delta");
    inf_cmd->add_option("--sigma-bandwidth", inf_cfg.sigma_bandwidth,
                        "HAC bandwidth for sigma_v (-1 auto)");
    inf_cmd->add_flag("--iid", inf_cfg.iid_blocks, "subsample random period subsets");
    inf_cmd->add_option("--reselect", inf_reselect,
                        "re-run selection per block: sequential|two-step");
    double inf_alpha = 0.05;
    inf_cmd->add_option("--alpha", inf_alpha, "test level for per-block reselection");
    inf_cmd->add_option("--bandwidth", inf_params.bandwidth, "HAC bandwidth (-1 auto)");
    inf_cmd->add_option("--draws-out", inf_draws_out, "also write every draw to this CSV");

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "run a Monte Carlo study from a design");
    CommonArgs sim_common;
    std::string sim_dgp_path;
    int sim_rank = -1;
    add_common(sim_cmd, sim_common, false);
    sim_cmd->add_option("--dgp", sim_dgp_path, "fitted DGP JSON (else fit from --panel)");
    sim_cmd->add_option("--rank", sim_rank, "rank override when fitting from a panel");

    // fit-dgp
    auto* fit_cmd = app.add_subcommand("fit-dgp", "fit the simulation DGP from a panel");
    CommonArgs fit_common;
    int fit_rank = -1;
    add_common(fit_cmd, fit_common, true);
    fit_cmd->add_option("--rank", fit_rank, "rank override (-1: singular value threshold)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (est_cmd->parsed()) {
        const Json cfg = resolve_config(est_common);
        merge(cfg, est_cmd, "--unit", "unit", est_roles.unit);
        merge(cfg, est_cmd, "--controls", "controls", est_roles.controls);
        merge(cfg, est_cmd, "--instruments", "instruments", est_roles.instruments);
        merge(cfg, est_cmd, "--first-post", "first_post", est_roles.first_post);
        merge(cfg, est_cmd, "--method", "method", est_params.method);
        merge(cfg, est_cmd, "--weighting", "weighting", est_params.weighting);
        merge(cfg, est_cmd, "--bandwidth", "bandwidth", est_params.bandwidth);
        merge(cfg, est_cmd, "--v", "v", est_params.v);
        merge(cfg, est_cmd, "--powell-iters", "powell_iters", est_params.powell_iters);
        merge(cfg, est_cmd, "--rank", "rank", est_params.factor_rank);
        merge(cfg, est_cmd, "--select", "select", est_select);
        merge(cfg, est_cmd, "--alpha", "alpha", est_sel_params.alpha);

        const LoadedPanel loaded = load_panel_arg(est_common);
        std::filesystem::create_directories(est_common.out_dir);
        const std::filesystem::path out_dir(est_common.out_dir);
        ivsynth::RoleAssignment roles = resolve_roles(loaded.panel, est_roles);
        if (!est_select.empty()) {
            est_sel_params.method = est_select;
            est_sel_params.weighting = est_params.weighting;
            est_sel_params.bandwidth = est_params.bandwidth;
            const ivsynth::SelectionResult sel =
                run_selection(loaded.panel, roles, est_sel_params);
            write_selection_artifact(out_dir, loaded.panel, est_common.panel_path,
                                     loaded.hash, roles, est_sel_params, sel);
            roles.controls = sel.chosen.controls;
            roles.instruments = sel.chosen.instruments;
        }
        const ivsynth::EstimationResult result =
            run_estimate(loaded.panel, roles, est_params);
        write_estimate_artifacts(out_dir, loaded.panel, est_common.panel_path, loaded.hash,
                                 roles, est_params, est_select, result);
        return 0;
    }

    if (sel_cmd->parsed()) {
        const Json cfg = resolve_config(sel_common);
        merge(cfg, sel_cmd, "--unit", "unit", sel_roles.unit);
        merge(cfg, sel_cmd, "--controls", "controls", sel_roles.controls);
        merge(cfg, sel_cmd, "--instruments", "instruments", sel_roles.instruments);
        merge(cfg, sel_cmd, "--first-post", "first_post", sel_roles.first_post);
        merge(cfg, sel_cmd, "--method", "method", sel_params.method);
        merge(cfg, sel_cmd, "--weighting", "weighting", sel_params.weighting);
        merge(cfg, sel_cmd, "--alpha", "alpha", sel_params.alpha);
        merge(cfg, sel_cmd, "--bandwidth", "bandwidth", sel_params.bandwidth);

        const LoadedPanel loaded = load_panel_arg(sel_common);
        std::filesystem::create_directories(sel_common.out_dir);
        const std::filesystem::path out_dir(sel_common.out_dir);
        const ivsynth::RoleAssignment pool = resolve_roles(loaded.panel, sel_roles);
        const ivsynth::SelectionResult sel = run_selection(loaded.panel, pool, sel_params);
        write_selection_artifact(out_dir, loaded.panel, sel_common.panel_path, loaded.hash,
                                 pool, sel_params, sel);
        if (sel_estimate) {
            ivsynth::RoleAssignment roles = pool;
            roles.controls = sel.chosen.controls;
            roles.instruments = sel.chosen.instruments;
            sel_est_params.weighting = sel_params.weighting;
            sel_est_params.bandwidth = sel_params.bandwidth;
            const ivsynth::EstimationResult result =
                run_estimate(loaded.panel, roles, sel_est_params);
            write_estimate_artifacts(out_dir, loaded.panel, sel_common.panel_path,
                                     loaded.hash, roles, sel_est_params, sel_params.method,
                                     result);
        }
        return 0;
    }

    if (inf_cmd->parsed()) {
        const Json cfg = resolve_config(inf_common);
        merge(cfg, inf_cmd, "--unit", "unit", inf_roles.unit);
        merge(cfg, inf_cmd, "--controls", "controls", inf_roles.controls);
        merge(cfg, inf_cmd, "--instruments", "instruments", inf_roles.instruments);
        merge(cfg, inf_cmd, "--first-post", "first_post", inf_roles.first_post);
        merge(cfg, inf_cmd, "--weighting", "weighting", inf_params.weighting);
        merge(cfg, inf_cmd, "--m", "m", inf_cfg.m);
        merge(cfg, inf_cmd, "--draws", "draws", inf_cfg.n_draws);
        merge(cfg, inf_cmd, "--level", "level", inf_cfg.level);
        merge(cfg, inf_cmd, "--sigma-bandwidth", "sigma_bandwidth", inf_cfg.sigma_bandwidth);
        merge(cfg, inf_cmd, "--reselect", "reselect", inf_reselect);
        merge(cfg, inf_cmd, "--alpha", "alpha", inf_alpha);
        merge(cfg, inf_cmd, "--bandwidth", "bandwidth", inf_params.bandwidth);
        merge(cfg, inf_cmd, "--seed", "seed", inf_common.seed);

        const LoadedPanel loaded = load_panel_arg(inf_common);
        std::filesystem::create_directories(inf_common.out_dir);
        const std::filesystem::path out_dir(inf_common.out_dir);
        const ivsynth::RoleAssignment roles = resolve_roles(loaded.panel, inf_roles);

        ivsynth::GmmOptions gopt;
        gopt.weighting = ivsynth::weighting_from_name(inf_params.weighting);
        gopt.bandwidth = inf_params.bandwidth;
        const ivsynth::EstimationResult est = ivsynth::gmm_sce(loaded.panel, roles, gopt);

        ivsynth::ReselectSpec reselect;
        const ivsynth::ReselectSpec* reselect_ptr = nullptr;
        if (!inf_reselect.empty()) {
            reselect.pool_roles = roles;
            reselect.method = ivsynth::selection_method_from_name(inf_reselect);
            reselect.options.weighting = gopt.weighting;
            reselect.options.alpha = inf_alpha;
            inf_cfg.reselect_per_block = true;
            reselect_ptr = &reselect;
        }
        const ivsynth::ConfidenceInterval ci = ivsynth::subsampling_ci(
            loaded.panel, roles, est, inf_cfg, inf_common.seed, gopt, reselect_ptr);

        Json config;
        config["panel"] = inf_common.panel_path;
        config["unit"] =
            loaded.panel.unit_ids[static_cast<std::size_t>(roles.unit_of_interest)];
        config["controls"] = ids_json(loaded.panel, roles.controls);
        config["instruments"] = ids_json(loaded.panel, roles.instruments);
        config["weighting"] = inf_params.weighting;
        config["m"] = inf_cfg.m;
        config["draws"] = inf_cfg.n_draws;
        config["level"] = inf_cfg.level;
        config["sigma_bandwidth"] = inf_cfg.sigma_bandwidth;
        config["iid"] = inf_cfg.iid_blocks;
        if (inf_reselect.empty()) config["reselect"] = nullptr;
        else config["reselect"] = inf_reselect;
        config["seed"] = inf_common.seed;

        Json artifact;
        artifact["config"] = config;
        artifact["panel_hash"] = loaded.hash;
        artifact["point_estimate"] = ivsynth::result_to_json(est, loaded.panel);
        artifact["interval"] = ivsynth::interval_to_json(ci);
        write_json(out_dir / "interval.json", artifact);

        if (!inf_draws_out.empty()) {
            std::ostringstream csv;
            csv << csv_provenance(config, loaded.hash) << "draw,alpha_star\n";
            for (Eigen::Index i = 0; i < ci.draws.size(); ++i) {
                csv << i << ',' << ivsynth::format_double(ci.draws(i)) << '\n';
            }
            write_file(out_dir / inf_draws_out, csv.str());
        }
        return 0;
    }

    if (sim_cmd->parsed()) {
        if (sim_common.config_path.empty()) {
            throw std::invalid_argument("simulate needs --config with the study design");
        }
        if (sim_dgp_path.empty() && sim_common.panel_path.empty()) {
            throw std::invalid_argument("simulate needs --dgp or --panel");
        }
        const Json design_json = load_json(sim_common.config_path);
        const ivsynth::StudyDesign design = ivsynth::design_from_json(design_json);
        std::filesystem::create_directories(sim_common.out_dir);
        const std::filesystem::path out_dir(sim_common.out_dir);

        ivsynth::FittedDgp dgp;
        std::string input_hash;
        if (!sim_dgp_path.empty()) {
            const std::string bytes = read_file(sim_dgp_path);
            input_hash = ivsynth::fnv1a64_hex(bytes);
            dgp = ivsynth::dgp_from_json(Json::parse(bytes));
        } else {
            const LoadedPanel loaded = load_panel_arg(sim_common);
            input_hash = loaded.hash;
            dgp = ivsynth::fit_dgp(loaded.panel, sim_rank);
            Json dgp_artifact;
            dgp_artifact["config"] = Json{{"panel", sim_common.panel_path},
                                          {"rank_override", sim_rank}};
            dgp_artifact["panel_hash"] = input_hash;
            dgp_artifact["dgp"] = ivsynth::dgp_to_json(dgp);
            write_json(out_dir / "dgp.json", dgp_artifact);
        }

        const int threads = sim_common.threads > 0
                                ? sim_common.threads
                                : static_cast<int>(std::thread::hardware_concurrency());
        const ivsynth::SimReport report =
            ivsynth::run_study(dgp, design, sim_common.seed, std::max(1, threads));

        Json config = ivsynth::design_to_json(design);
        config["seed"] = sim_common.seed;
        write_file(out_dir / "report.csv",
                   csv_provenance(config, input_hash) + ivsynth::report_to_csv(report));
        if (design.detail) {
            Json artifact;
            artifact["config"] = config;
            artifact["panel_hash"] = input_hash;
            artifact["details"] = ivsynth::details_to_json(report);
            artifact["warnings"] = report.warnings;
            write_json(out_dir / "details.json", artifact);
        }
        return 0;
    }

    if (fit_cmd->parsed()) {
        const Json cfg = resolve_config(fit_common);
        merge(cfg, fit_cmd, "--rank", "rank", fit_rank);
        const LoadedPanel loaded = load_panel_arg(fit_common);
        std::filesystem::create_directories(fit_common.out_dir);
        const ivsynth::FittedDgp dgp = ivsynth::fit_dgp(loaded.panel, fit_rank);
        Json artifact;
        artifact["config"] =
            Json{{"panel", fit_common.panel_path}, {"rank_override", fit_rank}};
        artifact["panel_hash"] = loaded.hash;
        artifact["dgp"] = ivsynth::dgp_to_json(dgp);
        write_json(std::filesystem::path(fit_common.out_dir) / "dgp.json", artifact);
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
