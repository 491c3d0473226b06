#include "ivsynth/panel.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

using ivsynth::PanelData;
using ivsynth::PanelFormat;
using ivsynth::RoleAssignment;

namespace {

std::filesystem::path tmp_dir() {
    const auto dir = std::filesystem::temp_directory_path() / "ivsynth_panel_tests";
    std::filesystem::create_directories(dir);
    return dir;
}

std::string write_tmp(const std::string& name, const std::string& content) {
    const auto path = tmp_dir() / name;
    std::ofstream out(path, std::ios::binary);
    out << content;
    return path.string();
}

}  // namespace

TEST_CASE("long csv transcribes directly into the outcome matrix") {
    const std::string path = write_tmp("basic.csv",
                                       "unit,period,outcome,treated\n"
                                       "a,1,1.0,0\n"
                                       "a,2,2.0,0\n"
                                       "b,1,0.0,0\n"
                                       "b,2,1.0,0\n");
    const PanelData p = ivsynth::load_panel(path, PanelFormat::long_csv);
    REQUIRE(p.n_units() == 2);
    REQUIRE(p.n_periods() == 2);
    CHECK(p.outcomes(0, 0) == 1.0);
    CHECK(p.outcomes(0, 1) == 2.0);
    CHECK(p.outcomes(1, 0) == 0.0);
    CHECK(p.outcomes(1, 1) == 1.0);
    CHECK(p.unit_ids == std::vector<std::string>{"a", "b"});
    CHECK_FALSE(p.treated.any());
}

TEST_CASE("wide format loads to the identical panel") {
    const std::string long_path = write_tmp("basic2.csv",
                                            "unit,period,outcome,treated\n"
                                            "a,1,1.0,0\na,2,2.0,0\nb,1,0.0,0\nb,2,1.0,0\n");
    const std::string wide_path = write_tmp("basic_wide.csv",
                                            "unit,1,2\n"
                                            "a,1.0,2.0\n"
                                            "b,0.0,1.0\n");
    const PanelData a = ivsynth::load_panel(long_path, PanelFormat::long_csv);
    const PanelData b = ivsynth::load_panel(wide_path, PanelFormat::wide_csv);
    CHECK(a.outcomes == b.outcomes);
    CHECK(a.unit_ids == b.unit_ids);
    CHECK(a.period_ids == b.period_ids);
    CHECK(a.treated == b.treated);
}

TEST_CASE("ragged panel names the offending cell") {
    const std::string path = write_tmp("ragged.csv",
                                       "unit,period,outcome\n"
                                       "a,1,1.0\n"
                                       "b,1,0.0\n"
                                       "b,2,1.0\n");
    CHECK_THROWS_WITH_AS(ivsynth::load_panel(path, PanelFormat::long_csv),
                         doctest::Contains("'a'"), std::invalid_argument);
    try {
        ivsynth::load_panel(path, PanelFormat::long_csv);
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        CHECK(msg.find('2') != std::string::npos);
    }
}

TEST_CASE("duplicate observations and non-numeric outcomes are distinct errors") {
    const std::string dup = write_tmp("dup.csv",
                                      "unit,period,outcome\n"
                                      "a,1,1.0\na,1,2.0\n");
    CHECK_THROWS_WITH_AS(ivsynth::load_panel(dup, PanelFormat::long_csv),
                         doctest::Contains("duplicate"), std::invalid_argument);
    const std::string bad = write_tmp("bad.csv",
                                      "unit,period,outcome\n"
                                      "a,1,x\n");
    CHECK_THROWS_AS(ivsynth::load_panel(bad, PanelFormat::long_csv), std::invalid_argument);
}

TEST_CASE("periods sort ascending regardless of row order") {
    const std::string path = write_tmp("order.csv",
                                       "unit,period,outcome\n"
                                       "a,10,3.0\na,2,1.0\nb,2,0.0\nb,10,5.0\n");
    const PanelData p = ivsynth::load_panel(path, PanelFormat::long_csv);
    CHECK(p.period_ids == std::vector<std::string>{"2", "10"});
    CHECK(p.outcomes(0, 0) == 1.0);
    CHECK(p.outcomes(0, 1) == 3.0);
}

TEST_CASE("load save load round trips in both formats") {
    const std::string path = write_tmp("rt.csv",
                                       "unit,period,outcome,treated\n"
                                       "a,1,1.5,0\na,2,2.0,1\nb,1,-0.25,0\nb,2,1.0,0\n");
    const PanelData p = ivsynth::load_panel(path, PanelFormat::long_csv);

    const auto long_out = (tmp_dir() / "rt_long.csv").string();
    ivsynth::save_panel(p, long_out, PanelFormat::long_csv);
    const PanelData p2 = ivsynth::load_panel(long_out, PanelFormat::long_csv);
    CHECK(p.outcomes == p2.outcomes);
    CHECK(p.treated == p2.treated);
    CHECK(p.unit_ids == p2.unit_ids);
    CHECK(p.period_ids == p2.period_ids);

    const auto wide_out = (tmp_dir() / "rt_wide.csv").string();
    const auto side_out = (tmp_dir() / "rt_side.csv").string();
    ivsynth::save_panel(p, wide_out, PanelFormat::wide_csv, side_out);
    const PanelData p3 = ivsynth::load_panel(wide_out, PanelFormat::wide_csv, side_out);
    CHECK(p.outcomes == p3.outcomes);
    CHECK(p.treated == p3.treated);
    CHECK(p.unit_ids == p3.unit_ids);
    CHECK(p.period_ids == p3.period_ids);
}

namespace {

PanelData role_panel() {
    // 4 units, 4 periods; unit 0 treated from period index 2.
    PanelData p;
    p.outcomes = Eigen::MatrixXd::Zero(4, 4);
    p.treated = ivsynth::BoolMatrix::Constant(4, 4, false);
    p.treated(0, 2) = p.treated(0, 3) = true;
    p.unit_ids = {"w", "x", "y", "z"};
    p.period_ids = {"1", "2", "3", "4"};
    p.period_keys = {1, 2, 3, 4};
    return p;
}

RoleAssignment base_roles() {
    RoleAssignment r;
    r.unit_of_interest = 0;
    r.controls = {1, 2};
    r.instruments = {3};
    r.pre_periods = {0, 1};
    r.post_periods = {2, 3};
    return r;
}

}  // namespace

TEST_CASE("valid disjoint assignment yields no violations") {
    const PanelData p = role_panel();
    CHECK(ivsynth::validate_roles(p, base_roles()).empty());
}

TEST_CASE("control treated in a post period is cited by unit and period") {
    PanelData p = role_panel();
    p.treated(1, 3) = true;
    const auto violations = ivsynth::validate_roles(p, base_roles());
    REQUIRE_FALSE(violations.empty());
    bool found = false;
    for (const auto& v : violations) {
        if (v.unit == "x" && v.period == "4") found = true;
    }
    CHECK(found);
}

TEST_CASE("instrument treated only post-treatment is allowed") {
    PanelData p = role_panel();
    p.treated(3, 2) = p.treated(3, 3) = true;
    CHECK(ivsynth::validate_roles(p, base_roles()).empty());

    p.treated(3, 0) = true;  // pre-treatment violation
    CHECK_FALSE(ivsynth::validate_roles(p, base_roles()).empty());
}

TEST_CASE("overlapping roles are violations") {
    const PanelData p = role_panel();
    RoleAssignment r = base_roles();
    r.instruments = {2};  // also a control
    CHECK_FALSE(ivsynth::validate_roles(p, r).empty());

    r = base_roles();
    r.controls = {0, 1};  // unit of interest as control
    CHECK_FALSE(ivsynth::validate_roles(p, r).empty());
}

TEST_CASE("make_roles derives periods from the treatment matrix and checks ids") {
    const PanelData p = role_panel();
    const RoleAssignment r = ivsynth::make_roles(p, "w", {"x", "y"}, {"z"});
    CHECK(r.unit_of_interest == 0);
    CHECK(r.controls == std::vector<int>{1, 2});
    CHECK(r.instruments == std::vector<int>{3});
    CHECK(r.pre_periods == std::vector<int>{0, 1});
    CHECK(r.post_periods == std::vector<int>{2, 3});

    CHECK_THROWS_WITH_AS(ivsynth::make_roles(p, "w", {"x"}, {"nope"}),
                         doctest::Contains("nope"), std::invalid_argument);
}
