#include "ivsynth/panel.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ivsynth {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

[[noreturn]] void cell_error(const std::string& path, std::size_t row,
                             const std::string& column, const std::string& what) {
    throw std::invalid_argument(path + ": row " + std::to_string(row) +
                                ", column '" + column + "': " + what);
}

bool parse_long_long(const std::string& s, long long& out) {
    const char* b = s.data();
    const char* e = b + s.size();
    auto res = std::from_chars(b, e, out);
    return res.ec == std::errc() && res.ptr == e;
}

// Period labels are integers or ISO dates (YYYY-MM-DD, mapped to days since
// 1970-01-01). The key orders periods; the label is kept verbatim.
bool parse_period_key(const std::string& label, long long& key) {
    if (parse_long_long(label, key)) return true;
    if (label.size() == 10 && label[4] == '-' && label[7] == '-') {
        long long y, m, d;
        if (!parse_long_long(label.substr(0, 4), y) ||
            !parse_long_long(label.substr(5, 2), m) ||
            !parse_long_long(label.substr(8, 2), d))
            return false;
        if (m < 1 || m > 12 || d < 1 || d > 31) return false;
        // days-from-civil (Howard Hinnant's algorithm)
        y -= m <= 2;
        const long long era = (y >= 0 ? y : y - 399) / 400;
        const long long yoe = y - era * 400;
        const long long doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
        const long long doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
        key = era * 146097 + doe - 719468;
        return true;
    }
    return false;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* b = s.data();
    auto res = std::from_chars(b, b + s.size(), out);
    return res.ec == std::errc() && res.ptr == b + s.size();
}

bool parse_bool(const std::string& s, bool& out) {
    if (s == "0" || s == "false" || s == "FALSE" || s == "False") { out = false; return true; }
    if (s == "1" || s == "true" || s == "TRUE" || s == "True") { out = true; return true; }
    return false;
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
    return lines;
}

struct PeriodTable {
    std::vector<std::string> labels;    // sorted by key
    std::vector<long long> keys;
    std::map<std::string, int> index;
};

PeriodTable build_period_table(const std::vector<std::pair<std::string, long long>>& seen) {
    PeriodTable t;
    std::vector<std::pair<long long, std::string>> order;
    order.reserve(seen.size());
    for (const auto& [label, key] : seen) order.emplace_back(key, label);
    std::sort(order.begin(), order.end());
    for (const auto& [key, label] : order) {
        t.index[label] = static_cast<int>(t.labels.size());
        t.labels.push_back(label);
        t.keys.push_back(key);
    }
    return t;
}

PanelData load_long(const std::string& path) {
    const auto lines = read_lines(path);
    if (lines.empty()) throw std::invalid_argument(path + ": empty file");
    const auto header = split_csv_line(lines[0]);
    int c_unit = -1, c_period = -1, c_outcome = -1, c_treated = -1;
    for (int i = 0; i < static_cast<int>(header.size()); ++i) {
        if (header[i] == "unit") c_unit = i;
        else if (header[i] == "period") c_period = i;
        else if (header[i] == "outcome") c_outcome = i;
        else if (header[i] == "treated") c_treated = i;
    }
    if (c_unit < 0 || c_period < 0 || c_outcome < 0)
        throw std::invalid_argument(path + ": header must contain unit,period,outcome");

    struct Row { std::string unit, period; double outcome; bool treated; };
    std::vector<Row> rows;
    std::map<std::string, long long> period_keys;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        if (trim(lines[r]).empty()) continue;
        const auto f = split_csv_line(lines[r]);
        const std::size_t need = static_cast<std::size_t>(
            std::max(std::max(c_unit, c_period), std::max(c_outcome, c_treated))) + 1;
        if (f.size() < need)
            throw std::invalid_argument(path + ": row " + std::to_string(r + 1) +
                                        ": expected " + std::to_string(need) + " fields");
        Row row;
        row.unit = f[c_unit];
        row.period = f[c_period];
        if (row.unit.empty()) cell_error(path, r + 1, "unit", "empty unit id");
        long long key;
        if (!parse_period_key(row.period, key))
            cell_error(path, r + 1, "period", "unrecognized period label '" + row.period + "'");
        const auto it = period_keys.find(row.period);
        if (it == period_keys.end()) period_keys[row.period] = key;
        if (!parse_double(f[c_outcome], row.outcome))
            cell_error(path, r + 1, "outcome",
                       "non-numeric outcome '" + f[c_outcome] + "' for unit '" + row.unit +
                       "', period '" + row.period + "'");
        row.treated = false;
        if (c_treated >= 0 && !parse_bool(f[c_treated], row.treated))
            cell_error(path, r + 1, "treated", "expected 0/1, got '" + f[c_treated] + "'");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::invalid_argument(path + ": no data rows");

    std::vector<std::pair<std::string, long long>> seen(period_keys.begin(), period_keys.end());
    PeriodTable periods = build_period_table(seen);

    std::vector<std::string> unit_ids;
    std::map<std::string, int> unit_index;
    for (const auto& row : rows)
        if (unit_index.emplace(row.unit, static_cast<int>(unit_ids.size())).second)
            unit_ids.push_back(row.unit);

    const auto n = static_cast<Eigen::Index>(unit_ids.size());
    const auto T = static_cast<Eigen::Index>(periods.labels.size());
    PanelData p;
    p.outcomes.resize(n, T);
    p.treated = BoolMatrix::Constant(n, T, false);
    p.unit_ids = unit_ids;
    p.period_ids = periods.labels;
    p.period_keys = periods.keys;

    BoolMatrix filled = BoolMatrix::Constant(n, T, false);
    for (const auto& row : rows) {
        const int i = unit_index[row.unit];
        const int t = periods.index[row.period];
        if (filled(i, t))
            throw std::invalid_argument(path + ": duplicate observation for unit '" +
                                        row.unit + "', period '" + row.period + "'");
        filled(i, t) = true;
        p.outcomes(i, t) = row.outcome;
        p.treated(i, t) = row.treated;
    }
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index t = 0; t < T; ++t)
            if (!filled(i, t))
                throw std::invalid_argument(path + ": unbalanced panel, unit '" + unit_ids[i] +
                                            "' missing period '" + periods.labels[t] + "'");
    return p;
}

PanelData load_wide(const std::string& path, const std::optional<std::string>& treatment_path) {
    const auto lines = read_lines(path);
    if (lines.empty()) throw std::invalid_argument(path + ": empty file");
    const auto header = split_csv_line(lines[0]);
    if (header.size() < 2 || header[0] != "unit")
        throw std::invalid_argument(path + ": wide header must start with 'unit'");

    std::vector<std::pair<std::string, long long>> seen;
    for (std::size_t c = 1; c < header.size(); ++c) {
        long long key;
        if (!parse_period_key(header[c], key))
            cell_error(path, 1, header[c], "unrecognized period label");
        seen.emplace_back(header[c], key);
    }
    {
        std::set<std::string> labels;
        for (const auto& [label, key] : seen)
            if (!labels.insert(label).second)
                throw std::invalid_argument(path + ": duplicate period column '" + label + "'");
    }
    PeriodTable periods = build_period_table(seen);

    std::vector<std::string> unit_ids;
    std::map<std::string, int> unit_index;
    std::vector<std::vector<double>> values;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        if (trim(lines[r]).empty()) continue;
        const auto f = split_csv_line(lines[r]);
        if (f.size() != header.size())
            throw std::invalid_argument(path + ": row " + std::to_string(r + 1) + ": expected " +
                                        std::to_string(header.size()) + " fields, got " +
                                        std::to_string(f.size()));
        if (f[0].empty()) cell_error(path, r + 1, "unit", "empty unit id");
        if (!unit_index.emplace(f[0], static_cast<int>(unit_ids.size())).second)
            throw std::invalid_argument(path + ": duplicate unit '" + f[0] + "'");
        unit_ids.push_back(f[0]);
        std::vector<double> row(periods.labels.size());
        for (std::size_t c = 1; c < header.size(); ++c) {
            double v;
            if (!parse_double(f[c], v))
                cell_error(path, r + 1, header[c],
                           "non-numeric outcome '" + f[c] + "' for unit '" + f[0] + "'");
            row[periods.index[header[c]]] = v;
        }
        values.push_back(std::move(row));
    }
    if (unit_ids.empty()) throw std::invalid_argument(path + ": no data rows");

    const auto n = static_cast<Eigen::Index>(unit_ids.size());
    const auto T = static_cast<Eigen::Index>(periods.labels.size());
    PanelData p;
    p.outcomes.resize(n, T);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index t = 0; t < T; ++t) p.outcomes(i, t) = values[i][t];
    p.treated = BoolMatrix::Constant(n, T, false);
    p.unit_ids = unit_ids;
    p.period_ids = periods.labels;
    p.period_keys = periods.keys;

    if (treatment_path) {
        const auto tl = read_lines(*treatment_path);
        if (tl.empty()) throw std::invalid_argument(*treatment_path + ": empty file");
        const auto th = split_csv_line(tl[0]);
        if (th.size() != 2 || th[0] != "unit" || th[1] != "first_treated_period")
            throw std::invalid_argument(*treatment_path +
                                        ": header must be unit,first_treated_period");
        for (std::size_t r = 1; r < tl.size(); ++r) {
            if (trim(tl[r]).empty()) continue;
            const auto f = split_csv_line(tl[r]);
            if (f.size() != 2)
                throw std::invalid_argument(*treatment_path + ": row " + std::to_string(r + 1) +
                                            ": expected 2 fields");
            const auto ui = unit_index.find(f[0]);
            if (ui == unit_index.end())
                cell_error(*treatment_path, r + 1, "unit", "unknown unit '" + f[0] + "'");
            const auto pi = periods.index.find(f[1]);
            if (pi == periods.index.end())
                cell_error(*treatment_path, r + 1, "first_treated_period",
                           "unknown period '" + f[1] + "'");
            for (int t = pi->second; t < T; ++t) p.treated(ui->second, t) = true;
        }
    }
    return p;
}

std::string format_double(double v);

}  // namespace

int PanelData::unit_index(const std::string& id) const {
    for (std::size_t i = 0; i < unit_ids.size(); ++i)
        if (unit_ids[i] == id) return static_cast<int>(i);
    throw std::invalid_argument("unknown unit id: " + id);
}

int PanelData::period_index(const std::string& label) const {
    for (std::size_t t = 0; t < period_ids.size(); ++t)
        if (period_ids[t] == label) return static_cast<int>(t);
    throw std::invalid_argument("unknown period label: " + label);
}

PanelData load_panel(const std::string& path, PanelFormat format,
                     const std::optional<std::string>& treatment_path) {
    return format == PanelFormat::long_csv ? load_long(path)
                                           : load_wide(path, treatment_path);
}

namespace {

std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace

void save_panel(const PanelData& panel, const std::string& path, PanelFormat format,
                const std::optional<std::string>& treatment_path) {
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot write file: " + path);
    if (format == PanelFormat::long_csv) {
        out << "unit,period,outcome,treated\n";
        for (Eigen::Index i = 0; i < panel.n_units(); ++i)
            for (Eigen::Index t = 0; t < panel.n_periods(); ++t)
                out << panel.unit_ids[i] << ',' << panel.period_ids[t] << ','
                    << format_double(panel.outcomes(i, t)) << ','
                    << (panel.treated(i, t) ? 1 : 0) << '\n';
        return;
    }
    out << "unit";
    for (const auto& pid : panel.period_ids) out << ',' << pid;
    out << '\n';
    for (Eigen::Index i = 0; i < panel.n_units(); ++i) {
        out << panel.unit_ids[i];
        for (Eigen::Index t = 0; t < panel.n_periods(); ++t)
            out << ',' << format_double(panel.outcomes(i, t));
        out << '\n';
    }
    if (treatment_path) {
        std::ofstream tout(*treatment_path);
        if (!tout) throw std::invalid_argument("cannot write file: " + *treatment_path);
        tout << "unit,first_treated_period\n";
        for (Eigen::Index i = 0; i < panel.n_units(); ++i) {
            int first = -1;
            for (Eigen::Index t = 0; t < panel.n_periods(); ++t) {
                if (panel.treated(i, t)) { first = static_cast<int>(t); break; }
            }
            if (first < 0) continue;
            for (Eigen::Index t = first; t < panel.n_periods(); ++t)
                if (!panel.treated(i, t))
                    throw std::invalid_argument(
                        "treatment pattern for unit '" + panel.unit_ids[i] +
                        "' is not an absorbing state, cannot write sidecar");
            tout << panel.unit_ids[i] << ',' << panel.period_ids[first] << '\n';
        }
    } else {
        if (panel.treated.any())
            throw std::invalid_argument(
                "wide format needs a treatment sidecar path for treated panels");
    }
}

std::vector<RoleViolation> validate_roles(const PanelData& panel, const RoleAssignment& roles) {
    std::vector<RoleViolation> v;
    const auto n = panel.n_units();
    const auto T = panel.n_periods();
    auto unit_label = [&](int i) {
        return i >= 0 && i < n ? panel.unit_ids[i] : "#" + std::to_string(i);
    };
    auto period_label = [&](int t) {
        return t >= 0 && t < T ? panel.period_ids[t] : "#" + std::to_string(t);
    };
    auto in_bounds_unit = [&](int i) { return i >= 0 && i < n; };
    auto in_bounds_period = [&](int t) { return t >= 0 && t < T; };

    if (!in_bounds_unit(roles.unit_of_interest))
        v.push_back({"bounds", unit_label(roles.unit_of_interest), "",
                     "unit_of_interest out of bounds"});
    for (int i : roles.controls)
        if (!in_bounds_unit(i)) v.push_back({"bounds", unit_label(i), "", "control out of bounds"});
    for (int i : roles.instruments)
        if (!in_bounds_unit(i))
            v.push_back({"bounds", unit_label(i), "", "instrument out of bounds"});
    for (int t : roles.pre_periods)
        if (!in_bounds_period(t))
            v.push_back({"bounds", "", period_label(t), "pre period out of bounds"});
    for (int t : roles.post_periods)
        if (!in_bounds_period(t))
            v.push_back({"bounds", "", period_label(t), "post period out of bounds"});
    if (!v.empty()) return v;

    if (roles.controls.empty())
        v.push_back({"roles", "", "", "control set is empty"});
    if (roles.pre_periods.empty())
        v.push_back({"periods", "", "", "pre-period set is empty"});

    std::set<int> ctrl(roles.controls.begin(), roles.controls.end());
    std::set<int> inst(roles.instruments.begin(), roles.instruments.end());
    if (ctrl.size() != roles.controls.size())
        v.push_back({"roles", "", "", "duplicate unit in controls"});
    if (inst.size() != roles.instruments.size())
        v.push_back({"roles", "", "", "duplicate unit in instruments"});
    for (int i : roles.controls)
        if (inst.count(i))
            v.push_back({"roles", unit_label(i), "", "unit is both control and instrument"});
    if (ctrl.count(roles.unit_of_interest))
        v.push_back({"roles", unit_label(roles.unit_of_interest), "",
                     "unit of interest listed as control"});
    if (inst.count(roles.unit_of_interest))
        v.push_back({"roles", unit_label(roles.unit_of_interest), "",
                     "unit of interest listed as instrument"});

    std::set<int> pre(roles.pre_periods.begin(), roles.pre_periods.end());
    std::set<int> post(roles.post_periods.begin(), roles.post_periods.end());
    for (int t : roles.pre_periods)
        if (post.count(t))
            v.push_back({"periods", "", period_label(t), "period is both pre and post"});
    if (!pre.empty() && !post.empty() && *pre.rbegin() > *post.begin())
        v.push_back({"periods", "", period_label(*pre.rbegin()),
                     "pre period after first post period"});

    for (int t : roles.pre_periods) {
        if (panel.treated(roles.unit_of_interest, t))
            v.push_back({"treatment", unit_label(roles.unit_of_interest), period_label(t),
                         "unit of interest treated in a pre period"});
        for (int i : roles.controls)
            if (panel.treated(i, t))
                v.push_back({"treatment", unit_label(i), period_label(t),
                             "control treated in a pre period"});
        for (int i : roles.instruments)
            if (panel.treated(i, t))
                v.push_back({"treatment", unit_label(i), period_label(t),
                             "instrument treated in a pre period"});
    }
    for (int t : roles.post_periods)
        for (int i : roles.controls)
            if (panel.treated(i, t))
                v.push_back({"treatment", unit_label(i), period_label(t),
                             "control treated in a post period"});
    return v;
}

void require_valid_roles(const PanelData& panel, const RoleAssignment& roles) {
    const auto violations = validate_roles(panel, roles);
    if (violations.empty()) return;
    std::string msg = "invalid role assignment:";
    for (const auto& violation : violations) {
        msg += "\n  [" + violation.rule + "] " + violation.message;
        if (!violation.unit.empty()) msg += " (unit " + violation.unit + ")";
        if (!violation.period.empty()) msg += " (period " + violation.period + ")";
    }
    throw std::invalid_argument(msg);
}

RoleAssignment make_roles(const PanelData& panel, const std::string& unit,
                          const std::vector<std::string>& control_ids,
                          const std::vector<std::string>& instrument_ids,
                          const std::optional<std::string>& first_post) {
    RoleAssignment r;
    r.unit_of_interest = panel.unit_index(unit);
    for (const auto& id : control_ids) r.controls.push_back(panel.unit_index(id));
    for (const auto& id : instrument_ids) r.instruments.push_back(panel.unit_index(id));

    int boundary = -1;
    if (first_post) {
        boundary = panel.period_index(*first_post);
    } else {
        for (Eigen::Index t = 0; t < panel.n_periods(); ++t)
            if (panel.treated(r.unit_of_interest, t)) { boundary = static_cast<int>(t); break; }
        if (boundary < 0)
            throw std::invalid_argument(
                "unit '" + unit + "' is never treated; a first post period is required");
    }
    for (int t = 0; t < boundary; ++t) r.pre_periods.push_back(t);
    for (int t = boundary; t < panel.n_periods(); ++t) r.post_periods.push_back(t);
    return r;
}

}  // namespace ivsynth
