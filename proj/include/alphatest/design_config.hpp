#pragma once

#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "alphatest/csv_io.hpp"
#include "alphatest/error.hpp"
#include "alphatest/mc_lab.hpp"

namespace alphatest::mc {

/// A design plus the run settings, as read from a key = value file.
///
///   name          free text
///   covariance    case1 | case2 | ar1
///   delta_gamma   real or fraction, e.g. 1/4
///   ar1_rho       real (0.6)
///   case2_rho     real (0.5)
///   errors        gaussian | t3 | arch
///   innovation    normal | t3            (arch only)
///   scenario      null | s1 | s2 | fig1
///   k             integer                (fig1 only)
///   signals       comma list of reals
///   N, T          integers
///   draws         per_replicate | once
///   tests         comma list: PY, MAX, COM, FLY, AT(K), G(k), COIN
///   replications, B, seed   integers
///   level         real (0.05)
///   threads       integer, 0 = all cores
///
/// Blank lines and text after '#' are ignored.
struct ExperimentConfig {
    Design design;
    ExperimentOptions options;
};

inline double parse_fraction(const std::string& key, const std::string& v) {
    try {
        const auto slash = v.find('/');
        if (slash != std::string::npos) return std::stod(v.substr(0, slash)) / std::stod(v.substr(slash + 1));
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        fail(ErrorCode::ParseError, "design key '" + key + "': not a number: '" + v + "'");
    }
}

inline Index parse_integer(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const long long x = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return static_cast<Index>(x);
    } catch (const std::exception&) {
        fail(ErrorCode::ParseError, "design key '" + key + "': not an integer: '" + v + "'");
    }
}

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::string cur;
    int depth = 0;
    for (char c : v) {
        if (c == '(') ++depth;
        if (c == ')') --depth;
        if (c == ',' && depth == 0) {
            if (!io::trim(cur).empty()) out.push_back(io::trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!io::trim(cur).empty()) out.push_back(io::trim(cur));
    return out;
}

inline ExperimentConfig parse_design(std::istream& in) {
    ExperimentConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (io::trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            fail(ErrorCode::ParseError, "design line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = io::trim(line.substr(0, eq));
        const std::string v = io::trim(line.substr(eq + 1));
        auto& d = cfg.design;
        auto& o = cfg.options;
        auto bad = [&] { fail(ErrorCode::ParseError, "design key '" + key + "': unknown value '" + v + "'"); };

        if (key == "name") {
            d.name = v;
        } else if (key == "covariance") {
            if (v == "case1") d.covariance.kind = CovarianceCase::case1;
            else if (v == "case2") d.covariance.kind = CovarianceCase::case2;
            else if (v == "ar1") d.covariance.kind = CovarianceCase::ar1;
            else bad();
        } else if (key == "delta_gamma") {
            d.covariance.delta_gamma = parse_fraction(key, v);
        } else if (key == "ar1_rho") {
            d.covariance.ar1_rho = parse_fraction(key, v);
        } else if (key == "case2_rho") {
            d.covariance.case2_rho = parse_fraction(key, v);
        } else if (key == "errors") {
            if (v == "gaussian") d.errors.family = ErrorFamily::gaussian;
            else if (v == "t3") d.errors.family = ErrorFamily::student_t3;
            else if (v == "arch") d.errors.family = ErrorFamily::arch;
            else bad();
        } else if (key == "innovation") {
            if (v == "normal") d.errors.innovation = Innovation::normal;
            else if (v == "t3") d.errors.innovation = Innovation::t3;
            else bad();
        } else if (key == "scenario") {
            if (v == "null") d.scenario.kind = ScenarioKind::null;
            else if (v == "s1") d.scenario.kind = ScenarioKind::s1;
            else if (v == "s2") d.scenario.kind = ScenarioKind::s2;
            else if (v == "fig1") d.scenario.kind = ScenarioKind::fig1;
            else bad();
        } else if (key == "k") {
            d.scenario.k = parse_integer(key, v);
        } else if (key == "signals") {
            d.signals.clear();
            for (const auto& s : split_list(v)) d.signals.push_back(parse_fraction(key, s));
        } else if (key == "N") {
            d.n_assets = parse_integer(key, v);
        } else if (key == "T") {
            d.n_periods = parse_integer(key, v);
        } else if (key == "draws") {
            if (v == "per_replicate") d.redraw_per_replicate = true;
            else if (v == "once") d.redraw_per_replicate = false;
            else bad();
        } else if (key == "tests") {
            o.tests = split_list(v);
        } else if (key == "replications") {
            o.replications = parse_integer(key, v);
        } else if (key == "B") {
            o.B = parse_integer(key, v);
        } else if (key == "seed") {
            o.seed = static_cast<std::uint64_t>(parse_integer(key, v));
        } else if (key == "level") {
            o.level = parse_fraction(key, v);
        } else if (key == "threads") {
            o.threads = static_cast<std::size_t>(parse_integer(key, v));
        } else {
            fail(ErrorCode::ParseError, "design line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
    }
    // Validate test names early.
    pipeline_for_tests(cfg.options.tests, cfg.options.pipeline);
    return cfg;
}

inline ExperimentConfig read_design(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot open " + path);
    return parse_design(in);
}

}  // namespace alphatest::mc
