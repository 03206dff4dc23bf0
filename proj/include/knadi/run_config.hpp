#pragma once

#include <cstdlib>
#include <fstream>
#include <optional>
#include <string>

#include "knadi/errors.hpp"
#include "knadi/newton.hpp"
#include "knadi/problem_gen.hpp"

// Plain key=value run configuration shared by the config-file parser and the
// command-line flags (flags apply the same keys, later wins). Unknown keys
// are rejected, not ignored.

namespace knadi {

struct RunConfig {
    // input matrices (paths); g and k0 are optional
    std::string m_path, a_path, g_path, b_path, c_path, k0_path;
    double alpha = 1.0;
    bool auto_k0 = false;  // derive K0 from the dense desk-scale design

    // outputs
    std::string out_k = "K.mtx";
    std::string out_z;
    std::string out_log;
    std::string out_dir = ".";

    // generated problems (generate/bench)
    ProblemSpec problem;

    // bench
    std::string setups = "i,ii,iii,iv,v";

    SolverConfig solver;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const char* ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

inline double config_double(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0') throw ParseError("config: bad number for " + key + ": '" + v + "'");
    return x;
}

inline int config_int(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const long x = std::strtol(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0') throw ParseError("config: bad integer for " + key + ": '" + v + "'");
    return static_cast<int>(x);
}

inline bool config_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ParseError("config: bad boolean for " + key + ": '" + v + "'");
}

}  // namespace detail

// Apply a single key=value assignment. This is the one list of valid keys.
inline void apply_config_value(RunConfig& rc, const std::string& key, const std::string& value) {
    using detail::config_bool;
    using detail::config_double;
    using detail::config_int;
    SolverConfig& s = rc.solver;
    ProblemSpec& p = rc.problem;

    if (key == "m") rc.m_path = value;
    else if (key == "a") rc.a_path = value;
    else if (key == "g") rc.g_path = value;
    else if (key == "b") rc.b_path = value;
    else if (key == "c") rc.c_path = value;
    else if (key == "k0") rc.k0_path = value;
    else if (key == "alpha") { rc.alpha = config_double(key, value); p.alpha = rc.alpha; }
    else if (key == "auto_k0") rc.auto_k0 = config_bool(key, value);
    else if (key == "out_k") rc.out_k = value;
    else if (key == "out_z") rc.out_z = value;
    else if (key == "out_log") rc.out_log = value;
    else if (key == "out_dir") rc.out_dir = value;
    else if (key == "setups") rc.setups = value;

    else if (key == "family") {
        if (value == "stokes2d") p.family = ProblemSpec::Family::stokes2d;
        else if (value == "random_sparse") p.family = ProblemSpec::Family::random_sparse;
        else if (value == "diagonal") p.family = ProblemSpec::Family::diagonal;
        else if (value == "scalar") p.family = ProblemSpec::Family::scalar_unstable;
        else throw ParseError("config: unknown family '" + value + "'");
    }
    else if (key == "nx") p.nx = config_int(key, value);
    else if (key == "ny") p.ny = config_int(key, value);
    else if (key == "viscosity") p.viscosity = config_double(key, value);
    else if (key == "n_v") p.n_v = config_int(key, value);
    else if (key == "n_p") p.n_p = config_int(key, value);
    else if (key == "density") p.density = config_double(key, value);
    else if (key == "unstable") p.unstable = config_bool(key, value);
    else if (key == "mu") p.mu = config_double(key, value);
    else if (key == "n") p.n = config_int(key, value);
    else if (key == "seed") p.seed = static_cast<unsigned>(config_int(key, value));
    else if (key == "n_u") p.n_u = config_int(key, value);
    else if (key == "n_y") p.n_y = config_int(key, value);

    else if (key == "tol_newton") s.tol_newton = config_double(key, value);
    else if (key == "max_newton") s.max_newton = config_int(key, value);
    else if (key == "eta_bar") s.eta_bar = config_double(key, value);
    else if (key == "beta") s.beta = config_double(key, value);
    else if (key == "forcing") {
        if (value == "quadratic") s.forcing = ForcingRule::quadratic;
        else if (value == "constant") s.forcing = ForcingRule::constant;
        else throw ParseError("config: unknown forcing rule '" + value + "'");
    }
    else if (key == "eta_constant") s.eta_constant = config_double(key, value);
    else if (key == "line_search") {
        if (value == "armijo") s.line_search = LineSearchRule::armijo;
        else if (value == "polymin") s.line_search = LineSearchRule::polymin;
        else if (value == "none") s.line_search = LineSearchRule::none;
        else throw ParseError("config: unknown line_search rule '" + value + "'");
    }
    else if (key == "max_backtracks") s.max_backtracks = config_int(key, value);
    else if (key == "shifts") {
        if (value == "heuristic") s.shift_strategy = ShiftStrategy::heuristic;
        else if (value == "adaptive") s.shift_strategy = ShiftStrategy::adaptive;
        else throw ParseError("config: unknown shift strategy '" + value + "'");
    }
    else if (key == "k_plus") s.shift_counts.k_plus = config_int(key, value);
    else if (key == "k_minus") s.shift_counts.k_minus = config_int(key, value);
    else if (key == "n_shifts") s.shift_counts.n_shifts = config_int(key, value);
    else if (key == "pool_cap") s.shift_counts.pool_cap = config_int(key, value);
    else if (key == "adaptive_r_max") s.adaptive_r_max = config_int(key, value);
    else if (key == "shift_seed") s.shift_seed = static_cast<unsigned>(config_int(key, value));
    else if (key == "exact_start") s.exact_start = config_bool(key, value);
    else if (key == "exact_start_tol") s.exact_start_tol = config_double(key, value);
    else if (key == "exact_start_switch") s.exact_start_switch = config_double(key, value);
    else if (key == "adi_norm" || key == "newton_norm") {
        NormKind kind;
        if (value == "spectral") kind = NormKind::spectral;
        else if (value == "frobenius") kind = NormKind::frobenius;
        else throw ParseError("config: unknown norm '" + value + "'");
        (key == "adi_norm" ? s.adi_norm : s.newton_norm) = kind;
    }
    else if (key == "adi_max_steps") s.adi_max_steps = config_int(key, value);
    else if (key == "adi_growth_cap") s.adi_growth_cap = config_double(key, value);
    else if (key == "track_solution") s.track_solution = config_bool(key, value);
    else if (key == "compress") s.compress_factors = config_bool(key, value);
    else if (key == "compress_tol") s.compress_tol = config_double(key, value);
    else if (key == "fixed_adi_tol") s.fixed_adi_tol = config_double(key, value);
    else if (key == "explicit_residual") s.explicit_newton_residual = config_bool(key, value);
    else if (key == "dense_cap") s.dense_cap = config_int(key, value);
    else throw ParseError("config: unknown key '" + key + "'");
}

inline void apply_config_file(RunConfig& rc, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open config file");
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected key=value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw ParseError(path + ":" + std::to_string(lineno) + ": empty key");
        apply_config_value(rc, key, value);
    }
}

inline RunConfig parse_config_file(const std::string& path) {
    RunConfig rc;
    apply_config_file(rc, path);
    return rc;
}

}  // namespace knadi
