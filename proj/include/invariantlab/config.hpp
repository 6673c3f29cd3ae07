#pragma once

// Run configuration: line-oriented key=value text with optional [section]
// grouping (sections are structural only; every key lives in one flat
// namespace).  '#' starts a comment.  Parsing validates everything it can
// and reports all problems at once, each tagged with its line number.
//
// Keys:
//   command        one of the subcommand names (may instead come from argv)
//   map, map2      map literals (see the map-literal grammar in maps.hpp)
//   U              domain literal  ball:CENTER,RADIUS  (center on every axis)
//   mu             damping schedule: 1-2^-j:N  or  [a,b,...] inside (0,1)
//   epsilon, spacing, t_tol, cauchy_tol, n0_cap      invariant-set pipeline
//   delta, stencil_radius, nmax                      recurrence / classification
//   degree, num_random, tau                          hull testing
//   R, half, per_axis, slice_half, slice_nx, slice_ny, escape_radius   escape grids
//   steps          iteration count for decay / core commands
//   cesaro_n       averaging length for linearization
//   out, seed, threads                               artifact plumbing

#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "invariantlab/birkhoff.hpp"
#include "invariantlab/io.hpp"
#include "invariantlab/maps.hpp"

namespace invariantlab {

inline const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names = {
        "henon-k",  "birkhoff", "classify",       "hull-test",
        "linearize", "decay",    "core-intersect", "shared-k"};
    return names;
}

struct ConfigError {
    int line = 0;  // 0 = whole-file problem
    std::string message;
    std::string render() const {
        return (line > 0 ? "line " + std::to_string(line) + ": " : std::string()) + message;
    }
};

struct ConfigParseError : InvalidInputError {
    std::vector<ConfigError> errors;
    explicit ConfigParseError(std::vector<ConfigError> errs)
        : InvalidInputError(join(errs)), errors(std::move(errs)) {}

  private:
    static std::string join(const std::vector<ConfigError>& errs) {
        std::string s = "config has " + std::to_string(errs.size()) + " problem" +
                        (errs.size() == 1 ? "" : "s");
        for (const ConfigError& e : errs) s += "\n  " + e.render();
        return s;
    }
};

struct RunConfig {
    std::string command;  // empty until chosen by key or argv
    std::string map_literal;
    std::string map2_literal;
    std::string domain_literal;  // "ball:c,r"; realized once the dimension is known
    std::vector<double> mu;      // empty = default damping schedule

    std::optional<double> epsilon, spacing, t_tol, cauchy_tol;
    std::optional<int> n0_cap;
    std::optional<double> delta, stencil_radius;
    std::optional<int> nmax;
    std::optional<int> degree;
    std::optional<int64_t> num_random;
    std::optional<double> tau;
    std::optional<double> R, half, slice_half, escape_radius;
    std::optional<int64_t> per_axis, slice_nx, slice_ny;
    std::optional<int> steps, cesaro_n;
    std::optional<OrbitDirection> direction;

    std::string out = "out";
    uint64_t seed = 0;
    int threads = 0;  // 0 = environment / hardware default

    std::map<std::string, std::string> provided;  // raw key=value echo, key-sorted

    // The configured domain at dimension k (default: origin ball of the given
    // radius).  The literal is syntax-checked at parse time, so this cannot
    // fail on a parsed config.
    DomainShape domain_for(int k, double default_radius) const {
        if (domain_literal.empty())
            return DomainShape::ball(CVec::zero(k), default_radius);
        size_t colon = domain_literal.find(':');
        std::string args = domain_literal.substr(colon + 1);
        size_t comma = args.find(',');
        double c = std::strtod(args.substr(0, comma).c_str(), nullptr);
        double r = std::strtod(args.substr(comma + 1).c_str(), nullptr);
        CVec center(k);
        for (int j = 0; j < k; ++j) center[j] = c;
        return DomainShape::ball(center, r);
    }
};

namespace detail {

inline bool parse_int_exact(const std::string& s, int64_t& out) {
    if (s.empty()) return false;
    size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
    if (i == s.size()) return false;
    for (size_t j = i; j < s.size(); ++j)
        if (!std::isdigit(static_cast<unsigned char>(s[j]))) return false;
    try {
        out = std::stoll(s);
    } catch (const std::exception&) {
        return false;
    }
    return true;
}

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace detail

inline RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    std::vector<ConfigError> errors;
    int lineno = 0;

    auto err = [&](const std::string& msg) { errors.push_back({lineno, msg}); };

    auto parse_double_field = [&](const std::string& value, std::optional<double>& slot,
                                  const char* key, bool positive) {
        double v;
        if (!detail::parse_double_exact(value, v)) {
            err(std::string(key) + ": expected a number, got '" + value + "'");
            return;
        }
        if (positive && !(v > 0)) {
            err(std::string(key) + " must be positive, got " + value);
            return;
        }
        if (!positive && v < 0) {
            err(std::string(key) + " must be >= 0, got " + value);
            return;
        }
        slot = v;
    };

    auto parse_count_field = [&](const std::string& value, auto& slot, const char* key,
                                 int64_t min_value) {
        int64_t v;
        if (!detail::parse_int_exact(value, v)) {
            err(std::string(key) + ": expected an integer, got '" + value + "'");
            return;
        }
        if (v < min_value) {
            err(std::string(key) + " must be >= " + std::to_string(min_value) + ", got " +
                value);
            return;
        }
        slot = static_cast<typename std::decay_t<decltype(slot)>::value_type>(v);
    };

    auto parse_mu = [&](const std::string& value) {
        std::vector<double> sched;
        if (value.rfind("1-2^-j:", 0) == 0) {
            int64_t n;
            if (!detail::parse_int_exact(value.substr(7), n) || n < 1 || n > 40) {
                err("mu: stage count in '1-2^-j:N' must be an integer in [1, 40]");
                return;
            }
            cfg.mu = default_mu_schedule(static_cast<int>(n));
            return;
        }
        if (value.size() >= 2 && value.front() == '[' && value.back() == ']') {
            for (const std::string& part :
                 detail::split_on(value.substr(1, value.size() - 2), ',')) {
                double v;
                if (!detail::parse_double_exact(part, v)) {
                    err("mu: expected a number, got '" + part + "'");
                    return;
                }
                sched.push_back(v);
            }
            if (sched.empty()) {
                err("mu: schedule must not be empty");
                return;
            }
            double prev = 0;
            for (double v : sched) {
                if (!(v > 0 && v < 1)) {
                    char buf[40];
                    std::snprintf(buf, sizeof(buf), "%g", v);
                    err("mu values must lie in (0,1), got " + std::string(buf));
                    return;
                }
                if (!(v > prev)) {
                    err("mu schedule must be strictly increasing");
                    return;
                }
                prev = v;
            }
            cfg.mu = sched;
            return;
        }
        err("mu: expected '1-2^-j:N' or a bracketed list like [0.5,0.75]");
    };

    auto parse_domain = [&](const std::string& value) {
        if (value.rfind("ball:", 0) != 0) {
            err("U: expected 'ball:CENTER,RADIUS', got '" + value + "'");
            return;
        }
        std::vector<std::string> parts = detail::split_on(value.substr(5), ',');
        double c, r;
        if (parts.size() != 2 || !detail::parse_double_exact(parts[0], c) ||
            !detail::parse_double_exact(parts[1], r)) {
            err("U: expected two numbers after 'ball:', got '" + value + "'");
            return;
        }
        if (!(r > 0)) {
            err("U: ball radius must be positive");
            return;
        }
        cfg.domain_literal = value;
    };

    auto parse_map_field = [&](const std::string& value, std::string& slot, const char* key) {
        try {
            (void)parse_map(value);
            slot = value;
        } catch (const std::exception& e) {
            err(std::string(key) + ": " + e.what());
        }
    };

    size_t start = 0;
    while (start < text.size()) {
        ++lineno;
        size_t nl = text.find('\n', start);
        std::string line = text.substr(start, nl == std::string::npos ? std::string::npos
                                                                      : nl - start);
        start = (nl == std::string::npos) ? text.size() : nl + 1;
        line = detail::trim(line);
        if (line.empty() || line[0] == '#') continue;

        if (line.front() == '[') {
            if (line.back() != ']') {
                err("unterminated section header '" + line + "'");
                continue;
            }
            std::string name = detail::trim(line.substr(1, line.size() - 2));
            bool known = false;
            for (const std::string& c : command_names()) known = known || c == name;
            if (!known) err("unknown section [" + name + "]");
            continue;  // sections only group lines; keys stay global
        }

        size_t eq = line.find('=');
        if (eq == std::string::npos) {
            err("expected key=value, got '" + line + "'");
            continue;
        }
        std::string key = detail::trim(line.substr(0, eq));
        std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty()) {
            err("missing key before '='");
            continue;
        }
        std::string canonical = (key == "mu_schedule") ? "mu" : key;
        if (cfg.provided.count(canonical)) {
            err("duplicate key '" + canonical + "'");
            continue;
        }
        cfg.provided[canonical] = value;

        if (key == "command") {
            bool known = false;
            for (const std::string& c : command_names()) known = known || c == value;
            if (known)
                cfg.command = value;
            else
                err("unknown command '" + value + "'");
        } else if (key == "map") {
            parse_map_field(value, cfg.map_literal, "map");
        } else if (key == "map2") {
            parse_map_field(value, cfg.map2_literal, "map2");
        } else if (key == "U") {
            parse_domain(value);
        } else if (key == "mu" || key == "mu_schedule") {
            parse_mu(value);
        } else if (key == "epsilon") {
            parse_double_field(value, cfg.epsilon, "epsilon", true);
        } else if (key == "spacing") {
            parse_double_field(value, cfg.spacing, "spacing", true);
        } else if (key == "t_tol") {
            parse_double_field(value, cfg.t_tol, "t_tol", true);
        } else if (key == "cauchy_tol") {
            parse_double_field(value, cfg.cauchy_tol, "cauchy_tol", true);
        } else if (key == "n0_cap") {
            parse_count_field(value, cfg.n0_cap, "n0_cap", 1);
        } else if (key == "delta") {
            parse_double_field(value, cfg.delta, "delta", true);
        } else if (key == "stencil_radius") {
            parse_double_field(value, cfg.stencil_radius, "stencil_radius", true);
        } else if (key == "nmax") {
            parse_count_field(value, cfg.nmax, "nmax", 0);
        } else if (key == "degree") {
            parse_count_field(value, cfg.degree, "degree", 1);
        } else if (key == "num_random") {
            parse_count_field(value, cfg.num_random, "num_random", 0);
        } else if (key == "tau") {
            parse_double_field(value, cfg.tau, "tau", false);
        } else if (key == "R") {
            parse_double_field(value, cfg.R, "R", true);
        } else if (key == "half") {
            parse_double_field(value, cfg.half, "half", true);
        } else if (key == "slice_half") {
            parse_double_field(value, cfg.slice_half, "slice_half", true);
        } else if (key == "escape_radius") {
            parse_double_field(value, cfg.escape_radius, "escape_radius", true);
        } else if (key == "per_axis") {
            parse_count_field(value, cfg.per_axis, "per_axis", 2);
        } else if (key == "slice_nx") {
            parse_count_field(value, cfg.slice_nx, "slice_nx", 2);
        } else if (key == "slice_ny") {
            parse_count_field(value, cfg.slice_ny, "slice_ny", 2);
        } else if (key == "steps") {
            parse_count_field(value, cfg.steps, "steps", 0);
        } else if (key == "cesaro_n") {
            parse_count_field(value, cfg.cesaro_n, "cesaro_n", 1);
        } else if (key == "direction") {
            if (value == "forward")
                cfg.direction = OrbitDirection::Forward;
            else if (value == "backward")
                cfg.direction = OrbitDirection::Backward;
            else
                err("direction must be 'forward' or 'backward', got '" + value + "'");
        } else if (key == "out") {
            if (value.empty())
                err("out must not be empty");
            else
                cfg.out = value;
        } else if (key == "seed") {
            if (value.empty() || value[0] == '-' ||
                value.find_first_not_of("0123456789") != std::string::npos) {
                err("seed: expected a non-negative integer, got '" + value + "'");
            } else {
                try {
                    cfg.seed = std::stoull(value);
                } catch (const std::exception&) {
                    err("seed: value out of range: '" + value + "'");
                }
            }
        } else if (key == "threads") {
            int64_t v;
            if (!detail::parse_int_exact(value, v) || v < 1)
                err("threads must be a positive integer, got '" + value + "'");
            else
                cfg.threads = static_cast<int>(v);
        } else {
            err("unknown key '" + key + "'");
        }
    }

    lineno = 0;
    if (!cfg.provided.count("map") && !errors.empty()) {
        // a file full of other errors still gets the missing-key note
        errors.push_back({0, "missing required key: map"});
    } else if (!cfg.provided.count("map")) {
        errors.push_back({0, "missing required key: map (also accepted: command, U, mu, "
                             "and the per-command tuning keys; see the README)"});
    }

    if (!errors.empty()) throw ConfigParseError(std::move(errors));
    return cfg;
}

}  // namespace invariantlab
