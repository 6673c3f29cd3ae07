#pragma once

// Command runner behind the command-line tool.  Each subcommand reads its
// parameters from a RunConfig, computes, and leaves artifacts in the output
// directory:
//
//   report.json   always (schema_version, version, command, seed, config echo,
//                 command-specific results); byte-identical for identical
//                 (config, seed) pairs, so reports never carry wall-clock data
//   error.json    instead of report.json when the computation fails
//   *.csv         point clouds in the cloud CSV format
//   *.pgm, *.ppm  escape renders and verdict overlays
//
// Exit codes: 0 success, 1 computation failure, 2 invalid input / config.

#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "invariantlab/birkhoff.hpp"
#include "invariantlab/classify.hpp"
#include "invariantlab/config.hpp"
#include "invariantlab/escape.hpp"
#include "invariantlab/hull.hpp"
#include "invariantlab/io.hpp"

namespace invariantlab {

using ordered_json = nlohmann::ordered_json;

namespace detail {

inline ordered_json json_point(const CVec& p) {
    ordered_json a = ordered_json::array();
    for (int j = 0; j < p.k; ++j) {
        a.push_back(p[j].real());
        a.push_back(p[j].imag());
    }
    return a;
}

inline ordered_json json_matrix(const CMatrix& m) {
    ordered_json rows = ordered_json::array();
    for (int i = 0; i < m.k; ++i) {
        ordered_json row = ordered_json::array();
        for (int j = 0; j < m.k; ++j)
            row.push_back(ordered_json::array({m(i, j).real(), m(i, j).imag()}));
        rows.push_back(row);
    }
    return rows;
}

inline ordered_json cloud_ref(const CompactCloud& c, const std::string& file) {
    ordered_json j;
    j["points"] = c.size();
    j["resolution"] = c.resolution;
    j["file"] = file;
    return j;
}

inline const AutomorphismChain& require_chain(const AnyMap& f, const char* who) {
    if (!is_chain(f))
        throw InvalidInputError(std::string(who) + " needs an invertible map chain");
    return std::get<AutomorphismChain>(f);
}

inline std::string join_path(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

inline void run_henon_k(const RunConfig& cfg, ordered_json& report) {
    AnyMap f = parse_map(cfg.map_literal);
    const AutomorphismChain& chain = require_chain(f, "henon-k");
    const int k = chain.k;
    const double R = cfg.R ? *cfg.R : filtration_radius(chain);
    const int nmax = cfg.nmax.value_or(200);
    const double half = cfg.half.value_or(R);
    const int64_t per_axis = cfg.per_axis.value_or(24);
    const double cutoff = cfg.escape_radius.value_or(kDefaultEscapeCutoff);

    GridSpec grid = GridSpec::box(k, half, per_axis);
    CompactCloud K = k_compact(f, grid, R, nmax, cutoff);
    write_cloud_csv(join_path(cfg.out, "K.csv"), K);

    report["R"] = R;
    report["nmax"] = nmax;
    report["grid"] = {{"per_axis", per_axis}, {"half", half}, {"samples", grid.total()}};
    report["K"] = cloud_ref(K, "K.csv");

    if (k == 2) {
        const double shalf = cfg.slice_half.value_or(half);
        const int64_t nx = cfg.slice_nx.value_or(256);
        const int64_t ny = cfg.slice_ny.value_or(256);
        GridSpec slice = GridSpec::real_slice(shalf, nx, ny);
        EscapeField fwd = escape_field(f, slice, R, nmax, OrbitDirection::Forward, cutoff);
        EscapeField bwd = escape_field(f, slice, R, nmax, OrbitDirection::Backward, cutoff);
        write_file(join_path(cfg.out, "kplus.pgm"), render_escape_pgm(fwd));
        write_file(join_path(cfg.out, "kminus.pgm"), render_escape_pgm(bwd));
        report["images"] = {{"half", shalf},
                            {"nx", nx},
                            {"ny", ny},
                            {"kplus", {{"file", "kplus.pgm"}, {"bounded", fwd.bounded_count()}}},
                            {"kminus", {{"file", "kminus.pgm"}, {"bounded", bwd.bounded_count()}}}};
    } else {
        report["images"] = nullptr;  // slice renders are defined for k = 2 only
    }
}

inline void run_birkhoff(const RunConfig& cfg, ordered_json& report) {
    AnyMap f = parse_map(cfg.map_literal);
    const AutomorphismChain& chain = require_chain(f, "birkhoff");

    BirkhoffConfig bc;
    bc.U = cfg.domain_for(chain.k, 1.0);
    if (!cfg.mu.empty()) bc.mu_schedule = cfg.mu;
    if (cfg.epsilon) bc.epsilon_B = *cfg.epsilon;
    if (cfg.spacing) bc.spacing = *cfg.spacing;
    if (cfg.t_tol) bc.t_tol = *cfg.t_tol;
    if (cfg.n0_cap) bc.n0_cap = *cfg.n0_cap;
    if (cfg.cauchy_tol) bc.hausdorff_cauchy_tol = *cfg.cauchy_tol;
    if (cfg.direction) bc.direction = *cfg.direction;

    BirkhoffResult res = birkhoff_limit(chain, bc);
    write_cloud_csv(join_path(cfg.out, "K.csv"), res.K);

    report["direction"] =
        res.direction == OrbitDirection::Forward ? "forward" : "backward";
    report["converged"] = res.converged;
    report["schedule_exhausted"] = res.schedule_exhausted;
    report["contains_zero"] = res.contains_zero;
    report["boundary_touch"] = res.touch.touches;
    report["connected"] = res.connectivity.connected;
    report["components"] = res.connectivity.components;
    report["k_defect"] = res.k_defect;
    ordered_json stages = ordered_json::array();
    for (const MuSummary& s : res.per_mu) {
        ordered_json j;
        j["mu"] = s.mu;
        j["epsilon_used"] = s.epsilon_used;
        j["n0"] = s.n0;
        j["t_bar"] = s.t_bar;
        j["points"] = s.points;
        j["defect"] = s.defect;
        j["connected"] = s.connected;
        j["contains_zero"] = s.contains_zero;
        stages.push_back(j);
    }
    report["per_mu"] = stages;
    report["deltas"] = res.deltas;
    report["notes"] = res.notes;
    report["K"] = detail::cloud_ref(res.K, "K.csv");
}

inline void run_classify(const RunConfig& cfg, ordered_json& report) {
    AnyMap f = parse_map(cfg.map_literal);
    const int k = map_dim(f);
    DomainShape U = cfg.domain_for(k, 1.0);
    const double spacing = cfg.spacing.value_or(0.2);
    const int nmax = cfg.nmax.value_or(20000);
    const double delta = cfg.delta.value_or(0.05);
    const double stencil_r = cfg.stencil_radius.value_or(delta);

    CompactCloud W = sample_domain(U, spacing);
    RecurrenceScan scan = detect_recurrent_points(f, W, nmax, delta);

    std::map<std::string, int64_t> counts;
    for (const char* name : {"attracting-periodic", "siegel", "intermediate-rank",
                             "inconclusive"})
        counts[name] = 0;
    ordered_json records = ordered_json::array();
    CompactCloud recurrent(k, W.resolution);
    for (const RecurrenceRecord& rec : scan.records) {
        recurrent.append(rec.p0);
        ordered_json j;
        j["p0"] = json_point(rec.p0);
        j["returns"] = rec.return_times.size();
        try {
            LimitMapEstimate est = extract_limit_map(f, rec, stencil_r);
            TrichotomyResult tri = classify_trichotomy(est, k);
            j["m"] = est.m;
            j["residual"] = est.residual;
            j["rank"] = tri.rank;
            j["identity_deviation"] = tri.identity_deviation;
            j["verdict"] = to_string(tri.verdict);
            if (!tri.note.empty()) j["note"] = tri.note;
            ++counts[to_string(tri.verdict)];
        } catch (const ComputationError& e) {
            j["verdict"] = "inconclusive";
            j["note"] = e.what();
            ++counts["inconclusive"];
        }
        records.push_back(j);
    }

    // modal verdict; ties resolve in the listed order
    std::string verdict = "inconclusive";
    int64_t best = -1;
    for (const char* name : {"attracting-periodic", "siegel", "intermediate-rank",
                             "inconclusive"})
        if (counts[name] > best && counts[name] > 0) {
            best = counts[name];
            verdict = name;
        }

    report["scanned"] = scan.scanned;
    report["escaped"] = scan.escaped;
    report["recurrent"] = scan.records.size();
    report["delta"] = delta;
    report["nmax"] = nmax;
    report["stencil_radius"] = stencil_r;
    report["verdict"] = verdict;
    {
        ordered_json c;
        for (const auto& [name, n] : counts) c[name] = n;
        report["counts"] = c;
    }
    report["records"] = records;

    if (!recurrent.empty()) {
        write_cloud_csv(join_path(cfg.out, "recurrent.csv"), recurrent);
        report["files"] = {{"records", "recurrent.csv"}, {"overlay", "overlay.ppm"}};
    } else {
        report["files"] = nullptr;
        return;
    }

    // overlay frame: two real axes through the domain's bounding box
    GridSpec frame;
    frame.k = k;
    const CVec& c = U.center;
    const double pad = (U.kind == DomainShape::Kind::Ball ? U.radius : U.diameter() / 2) * 1.05;
    for (int a = 0; a < 2 * k; ++a) {
        size_t s = static_cast<size_t>(a);
        frame.sliced[s] = true;
        frame.slice_value[s] = (a % 2 == 0) ? c[a / 2].real() : c[a / 2].imag();
    }
    for (int a : {0, k == 1 ? 1 : 2}) {
        size_t s = static_cast<size_t>(a);
        double mid = frame.slice_value[s];
        frame.sliced[s] = false;
        frame.lo[s] = mid - pad;
        frame.hi[s] = pad + mid;
        frame.counts[s] = 256;
    }
    frame.validate();
    std::vector<OverlayMark> marks;
    for (size_t i = 0; i < scan.records.size(); ++i) {
        OverlayMark m;
        m.p = scan.records[i].p0;
        std::string v = records[i]["verdict"].get<std::string>();
        if (v == "attracting-periodic") m.r = 220, m.g = 40, m.b = 40;
        else if (v == "siegel") m.r = 40, m.g = 180, m.b = 70;
        else if (v == "intermediate-rank") m.r = 50, m.g = 90, m.b = 220;
        else m.r = 150, m.g = 150, m.b = 150;
        marks.push_back(m);
    }
    write_file(join_path(cfg.out, "overlay.ppm"), render_overlay_ppm(frame, marks));
}

inline void run_hull_test(const RunConfig& cfg, ordered_json& report) {
    AnyMap f = parse_map(cfg.map_literal);
    const int k = map_dim(f);
    DomainShape U = cfg.domain_for(k, 1.0);
    const double spacing = cfg.spacing.value_or(0.15);
    CompactCloud C = sample_domain(U, spacing);

    PolyBasisSpec spec;
    spec.max_degree = cfg.degree.value_or(4);
    spec.num_random = static_cast<int>(cfg.num_random.value_or(64));
    spec.seed = cfg.seed;
    spec.validate();

    double bound = (U.center.norm() + (U.kind == DomainShape::Kind::Ball
                                           ? U.radius
                                           : U.diameter() / 2)) * 1.1;
    GridSpec probe = GridSpec::box(k, bound, cfg.per_axis.value_or(8));
    const double tau = cfg.tau ? *cfg.tau : HullTester(C, spec).default_tau();

    HullInvarianceReport rep = hull_invariance_check(f, C, probe, spec, tau);
    report["cloud"] = {{"points", C.size()}, {"resolution", C.resolution}};
    report["basis"] = {{"max_degree", spec.max_degree}, {"num_random", spec.num_random}};
    report["probe_samples"] = probe.total();
    report["tau"] = rep.tau;
    report["slack"] = rep.slack;
    report["defect"] = rep.defect;
    report["candidates"] = rep.candidates;
    report["violations"] = rep.violations;
    report["worst_jump"] = rep.worst_jump;
}

inline void run_linearize(const RunConfig& cfg, ordered_json& report) {
    AnyMap f = parse_map(cfg.map_literal);
    const int k = map_dim(f);
    DomainShape U = cfg.domain_for(k, 0.5);
    const double spacing = cfg.spacing.value_or(0.25);
    const int n = cfg.cesaro_n.value_or(256);

    CompactCloud S = sample_domain(U, spacing);
    CMatrix A = jacobian(f, CVec::zero(k));
    LinearizationReport rep = linearization_average(f, A, S, n);

    CompactCloud h(k, S.resolution);
    for (const CVec& v : rep.h) h.append(v);
    write_cloud_csv(join_path(cfg.out, "h.csv"), h);

    report["samples"] = S.size();
    report["cesaro_n"] = n;
    report["cesaro_gap"] = rep.cesaro_gap;
    report["h0_norm"] = rep.h0_norm;
    report["jac_gap"] = rep.jac_gap;
    report["residual"] = rep.residual;
    report["linear_part"] = json_matrix(A);
    report["h"] = cloud_ref(h, "h.csv");
}

// K from both-direction boundedness on a low-discrepancy box; shared by the
// decay / core / shared commands.
inline CompactCloud boxed_k_compact(const RunConfig& cfg, const AnyMap& f, double R,
                                    ordered_json& report, const char* key) {
    const int k = map_dim(f);
    GridSpec grid = GridSpec::box(k, cfg.half.value_or(R), cfg.per_axis.value_or(24));
    CompactCloud K = k_compact(f, grid, R, cfg.nmax.value_or(200),
                               cfg.escape_radius.value_or(kDefaultEscapeCutoff));
    report[key] = {{"points", K.size()},
                   {"resolution", K.resolution},
                   {"grid_samples", grid.total()}};
    return K;
}

inline void run_decay(const RunConfig& cfg, ordered_json& report) {
    AnyMap f = parse_map(cfg.map_literal);
    const AutomorphismChain& chain = require_chain(f, "decay");
    const double R = cfg.R ? *cfg.R : filtration_radius(chain);
    const int steps = cfg.steps.value_or(60);

    CompactCloud K = boxed_k_compact(cfg, f, R, report, "K");
    write_cloud_csv(join_path(cfg.out, "K.csv"), K);
    DomainShape U = cfg.domain_for(chain.k, 1.0);
    CompactCloud X = sample_domain(U, cfg.spacing.value_or(0.2));

    std::vector<double> distances = attraction_decay(f, X, K, steps);
    report["X"] = {{"points", X.size()}, {"resolution", X.resolution}};
    report["steps"] = steps;
    report["initial"] = distances.front();
    report["final"] = distances.back();
    report["distances"] = distances;
}

inline void run_core_intersect(const RunConfig& cfg, ordered_json& report) {
    AnyMap f = parse_map(cfg.map_literal);
    const AutomorphismChain& chain = require_chain(f, "core-intersect");
    const double R = cfg.R ? *cfg.R : filtration_radius(chain);
    const int steps = cfg.steps.value_or(20);

    CompactCloud K = boxed_k_compact(cfg, f, R, report, "K");
    write_cloud_csv(join_path(cfg.out, "K.csv"), K);

    CoreIntersection core = core_intersection(f, K, steps);
    write_cloud_csv(join_path(cfg.out, "core.csv"), core.core);
    report["steps"] = steps;
    report["core"] = cloud_ref(core.core, "core.csv");
    report["forward_defect"] = core.forward_defect.distance;
    if (core.backward_defect) report["backward_defect"] = core.backward_defect->distance;
    report["hausdorff_to_K"] = hausdorff_distance(core.core, K).distance;
}

inline void run_shared_k(const RunConfig& cfg, ordered_json& report) {
    if (cfg.map2_literal.empty())
        throw InvalidInputError("shared-k needs a second map (key: map2)");
    AnyMap f = parse_map(cfg.map_literal);
    AnyMap g = parse_map(cfg.map2_literal);
    const AutomorphismChain& fc = require_chain(f, "shared-k");
    const AutomorphismChain& gc = require_chain(g, "shared-k (map2)");
    const double R = cfg.R.value_or(2.0);

    RunConfig sub = cfg;
    if (!sub.nmax) sub.nmax = 100;
    if (!sub.per_axis) sub.per_axis = 20;
    CompactCloud Kf = boxed_k_compact(sub, f, R, report, "K_f");
    CompactCloud Kg = boxed_k_compact(sub, g, R, report, "K_g");
    write_cloud_csv(join_path(cfg.out, "kf.csv"), Kf);
    write_cloud_csv(join_path(cfg.out, "kg.csv"), Kg);

    SharedInvariantReport rep = shared_invariant_check(fc, gc, Kf, Kg);
    report["commutation_error"] = rep.commutation_error;
    report["hausdorff"] = rep.distance.distance;
    report["g_defect_on_kf"] = rep.g_defect_on_kf.distance;
    report["f_defect_on_kg"] = rep.f_defect_on_kg.distance;
}

}  // namespace detail

inline int run_command(const RunConfig& cfg, std::ostream* verbose = nullptr) {
    if (cfg.threads > 0) set_worker_count(cfg.threads);

    ordered_json report;
    report["schema_version"] = 1;
    report["version"] = kVersionString;
    report["command"] = cfg.command;
    report["seed"] = cfg.seed;
    {
        ordered_json echo;
        for (const auto& [key, value] : cfg.provided) echo[key] = value;
        report["config"] = echo;
    }

    auto fail = [&](const char* type, const std::string& message, int code) {
        ordered_json err;
        err["schema_version"] = 1;
        err["version"] = kVersionString;
        err["command"] = cfg.command;
        err["error"] = {{"type", type}, {"message", message}};
        std::error_code ignored;
        std::filesystem::create_directories(cfg.out, ignored);
        try {
            write_file(detail::join_path(cfg.out, "error.json"), err.dump(2) + "\n");
        } catch (const std::exception&) {
            // the error is still reported through the exit code
        }
        if (verbose) *verbose << "error (" << type << "): " << message << "\n";
        return code;
    };

    try {
        if (cfg.command.empty())
            throw InvalidInputError("no command selected (argv subcommand or command= key)");
        if (cfg.map_literal.empty()) throw InvalidInputError("no map configured");
        std::filesystem::create_directories(cfg.out);

        if (cfg.command == "henon-k") detail::run_henon_k(cfg, report);
        else if (cfg.command == "birkhoff") detail::run_birkhoff(cfg, report);
        else if (cfg.command == "classify") detail::run_classify(cfg, report);
        else if (cfg.command == "hull-test") detail::run_hull_test(cfg, report);
        else if (cfg.command == "linearize") detail::run_linearize(cfg, report);
        else if (cfg.command == "decay") detail::run_decay(cfg, report);
        else if (cfg.command == "core-intersect") detail::run_core_intersect(cfg, report);
        else if (cfg.command == "shared-k") detail::run_shared_k(cfg, report);
        else throw InvalidInputError("unknown command '" + cfg.command + "'");

        write_file(detail::join_path(cfg.out, "report.json"), report.dump(2) + "\n");
        if (verbose) *verbose << "wrote " << detail::join_path(cfg.out, "report.json") << "\n";
        return 0;
    } catch (const InvalidInputError& e) {
        return fail("invalid-input", e.what(), 2);
    } catch (const DimensionError& e) {
        return fail("invalid-input", e.what(), 2);
    } catch (const ComputationError& e) {
        return fail("computation", e.what(), 1);
    } catch (const std::exception& e) {
        return fail("internal", e.what(), 1);
    }
}

}  // namespace invariantlab
