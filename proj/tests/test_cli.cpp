#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "invariantlab/cli.hpp"

using namespace invariantlab;
namespace fs = std::filesystem;

namespace {

std::string fresh_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / "invariantlab-cli-tests" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p.string();
}

RunConfig configure(const std::string& text, const std::string& command,
                    const std::string& out) {
    RunConfig cfg = parse_config(text);
    cfg.command = command;
    cfg.out = out;
    return cfg;
}

ordered_json report_of(const std::string& dir) {
    return ordered_json::parse(read_file((fs::path(dir) / "report.json").string()));
}

std::vector<ConfigError> errors_of(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigParseError& e) {
        return e.errors;
    }
    return {};
}

}  // namespace

TEST_CASE("config parsing", "[cli]") {
    SECTION("happy path with schedule literal and ball domain") {
        RunConfig cfg = parse_config("map=henon\nU=ball:0,3\nmu=1-2^-j:8\n");
        CHECK(cfg.map_literal == "henon");
        REQUIRE(cfg.mu.size() == 8);
        CHECK(cfg.mu[0] == 0.5);
        CHECK(cfg.mu[7] == Catch::Approx(1.0 - std::pow(2.0, -8)).epsilon(1e-15));
        DomainShape U = cfg.domain_for(2, 1.0);
        CHECK(U.signed_distance(CVec::zero(2)) == Catch::Approx(-3.0));
        CHECK(cfg.out == "out");
        CHECK(cfg.seed == 0);
        CHECK(cfg.threads == 0);
        CHECK(cfg.command.empty());
    }

    SECTION("explicit list schedule, command key, plumbing keys") {
        RunConfig cfg = parse_config(
            "command=birkhoff\nmap=rotation:1.0,0.7\nmu_schedule=[0.5,0.75]\n"
            "seed=42\nthreads=2\nout=artifacts\ndirection=backward\n");
        CHECK(cfg.command == "birkhoff");
        REQUIRE(cfg.mu == std::vector<double>{0.5, 0.75});
        CHECK(cfg.seed == 42);
        CHECK(cfg.threads == 2);
        CHECK(cfg.out == "artifacts");
        REQUIRE(cfg.direction.has_value());
        CHECK(*cfg.direction == OrbitDirection::Backward);
    }

    SECTION("sections group keys without changing their meaning") {
        RunConfig cfg = parse_config("map=henon\n[birkhoff]\nspacing=0.25\n");
        REQUIRE(cfg.spacing.has_value());
        CHECK(*cfg.spacing == 0.25);

        auto errs = errors_of("map=henon\n[bogus]\nspacing=0.25\n");
        REQUIRE(errs.size() == 1);
        CHECK(errs[0].line == 2);
        CHECK(errs[0].message.find("unknown section") != std::string::npos);
    }

    SECTION("comments and blank lines are skipped") {
        RunConfig cfg = parse_config("# a note\n\nmap=henon\n   # indented note\n");
        CHECK(cfg.map_literal == "henon");
    }

    SECTION("mu outside (0,1) is rejected with the constraint message") {
        auto errs = errors_of("map=henon\nmu_schedule=[1.5]\n");
        REQUIRE_FALSE(errs.empty());
        CHECK(errs[0].line == 2);
        CHECK(errs[0].message.find("must lie in (0,1)") != std::string::npos);
    }

    SECTION("schedule shape errors") {
        CHECK(errors_of("map=henon\nmu=[0.7,0.6]\n")[0].message.find("strictly increasing") !=
              std::string::npos);
        CHECK(errors_of("map=henon\nmu=1-2^-j:0\n")[0].message.find("[1, 40]") !=
              std::string::npos);
        CHECK(errors_of("map=henon\nmu=0.5\n")[0].message.find("bracketed list") !=
              std::string::npos);
    }

    SECTION("empty input lists the required key") {
        auto errs = errors_of("");
        REQUIRE(errs.size() == 1);
        CHECK(errs[0].line == 0);
        CHECK(errs[0].message.find("missing required key: map") != std::string::npos);
    }

    SECTION("every problem is reported, each with its line") {
        auto errs = errors_of("foo=1\nspacing=abc\nmap=henon\nspacing=0.1\n");
        REQUIRE(errs.size() == 3);
        CHECK(errs[0].line == 1);
        CHECK(errs[0].message.find("unknown key 'foo'") != std::string::npos);
        CHECK(errs[1].line == 2);
        CHECK(errs[1].message.find("expected a number") != std::string::npos);
        CHECK(errs[2].line == 4);
        CHECK(errs[2].message.find("duplicate key 'spacing'") != std::string::npos);
    }

    SECTION("alias and the original key collide") {
        auto errs = errors_of("map=henon\nmu=[0.5]\nmu_schedule=[0.5]\n");
        REQUIRE(errs.size() == 1);
        CHECK(errs[0].message.find("duplicate key 'mu'") != std::string::npos);
    }

    SECTION("assorted value validation") {
        CHECK(errors_of("map=notamap(\n")[0].line == 1);
        CHECK(errors_of("map=henon\nU=ball:0\n")[0].message.find("two numbers") !=
              std::string::npos);
        CHECK(errors_of("map=henon\nU=box:0,1\n")[0].message.find("ball:CENTER,RADIUS") !=
              std::string::npos);
        CHECK(errors_of("map=henon\ndirection=sideways\n")[0].message.find("forward") !=
              std::string::npos);
        CHECK(errors_of("map=henon\nseed=-3\n")[0].message.find("non-negative") !=
              std::string::npos);
        CHECK(errors_of("map=henon\nthreads=0\n")[0].message.find("positive") !=
              std::string::npos);
        CHECK(errors_of("map=henon\ntau=-1\n")[0].message.find(">= 0") != std::string::npos);
        CHECK(errors_of("map=henon\nspacing\n")[0].message.find("key=value") !=
              std::string::npos);
        CHECK(errors_of("map=henon\ncommand=transő\n")[0].message.find("unknown command") !=
              std::string::npos);
        CHECK(errors_of("map=henon\nn0_cap=0\n")[0].message.find(">= 1") != std::string::npos);
    }
}

TEST_CASE("cloud csv round-trip", "[cli]") {
    SECTION("awkward doubles survive bit-for-bit") {
        CompactCloud c(2, 1.0 / 3.0);
        c.append(CVec{cplx(1.0 / 3.0, -0.0), cplx(1e-300, 3.141592653589793)});
        c.append(CVec{cplx(-2.5e17, 0.1), cplx(7.0, -1.0 / 7.0)});
        c.append(CVec::zero(2));

        std::string csv = cloud_to_csv(c);
        CHECK(csv.find("# k=2\n") != std::string::npos);
        CHECK(csv.find("# resolution=") != std::string::npos);

        CompactCloud back = cloud_from_csv(csv);
        REQUIRE(clouds_identical(c, back));
        // the writer is canonical: re-serializing reproduces the bytes
        CHECK(cloud_to_csv(back) == csv);
    }

    SECTION("windows line endings parse") {
        CompactCloud c(1, 0.5);
        c.append(CVec{cplx(1.25, -4.0)});
        std::string csv = cloud_to_csv(c);
        std::string crlf;
        for (char ch : csv) {
            if (ch == '\n') crlf += "\r\n";
            else crlf += ch;
        }
        CHECK(clouds_identical(cloud_from_csv(crlf), c));
    }

    SECTION("file round-trip") {
        std::string dir = fresh_dir("csv");
        CompactCloud c(2, 0.25);
        c.append(CVec{cplx(0.5, 0.5), cplx(-1, 2)});
        std::string path = (fs::path(dir) / "c.csv").string();
        write_cloud_csv(path, c);
        CHECK(clouds_identical(read_cloud_csv(path), c));
    }

    SECTION("malformed inputs carry line numbers") {
        CHECK_THROWS_WITH(cloud_from_csv("1,2,3,4\n"),
                          Catch::Matchers::ContainsSubstring("line 1") &&
                              Catch::Matchers::ContainsSubstring("before the '# k='"));
        CHECK_THROWS_WITH(cloud_from_csv("# k=2\n# resolution=1\n1,2,3\n"),
                          Catch::Matchers::ContainsSubstring("line 3") &&
                              Catch::Matchers::ContainsSubstring("expected 4 columns"));
        CHECK_THROWS_WITH(cloud_from_csv("# k=2\n# resolution=1\n1,2,x,4\n"),
                          Catch::Matchers::ContainsSubstring("line 3") &&
                              Catch::Matchers::ContainsSubstring("bad real value 'x'"));
        CHECK_THROWS_WITH(cloud_from_csv("# k=2\n1,2,3,4\n"),
                          Catch::Matchers::ContainsSubstring("missing '# resolution='"));
        CHECK_THROWS_WITH(cloud_from_csv("# k=0\n"),
                          Catch::Matchers::ContainsSubstring("bad k header"));
    }
}

TEST_CASE("image rendering", "[cli]") {
    GridSpec slice = GridSpec::real_slice(1.0, 4, 4);

    SECTION("escape steps map to gray levels, bounded to black") {
        EscapeField f;
        f.grid = slice;
        f.nmax = 10;
        f.steps.assign(16, -1);
        f.steps[0] = -1;  // bounded
        f.steps[1] = 0;   // instant escape
        f.steps[2] = 10;  // last-step escape

        std::string pgm = render_escape_pgm(f);
        const std::string header = "P5\n4 4\n255\n";
        REQUIRE(pgm.size() == header.size() + 16);
        CHECK(pgm.compare(0, header.size(), header) == 0);
        // sample index i = ix + 4*iy; image row 0 is the top (iy = 3)
        auto pixel = [&](int ix, int iy) {
            return static_cast<unsigned char>(pgm[header.size() +
                                                  static_cast<size_t>((3 - iy) * 4 + ix)]);
        };
        CHECK(pixel(0, 0) == 0);
        CHECK(pixel(1, 0) == 255);
        CHECK(pixel(2, 0) == 1);
        CHECK(pixel(3, 3) == 0);
    }

    SECTION("overlay marks color a dot; background defaults to white") {
        std::vector<OverlayMark> marks;
        OverlayMark m;
        m.p = CVec{cplx(0.1, 0), cplx(0.1, 0)};  // interior cell
        m.r = 10, m.g = 20, m.b = 30;
        marks.push_back(m);
        OverlayMark outside;
        outside.p = CVec{cplx(5, 0), cplx(0, 0)};  // skipped silently
        marks.push_back(outside);

        std::string ppm = render_overlay_ppm(GridSpec::real_slice(1.0, 4, 4), marks);
        const std::string header = "P6\n4 4\n255\n";
        REQUIRE(ppm.size() == header.size() + 48);
        auto px = [&](int row, int col, int ch) {
            return static_cast<unsigned char>(
                ppm[header.size() + static_cast<size_t>((row * 4 + col) * 3 + ch)]);
        };
        // 0.1 lands in cell ix=2, iy=2 -> image row 1, col 2; the dot is 3x3
        CHECK(px(1, 2, 0) == 10);
        CHECK(px(1, 2, 1) == 20);
        CHECK(px(1, 2, 2) == 30);
        CHECK(px(0, 1, 0) == 10);  // dot neighbour
        CHECK(px(3, 0, 0) == 255);  // untouched corner stays white
    }

    SECTION("a four-axis grid cannot be rendered") {
        EscapeField f;
        f.grid = GridSpec::box(2, 1.0, 3);
        f.steps.assign(81, -1);
        CHECK_THROWS_AS(render_escape_pgm(f), InvalidInputError);
    }
}

TEST_CASE("command runs", "[cli]") {
    SECTION("henon-k leaves a cloud, two renders, and a report") {
        std::string dir = fresh_dir("henon-k");
        RunConfig cfg = configure(
            "map=henon\nper_axis=6\nnmax=40\nhalf=2\nslice_half=2.5\nslice_nx=48\n"
            "slice_ny=48\n",
            "henon-k", dir);
        REQUIRE(run_command(cfg) == 0);

        ordered_json rep = report_of(dir);
        CHECK(rep["schema_version"] == 1);
        CHECK(rep["version"] == std::string(kVersionString));
        CHECK(rep["command"] == "henon-k");
        CHECK(rep["R"] == 2.0);
        CHECK(rep["K"]["points"].get<int64_t>() >= 1);
        CHECK(rep["config"]["map"] == "henon");

        // emitted clouds round-trip byte-for-byte
        std::string csv = read_file((fs::path(dir) / "K.csv").string());
        CHECK(cloud_to_csv(cloud_from_csv(csv)) == csv);

        std::string pgm = read_file((fs::path(dir) / "kplus.pgm").string());
        const std::string header = "P5\n48 48\n255\n";
        CHECK(pgm.compare(0, header.size(), header) == 0);
        CHECK(pgm.size() == header.size() + 48 * 48);
        CHECK(fs::exists(fs::path(dir) / "kminus.pgm"));
    }

    SECTION("classify reports the rotation verdict") {
        std::string dir = fresh_dir("classify");
        RunConfig cfg = configure(
            "map=rotation:1.0,0.7\nU=ball:0,0.5\nspacing=0.25\nnmax=500\ndelta=0.05\n",
            "classify", dir);
        REQUIRE(run_command(cfg) == 0);

        ordered_json rep = report_of(dir);
        CHECK(rep["verdict"] == "siegel");
        CHECK(rep["recurrent"].get<int64_t>() >= 1);
        CHECK(rep["counts"]["siegel"].get<int64_t>() == rep["recurrent"].get<int64_t>());
        CHECK(fs::exists(fs::path(dir) / "recurrent.csv"));
        std::string ppm = read_file((fs::path(dir) / "overlay.ppm").string());
        CHECK(ppm.compare(0, 3, "P6\n") == 0);
    }

    SECTION("birkhoff on the ball rotation reports a boundary touch") {
        std::string dir = fresh_dir("birkhoff");
        RunConfig cfg = configure(
            "map=rotation:1.0,1.4142135623730951\nU=ball:0,1\nspacing=0.1\n"
            "cauchy_tol=0.08\nmu=[0.5,0.75,0.875]\n",
            "birkhoff", dir);
        REQUIRE(run_command(cfg) == 0);

        ordered_json rep = report_of(dir);
        CHECK(rep["boundary_touch"] == true);
        CHECK(rep["contains_zero"] == true);
        CHECK(rep["connected"] == true);
        CHECK(rep["per_mu"].size() == 3);
        CHECK(rep["deltas"].size() == 2);
        CHECK(rep["K"]["points"].get<int64_t>() > 1000);

        std::string csv = read_file((fs::path(dir) / "K.csv").string());
        CHECK(cloud_to_csv(cloud_from_csv(csv)) == csv);
    }

    SECTION("linearize recovers the rotation's conjugacy data") {
        std::string dir = fresh_dir("linearize");
        RunConfig cfg = configure(
            "map=rotation:1.0,0.7\nU=ball:0,0.5\nspacing=0.25\ncesaro_n=64\n", "linearize",
            dir);
        REQUIRE(run_command(cfg) == 0);
        ordered_json rep = report_of(dir);
        CHECK(rep["residual"].get<double>() <= 1e-10);
        CHECK(rep["jac_gap"].get<double>() <= 1e-6);
        CHECK(fs::exists(fs::path(dir) / "h.csv"));
    }

    SECTION("hull-test sees no violations on a rotation-invariant ball") {
        std::string dir = fresh_dir("hull");
        RunConfig cfg = configure(
            "map=rotation:1.0,0.7\nU=ball:0,1\nspacing=0.2\ndegree=3\nnum_random=16\n"
            "per_axis=6\n",
            "hull-test", dir);
        REQUIRE(run_command(cfg) == 0);
        ordered_json rep = report_of(dir);
        CHECK(rep["violations"].get<int64_t>() == 0);
        CHECK(rep["candidates"].get<int64_t>() > 0);
    }

    SECTION("decay tracks a contraction toward its core") {
        std::string dir = fresh_dir("decay");
        RunConfig cfg = configure(
            "map=scale:0.5\nU=ball:0,1\nspacing=0.5\nR=2\nhalf=1\nper_axis=5\nnmax=120\n"
            "steps=10\n",
            "decay", dir);
        REQUIRE(run_command(cfg) == 0);
        ordered_json rep = report_of(dir);
        auto distances = rep["distances"].get<std::vector<double>>();
        REQUIRE(distances.size() == 11);
        CHECK(distances.back() <= distances.front() * 1e-2);
        for (size_t i = 1; i < distances.size(); ++i) CHECK(distances[i] <= distances[i - 1]);
    }

    SECTION("core-intersect keeps a nonempty core") {
        std::string dir = fresh_dir("core");
        RunConfig cfg = configure("map=henon\nper_axis=8\nnmax=60\nsteps=5\nhalf=2\n",
                                  "core-intersect", dir);
        REQUIRE(run_command(cfg) == 0);
        ordered_json rep = report_of(dir);
        CHECK(rep["core"]["points"].get<int64_t>() >= 1);
        CHECK(fs::exists(fs::path(dir) / "core.csv"));
    }

    SECTION("shared-k on commuting rotations") {
        std::string dir = fresh_dir("shared");
        RunConfig cfg = configure(
            "map=rotation:1.0,0.7\nmap2=rotation:0.5,0.2\nper_axis=6\nnmax=50\nR=1.5\n"
            "half=1\n",
            "shared-k", dir);
        REQUIRE(run_command(cfg) == 0);
        ordered_json rep = report_of(dir);
        CHECK(rep["commutation_error"].get<double>() <= 1e-10);
        CHECK(rep["hausdorff"].get<double>() == 0.0);
    }
}

TEST_CASE("run determinism and failure modes", "[cli]") {
    SECTION("identical config and seed give byte-identical artifacts") {
        std::string text =
            "map=rotation:1.0,0.7\nU=ball:0,0.5\nspacing=0.25\nnmax=500\ndelta=0.05\n";
        std::string d1 = fresh_dir("det1");
        std::string d2 = fresh_dir("det2");
        REQUIRE(run_command(configure(text, "classify", d1)) == 0);
        REQUIRE(run_command(configure(text, "classify", d2)) == 0);
        for (const char* name : {"report.json", "recurrent.csv", "overlay.ppm"})
            CHECK(read_file((fs::path(d1) / name).string()) ==
                  read_file((fs::path(d2) / name).string()));
    }

    SECTION("hypothesis violations exit 2 with a machine-readable error") {
        std::string dir = fresh_dir("err-input");
        RunConfig cfg = configure("map=scale:0.5\n", "birkhoff", dir);
        CHECK(run_command(cfg) == 2);
        ordered_json err =
            ordered_json::parse(read_file((fs::path(dir) / "error.json").string()));
        CHECK(err["error"]["type"] == "invalid-input");
        CHECK_FALSE(fs::exists(fs::path(dir) / "report.json"));
    }

    SECTION("escaping samples exit 1 as a computation error") {
        std::string dir = fresh_dir("err-comp");
        RunConfig cfg = configure(
            "map=henon\nU=ball:0,0.5\nspacing=0.25\nper_axis=8\nnmax=60\nsteps=30\n",
            "decay", dir);
        CHECK(run_command(cfg) == 1);
        ordered_json err =
            ordered_json::parse(read_file((fs::path(dir) / "error.json").string()));
        CHECK(err["error"]["type"] == "computation");
    }

    SECTION("an unselected or unknown command exits 2") {
        RunConfig cfg = configure("map=henon\n", "", fresh_dir("err-none"));
        CHECK(run_command(cfg) == 2);
        cfg.command = "frobnicate";
        cfg.out = fresh_dir("err-unknown");
        CHECK(run_command(cfg) == 2);
    }

    SECTION("shared-k without a second map exits 2") {
        RunConfig cfg = configure("map=henon\n", "shared-k", fresh_dir("err-map2"));
        CHECK(run_command(cfg) == 2);
    }
}
