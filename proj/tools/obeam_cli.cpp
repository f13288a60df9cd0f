// obeam: scenario runner and small inspection tools.
//
// Exit codes: 0 when every attached check passes, 1 when a check fails,
// 2 on configuration, IO or library errors.

#include "obeam/beams.hpp"
#include "obeam/doctor.hpp"
#include "obeam/emit.hpp"
#include "obeam/error.hpp"
#include "obeam/scenario.hpp"
#include "obeam/solver.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <thread>

#ifndef OBEAM_VERSION
#define OBEAM_VERSION "0.0.0"
#endif

namespace {

using namespace obeam;

Vec3 vec3_of(const std::vector<double>& v) { return {v[0], v[1], v[2]}; }

void print_check(const char* tag, const BoundCheck& c) {
    std::printf("  %-8s %-32s lhs=%-13.6g rhs=%-13.6g %s\n", tag, c.name.c_str(), c.lhs, c.rhs,
                c.pass ? "PASS" : "FAIL");
}

struct RunArgs {
    std::vector<std::string> configs;
    std::string out;
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
    bool strict = false;
    std::string constants;
};

int cmd_run(const RunArgs& a) {
    std::vector<ScenarioConfig> calib, rest;
    for (const auto& path : a.configs) {
        ScenarioConfig c = load_config(path);
        if (!a.out.empty()) c.output_dir = (std::filesystem::path(a.out) / c.name).string();
        if (a.seed) c.seed = *a.seed;
        (c.scenario == "calibration" ? calib : rest).push_back(std::move(c));
    }

    // Calibration runs first so that its constants can be frozen for the rest.
    std::optional<FrozenConstants> frozen;
    if (!a.constants.empty()) frozen = read_constants(a.constants);
    std::vector<ScenarioReport> reports = run_scenarios(calib, a.threads);
    if (!frozen && !reports.empty()) frozen = constants_from(reports.back(), reports.back().metric("headroom"));
    auto more = run_scenarios(rest, a.threads, frozen ? &*frozen : nullptr);
    reports.insert(reports.end(), more.begin(), more.end());

    bool ok = true;
    for (const auto& r : reports) {
        const bool pass = r.pass(a.strict);
        ok = ok && pass;
        std::printf("%s [%s] %s\n", r.name.c_str(), r.scenario.c_str(), pass ? "PASS" : "FAIL");
        for (const auto& c : r.checks) print_check("check", c);
        for (const auto& c : r.monitors) print_check("monitor", c);
        for (const auto& [k, v] : r.metrics) std::printf("  metric   %-32s %.6g\n", k.c_str(), v);
    }
    return ok ? 0 : 1;
}

int cmd_doctor() {
    const DoctorReport r = doctor();
    for (const auto& c : r.checks) print_check("doctor", c);
    std::printf("doctor %s (%.1f s)\n", r.pass() ? "PASS" : "FAIL", r.seconds);
    return r.pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Wave packets and reflected beams outside convex obstacles"};
    app.require_subcommand(1);

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "Run scenarios from config files");
    run_cmd->add_option("config", run.configs, "Scenario config files")->required()->check(CLI::ExistingFile);
    run_cmd->add_option("--out", run.out, "Output root (each scenario writes to <out>/<name>)");
    run_cmd->add_option("--seed", run.seed, "Override every scenario seed");
    run_cmd->add_option("--threads", run.threads, "Scenarios run concurrently")->check(CLI::PositiveNumber);
    run_cmd->add_flag("--strict", run.strict, "Fail on any monitor breach as well");
    run_cmd->add_option("--constants", run.constants, "Frozen monitor constants file")->check(CLI::ExistingFile);

    app.add_subcommand("doctor", "Fast invariant suite");

    double eps = 0.1, delta = 0.0;
    std::string profile = "bump", out;
    int window = 0;
    std::vector<double> k0{0, 0, 0};
    auto* dec_cmd = app.add_subcommand("decompose", "Expand a profile in the wave-packet frame");
    dec_cmd->add_option("--eps", eps, "Profile scale epsilon")->check(CLI::Range(1e-6, 0.36));
    dec_cmd->add_option("--delta", delta, "Distance delta (default epsilon^{6/7})");
    dec_cmd->add_option("--profile", profile, "bump | smooth_indicator | poly_gaussian | gaussian");
    dec_cmd->add_option("--k0", k0, "Carrier wave vector")->expected(3);
    dec_cmd->add_option("--window", window, "Index window (0: band edge)");
    dec_cmd->add_option("--out", out, "CSV of coefficients");

    std::vector<double> center{0, 0, 0}, origin{0, 0, 2}, index{0, 0, -1};
    double radius = 1.0;
    auto* cls_cmd = app.add_subcommand("classify", "Classify the ray of one packet against a sphere");
    cls_cmd->add_option("--eps", eps, "Epsilon")->check(CLI::Range(1e-6, 0.36));
    cls_cmd->add_option("--delta", delta, "Delta (default epsilon^{6/7})");
    cls_cmd->add_option("--center", center, "Sphere centre")->expected(3);
    cls_cmd->add_option("--radius", radius, "Sphere radius")->check(CLI::PositiveNumber);
    cls_cmd->add_option("--origin", origin, "Packet centre")->expected(3);
    cls_cmd->add_option("--index", index, "Lattice index n")->expected(3);

    int n = 65;
    double h = 0.05, z = -1.5;
    std::vector<double> source{-1, 0, 0}, probe{1, 0, 0};
    auto* green_cmd = app.add_subcommand("green", "Grid resolvent outside a sphere at one probe");
    green_cmd->add_option("--radius", radius, "Sphere radius (0: no obstacle)");
    green_cmd->add_option("--n", n, "Nodes per side")->check(CLI::Range(8, 160));
    green_cmd->add_option("--spacing", h, "Grid spacing")->check(CLI::PositiveNumber);
    green_cmd->add_option("--z", z, "Spectral parameter, z <= -0.1");
    green_cmd->add_option("--source", source, "Source point")->expected(3);
    green_cmd->add_option("--probe", probe, "Probe point")->expected(3);

    app.add_subcommand("version", "Print the version");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run_cmd) return cmd_run(run);
        if (app.got_subcommand("doctor")) return cmd_doctor();
        if (app.got_subcommand("version")) {
            std::printf("obeam %s\n", OBEAM_VERSION);
            return 0;
        }
        if (*dec_cmd) {
            const FrameParams fp = frame_params(eps, delta > 0 ? delta : std::pow(eps, 6.0 / 7.0), true);
            Profile f;
            f.kind = parse_profile_kind(profile);
            f.scale = eps;
            f.k0 = vec3_of(k0);
            const int w = window > 0 ? window : fp.default_window();
            const CubeField psi = sample_profile(f, fp, resolution_for(fp, w, eps));
            DecomposeOptions opt;
            opt.window = w;
            const Decomposition d = decompose(psi, fp, opt);
            std::printf("sigma=%.6g L=%.6g window=%d N=%d admissible=%zu\n", fp.sigma, fp.L, d.window, psi.N,
                        d.admissible.size());
            std::printf("psi_norm=%.6g residual=%.6g tail=%.6g envelope_constant=%.6g\n", d.psi_norm, d.residual_l2,
                        d.tail_estimate, d.envelope_constant);
            if (!out.empty()) {
                std::vector<std::vector<double>> rows;
                for (const auto& [idx, c] : d.coeffs)
                    rows.push_back({double(idx.i), double(idx.j), double(idx.k), c.real(), c.imag(),
                                    fp.admissible(idx) ? 1.0 : 0.0});
                emit_table({"i", "j", "k", "re", "im", "admissible"}, rows, out);
            }
            return 0;
        }
        if (*cls_cmd) {
            const FrameParams fp = frame_params(eps, delta > 0 ? delta : std::pow(eps, 6.0 / 7.0), true);
            const Index3 idx{int(index[0]), int(index[1]), int(index[2])};
            const FreePacket p = make_packet(fp, idx);
            const RayEvent ev = classify(make_sphere(vec3_of(center), radius), vec3_of(origin), p.xi, {});
            std::printf("class=%s xi=(%.6g, %.6g, %.6g)", std::string(to_string(ev.cls)).c_str(), p.xi[0], p.xi[1],
                        p.xi[2]);
            if (ev.t_c)
                std::printf(" t_c=%.9g x_c=(%.6g, %.6g, %.6g) incidence=%.6g", *ev.t_c, (*ev.x_c)[0], (*ev.x_c)[1],
                            (*ev.x_c)[2], ev.incidence);
            std::printf(" min_distance=%.6g\n", ev.min_distance);
            return 0;
        }
        if (*green_cmd) {
            const GridSpec spec = GridSpec::centered(n, h);
            auto gfree = std::make_shared<const Grid>(rasterize(spec));
            auto g = radius > 0 ? std::make_shared<const Grid>(rasterize(make_sphere(Vec3::Zero(), radius), spec))
                                : gfree;
            const std::size_t y = g->nearest(vec3_of(source)), x = g->nearest(vec3_of(probe));
            if (g->masked(y) || g->masked(x)) throw Error(ErrorKind::InvalidArgument, "source or probe inside obstacle");
            const double G = resolvent(g, z, y)[x].real(), G0 = resolvent(gfree, z, y)[x].real();
            const double r = (g->point(x) - g->point(y)).norm();
            std::printf("G_obstacle=%.9g G_free_grid=%.9g G_free_exact=%.9g difference=%.6g\n", G, G0,
                        free_green(r, z), G - G0);
            return 0;
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 2;
}
