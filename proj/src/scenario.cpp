#include "obeam/scenario.hpp"

#include "obeam/beams.hpp"
#include "obeam/emit.hpp"
#include "obeam/error.hpp"
#include "obeam/grid.hpp"
#include "obeam/solver.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <random>
#include <thread>

namespace obeam {

namespace fs = std::filesystem;

bool ScenarioReport::pass(bool strict) const {
    for (const auto& c : checks)
        if (!c.pass) return false;
    if (strict)
        for (const auto& c : monitors)
            if (!c.pass) return false;
    return true;
}

double ScenarioReport::metric(const std::string& key) const {
    auto it = metrics.find(key);
    if (it == metrics.end()) throw Error(ErrorKind::InvalidArgument, "no metric '" + key + "' in " + name);
    return it->second;
}

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();
constexpr double strichartz_p = 10.0 / 3.0;

// Leakage budget for mass reaching the outer box layers.
constexpr double box_leak_budget = 1e-6;

struct Context {
    const ScenarioConfig& cfg;
    ScenarioReport report;
    fs::path dir;

    explicit Context(const ScenarioConfig& c) : cfg(c), dir(c.output_dir) {
        report.name = c.name;
        report.scenario = c.scenario;
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
    }

    std::string path(const std::string& file) {
        const std::string p = (dir / file).string();
        report.files.push_back(p);
        return p;
    }

    void check(const std::string& name, double lhs, double rhs, double constant, bool pass) {
        report.checks.push_back({name, lhs, rhs, constant, pass});
    }
    void monitor(const std::string& name, double lhs, double rhs) {
        report.monitors.push_back({name, lhs, rhs, nan, lhs <= rhs});
    }
    void metric(const std::string& key, double v) { report.metrics[key] = v; }

    std::mt19937_64 rng(std::uint64_t stream) const { return std::mt19937_64(cfg.seed * 0x9E3779B97F4A7C15ULL + stream); }

    ScenarioReport finish() {
        emit_checks(report.checks, path("checks.csv"));
        emit_checks(report.monitors, path("monitors.csv"));
        const std::string mp = path("metrics.csv");
        std::ofstream out(mp, std::ios::binary);
        if (!out) throw Error(ErrorKind::Io, "cannot write " + mp);
        out << "name,value\n";
        for (const auto& [k, v] : report.metrics) out << k << ',' << format_double(v) << '\n';
        out.flush();
        if (!out) throw Error(ErrorKind::Io, "write failed: " + mp);
        return std::move(report);
    }
};

// Gaussian with |psi|^2 standard deviation s0 and momentum k0, unit mass.
FreePacket gaussian_packet(double s0, const Vec3& k0) {
    FreePacket p;
    p.params.sigma = s0;
    p.xi = k0;
    return p;
}

double rel_l2(const GridField& a, const GridField& ref) {
    const double m = mass(ref);
    return m > 0.0 ? l2_distance(a, ref) / std::sqrt(m) : nan;
}

GridField difference(const GridField& a, const GridField& b) {
    GridField d(a.grid, a.time);
    for (std::size_t c = 0; c < d.size(); ++c) d[c] = a[c] - b[c];
    return d;
}

int nodes_for(double length, double h) { return static_cast<int>(std::ceil(length / h - 1e-9)) + 1; }

std::shared_ptr<const Grid> share(Grid g) { return std::make_shared<const Grid>(std::move(g)); }

bool strictly_decreasing(const std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] < v[i - 1])) return false;
    return true;
}

// lhs: largest step ratio v[i]/v[i-1]; rhs: 1.
void monotone_check(Context& ctx, const std::string& name, const std::vector<double>& v) {
    double worst = 0.0;
    for (std::size_t i = 1; i < v.size(); ++i) worst = std::max(worst, v[i] / v[i - 1]);
    ctx.check(name, worst, 1.0, nan, v.size() >= 2 && strictly_decreasing(v));
}

struct MarchStats {
    double max_mass_step = 0.0;  // max relative mass change in one step
    double max_leak = 0.0;       // max boundary-layer mass fraction at snapshots
    int max_iterations = 0;
};

// Crank-Nicolson (or Strang NLS) march observed at t = 0 and at
// `snapshots - 1` evenly spread steps ending at T.
template <class Observe>
GridField march(GridField f, double T, double dt_target, int snapshots, MarchStats& st, Observe&& observe,
                bool nonlinear = false) {
    const int steps = std::max(1, static_cast<int>(std::ceil(T / dt_target - 1e-9)));
    const double dt = T / steps;
    const long K = std::max(1, snapshots - 1);
    observe(f);
    st.max_leak = std::max(st.max_leak, boundary_layer_mass(f));
    double m0 = mass(f);
    for (int s = 1; s <= steps; ++s) {
        SolveStats ss;
        f = nonlinear ? nls_step(f, dt, {}, &ss) : cn_step(f, dt, {}, &ss);
        f.time = s * dt;
        st.max_iterations = std::max(st.max_iterations, ss.iterations);
        const double m1 = mass(f);
        if (!nonlinear && m0 > 0.0) st.max_mass_step = std::max(st.max_mass_step, std::abs(m1 - m0) / m0);
        m0 = m1;
        if (s * K / steps > (s - 1) * K / steps) {
            observe(f);
            st.max_leak = std::max(st.max_leak, boundary_layer_mass(f));
        }
    }
    return f;
}

void record_basic(RunTrace& tr, const GridField& f, bool with_energy) {
    tr.add(f.time);
    tr.set_scalar("mass", mass(f));
    if (with_energy) tr.set_scalar("energy", energy(f));
}

// ---------------------------------------------------------------- S1

ScenarioReport run_s1(const ScenarioConfig& cfg, const FrozenConstants* frozen) {
    Context ctx(cfg);
    if (cfg.epsilon_ladder.empty()) throw Error(ErrorKind::Config, cfg.name + ": s1 needs an epsilon ladder");
    const double width = cfg.param("profile_width", 0.5);
    const double ls_T = cfg.param("ls_horizon", 2.0);
    const double ls_points = cfg.param("ls_points", 3.0);
    const int ls_snaps = static_cast<int>(cfg.param("ls_snapshots", 9));
    const int ls_samples = static_cast<int>(cfg.param("ls_samples", 16));

    std::vector<std::vector<double>> rows;
    std::vector<double> diffs;
    double worst_ratio = -1.0;
    LocalSmoothing worst{};
    for (std::size_t r = 0; r < cfg.epsilon_ladder.size(); ++r) {
        const double eps = cfg.epsilon_ladder[r], delta = cfg.delta_for(eps), s0 = width * eps;
        const HalfspaceGap gap = halfspace_free_gap(s0, delta);
        diffs.push_back(gap.difference);
        rows.push_back({eps, delta, delta / eps, gap.difference, gap.free_norm, gap.difference / gap.free_norm});

        if (!cfg.monitors.local_smoothing && !cfg.monitors.energy) continue;
        // Halfspace solution sampled on a box around the packet.
        const FreePacket p = gaussian_packet(s0, Vec3::Zero());
        const double T = ls_T * s0 * s0;
        const double wT = s0 * std::sqrt(1.0 + ls_T * ls_T);
        const double h = s0 / ls_points, half = 4.5 * wT;
        GridSpec spec;
        const int n = 2 * nodes_for(half, h) - 1;
        const int k0 = std::max(-2, static_cast<int>(std::floor((delta - half) / h)));
        spec.dims = {n, n, nodes_for(delta + half - k0 * h, h)};
        spec.h = h;
        spec.origin = Vec3(-h * (n - 1) / 2, -h * (n - 1) / 2, k0 * h);
        const auto g = share(rasterize(spec, [&](const Vec3& x) { return x[2] <= 1e-12 * h; }, true));
        RunTrace tr;
        for (int i = 0; i < ls_snaps; ++i) {
            const double t = T * i / (ls_snaps - 1);
            GridField f = sample_field(g, [&](const Vec3& x) { return halfspace_eval(p, Vec3(0, 0, delta), t, x); }, t);
            tr.add_field(f);
            tr.set_scalar("mass", mass(f));
            if (cfg.monitors.energy) tr.set_scalar("energy", energy(f));
        }
        emit_trace(tr, ctx.path("trace_rung" + std::to_string(r) + ".csv"));
        if (cfg.monitors.local_smoothing) {
            auto rng = ctx.rng(100 + r);
            std::uniform_real_distribution<double> U(-1.0, 1.0), logR(std::log(0.5 * s0), std::log(8.0 * s0));
            for (int k = 0; k < ls_samples; ++k) {
                const Vec3 z(0.5 * half * U(rng), 0.5 * half * U(rng), delta + 0.5 * half * U(rng));
                const double R = std::exp(logR(rng));
                const LocalSmoothing ls = local_smoothing(tr, z, R);
                if (ls.ratio() > worst_ratio) {
                    worst_ratio = ls.ratio();
                    worst = ls;
                }
            }
        }
    }
    emit_table({"epsilon", "delta", "delta_over_epsilon", "difference", "free_norm", "relative"}, rows,
               ctx.path("ladder.csv"));
    monotone_check(ctx, "s1_difference_monotone", diffs);
    for (std::size_t r = 0; r < diffs.size(); ++r) ctx.metric("difference_" + std::to_string(r), diffs[r]);
    if (cfg.monitors.local_smoothing) {
        ctx.metric("local_smoothing_worst_ratio", worst_ratio);
        if (frozen)
            ctx.check("local_smoothing_s1", worst.lhs, worst.rhs, frozen->local_smoothing,
                      worst.lhs <= frozen->local_smoothing * worst.rhs);
    }
    return ctx.finish();
}

// ---------------------------------------------------------------- S2

ScenarioReport run_s2(const ScenarioConfig& cfg) {
    Context ctx(cfg);
    if (cfg.epsilon_ladder.empty()) throw Error(ErrorKind::Config, cfg.name + ": s2 needs an epsilon ladder");
    if (cfg.obstacle.shape != "sphere") throw Error(ErrorKind::Config, cfg.name + ": s2 needs a sphere obstacle");
    const double width = cfg.param("profile_width", 0.5);
    const double kappa = cfg.param("momentum", 1.5);       // in units of 1 / s0, toward the plane
    const double horizon = cfg.param("horizon_s0", 2.0);   // in units of s0^2
    const double dt_s0 = cfg.param("dt_s0", 0.02);
    const double pps = cfg.param("points_per_width", 4.0);
    const double zeta = cfg.param("zeta", 0.1);
    const int snaps = static_cast<int>(cfg.param("snapshots", 11));
    const double R = cfg.obstacle.radius;

    std::vector<std::vector<double>> rows;
    std::vector<double> diffs;
    for (std::size_t r = 0; r < cfg.epsilon_ladder.size(); ++r) {
        const double eps = cfg.epsilon_ladder[r], delta = cfg.delta_for(eps), s0 = width * eps;
        const FreePacket p = gaussian_packet(s0, Vec3(0, 0, -kappa / s0));
        const double T = horizon * s0 * s0, h = s0 / pps;
        const double half = 4.5 * s0 * std::sqrt(1.0 + horizon * horizon);
        const int n = 2 * nodes_for(half, h) - 1;
        GridSpec spec;
        spec.h = h;
        spec.origin = Vec3(-h * (n - 1) / 2, -h * (n - 1) / 2, -(2.0 + zeta) * h);
        spec.dims = {n, n, nodes_for(delta + half - spec.origin[2], h)};
        const auto gobs = share(rasterize(make_sphere(Vec3(0, 0, -R), R), spec, true));
        const auto gplane = share(rasterize(spec, [](const Vec3& x) { return x[2] <= 0.0; }, true));
        auto exact = [&](const std::shared_ptr<const Grid>& g, double t) {
            return sample_field(g, [&](const Vec3& x) {
                return x[2] > 0.0 ? halfspace_eval(p, Vec3(0, 0, delta), t, x) : cplx{};
            }, t);
        };

        RunTrace tr, dobs, dplane;
        MarchStats st_obs, st_plane;
        const GridField fo = march(exact(gobs, 0.0), T, dt_s0 * s0 * s0, snaps, st_obs, [&](const GridField& f) {
            record_basic(tr, f, cfg.monitors.energy);
            dobs.add_field(difference(f, exact(gobs, f.time)));
        });
        const GridField fp = march(exact(gplane, 0.0), T, dt_s0 * s0 * s0, snaps, st_plane,
                                   [&](const GridField& f) { dplane.add_field(difference(f, exact(gplane, f.time))); });
        const double d_obs = strichartz_norm(dobs, strichartz_p, strichartz_p);
        const double d_plane = strichartz_norm(dplane, strichartz_p, strichartz_p);
        const double l2_obs = rel_l2(fo, exact(gobs, T)), l2_plane = rel_l2(fp, exact(gplane, T));
        diffs.push_back(d_obs);
        rows.push_back({eps, delta, R / eps, d_obs, d_plane, l2_obs, l2_plane, st_obs.max_leak});
        emit_trace(tr, ctx.path("trace_rung" + std::to_string(r) + ".csv"));
        if (cfg.monitors.dumps) write_obgf(ctx.path("grid_rung" + std::to_string(r) + ".obgf"), fo);
        ctx.monitor("box_leak_rung" + std::to_string(r), std::max(st_obs.max_leak, st_plane.max_leak), box_leak_budget);
        ctx.monitor("cn_mass_step_rung" + std::to_string(r), std::max(st_obs.max_mass_step, st_plane.max_mass_step), 1e-10);
        ctx.metric("difference_" + std::to_string(r), d_obs);
        ctx.metric("plane_floor_" + std::to_string(r), d_plane);
    }
    emit_table({"epsilon", "delta", "radius_over_epsilon", "difference", "plane_floor", "l2_final", "l2_final_plane",
                "box_leak"},
               rows, ctx.path("ladder.csv"));
    monotone_check(ctx, "s2_difference_monotone", diffs);
    return ctx.finish();
}

// ---------------------------------------------------------------- S3

// Point where the ray from far above along -e3 meets the body.
Vec3 top_point(const ConvexBody& body) {
    const Vec3 from = body.center_hint() + Vec3(0, 0, 4.0 * body.bounding_radius());
    auto hit = first_collision(body, from, Vec3(0, 0, -1));
    if (!hit) throw Error(ErrorKind::Config, "vertical ray misses the obstacle");
    return hit->x_c;
}

ScenarioReport run_s3(const ScenarioConfig& cfg) {
    Context ctx(cfg);
    auto body = cfg.obstacle.build();
    if (!body) throw Error(ErrorKind::Config, cfg.name + ": s3 needs an obstacle");
    if (cfg.epsilon_ladder.empty()) throw Error(ErrorKind::Config, cfg.name + ": s3 needs epsilon");
    const double eps = cfg.epsilon_ladder.front(), delta = cfg.delta_for(eps);
    const FrameParams fp = frame_params(eps, delta, cfg.relaxed);
    const double s = fp.sigma, h = s / cfg.points_per_sigma;
    const int m = static_cast<int>(cfg.param("index", 1));
    const double d = cfg.param("distance_sigma", 2.5) * s;
    const double zeta = cfg.param("zeta", 0.3);
    const double dt = (cfg.dt > 0.0 ? cfg.dt : cfg.param("dt_sigma2", 0.02) * s * s);
    const int snaps = static_cast<int>(cfg.param("snapshots", 11));
    const int n = cfg.grid_n;

    const Vec3 top = top_point(*body);
    const Vec3 origin = top + Vec3(0, 0, d);
    const FreePacket pk = make_packet(fp, Index3{0, 0, -m});
    ClassifyOptions co;
    co.kappa = cfg.kappa;
    co.clearance = cfg.clearance;
    const Parametrix par(*body, {pk}, origin, co);
    const RayEvent& ev = par.events().front();
    if (!ev.entering()) throw Error(ErrorKind::NotEntering, cfg.name + ": launched packet is not entering");
    const double tc = *ev.t_c, T = 2.0 * tc;

    GridSpec spec;
    spec.dims = {n, n, n};
    spec.h = h;
    spec.origin = Vec3(top[0] - h * (n - 1) / 2, top[1] - h * (n - 1) / 2, top[2] - (3.0 + zeta) * h);
    GridSpec cspec = spec;
    cspec.dims[2] = n + static_cast<int>(std::ceil(2.0 * d / h));
    cspec.origin[2] = top[2] - d - h * (n - 1) / 2;
    const auto g = share(rasterize(*body, spec, true));
    const auto g0 = share(rasterize(cspec));

    RunTrace tr;
    MarchStats st, st0;
    const GridField f = march(sample_field(g, [&](const Vec3& x) { return par.eval(0.0, x); }), T, dt, snaps, st,
                              [&](const GridField& u) { record_basic(tr, u, cfg.monitors.energy); });
    const GridField f0 = march(sample_field(g0, [&](const Vec3& x) { return par.eval_free(0.0, x); }), T, dt, snaps,
                               st0, [](const GridField&) {});
    const GridField pe = sample_field(g, [&](const Vec3& x) { return par.eval(T, x); }, T);
    const GridField fe = sample_field(g0, [&](const Vec3& x) { return par.eval_free(T, x); }, T);
    const GridField img = sample_field(g, [&](const Vec3& x) {
        const Vec3 y = x - top;
        return y[2] > 0.0 ? halfspace_eval(pk, Vec3(0, 0, d), T, y) : cplx{};
    }, T);

    const double diff = rel_l2(f, pe), floor = rel_l2(f0, fe);
    const double bound = std::max(0.05, 2.0 * floor);
    ctx.check("parametrix_vs_grid", diff, bound, nan, diff <= bound);
    ctx.metric("relative_difference", diff);
    ctx.metric("control_floor", floor);
    ctx.metric("image_vs_grid", rel_l2(f, img));
    ctx.metric("image_vs_parametrix", rel_l2(pe, img));
    ctx.metric("t_c", tc);
    ctx.metric("sigma", s);
    ctx.metric("h", h);
    ctx.metric("short_time_scale", eps * delta / (10.0 * fp.loglog));
    const ResidualWindow w = boundary_residual_window(*body, pk, build_reflected(pk, ev));
    ctx.metric("boundary_residual_sup_scaled", w.sup * std::pow(s, 1.5));
    ctx.monitor("box_leak", std::max(st.max_leak, st0.max_leak), box_leak_budget);
    ctx.monitor("cn_mass_step", std::max(st.max_mass_step, st0.max_mass_step), 1e-10);

    emit_trace(tr, ctx.path("trace.csv"));
    emit_table({"class", "t_c", "abs_coeff", "residual_sup"},
               {{static_cast<double>(ev.cls), tc, std::abs(pk.coeff), w.sup}}, ctx.path("packets.csv"));
    if (cfg.monitors.dumps) {
        write_obgf(ctx.path("grid_2tc.obgf"), f);
        write_obgf(ctx.path("parametrix_2tc.obgf"), pe);
    }
    return ctx.finish();
}

// ---------------------------------------------------------------- S4

ScenarioReport run_s4(const ScenarioConfig& cfg) {
    Context ctx(cfg);
    if (cfg.epsilon_ladder.empty()) throw Error(ErrorKind::Config, cfg.name + ": s4 needs epsilon");
    const double eps = cfg.epsilon_ladder.front(), delta = cfg.delta_for(eps);
    const FrameParams fp = frame_params(eps, delta, cfg.relaxed);
    const double s = fp.sigma, h = s / cfg.points_per_sigma;
    const int m = static_cast<int>(cfg.param("index", 2));
    const double miss = cfg.param("miss_sigma", 5.0) * s;
    const double Rs = cfg.param("radius_sigma", 2.0) * s;
    const double travel = cfg.param("travel_sigma", 5.0) * s;
    const double dt = (cfg.dt > 0.0 ? cfg.dt : cfg.param("dt_sigma2", 0.02) * s * s);
    const int snaps = static_cast<int>(cfg.param("snapshots", 11));

    const FreePacket pk = make_packet(fp, Index3{m, 0, 0});
    const Vec3 origin(-travel / 2, 0, 0);
    const ConvexBody body = make_sphere(Vec3(0, miss + Rs, 0), Rs);
    ClassifyOptions co;
    co.kappa = cfg.kappa;
    co.clearance = cfg.clearance;
    const RayEvent ev = classify(body, origin, pk.xi, co);
    const double T = travel / (2.0 * pk.xi.norm());
    const double half = 5.0 * s * std::sqrt(1.0 + std::pow(T / (s * s), 2));

    GridSpec spec;
    spec.h = h;
    spec.origin = Vec3(-travel / 2 - half, -half, -half);
    spec.dims = {nodes_for(travel + 2 * half, h), nodes_for(half + miss + 2 * Rs + 6 * h, h), nodes_for(2 * half, h)};
    const auto gobs = share(rasterize(body, spec));
    const auto gfree = share(rasterize(spec));
    auto exact = [&](const std::shared_ptr<const Grid>& g, double t) {
        return sample_field(g, [&](const Vec3& x) { return free_packet_eval_at(pk, origin, t, x); }, t);
    };
    RunTrace tr;
    MarchStats st, st0;
    const GridField fo = march(exact(gobs, 0.0), T, dt, snaps, st,
                               [&](const GridField& u) { record_basic(tr, u, cfg.monitors.energy); });
    const GridField ff = march(exact(gfree, 0.0), T, dt, snaps, st0, [](const GridField&) {});
    const double d_obs = rel_l2(fo, exact(gobs, T)), floor = rel_l2(ff, exact(gfree, T));
    ctx.check("missing_ray_class", ev.cls == RayClass::Missing ? 0.0 : 1.0, 0.0, nan, ev.cls == RayClass::Missing);
    ctx.check("missing_ray_at_floor", d_obs, 2.0 * floor, nan, d_obs <= 2.0 * floor);
    ctx.metric("difference", d_obs);
    ctx.metric("control_floor", floor);
    ctx.metric("min_distance_sigma", ev.min_distance / s);
    ctx.monitor("box_leak", std::max(st.max_leak, st0.max_leak), box_leak_budget);
    ctx.monitor("cn_mass_step", std::max(st.max_mass_step, st0.max_mass_step), 1e-10);
    emit_trace(tr, ctx.path("trace.csv"));
    if (cfg.monitors.dumps) write_obgf(ctx.path("grid_final.obgf"), fo);
    return ctx.finish();
}

// ---------------------------------------------------------------- S5

ScenarioReport run_s5(const ScenarioConfig& cfg) {
    Context ctx(cfg);
    const double h = cfg.param("h", 0.05);
    const int n = cfg.grid_n;
    const double r0 = cfg.obstacle.shape == "sphere" ? cfg.obstacle.radius : 0.5;
    const Vec3 yv(cfg.param("source_x", -1.0), 0, 0), xv(cfg.param("probe_x", 1.0), 0, 0);
    const auto spec = GridSpec::centered(n, h);
    const auto gfree = share(rasterize(spec));
    const std::size_t y = gfree->nearest(yv), x = gfree->nearest(xv);

    // Shrinking-obstacle ladder at z = -1.5.
    const double z0 = -1.5;
    const GridField Gf = resolvent(gfree, z0, y);
    std::vector<double> diffs;
    std::vector<std::vector<double>> rows;
    for (double scale : {1.0, 0.5, 0.25}) {
        const auto g = share(rasterize(make_sphere(Vec3::Zero(), r0 * scale), spec));
        const GridField G = resolvent(g, z0, y);
        const double dlt = std::abs(G[x].real() - Gf[x].real());
        diffs.push_back(dlt);
        rows.push_back({scale, r0 * scale, G[x].real(), Gf[x].real(), dlt});
    }
    emit_table({"scale", "radius", "G_obstacle", "G_free", "difference"}, rows, ctx.path("ladder.csv"));
    monotone_check(ctx, "s5_ladder_monotone", diffs);
    const double r = (gfree->point(x) - gfree->point(y)).norm();
    ctx.metric("free_grid_vs_closed_form", std::abs(Gf[x].real() - free_green(r, z0)) / free_green(r, z0));

    // Maximum-principle sandwich on every active node.
    const auto gobs = share(rasterize(make_sphere(Vec3::Zero(), r0), spec));
    std::vector<std::vector<double>> srows;
    double worst_low = 0.0, worst_high = 0.0;
    for (double z : {-1.9, -1.5, -1.1}) {
        const GridField Go = resolvent(gobs, z, y);
        const GridField Gz = z == z0 ? Gf : resolvent(gfree, z, y);
        double peak = 0.0;
        for (const auto& v : Gz.values) peak = std::max(peak, v.real());
        double low = 0.0, high = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < Go.size(); ++c) {
            if (gobs->masked(c)) continue;
            low = std::min(low, Go[c].real() / peak);
            high = std::max(high, (Go[c].real() - Gz[c].real()) / peak);
        }
        worst_low = std::min(worst_low, low);
        worst_high = std::max(worst_high, high);
        srows.push_back({z, low, high});
    }
    emit_table({"z", "min_G_over_peak", "max_excess_over_peak"}, srows, ctx.path("sandwich.csv"));
    const double tol = 1e-8;
    ctx.check("sandwich_nonnegative", std::max(0.0, -worst_low), tol, nan, -worst_low <= tol);
    ctx.check("sandwich_below_free", worst_high, tol, nan, worst_high <= tol);

    // Halfspace image formula.
    // Its own box: the image check needs about three decay lengths of room.
    const double hi = cfg.param("image_h", 0.1);
    const int ni = static_cast<int>(cfg.param("image_n", 61));
    GridSpec hs = GridSpec::centered(ni, hi);
    hs.dims[2] = ni / 2 + 4;
    hs.origin[2] = -3 * hi;
    const auto gh = share(rasterize(hs, [&](const Vec3& p) { return p[2] <= 1e-12 * hi; }, true));
    const std::size_t yh = gh->nearest(Vec3(0, 0, 0.8));
    const Vec3 yp = gh->point(yh), ybar(yp[0], yp[1], -yp[2]);
    double worst_img = 0.0;
    for (cplx z : {cplx(-1.5, 0.0), cplx(-1.0, 0.5)}) {
        const GridField G = resolvent(gh, z, yh);
        for (const Vec3& q : {Vec3(1.0, 0, 0.8), Vec3(0, 0.7, 0.3), Vec3(-0.8, -0.5, 1.5), Vec3(0.5, 0.5, 0.1)}) {
            const std::size_t c = gh->nearest(q);
            const Vec3 xp = gh->point(c);
            const cplx want = free_green((xp - yp).norm(), z) - free_green((xp - ybar).norm(), z);
            worst_img = std::max(worst_img, std::abs(G[c] - want) / std::abs(want));
        }
    }
    ctx.check("halfspace_image", worst_img, 0.05, nan, worst_img <= 0.05);
    return ctx.finish();
}

// ---------------------------------------------------------------- S6 and calibration

struct NlsRun {
    RunTrace nls;
    RunTrace linear;
    double energy_drift = 0.0;
    double mass_step = 0.0;
    double leak = 0.0;
    double R = 0.0;
    double A = 0.0;
};

NlsRun nls_monitor_run(const ScenarioConfig& cfg, const Vec3& dir, const Vec3& offset) {
    auto body = cfg.obstacle.build();
    if (!body) throw Error(ErrorKind::Config, cfg.name + ": needs an obstacle containing the origin");
    const double h = cfg.param("h", 0.1);
    const double s0 = cfg.param("width", 0.5);
    const double dist = cfg.param("distance", 2.0);
    const double k = cfg.param("momentum", 3.0);
    const double amp = cfg.param("amplitude", 1.5);
    const double T = cfg.horizon > 0.0 ? cfg.horizon : 0.3;
    const double dt = cfg.dt > 0.0 ? cfg.dt : 0.0015;
    const int snaps = static_cast<int>(cfg.param("snapshots", 21));

    const auto g = share(rasterize(*body, GridSpec::centered(cfg.grid_n, h)));
    const Vec3 u = dir.normalized();
    const Vec3 c = -dist * u + offset;
    GridField f0 = sample_field(g, [&](const Vec3& x) {
        return amp * std::exp(-(x - c).squaredNorm() / (4 * s0 * s0)) * std::exp(I * (k * u.dot(x - c)));
    });

    NlsRun run;
    run.A = cfg.param("A", 2.5);
    run.R = run.A * std::sqrt(T);
    const double diam = 2.0 * body->bounding_radius();
    if (run.A < 1.0 || run.R < diam)
        throw Error(ErrorKind::Config, cfg.name + ": Morawetz radius A |I|^{1/2} must cover the obstacle with A >= 1");
    MarchStats st, stl;
    double e0 = nan;
    march(f0, T, dt, snaps, st, [&](const GridField& v) {
        run.nls.add_field(v);
        run.nls.set_scalar("mass", mass(v));
        const double e = energy(v);
        if (std::isnan(e0)) e0 = e;
        run.energy_drift = std::max(run.energy_drift, std::abs(e - e0) / e0);
        run.nls.set_scalar("energy", e);
        if (cfg.monitors.morawetz) {
            const MorawetzTerms mt = morawetz(v, run.R);
            run.nls.set_scalar("F", mt.F);
            run.nls.set_scalar("potential_term", mt.potential_term);
        }
    }, true);
    if (cfg.monitors.local_smoothing)
        march(f0, T, dt, snaps, stl, [&](const GridField& v) { run.linear.add_field(v); });
    run.mass_step = stl.max_mass_step;
    run.leak = std::max(st.max_leak, stl.max_leak);
    return run;
}

LocalSmoothing worst_local_smoothing(const Context& ctx, const RunTrace& tr, std::uint64_t stream, int samples,
                                     double extent) {
    auto rng = ctx.rng(stream);
    std::uniform_real_distribution<double> U(-extent, extent), logR(std::log(0.1), std::log(4.0));
    LocalSmoothing worst{};
    double wr = -1.0;
    for (int i = 0; i < samples; ++i) {
        const Vec3 z(U(rng), U(rng), U(rng));
        const double R = std::exp(logR(rng));
        const LocalSmoothing ls = local_smoothing(tr, z, R);
        if (ls.ratio() > wr) {
            wr = ls.ratio();
            worst = ls;
        }
    }
    return worst;
}

ScenarioReport run_nls(const ScenarioConfig& cfg, const FrozenConstants* frozen, bool calibration) {
    Context ctx(cfg);
    const Vec3 dir = calibration ? Vec3(1, 0, 0) : Vec3(0, 0, 1);
    const Vec3 offset = calibration ? Vec3(0, 0, cfg.param("impact", 0.5)) : Vec3::Zero();
    const NlsRun run = nls_monitor_run(cfg, dir, offset);
    const int samples = static_cast<int>(cfg.param("ls_samples", 16));
    const double extent = cfg.param("ls_extent", 2.0);

    emit_trace(run.nls, ctx.path("trace.csv"));
    ctx.metric("energy_drift", run.energy_drift);
    ctx.metric("morawetz_R", run.R);
    ctx.check("nls_energy_drift", run.energy_drift, 1e-3, nan, run.energy_drift <= 1e-3);
    if (cfg.monitors.local_smoothing) ctx.check("cn_mass_step", run.mass_step, 1e-10, nan, run.mass_step <= 1e-10);
    ctx.monitor("box_leak", run.leak, box_leak_budget);
    if (cfg.monitors.strichartz) {
        ctx.metric("strichartz_10_3", strichartz_norm(run.nls, strichartz_p, strichartz_p));
        ctx.metric("scattering_size", scattering_size(run.nls));
    }
    if (cfg.monitors.morawetz) {
        const BoundCheck b = morawetz_check(run.nls, run.A, 1.0);
        ctx.metric("morawetz_ratio", b.ratio());
        if (!calibration && frozen) {
            ctx.check("morawetz", b.lhs, b.rhs, frozen->morawetz, b.lhs <= frozen->morawetz * b.rhs);
        }
    }
    if (cfg.monitors.local_smoothing) {
        const LocalSmoothing ls = worst_local_smoothing(ctx, run.linear, calibration ? 7 : 11, samples, extent);
        ctx.metric("local_smoothing_worst_ratio", ls.ratio());
        if (!calibration && frozen)
            ctx.check("local_smoothing", ls.lhs, ls.rhs, frozen->local_smoothing,
                      ls.lhs <= frozen->local_smoothing * ls.rhs);
    }
    if (cfg.monitors.heat) {
        // Heat kernel from a source off the obstacle on a small grid around it.
        const double hh = cfg.param("heat_h", 0.1), dt = hh * hh / 3.0;
        const auto g = std::make_shared<const Grid>(
            rasterize(*cfg.obstacle.build(), GridSpec::centered(static_cast<int>(cfg.param("heat_n", 33)), hh)));
        const Vec3 src = calibration ? Vec3(1.0, 0, 0) : Vec3(0, 0.8, -0.5);
        const Vec3 y(cfg.param("heat_source_x", src[0]), cfg.param("heat_source_y", src[1]),
                     cfg.param("heat_source_z", src[2]));
        const HeatEnvelopeReport hr = heat_envelope_check(g, g->nearest(y), 30 * dt, dt);
        ctx.metric("heat_exponent", hr.c);
        ctx.metric("heat_prefactor", hr.prefactor);
        ctx.metric("heat_violation_fraction", hr.violation_fraction());
        if (!calibration && frozen) {
            const double frac = heat_envelope_violations(hr, frozen->heat_exponent, frozen->heat_prefactor);
            ctx.check("heat_envelope", frac, 0.01, frozen->heat_prefactor, frac <= 0.01);
        }
    }
    if (cfg.monitors.dumps) write_obgf(ctx.path("nls_final.obgf"), run.nls.snapshot(run.nls.size() - 1));
    if (calibration) {
        ctx.metric("headroom", cfg.param("headroom", 2.0));
        FrozenConstants fc = constants_from(ctx.report, cfg.param("headroom", 2.0));
        fc.fitted_on = cfg.name;
        write_constants(ctx.path("constants.ini"), fc);
    }
    return ctx.finish();
}

const FrozenConstants* resolve_constants(const ScenarioConfig& cfg, const FrozenConstants* frozen,
                                         FrozenConstants& storage) {
    if (frozen) return frozen;
    if (!cfg.constants.empty()) {
        storage = read_constants(cfg.constants);
        return &storage;
    }
    return nullptr;
}

}  // namespace

FrozenConstants constants_from(const ScenarioReport& cal, double headroom) {
    FrozenConstants c;
    c.headroom = headroom;
    c.morawetz = headroom * cal.metric("morawetz_ratio");
    c.local_smoothing = headroom * cal.metric("local_smoothing_worst_ratio");
    c.heat_exponent = cal.metric("heat_exponent") / headroom;
    c.heat_prefactor = headroom * cal.metric("heat_prefactor");
    c.fitted_on = cal.name;
    return c;
}

HalfspaceGap halfspace_free_gap(double s0, double d) {
    if (!(s0 > 0.0) || !(d >= 0.0)) throw Error(ErrorKind::InvalidArgument, "need s0 > 0 and d >= 0");
    const double p = strichartz_p;
    // t = s0^2 tan(theta): s(t) = s0 / cos(theta), dt = s0^2 / cos^2(theta) dtheta.
    auto spatial = [&](double s, double edge) {
        return std::pow(2 * pi * s * s, -0.75 * p) * (4 * pi * s * s / p) * std::sqrt(pi * s * s / p) * edge;
    };
    using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
    auto integral = [&](bool half) {
        return GK::integrate(
            [&](double th) {
                const double c = std::cos(th), s = s0 / c;
                const double edge = half ? std::erfc(d * std::sqrt(p) * c / (2 * s0)) : 2.0;
                return spatial(s, edge) * s0 * s0 / (c * c);
            },
            0.0, pi / 2, 15, 1e-13);
    };
    HalfspaceGap out;
    // Both half-spaces contribute equally; t < 0 mirrors t > 0.
    out.difference = std::pow(4.0 * integral(true), 1.0 / p);
    out.free_norm = std::pow(2.0 * integral(false), 1.0 / p);
    return out;
}

ScenarioReport run_scenario(const ScenarioConfig& cfg, const FrozenConstants* frozen) {
    cfg.validate();
    FrozenConstants storage;
    const std::string& s = cfg.scenario;
    if (s == "s1") {
        const FrozenConstants* fc = resolve_constants(cfg, frozen, storage);
        if (!fc && cfg.monitors.local_smoothing)
            throw Error(ErrorKind::Config, cfg.name + ": local smoothing needs frozen constants (run calibration)");
        return run_s1(cfg, fc);
    }
    if (s == "s2") return run_s2(cfg);
    if (s == "s3") return run_s3(cfg);
    if (s == "s4") return run_s4(cfg);
    if (s == "s5") return run_s5(cfg);
    if (s == "s6") {
        const FrozenConstants* fc = resolve_constants(cfg, frozen, storage);
        if (!fc && (cfg.monitors.morawetz || cfg.monitors.local_smoothing || cfg.monitors.heat))
            throw Error(ErrorKind::Config, cfg.name + ": monitors need frozen constants (run calibration)");
        return run_nls(cfg, fc, false);
    }
    return run_nls(cfg, nullptr, true);
}

std::vector<ScenarioReport> run_scenarios(const std::vector<ScenarioConfig>& cfgs, unsigned workers,
                                          const FrozenConstants* frozen) {
    std::vector<ScenarioReport> out(cfgs.size());
    std::vector<std::exception_ptr> errors(cfgs.size());
    std::size_t next = 0;
    std::mutex mu;
    auto work = [&] {
        for (;;) {
            std::size_t i;
            {
                std::lock_guard<std::mutex> lock(mu);
                if (next >= cfgs.size()) return;
                i = next++;
            }
            try {
                out[i] = run_scenario(cfgs[i], frozen);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const unsigned n = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(cfgs.size())));
    std::vector<std::thread> pool;
    for (unsigned i = 1; i < n; ++i) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

}  // namespace obeam
