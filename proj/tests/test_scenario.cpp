#include "doctest.h"

#include "obeam/beams.hpp"
#include "obeam/doctor.hpp"
#include "obeam/emit.hpp"
#include "obeam/error.hpp"
#include "obeam/scenario.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

using namespace obeam;
namespace fs = std::filesystem;

namespace {

ScenarioConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::string first_line(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    return line;
}

// Every regular file under a and b, compared byte for byte.
bool same_tree(const fs::path& a, const fs::path& b) {
    std::size_t n = 0;
    for (const auto& e : fs::recursive_directory_iterator(a)) {
        if (!e.is_regular_file()) continue;
        ++n;
        const fs::path other = b / fs::relative(e.path(), a);
        if (!fs::exists(other) || slurp(e.path()) != slurp(other)) return false;
    }
    std::size_t m = 0;
    for (const auto& e : fs::recursive_directory_iterator(b)) m += e.is_regular_file();
    return n == m && n > 0;
}

// Small closed-form s1 and a coarse s4: fast enough for unit tests.
ScenarioConfig small_s1(const std::string& dir) {
    auto c = parse("[scenario]\nkind = s1\nname = tiny_s1\n[ladder]\nepsilon = 0.1 0.025\ndelta_rule = fixed\ndelta = 0.4\n"
                   "[monitors]\nlocal_smoothing = false\nenergy = false\n");
    c.output_dir = dir;
    return c;
}

ScenarioConfig small_s4(const std::string& dir) {
    auto c = parse("[scenario]\nkind = s4\nname = tiny_s4\n[ladder]\nepsilon = 0.1\n[grid]\npoints_per_sigma = 2\n"
                   "[params]\ndt_sigma2 = 0.1\n");
    c.output_dir = dir;
    return c;
}

}  // namespace

TEST_CASE("config parsing") {
    const auto c = parse(R"(
[scenario]
kind = s3
name = demo
seed = 42
[obstacle]
shape = ellipsoid
center = 0 0 1.5
semi_axes = 0.7 1.1 0.5
[ladder]
epsilon = 0.1 0.05 0.025
delta_rule = power_6_7
[grid]
n = 64
points_per_sigma = 5
[time]
dt = 0.001
[thresholds]
kappa = 0.2
clearance = 0.3
[monitors]
morawetz = false
[params]
zeta = 0.25
)");
    CHECK(c.name == "demo");
    CHECK(c.scenario == "s3");
    CHECK(c.seed == 42);
    CHECK(c.obstacle.shape == "ellipsoid");
    CHECK(c.obstacle.semi_axes == Vec3(0.7, 1.1, 0.5));
    CHECK(c.epsilon_ladder == std::vector<double>{0.1, 0.05, 0.025});
    CHECK(c.delta_for(0.05) == doctest::Approx(std::pow(0.05, 6.0 / 7.0)).epsilon(1e-15));
    CHECK(c.grid_n == 64);
    CHECK(c.points_per_sigma == 5.0);
    CHECK(c.dt == 0.001);
    CHECK(c.kappa == 0.2);
    CHECK(c.clearance == 0.3);
    CHECK_FALSE(c.monitors.morawetz);
    CHECK(c.monitors.energy);
    CHECK(c.param("zeta", 0.0) == 0.25);
    CHECK(c.param("absent", 7.0) == 7.0);
    CHECK(c.output_dir == "out/demo");
    CHECK(c.obstacle.build().has_value());

    const auto e = parse("[scenario]\nkind = s1\n[ladder]\nepsilon = 0.1\ndelta_rule = equal_epsilon\n");
    CHECK(e.delta_for(0.1) == 0.1);
    const auto f = parse("[scenario]\nkind = s1\n[ladder]\nepsilon = 0.1\ndelta_rule = fixed\ndelta = 0.4\n");
    CHECK(f.delta_for(0.1) == 0.4);
}

TEST_CASE("config validation errors") {
    auto kind_of = [](const std::string& text) {
        try {
            (void)parse(text);
        } catch (const Error& e) {
            return e.kind();
        }
        return ErrorKind::NonConvergence;  // sentinel: nothing thrown
    };
    CHECK(kind_of("[scenario]\nkind = s9\n") == ErrorKind::Config);
    CHECK(kind_of("[scenario]\nkind = s1\n[ladder]\nepsilon = 0.05 0.1\n") == ErrorKind::Config);
    CHECK(kind_of("[scenario]\nkind = s1\n[ladder]\nepsilon = 0.1 0.1\n") == ErrorKind::Config);
    CHECK(kind_of("[scenario]\nkind = s1\n[ladder]\nepsilon = 0.1 abc\n") == ErrorKind::Config);
    CHECK(kind_of("[scenario]\nkind = s1\n[ladder]\nepsilon = 0.1\ndelta_rule = fixed\ndelta = 0.05\n") == ErrorKind::Config);
    CHECK(kind_of("[scenario]\nkind = s1\n[ladder]\ndelta_rule = sometimes\n") == ErrorKind::Config);
    CHECK(kind_of("[scenario]\nkind = s1\n[grid]\nn = 4\n") == ErrorKind::Config);
    CHECK(kind_of("[scenario]\nkind = s1\n[thresholds]\nkappa = 1.5\n") == ErrorKind::Config);
    CHECK(kind_of("[scenario]\nkind = s1\n[obstacle]\nshape = torus\n") == ErrorKind::Config);
    CHECK(kind_of("[scenario]\nkind = s1\n[params]\nx = 1 2\n") == ErrorKind::Config);
    CHECK(kind_of("[scenario\nkind = s1\n") == ErrorKind::Config);
    CHECK_THROWS_AS(load_config("no_such_config.ini"), Error);
}

TEST_CASE("frozen constants round trip") {
    FrozenConstants c{0.1 + 1e-17, 1.0 / 3.0, 0.2, 1.7, 2.0, "calibration"};
    const std::string path = "test_constants.ini";
    write_constants(path, c);
    const auto r = read_constants(path);
    CHECK(r.morawetz == c.morawetz);
    CHECK(r.local_smoothing == c.local_smoothing);
    CHECK(r.heat_exponent == 0.2);
    CHECK(r.heat_prefactor == 1.7);
    CHECK(r.headroom == 2.0);
    CHECK(r.fitted_on == "calibration");
    std::remove(path.c_str());
    CHECK_THROWS_AS(read_constants(path), Error);
}

TEST_CASE("emit formats") {
    CHECK(format_double(0.1) == "0.10000000000000001");
    CHECK(format_double(std::nan("")) == "nan");
    CHECK(format_double(-INFINITY) == "-inf");

    RunTrace tr;
    tr.add(0.0);
    tr.set_scalar("mass", 1.0);
    tr.add(0.5);
    tr.set_scalar("energy", 2.0);
    emit_trace(tr, "test_trace.csv");
    CHECK(slurp("test_trace.csv") == "t,mass,energy,F,potential_term\n0,1,nan,nan,nan\n0.5,nan,2,nan,nan\n");

    emit_checks({{"a", 1.0, 2.0, 3.0, true}, {"b", 4.0, 0.5, std::nan(""), false}}, "test_checks.csv");
    CHECK(slurp("test_checks.csv") == "name,lhs,rhs,fitted_constant,pass\na,1,2,3,1\nb,4,0.5,nan,0\n");

    CHECK_THROWS_AS(emit_table({"x", "y"}, {{1.0}}, "test_table.csv"), Error);
    CHECK_THROWS_AS(emit_trace(tr, "no_such_dir/x.csv"), Error);
    for (const char* p : {"test_trace.csv", "test_checks.csv", "test_table.csv"}) std::remove(p);
}

TEST_CASE("halfspace gap against brute-force quadrature") {
    // d = 0: the halfspace solution vanishes, so the gap is the free norm.
    const auto g0 = halfspace_free_gap(1.0, 0.0);
    CHECK(g0.difference == doctest::Approx(g0.free_norm).epsilon(1e-10));
    // Scaling: both norms scale like s0^{(5 - 3 p/2) / p} = s0^0 for p = 10/3.
    const auto ga = halfspace_free_gap(1.0, 1.3), gb = halfspace_free_gap(0.25, 0.325);
    CHECK(ga.difference == doctest::Approx(gb.difference).epsilon(1e-9));
    CHECK(ga.free_norm == doctest::Approx(gb.free_norm).epsilon(1e-9));
    CHECK(halfspace_free_gap(1.0, 2.0).difference < ga.difference);

    // Direct sums of |u_H - u|^p over a box and a mapped time grid.
    const double p = 10.0 / 3.0, s0 = 1.0, d = 1.3;
    FreePacket pk;
    pk.params.sigma = s0;
    const Vec3 c(0, 0, d);
    const int nt = 48;
    double total = 0.0;
    for (int it = 0; it < nt; ++it) {
        const double th = (it + 0.5) * (pi / 2) / nt;  // midpoint rule in theta
        const double t = s0 * s0 * std::tan(th), w = std::sqrt(s0 * s0 + t * t / (s0 * s0));
        const double a = 6.5 * w, h = w / 5.0;
        const int n = static_cast<int>(2 * a / h) + 1;
        // x3 nodes on multiples of h so the kink at the plane sits on a node.
        const int k0 = static_cast<int>(std::floor((d - a) / h)), k1 = static_cast<int>(std::ceil((d + a) / h));
        double space = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = k0; k <= k1; ++k) {
                    const Vec3 x(-a + i * h, -a + j * h, k * h);
                    const cplx hs = x[2] > 0.0 ? halfspace_eval(pk, c, t, x) : cplx{};
                    space += std::pow(std::abs(hs - free_packet_eval_at(pk, c, t, x)), p);
                }
        total += space * h * h * h * (pi / 2 / nt) * s0 * s0 / std::pow(std::cos(th), 2);
    }
    const double brute = std::pow(2.0 * total, 1.0 / p);  // t < 0 mirrors t > 0
    CHECK(brute == doctest::Approx(ga.difference).epsilon(2e-3));
}

TEST_CASE("doctor") {
    const auto r = doctor();
    CHECK(r.pass());
    CHECK(r.seconds < 60.0);

    // Mutations of a valid curvature matrix must be caught.
    const Vec3 xf(0.8, -0.4, -2.0);
    const double R1 = 0.7, R2 = 1.3;
    const Mat3 B = curvature_matrix(xf, R1, R2);
    CHECK(curvature_identity_defect(B, xf, R1, R2) <= 1e-12);
    CHECK(curvature_identity_defect(-B, xf, R1, R2) >= 0.5);
    Mat3 flipped = B;
    flipped(0, 2) = -flipped(0, 2);
    flipped(2, 0) = -flipped(2, 0);
    CHECK(curvature_identity_defect(flipped, xf, R1, R2) >= 1e-3);
}

TEST_CASE("scenario outputs are deterministic and isolated") {
    const fs::path root = "test_scenario_out";
    fs::remove_all(root);
    const auto a = run_scenario(small_s1((root / "a1").string()));
    const auto b = run_scenario(small_s1((root / "b1").string()));
    CHECK(a.pass());
    CHECK(same_tree(root / "a1", root / "b1"));
    CHECK(first_line(root / "a1" / "checks.csv") == "name,lhs,rhs,fitted_constant,pass");
    CHECK(first_line(root / "a1" / "metrics.csv") == "name,value");
    CHECK(first_line(root / "a1" / "ladder.csv") == "epsilon,delta,delta_over_epsilon,difference,free_norm,relative");
    CHECK(a.metric("difference_1") < a.metric("difference_0"));
    CHECK_THROWS_AS((void)a.metric("nope"), Error);

    const auto s4 = run_scenario(small_s4((root / "serial4").string()));
    CHECK(first_line(root / "serial4" / "trace.csv") == "t,mass,energy,F,potential_term");
    const auto par = run_scenarios({small_s1((root / "par1").string()), small_s4((root / "par4").string())}, 2);
    REQUIRE(par.size() == 2);
    CHECK(par[0].name == "tiny_s1");
    CHECK(par[1].name == "tiny_s4");
    CHECK(par[1].metrics == s4.metrics);
    CHECK(same_tree(root / "a1", root / "par1"));
    CHECK(same_tree(root / "serial4", root / "par4"));

    // Field dumps round-trip to the same bytes.
    const fs::path dump = root / "serial4" / "grid_final.obgf";
    REQUIRE(fs::exists(dump));
    write_obgf((root / "again.obgf").string(), read_obgf(dump.string()));
    CHECK(slurp(dump) == slurp(root / "again.obgf"));

    // Monitors in s1 need frozen constants.
    auto need = small_s1((root / "c1").string());
    need.monitors.local_smoothing = true;
    CHECK_THROWS_AS(run_scenario(need), Error);
    fs::remove_all(root);
}
