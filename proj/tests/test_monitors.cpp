#include "doctest.h"

#include "obeam/beams.hpp"
#include "obeam/error.hpp"
#include "obeam/monitors.hpp"
#include "obeam/solver.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace obeam;

namespace {

std::shared_ptr<const Grid> share(Grid g) { return std::make_shared<const Grid>(std::move(g)); }

// Free evolution of the unit Gaussian of width s with momentum k, centred at c at t = 0.
cplx gaussian_packet(double s, const Vec3& c, const Vec3& k, double t, const Vec3& x) {
    const cplx a = s * s + I * t;
    const Vec3 d = x - c - 2.0 * t * k;
    return std::pow(2 * pi * s * s, -0.75) * std::pow(s * s / a, 1.5) *
           std::exp(-d.squaredNorm() / (4.0 * a) + I * (k.dot(x - c) - t * k.squaredNorm()));
}

double packet_width(double s, double t) { return std::sqrt((s * s * s * s + t * t)) / s; }

// Trace of closed-form snapshots, each on an n-node box of half-width 4 w(t)
// following the packet; kh caps h |k| when the phase must be resolved.
RunTrace closed_form_trace(double s, const Vec3& c, const Vec3& k, double T, int n_times, int n = 40,
                           double kh = HUGE_VAL) {
    RunTrace tr;
    for (int i = 0; i <= n_times; ++i) {
        const double t = T * i / n_times;
        tr.add(t, [=] {
            const double w = packet_width(s, t);
            const double h = std::min(8.0 * w / n, kh / std::max(1e-300, k.norm()));
            const int m = std::max(n, int(std::ceil(8.0 * w / h)));
            const auto g = share(rasterize(GridSpec::centered(m + 1, h, c + 2.0 * t * k)));
            return sample_field(g, [&](const Vec3& x) { return gaussian_packet(s, c, k, t, x); }, t);
        });
    }
    return tr;
}

}  // namespace

TEST_CASE("mass and energy") {
    const double s = 0.3;
    const auto g = share(rasterize(GridSpec::centered(73, s / 6)));
    SUBCASE("zero field") {
        const GridField z(g);
        CHECK(mass(z) == 0.0);
        CHECK(energy(z) == 0.0);
    }
    SUBCASE("gaussian closed forms") {
        const auto f = sample_field(g, [&](const Vec3& x) { return gaussian_packet(s, Vec3::Zero(), Vec3::Zero(), 0.0, x); });
        CHECK(std::abs(mass(f) - 1.0) <= 1e-6);
        const double kin = 3.0 / (8.0 * s * s);
        const double pot = std::pow(2 * pi * s * s, -3.0) * std::pow(3.0, -1.5) / 6.0;
        CHECK(std::abs(energy(f) - (kin + pot)) <= 0.01 * (kin + pot));
        CHECK(std::abs(kinetic_energy(f) - kin) <= 0.01 * kin);
    }
    SUBCASE("kinetic energy equals the discrete quadratic form") {
        const auto gm = share(rasterize(make_sphere(Vec3(0.2, 0, 0), 0.5), GridSpec::centered(41, 0.05)));
        const auto f = sample_field(gm, [&](const Vec3& x) { return gaussian_packet(0.3, Vec3(-0.4, 0, 0), Vec3(3, 0, 1), 0.0, x); });
        std::vector<cplx> Au;
        apply_neg_laplacian(*gm, f.values, Au);
        double q = 0.0;
        for (std::size_t c = 0; c < f.size(); ++c) q += (std::conj(f[c]) * Au[c]).real();
        CHECK(kinetic_energy(f) == doctest::Approx(0.5 * q * gm->cell_volume()).epsilon(1e-12));
    }
    SUBCASE("conservation along the flows") {
        const auto gm = share(rasterize(make_sphere(Vec3(0.35, 0, 0), 0.3), GridSpec::centered(33, 0.05)));
        GridField u = sample_field(gm, [&](const Vec3& x) { return 1.5 * gaussian_packet(0.2, Vec3(-0.3, 0, 0), Vec3(4, 0, 0), 0.0, x); });
        const double m0 = mass(u), e0 = energy(u);
        double worst_m = 0.0, worst_e = 0.0;
        for (int n = 0; n < 200; ++n) {
            u = nls_step(u, 2e-4);
            worst_m = std::max(worst_m, std::abs(mass(u) - m0) / m0);
            worst_e = std::max(worst_e, std::abs(energy(u) - e0) / e0);
        }
        MESSAGE("nls drift: mass " << worst_m << " energy " << worst_e);
        CHECK(worst_m <= 1e-8);
        CHECK(worst_e <= 1e-3);
    }
}

TEST_CASE("run trace") {
    RunTrace tr;
    tr.add(0.0);
    tr.set_scalar("mass", 1.0);
    tr.add(1.0);
    CHECK_FALSE(tr.aligned());
    tr.set_scalar("mass", 1.0);
    CHECK(tr.aligned());
    CHECK_THROWS_AS(tr.add(1.0), Error);
    CHECK_THROWS_AS((void)tr.snapshot(0), Error);
    tr.add(2.0);
    tr.set_scalar("energy", 3.0);
    CHECK(std::isnan(tr.scalar("energy")[0]));
    CHECK(tr.slice(1, 3).size() == 2);
}

TEST_CASE("strichartz norms") {
    SUBCASE("time-constant field") {
        const auto g = share(rasterize(GridSpec::centered(24, 0.1)));
        const auto f = sample_field(g, [](const Vec3& x) { return std::exp(-x.squaredNorm()); });
        RunTrace tr;
        for (int i = 0; i <= 7; ++i) tr.add(0.5 + 0.25 * i, [f] { return f; });
        for (auto [q, r] : {std::pair{10.0, 10.0}, std::pair{2.0, 6.0}, std::pair{10.0 / 3, 10.0 / 3}})
            CHECK(strichartz_norm(tr, q, r) == doctest::Approx(std::pow(1.75, 1.0 / q) * lp_norm(f, r)).epsilon(1e-12));
    }
    SUBCASE("free gaussian L^{10/3} against the closed-form modulus") {
        const double s = 0.2, T = 10 * s * s;
        const int n_times = 200;  // stride sigma^2 / 20
        const auto tr = closed_form_trace(s, Vec3::Zero(), Vec3(2, 0, 0), T, n_times);
        const double p = 10.0 / 3.0;
        auto lp_p = [&](double t) {
            const double w2 = std::pow(packet_width(s, t), 2);
            return std::pow(2 * pi * w2, -0.75 * p) * std::pow(4 * pi * w2 / p, 1.5);
        };
        // Composite Simpson on a fine time grid.
        const int m = 20000;
        double ref = lp_p(0) + lp_p(T);
        for (int i = 1; i < m; ++i) ref += (i % 2 ? 4.0 : 2.0) * lp_p(T * i / m);
        ref = std::pow(ref * T / (3.0 * m), 1.0 / p);
        const double got = strichartz_norm(tr, p, p);
        MESSAGE("L^{10/3} grid " << got << " semi-analytic " << ref);
        CHECK(std::abs(got - ref) <= 0.01 * ref);

        const double half = strichartz_norm(tr.slice(0, n_times / 2 + 1), p, p);
        CHECK(half <= got);
        CHECK(strichartz_norm(tr.slice(n_times / 4, n_times / 2 + 1), p, p) <= half);
    }
    SUBCASE("scattering size is additive") {
        const auto tr = closed_form_trace(0.2, Vec3::Zero(), Vec3::Zero(), 0.4, 40, 24);
        const double whole = scattering_size(tr);
        const double parts = scattering_size(tr.slice(0, 18)) + scattering_size(tr.slice(17, 41));
        CHECK(std::abs(whole - parts) <= 1e-12 * whole);
    }
}

TEST_CASE("morawetz terms") {
    const auto g = share(rasterize(make_sphere(Vec3::Zero(), 0.3), GridSpec::centered(49, 0.05)));
    SUBCASE("real field has no momentum") {
        const auto f = sample_field(g, [](const Vec3& x) { return std::exp(-(x - Vec3(0.6, 0, 0)).squaredNorm() / 0.05); });
        const auto m = morawetz(f, 1.0);
        CHECK(std::abs(m.F) <= 1e-14);
        CHECK(m.potential_term > 0.0);
    }
    SUBCASE("sign follows radial momentum") {
        for (double kx : {6.0, -6.0}) {
            const auto f = sample_field(g, [&](const Vec3& x) { return gaussian_packet(0.15, Vec3(0.7, 0.1, 0), Vec3(kx, 0, 0), 0.0, x); });
            const auto m = morawetz(f, 1.0);
            CHECK((kx > 0 ? m.F > 0.0 : m.F < 0.0));
            CHECK(m.potential_term >= 0.0);
        }
    }
    SUBCASE("weight") {
        CHECK(morawetz_phi(0.5) == 1.0);
        CHECK(morawetz_phi(2.5) == 0.0);
        const Vec3 x(0.3, -0.2, 0.5);
        CHECK((morawetz_grad_a(x, 1.0) - x.normalized()).norm() <= 1e-15);
        // grad a against a central difference of a(x) = |x| phi(|x| / R).
        auto a = [](const Vec3& y) { return y.norm() * morawetz_phi(y.norm() / 0.5); };
        const Vec3 y(0.4, 0.5, 0.2);
        Vec3 fd;
        for (int k = 0; k < 3; ++k) fd[k] = (a(y + 1e-6 * Vec3::Unit(k)) - a(y - 1e-6 * Vec3::Unit(k))) / 2e-6;
        CHECK((fd - morawetz_grad_a(y, 0.5)).norm() <= 1e-8);
    }
    SUBCASE("origin must be inside the obstacle") {
        const auto free = share(rasterize(GridSpec::centered(20, 0.1)));
        const GridField f(free);
        CHECK_THROWS_AS(morawetz(f, 1.0), Error);
        CHECK_NOTHROW(morawetz(f, 1.0, false));
    }
}

TEST_CASE("local smoothing") {
    SUBCASE("zero field") {
        const auto g = share(rasterize(GridSpec::centered(16, 0.1)));
        RunTrace tr;
        tr.add(0.0, [g] { return GridField(g); });
        tr.add(1.0, [g] { return GridField(g); });
        CHECK(local_smoothing(tr, Vec3::Zero(), 1.0).lhs == 0.0);
    }
    SUBCASE("free gaussian: ratio bounded over random centres and radii") {
        const double s = 0.2;
        const auto tr = closed_form_trace(s, Vec3::Zero(), Vec3(2, 0, 0), 0.1, 50, 40, 0.5);
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<> u(0, 1);
        double lo = 1e300, hi = 0.0;
        for (int i = 0; i < 20; ++i) {
            const double R = 0.1 + 0.5 * u(rng);
            const Vec3 z(0.4 * u(rng), 0.4 * u(rng) - 0.2, 0.4 * u(rng) - 0.2);
            const double r = local_smoothing(tr, z, R).ratio();
            lo = std::min(lo, r);
            hi = std::max(hi, r);
        }
        MESSAGE("local smoothing ratios in [" << lo << ", " << hi << "]");
        CHECK(lo > 0.0);
        CHECK(hi < 1.0);
    }
    SUBCASE("free gaussian: translating z by 5R along the path") {
        // k sigma = 3 keeps the packet narrower than R while it passes both centres.
        const double s = 0.2, R = 0.3;
        const Vec3 k(15, 0, 0);
        const auto tr = closed_form_trace(s, Vec3(-1, 0, 0), k, 3.5 / 30.0, 59, 40, 0.6);
        const double a = local_smoothing(tr, Vec3::Zero(), R).ratio();
        const double b = local_smoothing(tr, Vec3(5 * R, 0, 0), R).ratio();
        MESSAGE("translated ratios " << a << " " << b);
        CHECK(std::max(a, b) <= 2.0 * std::min(a, b));
    }
}

TEST_CASE("heat envelope") {
    const double h = 0.1, dt = h * h / 3.0;
    SUBCASE("free kernel supports c just below 1/4") {
        const auto g = share(rasterize(GridSpec::centered(33, h)));
        const auto rep = heat_envelope_check(g, g->nearest(Vec3::Zero()), 20 * dt, dt);
        MESSAGE("free fit c=" << rep.c << " K=" << rep.prefactor << " violations " << rep.violations << "/" << rep.sampled);
        CHECK(rep.c <= 0.25);
        CHECK(rep.c >= 0.2);
        CHECK(rep.violation_fraction() <= 0.01);
        CHECK_THROWS_AS(heat_envelope_check(g, 0, 5 * dt, dt), Error);
    }
    SUBCASE("suppression next to the obstacle and symmetry") {
        const auto body = make_sphere(Vec3::Zero(), 0.6);
        const auto g = share(rasterize(body, GridSpec::centered(33, h)));
        const auto gf = share(rasterize(GridSpec::centered(33, h)));
        const std::size_t y = g->nearest(Vec3(1.0, 0, 0));
        const std::size_t x = g->nearest(Vec3(0.7, 0.3, 0));
        const double t = 30 * dt;
        const auto rep = heat_envelope_check(g, y, t, dt);
        const auto rep_free = heat_envelope_check(gf, y, t, dt);
        const auto d = mask_distance(*g);
        const double ratio = rep.kernel[x].real() / rep_free.kernel[x].real();
        MESSAGE("d(x)/sqrt(t)=" << d[x] / std::sqrt(t) << " suppression " << ratio << " fit c=" << rep.c);
        CHECK(ratio <= 2.0 * d[x] / std::sqrt(t));
        CHECK(rep.violation_fraction() <= 0.01);
        const auto back = heat_envelope_check(g, x, t, dt);
        CHECK(std::abs(back.kernel[y].real() - rep.kernel[x].real()) <= 1e-9 * rep.kernel[x].real());
    }
    SUBCASE("mask distance transform against brute force") {
        const auto g = share(rasterize(make_ellipsoid(Vec3(0.05, 0, 0), Vec3(0.5, 0.3, 0.4)), GridSpec::centered(20, 0.1)));
        const auto d = mask_distance(*g);
        for (std::size_t c = 0; c < g->size(); c += 37) {
            double best = 1e300;
            for (std::size_t m = 0; m < g->size(); ++m)
                if (g->masked(m)) best = std::min(best, (g->point(m) - g->point(c)).norm());
            CHECK(d[c] == doctest::Approx(best).epsilon(1e-12));
        }
    }
}
