#include "doctest.h"

#include "obeam/error.hpp"
#include "obeam/geometry.hpp"

#include <cmath>
#include <random>

using namespace obeam;

namespace {

Vec3 ellipsoid_surface(const Vec3& c, const Vec3& a, double th, double ph) {
    return c + Vec3(a[0] * std::sin(th) * std::cos(ph), a[1] * std::sin(th) * std::sin(ph), a[2] * std::cos(th));
}

Vec3 random_unit(std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    return Vec3(g(rng), g(rng), g(rng)).normalized();
}

}  // namespace

TEST_CASE("sphere distance and projection") {
    const auto s = make_sphere(Vec3(0, 0, 2), 1.0);
    CHECK(distance(s, Vec3::Zero()) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(distance(s, Vec3(0, 0, 2.5)) == 0.0);

    const auto u = make_sphere(Vec3::Zero(), 1.0);
    const Vec3 p = nearest_boundary_point(u, Vec3(0, 0, 3));
    CHECK((p - Vec3(0, 0, 1)).norm() < 1e-12);
    CHECK_THROWS_AS(nearest_boundary_point(u, Vec3(0, 0, 0.5)), Error);
}

TEST_CASE("ellipsoid projection on the major axis hits the pole") {
    const auto e = make_ellipsoid(Vec3::Zero(), Vec3(1, 1, 2));
    const Vec3 p = nearest_boundary_point(e, Vec3(0, 0, 3));
    CHECK((p - Vec3(0, 0, 2)).norm() < 1e-12);
    CHECK(distance(e, Vec3(0, 0, 3)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("projection satisfies first-order conditions and is idempotent") {
    std::mt19937_64 rng(7);
    const auto e = make_ellipsoid(Vec3(0.3, -0.2, 0.5), Vec3(1.0, 0.6, 1.7));
    const auto se = make_superellipsoid(Vec3(0.1, 0.0, -0.4), Vec3(1.0, 0.8, 0.7), 4);
    for (const ConvexBody* b : {&e, &se}) {
        for (int t = 0; t < 300; ++t) {
            const Vec3 x = b->center_hint() + (1.0 + 3.0 * std::uniform_real_distribution<>(0, 1)(rng)) *
                                                   b->bounding_radius() * random_unit(rng);
            const Vec3 p = nearest_boundary_point(*b, x);
            const Vec3 nu = b->grad(p).normalized();
            CHECK(std::abs(b->level(p)) <= 1e-12);
            CHECK((x - p).cross(nu).norm() <= 1e-10);
            CHECK((x - p).dot(nu) > 0.0);
            // Re-projecting a point pushed along the normal returns the same foot.
            const Vec3 p2 = nearest_boundary_point(*b, p + 0.5 * nu);
            CHECK((p2 - p).norm() <= 1e-10);
        }
    }
}

TEST_CASE("ellipsoid distance agrees with dense boundary sampling") {
    const Vec3 c(0.2, 0.1, -0.3), a(1.0, 0.7, 1.4);
    const auto e = make_ellipsoid(c, a);
    std::mt19937_64 rng(11);
    for (int t = 0; t < 4; ++t) {
        const Vec3 x = c + 2.5 * random_unit(rng);
        const double d = distance(e, x);
        double best = 1e300;
        const int n = 1000;  // 10^6 boundary samples
        for (int i = 0; i < n; ++i) {
            const double th = pi * (i + 0.5) / n;
            for (int j = 0; j < n; ++j) {
                const double ph = 2.0 * pi * j / n;
                best = std::min(best, (x - ellipsoid_surface(c, a, th, ph)).norm());
            }
        }
        CHECK(d <= best + 1e-12);
        CHECK(best - d <= 1e-3);
    }
}

TEST_CASE("distance is 1-Lipschitz") {
    const auto e = make_ellipsoid(Vec3::Zero(), Vec3(1.0, 0.5, 0.8));
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<> u(-3, 3);
    for (int t = 0; t < 500; ++t) {
        const Vec3 x(u(rng), u(rng), u(rng)), y(u(rng), u(rng), u(rng));
        CHECK(std::abs(distance(e, x) - distance(e, y)) <= (x - y).norm() + 1e-12);
    }
}

TEST_CASE("principal frame on quadrics") {
    SUBCASE("sphere is umbilic") {
        const auto s = make_sphere(Vec3(1, 2, 3), 2.5);
        const auto f = principal_frame(s, Vec3(1, 2, 3) + 2.5 * Vec3(0.6, 0.0, 0.8));
        CHECK(f.R1 == doctest::Approx(2.5).epsilon(1e-12));
        CHECK(f.R2 == doctest::Approx(2.5).epsilon(1e-12));
    }
    SUBCASE("ellipsoid pole of (a, a, b)") {
        const double a = 1.3, b = 0.7;
        const auto e = make_ellipsoid(Vec3::Zero(), Vec3(a, a, b));
        const auto f = principal_frame(e, Vec3(0, 0, b));
        CHECK(f.R1 == doctest::Approx(a * a / b).epsilon(1e-12));
        CHECK(f.R2 == doctest::Approx(a * a / b).epsilon(1e-12));
        CHECK((f.nu - Vec3(0, 0, 1)).norm() < 1e-14);
    }
    SUBCASE("Gaussian curvature of a triaxial ellipsoid") {
        const Vec3 a(1.0, 1.5, 2.2);
        const auto e = make_ellipsoid(Vec3::Zero(), a);
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<> u(0, 1);
        for (int t = 0; t < 200; ++t) {
            const Vec3 p = ellipsoid_surface(Vec3::Zero(), a, std::acos(1 - 2 * u(rng)), 2 * pi * u(rng));
            const auto f = principal_frame(e, p);
            const double q = p[0] * p[0] / std::pow(a[0], 4) + p[1] * p[1] / std::pow(a[1], 4) + p[2] * p[2] / std::pow(a[2], 4);
            const double K = 1.0 / (a[0] * a[0] * a[1] * a[1] * a[2] * a[2] * q * q);
            CHECK(1.0 / (f.R1 * f.R2) == doctest::Approx(K).epsilon(1e-10));
            CHECK(f.R1 <= f.R2);
            const Mat3 Q = f.basis();
            CHECK((Q.transpose() * Q - Mat3::Identity()).norm() <= 1e-12);
            CHECK(Q.determinant() == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(f.nu.dot(p) > 0.0);
        }
    }
}

TEST_CASE("superellipsoid boundary has positive curvatures, including the poles") {
    for (int p : {2, 4, 6}) {
        const Vec3 a(1.0, 0.8, 1.2);
        const auto b = make_superellipsoid(Vec3::Zero(), a, p);
        std::mt19937_64 rng(p);
        for (int t = 0; t < 200; ++t) {
            const Vec3 x = 3.0 * b.bounding_radius() * random_unit(rng);
            const auto f = principal_frame(b, nearest_boundary_point(b, x));
            CHECK(f.R1 > 0.0);
            CHECK(f.R1 <= f.R2);
            CHECK(std::isfinite(f.R2));
        }
        for (int ax = 0; ax < 3; ++ax) {
            Vec3 x = Vec3::Zero();
            x[ax] = 5.0;
            CHECK_NOTHROW(principal_frame(b, nearest_boundary_point(b, x)));
        }
    }
}

TEST_CASE("construction rejects bad inputs") {
    CHECK_THROWS_AS(make_superellipsoid(Vec3::Zero(), Vec3::Ones(), 3), Error);
    CHECK_THROWS_AS(make_ellipsoid(Vec3::Zero(), Vec3(1, 0, 1)), Error);
}

TEST_CASE("rotation_to_normal") {
    CHECK((rotation_to_normal(Vec3(0, 0, 1)) - Mat3::Identity()).norm() == 0.0);
    const Mat3 flip = rotation_to_normal(Vec3(0, 0, -1));
    CHECK((flip - Mat3(Vec3(1, -1, -1).asDiagonal())).norm() == 0.0);

    std::mt19937_64 rng(13);
    for (int t = 0; t < 2000; ++t) {
        const Vec3 nu = random_unit(rng);
        const Mat3 R = rotation_to_normal(nu);
        CHECK((R * Vec3::UnitZ() - nu).norm() <= 1e-12);
        CHECK((R.transpose() * R - Mat3::Identity()).norm() <= 1e-12);
        CHECK(R.determinant() == doctest::Approx(1.0).epsilon(1e-12));
    }
    // Near the antipode the construction stays accurate.
    const Vec3 nu = Vec3(1e-9, -2e-9, -1.0).normalized();
    const Mat3 R = rotation_to_normal(nu);
    CHECK((R * Vec3::UnitZ() - nu).norm() <= 1e-12);
    CHECK((R.transpose() * R - Mat3::Identity()).norm() <= 1e-12);
}
