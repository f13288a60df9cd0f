#include "obeam/rays.hpp"

#include "obeam/error.hpp"

#include <cmath>
#include <limits>

namespace obeam {

std::string_view to_string(RayClass c) {
    switch (c) {
        case RayClass::Missing: return "Missing";
        case RayClass::NearGrazing: return "NearGrazing";
        case RayClass::Entering: return "Entering";
    }
    return "Unknown";
}

namespace {

// Chord of the bounding ball cut by the line o + s d (d unit), clipped to s >= 0.
bool ball_chord(const ConvexBody& body, const Vec3& o, const Vec3& d, double& s0, double& s1) {
    const Vec3 w = o - body.center_hint();
    const double b = w.dot(d);
    const double r = body.bounding_radius() * (1.0 + 1e-9);
    const double disc = b * b - (w.squaredNorm() - r * r);
    if (disc < 0.0) return false;
    const double root = std::sqrt(disc);
    s0 = std::max(0.0, -b - root);
    s1 = -b + root;
    return s1 > s0;
}

template <class G>
double golden_min(G&& g, double a, double b, int iters = 200) {
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - r * (b - a), d = a + r * (b - a);
    double gc = g(c), gd = g(d);
    for (int i = 0; i < iters && b - a > 1e-14 * (1.0 + std::abs(b)); ++i) {
        if (gc <= gd) {
            b = d;
            d = c;
            gd = gc;
            c = b - r * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + r * (b - a);
            gd = g(d);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace

std::optional<Collision> first_collision(const ConvexBody& body, const Vec3& origin, const Vec3& xi) {
    const double speed = xi.norm();
    if (!(speed > 0.0)) throw Error(ErrorKind::InvalidArgument, "xi must be nonzero");
    if (body.level(origin) <= 0.0) throw Error(ErrorKind::InvalidArgument, "ray origin must lie outside the obstacle");
    const Vec3 d = xi / speed;

    double s0 = 0.0, s1 = 0.0;
    if (!ball_chord(body, origin, d, s0, s1)) return std::nullopt;
    auto f = [&](double s) { return body.level(origin + s * d); };
    auto fp = [&](double s) { return body.grad(origin + s * d).dot(d); };

    // F is convex along the line, so f' is monotone and its zero is the minimizer.
    double sstar = s0;
    if (fp(s0) < 0.0) {
        double lo = s0, hi = s1;
        if (fp(hi) < 0.0) {
            sstar = hi;
        } else {
            for (int it = 0; it < 200 && hi - lo > 1e-16 * (1.0 + hi); ++it) {
                const double mid = 0.5 * (lo + hi);
                if (fp(mid) < 0.0) lo = mid;
                else hi = mid;
            }
            sstar = 0.5 * (lo + hi);
        }
    }
    const double fmin = f(sstar);
    const double tol = body.boundary_tolerance(origin + sstar * d);
    if (fmin > tol) return std::nullopt;

    double s_hit = sstar;
    if (fmin < -tol) {
        double lo = s0, hi = sstar;  // f(lo) > 0 >= f(hi)
        for (int it = 0; it < 200 && hi - lo > 1e-16 * (1.0 + hi); ++it) {
            const double mid = 0.5 * (lo + hi);
            if (f(mid) > 0.0) lo = mid;
            else hi = mid;
        }
        s_hit = 0.5 * (lo + hi);
    }
    Collision c;
    c.t_c = s_hit / (2.0 * speed);
    c.x_c = origin + 2.0 * c.t_c * xi;
    return c;
}

Vec3 reflect(const Vec3& xi, const Vec3& nu) { return xi - 2.0 * xi.dot(nu) * nu; }

double default_threshold(double epsilon) {
    if (!(epsilon > 0.0 && epsilon < std::exp(-1.0)))
        throw Error(ErrorKind::InvalidScale, "default threshold needs 0 < epsilon < 1/e");
    return std::pow(std::log(std::log(1.0 / epsilon)), -4.0);
}

RayEvent classify(const ConvexBody& body, const Vec3& origin, const Vec3& xi, const ClassifyOptions& opt) {
    if (!(opt.kappa > 0.0 && opt.kappa < 1.0)) throw Error(ErrorKind::InvalidArgument, "kappa must lie in (0,1)");
    if (!(opt.clearance > 0.0 && opt.clearance < 1.0))
        throw Error(ErrorKind::InvalidArgument, "clearance must lie in (0,1)");

    RayEvent ev;
    ev.origin = origin;
    ev.xi = xi;
    const Vec3 d = xi.normalized();
    const double delta = distance(body, origin);

    const auto hit = first_collision(body, origin, xi);
    if (hit) {
        ev.t_c = hit->t_c;
        ev.x_c = hit->x_c;
        ev.min_distance = 0.0;
        ev.min_clearance_ratio = 0.0;
        ev.absolute_clearance_ok = false;
        const Vec3 nu = body.grad(hit->x_c).normalized();
        ev.incidence = std::abs(xi.dot(nu)) / xi.norm();
        if (ev.incidence >= opt.kappa && xi.dot(nu) < 0.0) {
            ev.cls = RayClass::Entering;
            const BoundaryFrame fr = principal_frame(body, hit->x_c);
            ev.frame = fr;
            ev.xi_frame = Vec3(xi.dot(fr.tau), xi.dot(fr.gamma), xi.dot(fr.nu));
        } else {
            ev.cls = RayClass::NearGrazing;
        }
        return ev;
    }

    // dist along a line is convex, so g(s) = dist(o + s d) - clearance * s is convex;
    // its slope tends to 1 - clearance > 0, so the infimum is attained before s_max.
    const double reach = (origin - body.center_hint()).norm() + body.bounding_radius();
    const double s_max = opt.s_max > 0.0 ? opt.s_max : 4.0 * reach / (1.0 - opt.clearance);
    double min_ratio = std::numeric_limits<double>::infinity();
    auto dist_at = [&](double s) { return distance(body, origin + s * d); };
    auto g = [&](double s) {
        const double dd = dist_at(s);
        if (s > 0.0) min_ratio = std::min(min_ratio, dd / s);
        return dd - opt.clearance * s;
    };
    const double s_g = golden_min(g, 0.0, s_max);
    const double g_min = std::min({g(s_g), g(0.0), g(s_max)});
    const double s_d = golden_min(dist_at, 0.0, s_max);
    ev.min_distance = std::min(dist_at(s_d), delta);
    ev.min_clearance_ratio = std::min(min_ratio, 1.0);
    ev.absolute_clearance_ok = ev.min_distance >= 0.5 * opt.clearance * delta;
    ev.cls = g_min >= 0.0 ? RayClass::Missing : RayClass::NearGrazing;
    return ev;
}

Vec3 broken_ray(const RayEvent& event, const Vec3& origin, double t) {
    if (!event.entering()) throw Error(ErrorKind::NotEntering, "broken_ray needs an entering ray");
    const double tc = *event.t_c;
    if (t <= tc) return origin + 2.0 * t * event.xi;
    const Vec3 eta = reflect(event.xi, event.frame->nu);
    return *event.x_c + 2.0 * eta * (t - tc);
}

double divergence_gap(const RayEvent& a, const RayEvent& b, const Vec3& origin, double t) {
    if (!a.entering() || !b.entering()) throw Error(ErrorKind::NotEntering, "divergence_gap needs entering rays");
    return (broken_ray(a, origin, t) - broken_ray(b, origin, t)).norm() - 2.0 * (a.xi - b.xi).norm() * t;
}

}  // namespace obeam
