#pragma once

#include "obeam/geometry.hpp"

#include <optional>

namespace obeam {

enum class RayClass { Missing, NearGrazing, Entering };

std::string_view to_string(RayClass c);

struct Collision {
    double t_c = 0.0;
    Vec3 x_c = Vec3::Zero();
};

struct RayEvent {
    RayClass cls = RayClass::Missing;
    Vec3 origin = Vec3::Zero();
    Vec3 xi = Vec3::Zero();
    std::optional<double> t_c;
    std::optional<Vec3> x_c;
    std::optional<BoundaryFrame> frame;
    /// (xi1, xi2, xi3): xi in (tau, gamma, nu) coordinates; xi3 < 0 when entering.
    std::optional<Vec3> xi_frame;

    // Diagnostics.
    double incidence = 0.0;         // |xi . nu| / |xi| at x_c, 0 when no collision
    double min_clearance_ratio = 0;  // inf over sampled s of dist / |2 t xi|
    double min_distance = 0.0;      // inf over t >= 0 of dist(origin + 2 t xi)
    bool absolute_clearance_ok = false;  // min_distance >= clearance * delta / 2 (delta = dist(origin))

    [[nodiscard]] bool entering() const { return cls == RayClass::Entering; }
};

/// Smallest t >= 0 with origin + 2 t xi on the boundary, if any.
std::optional<Collision> first_collision(const ConvexBody& body, const Vec3& origin, const Vec3& xi);

/// Mirror law eta = xi - 2 (xi . nu) nu.
Vec3 reflect(const Vec3& xi, const Vec3& nu);

struct ClassifyOptions {
    double kappa = 0.1;
    double clearance = 0.1;
    /// Upper end of the golden-section search in path length s = 2 t |xi|;
    /// 0 selects a default derived from the body size.
    double s_max = 0.0;
};

RayEvent classify(const ConvexBody& body, const Vec3& origin, const Vec3& xi, const ClassifyOptions& opt);

/// Default grazing/clearance threshold [ln ln(1/eps)]^-4.
double default_threshold(double epsilon);

/// Center of the broken ray: straight before t_c, reflected after.
Vec3 broken_ray(const RayEvent& event, const Vec3& origin, double t);

/// |x_A(t) - x_B(t)| - 2 |xi_A - xi_B| t for t past both collisions.
double divergence_gap(const RayEvent& a, const RayEvent& b, const Vec3& origin, double t);

}  // namespace obeam
