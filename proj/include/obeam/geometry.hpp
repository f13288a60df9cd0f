#pragma once

#include "obeam/types.hpp"

#include <memory>
#include <string>

namespace obeam {

/// Smooth convex level-set function. The obstacle is {F <= 0}. Built-in
/// implementations are convex as functions, which the ray code relies on
/// (F restricted to a line is unimodal).
class LevelSet {
public:
    virtual ~LevelSet() = default;
    [[nodiscard]] virtual double value(const Vec3& x) const = 0;
    [[nodiscard]] virtual Vec3 grad(const Vec3& x) const = 0;
    [[nodiscard]] virtual Mat3 hess(const Vec3& x) const = 0;
    [[nodiscard]] virtual std::string describe() const = 0;
};

/// Smooth compact strictly convex obstacle.
class ConvexBody {
public:
    ConvexBody(std::shared_ptr<const LevelSet> level, double bounding_radius, Vec3 center_hint);

    [[nodiscard]] double level(const Vec3& x) const { return level_->value(x); }
    [[nodiscard]] Vec3 grad(const Vec3& x) const { return level_->grad(x); }
    [[nodiscard]] Mat3 hess(const Vec3& x) const { return level_->hess(x); }

    [[nodiscard]] double bounding_radius() const { return bounding_radius_; }
    [[nodiscard]] const Vec3& center_hint() const { return center_; }
    [[nodiscard]] std::string describe() const { return level_->describe(); }

    /// |F| <= 1e-10 * |grad F| * bounding_radius.
    [[nodiscard]] double boundary_tolerance(const Vec3& p) const;
    [[nodiscard]] bool inside(const Vec3& x) const { return level(x) <= 0.0; }

    /// Same shape translated by `shift`.
    [[nodiscard]] ConvexBody translated(const Vec3& shift) const;

private:
    std::shared_ptr<const LevelSet> level_;
    double bounding_radius_;
    Vec3 center_;
};

ConvexBody make_sphere(const Vec3& center, double radius);
ConvexBody make_ellipsoid(const Vec3& center, const Vec3& semi_axes);
/// F = 1/2 |y|^2 + 1/2 sum y_i^p - 1 with y = (x - c) / a and even p >= 2.
/// The quadratic half keeps the shape operator positive definite at the
/// axis poles, where the pure power |y_i|^p has vanishing curvature.
ConvexBody make_superellipsoid(const Vec3& center, const Vec3& semi_axes, int exponent);

/// Principal frame at a boundary point: tau, gamma span the tangent plane
/// along the principal directions, nu is the outward unit normal.
struct BoundaryFrame {
    Vec3 point;
    Vec3 tau;
    Vec3 gamma;
    Vec3 nu;
    double R1 = 0.0;  // smaller radius of principal curvature
    double R2 = 0.0;

    /// Columns (tau, gamma, nu); maps frame coordinates to world.
    [[nodiscard]] Mat3 basis() const;
};

double distance(const ConvexBody& body, const Vec3& x);
Vec3 nearest_boundary_point(const ConvexBody& body, const Vec3& x);
BoundaryFrame principal_frame(const ConvexBody& body, const Vec3& p);

/// Minimal rotation R with R e3 = nu; rotation by pi about e1 when nu = -e3.
Mat3 rotation_to_normal(const Vec3& nu);

}  // namespace obeam
