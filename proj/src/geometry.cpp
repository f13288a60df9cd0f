#include "obeam/geometry.hpp"

#include "obeam/error.hpp"

#include <cmath>
#include <sstream>

namespace obeam {

namespace {

class Ellipsoid final : public LevelSet {
public:
    Ellipsoid(Vec3 c, Vec3 a) : c_(std::move(c)), inv2_(a.cwiseInverse().cwiseAbs2()), a_(std::move(a)) {}

    double value(const Vec3& x) const override { return (x - c_).cwiseAbs2().dot(inv2_) - 1.0; }
    Vec3 grad(const Vec3& x) const override { return 2.0 * (x - c_).cwiseProduct(inv2_); }
    Mat3 hess(const Vec3&) const override { return Mat3((2.0 * inv2_).asDiagonal()); }
    std::string describe() const override {
        std::ostringstream os;
        os << "ellipsoid center=(" << c_.transpose() << ") axes=(" << a_.transpose() << ")";
        return os.str();
    }

private:
    Vec3 c_, inv2_, a_;
};

class Superellipsoid final : public LevelSet {
public:
    Superellipsoid(Vec3 c, Vec3 a, int p) : c_(std::move(c)), a_(std::move(a)), p_(p) {}

    double value(const Vec3& x) const override {
        const Vec3 y = (x - c_).cwiseQuotient(a_);
        double s = 0.0;
        for (int i = 0; i < 3; ++i) s += std::pow(y[i], p_);
        return 0.5 * y.squaredNorm() + 0.5 * s - 1.0;
    }
    Vec3 grad(const Vec3& x) const override {
        const Vec3 y = (x - c_).cwiseQuotient(a_);
        Vec3 g;
        for (int i = 0; i < 3; ++i) g[i] = (y[i] + 0.5 * p_ * std::pow(y[i], p_ - 1)) / a_[i];
        return g;
    }
    Mat3 hess(const Vec3& x) const override {
        const Vec3 y = (x - c_).cwiseQuotient(a_);
        Mat3 h = Mat3::Zero();
        for (int i = 0; i < 3; ++i)
            h(i, i) = (1.0 + 0.5 * p_ * (p_ - 1) * std::pow(y[i], p_ - 2)) / (a_[i] * a_[i]);
        return h;
    }
    std::string describe() const override {
        std::ostringstream os;
        os << "superellipsoid center=(" << c_.transpose() << ") axes=(" << a_.transpose()
           << ") exponent=" << p_;
        return os.str();
    }

private:
    Vec3 c_, a_;
    int p_;
};

class Shifted final : public LevelSet {
public:
    Shifted(std::shared_ptr<const LevelSet> inner, Vec3 shift) : inner_(std::move(inner)), s_(std::move(shift)) {}
    double value(const Vec3& x) const override { return inner_->value(x - s_); }
    Vec3 grad(const Vec3& x) const override { return inner_->grad(x - s_); }
    Mat3 hess(const Vec3& x) const override { return inner_->hess(x - s_); }
    std::string describe() const override {
        std::ostringstream os;
        os << inner_->describe() << " shifted by (" << s_.transpose() << ")";
        return os.str();
    }

private:
    std::shared_ptr<const LevelSet> inner_;
    Vec3 s_;
};

// Point where the segment from the (interior) center hint to x crosses F = 0.
Vec3 ray_cast_toward_center(const ConvexBody& body, const Vec3& x) {
    const Vec3 c = body.center_hint();
    double lo = 0.0, hi = 1.0;  // F(c + lo (x - c)) <= 0 < F(c + hi (x - c))
    for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (body.level(c + mid * (x - c)) <= 0.0) lo = mid;
        else hi = mid;
    }
    return c + 0.5 * (lo + hi) * (x - c);
}

}  // namespace

ConvexBody::ConvexBody(std::shared_ptr<const LevelSet> level, double bounding_radius, Vec3 center_hint)
    : level_(std::move(level)), bounding_radius_(bounding_radius), center_(std::move(center_hint)) {
    if (!(bounding_radius_ > 0.0)) throw Error(ErrorKind::InvalidArgument, "bounding radius must be positive");
    if (!(level_->value(center_) < 0.0))
        throw Error(ErrorKind::InvalidArgument, "center hint must lie inside the obstacle");
}

double ConvexBody::boundary_tolerance(const Vec3& p) const {
    return 1e-10 * grad(p).norm() * bounding_radius_;
}

ConvexBody ConvexBody::translated(const Vec3& shift) const {
    return ConvexBody(std::make_shared<Shifted>(level_, shift), bounding_radius_, center_ + shift);
}

ConvexBody make_sphere(const Vec3& center, double radius) {
    return make_ellipsoid(center, Vec3::Constant(radius));
}

ConvexBody make_ellipsoid(const Vec3& center, const Vec3& semi_axes) {
    if ((semi_axes.array() <= 0.0).any()) throw Error(ErrorKind::InvalidArgument, "semi-axes must be positive");
    return ConvexBody(std::make_shared<Ellipsoid>(center, semi_axes), semi_axes.maxCoeff(), center);
}

ConvexBody make_superellipsoid(const Vec3& center, const Vec3& semi_axes, int exponent) {
    if (exponent < 2 || exponent % 2 != 0)
        throw Error(ErrorKind::InvalidArgument, "superellipsoid exponent must be even and >= 2");
    if ((semi_axes.array() <= 0.0).any()) throw Error(ErrorKind::InvalidArgument, "semi-axes must be positive");
    // The body lies inside the ellipsoid 1/2 |y|^2 <= 1, i.e. |y_i| <= sqrt(2).
    return ConvexBody(std::make_shared<Superellipsoid>(center, semi_axes, exponent),
                      std::sqrt(2.0) * semi_axes.norm(), center);
}

Mat3 BoundaryFrame::basis() const {
    Mat3 q;
    q.col(0) = tau;
    q.col(1) = gamma;
    q.col(2) = nu;
    return q;
}

double distance(const ConvexBody& body, const Vec3& x) {
    if (body.level(x) <= 0.0) return 0.0;
    return (x - nearest_boundary_point(body, x)).norm();
}

// Damped Newton on the KKT system  p - x + mu grad F(p) = 0,  F(p) = 0.
Vec3 nearest_boundary_point(const ConvexBody& body, const Vec3& x) {
    if (body.level(x) <= 0.0)
        throw Error(ErrorKind::InvalidArgument, "nearest_boundary_point needs a point outside the obstacle");

    Vec3 p = ray_cast_toward_center(body, x);
    Vec3 g = body.grad(p);
    double mu = (x - p).dot(g) / g.squaredNorm();
    const double scale = body.bounding_radius() + (x - body.center_hint()).norm();

    auto residual = [&](const Vec3& q, double m) {
        Eigen::Vector4d r;
        r.head<3>() = q - x + m * body.grad(q);
        r[3] = body.level(q) / std::max(body.grad(q).norm(), 1e-300);
        return r;
    };

    Eigen::Vector4d r = residual(p, mu);
    constexpr int max_iter = 100;
    for (int it = 0; it < max_iter; ++it) {
        g = body.grad(p);
        Eigen::Matrix4d J = Eigen::Matrix4d::Zero();
        J.topLeftCorner<3, 3>() = Mat3::Identity() + mu * body.hess(p);
        J.block<3, 1>(0, 3) = g;
        J.block<1, 3>(3, 0) = g.transpose() / g.norm();
        const Eigen::Vector4d step = J.fullPivLu().solve(-r);

        double lambda = 1.0;
        Vec3 p_new;
        double mu_new = mu;
        Eigen::Vector4d r_new;
        for (int ls = 0; ls < 40; ++ls) {
            p_new = p + lambda * step.head<3>();
            mu_new = mu + lambda * step[3];
            r_new = residual(p_new, mu_new);
            if (r_new.norm() < (1.0 - 1e-4 * lambda) * r.norm() || r_new.norm() < 1e-15 * scale) break;
            lambda *= 0.5;
        }
        p = p_new;
        mu = mu_new;
        r = r_new;

        const Vec3 nu = body.grad(p).normalized();
        const bool on_surface = std::abs(body.level(p)) <= 1e-3 * body.boundary_tolerance(p);
        const bool aligned = (x - p).cross(nu).norm() <= 1e-13 * scale;
        if (on_surface && aligned) return p;
        if (lambda < 1e-10) break;
    }
    const Vec3 nu = body.grad(p).normalized();
    if (std::abs(body.level(p)) <= body.boundary_tolerance(p) && (x - p).cross(nu).norm() <= 1e-11 * scale)
        return p;
    throw Error(ErrorKind::NonConvergence, "projection onto the obstacle did not converge");
}

BoundaryFrame principal_frame(const ConvexBody& body, const Vec3& p) {
    const Vec3 g = body.grad(p);
    if (std::abs(body.level(p)) > body.boundary_tolerance(p) * 1e2)
        throw Error(ErrorKind::InvalidArgument, "principal_frame needs a boundary point");
    const double gn = g.norm();
    const Vec3 nu = g / gn;

    const Mat3 rot = rotation_to_normal(nu);
    const Vec3 t1 = rot.col(0), t2 = rot.col(1);
    const Mat3 h = body.hess(p) / gn;
    Eigen::Matrix2d s;
    s << t1.dot(h * t1), t1.dot(h * t2), t2.dot(h * t1), t2.dot(h * t2);
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(s);
    const Eigen::Vector2d k = es.eigenvalues();  // ascending
    if (!(k[0] > 0.0)) throw Error(ErrorKind::DegenerateCurvature, "shape operator is not positive definite");

    BoundaryFrame f;
    f.point = p;
    f.nu = nu;
    // Largest curvature gives the smallest radius R1.
    f.tau = (es.eigenvectors()(0, 1) * t1 + es.eigenvectors()(1, 1) * t2).normalized();
    f.gamma = nu.cross(f.tau);
    f.R1 = 1.0 / k[1];
    f.R2 = 1.0 / k[0];
    return f;
}

Mat3 rotation_to_normal(const Vec3& nu) {
    const double kx = -nu[1], ky = nu[0];  // e3 x nu
    const double k2 = kx * kx + ky * ky;
    if (k2 == 0.0) {
        if (nu[2] > 0.0) return Mat3::Identity();
        return Vec3(1.0, -1.0, -1.0).asDiagonal();
    }
    // 1 + cos computed without cancellation when nu is close to -e3.
    const double one_plus_c = nu[2] >= 0.0 ? 1.0 + nu[2] : k2 / (1.0 - nu[2]);
    Mat3 kx_mat;
    kx_mat << 0.0, 0.0, ky,
              0.0, 0.0, -kx,
              -ky, kx, 0.0;
    return Mat3::Identity() + kx_mat + kx_mat * kx_mat / one_plus_c;
}

}  // namespace obeam
