#include "obeam/beams.hpp"

#include "obeam/error.hpp"

#include <algorithm>
#include <cmath>

namespace obeam {

FreePacket make_packet(const FrameParams& p, const Index3& n, cplx coeff) {
    FreePacket f;
    f.params = p;
    f.n = n;
    f.xi = p.xi_of(n);
    f.coeff = coeff;
    return f;
}

namespace {

// (sigma^2 + i t)^{-3/2} through the principal square root, cubed.
cplx inv_pow32(double s2, double t) {
    const cplx r = 1.0 / std::sqrt(cplx(s2, t));
    return r * r * r;
}

}  // namespace

cplx free_packet_eval_at(const FreePacket& p, const Vec3& center, double t, const Vec3& x) {
    const double s = p.params.sigma;
    const Vec3 y = x - center;
    const cplx a(s * s, t);
    const Vec3 d = y - 2.0 * t * p.xi;
    const cplx ex = I * (y.dot(p.xi) - t * p.xi.squaredNorm()) - d.squaredNorm() / (4.0 * a);
    return std::pow(2.0 * pi, -0.75) * std::pow(s, 1.5) * inv_pow32(s * s, t) * std::exp(ex);
}

cplx free_packet_eval(const FreePacket& p, double t, const Vec3& x) {
    return free_packet_eval_at(p, Vec3::Zero(), t, x);
}

cplx halfspace_eval(const FreePacket& p, const Vec3& center_offset, double t, const Vec3& x) {
    const Vec3 xbar(x[0], x[1], -x[2]);
    return free_packet_eval_at(p, center_offset, t, x) - free_packet_eval_at(p, center_offset, t, xbar);
}

Mat3 curvature_matrix(const Vec3& xf, double R1, double R2) {
    const double x1 = xf[0], x2 = xf[1], x3 = xf[2];
    Mat3 B;
    B << 4 * x3 / R1, 0.0, 4 * x1 / R1,
         0.0, 4 * x3 / R2, 4 * x2 / R2,
         4 * x1 / R1, 4 * x2 / R2, 4 * x1 * x1 / (R1 * x3) + 4 * x2 * x2 / (R2 * x3);
    return B;
}

namespace {

CMat3 adjugate_inverse(const CMat3& A) {
    CMat3 adj;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            const int r0 = (j + 1) % 3, r1 = (j + 2) % 3, c0 = (i + 1) % 3, c1 = (i + 2) % 3;
            adj(i, j) = A(r0, c0) * A(r1, c1) - A(r0, c1) * A(r1, c0);
        }
    const cplx det = A(0, 0) * adj(0, 0) + A(0, 1) * adj(1, 0) + A(0, 2) * adj(2, 0);
    CMat3 X = adj / det;
    X += X * (CMat3::Identity() - A * X);  // one refinement step
    return X;
}

}  // namespace

ReflectedBeam build_reflected(const FreePacket& p, const RayEvent& event) {
    if (!event.entering()) throw Error(ErrorKind::NotEntering, "reflected beam needs an entering ray");
    if ((event.xi - p.xi).norm() > 1e-12 * p.xi.norm())
        throw Error(ErrorKind::InvalidArgument, "event momentum does not match the packet");
    const Vec3 xf = *event.xi_frame;
    if (!(xf[2] < 0.0)) throw Error(ErrorKind::NotEntering, "xi3 must be negative");

    ReflectedBeam b;
    b.packet = p;
    b.event = event;
    b.origin = event.origin;
    b.basis = event.frame->basis();
    b.eta = reflect(event.xi, event.frame->nu);
    b.B = curvature_matrix(xf, event.frame->R1, event.frame->R2);

    const double s2 = p.params.sigma * p.params.sigma;
    const double tc = *event.t_c;
    b.mu0 = 1.0 / cplx(s2, tc);
    b.SigmaInv = b.mu0 * CMat3::Identity() + I * b.B.cast<cplx>();

    const Eigen::JacobiSVD<CMat3> svd(b.SigmaInv);
    const auto sv = svd.singularValues();
    b.sigma_condition = sv[0] / sv[2];
    if (!(b.sigma_condition <= 1e12)) throw Error(ErrorKind::SingularSigma, "covariance inversion is ill-conditioned");
    b.Sigma = adjugate_inverse(b.SigmaInv);

    const Eigen::SelfAdjointEigenSolver<Mat3> es(b.B);
    // Ascending order: lambda2, lambda1, then the kernel direction eta.
    const Vec3 ev = es.eigenvalues();
    const Mat3 V = es.eigenvectors();
    b.eigvals_B = Vec3(ev[2], ev[1], ev[0]);
    b.eigvecs_B.col(0) = V.col(2);
    b.eigvecs_B.col(1) = V.col(1);
    b.eigvecs_B.col(2) = V.col(0);

    b.detSigma_sqrt = 1.0;
    for (int k = 0; k < 3; ++k) b.detSigma_sqrt *= 1.0 / std::sqrt(b.mu0 + I * b.eigvals_B[k]);
    return b;
}

CMat3 shifted_inverse(const ReflectedBeam& b, double t) {
    const double s = t - *b.event.t_c;
    CMat3 D = CMat3::Zero();
    for (int k = 0; k < 3; ++k) {
        const cplx mu = b.mu0 + I * b.eigvals_B[k];
        D(k, k) = mu / (1.0 + I * s * mu);
    }
    const CMat3 V = b.eigvecs_B.cast<cplx>();
    return V * D * V.transpose();
}

cplx reflected_eval(const ReflectedBeam& b, double t, const Vec3& x) {
    const double sigma = b.packet.params.sigma;
    const double tc = *b.event.t_c;
    const Vec3& xc = *b.event.x_c;
    const double s = t - tc;

    // (det Sigma)^{1/2} det(Sigma + i s)^{-1/2} = prod_k (1 + i s mu_k)^{-1/2}; each factor
    // moves on a line that avoids the negative real axis, so principal roots are continuous.
    cplx pref = std::pow(sigma * sigma / (2.0 * pi), 0.75) * inv_pow32(sigma * sigma, tc);
    const Vec3 d = b.basis.transpose() * (x - (xc + 2.0 * b.eta * s));
    cplx quad{};
    for (int k = 0; k < 3; ++k) {
        const cplx mu = b.mu0 + I * b.eigvals_B[k];
        const cplx f = 1.0 + I * s * mu;
        pref /= std::sqrt(f);
        const double c = b.eigvecs_B.col(k).dot(d);
        quad += (mu / f) * (c * c);
    }
    const cplx ex = I * ((x - xc).dot(b.eta) - t * b.eta.squaredNorm() + (xc - b.origin).dot(b.packet.xi)) - 0.25 * quad;
    return pref * std::exp(ex);
}

CovarianceReport covariance_bounds_check(const ReflectedBeam& b, double t) {
    const FrameParams& p = b.packet.params;
    const double s = t - *b.event.t_c;
    const double tc = *b.event.t_c;
    const double lg = std::log(1.0 / p.epsilon);
    const double s2 = p.sigma * p.sigma;

    CovarianceReport r;
    r.t = t;
    const CMat3 M = shifted_inverse(b, t);
    const Mat3 re = 0.5 * (M.real() + M.real().transpose());
    r.re_min = Eigen::SelfAdjointEigenSolver<Mat3>(re).eigenvalues()[0];
    r.positive = r.re_min > 0.0;
    r.re_envelope = s2 / (std::pow(p.loglog, 25) * (s2 * s2 + std::pow(lg, 4) * t * t));
    r.norm_inv = Eigen::JacobiSVD<CMat3>(M).singularValues()[0];
    r.norm_envelope = std::pow(lg, 5) / std::sqrt(s2 * s2 + t * t);
    double det = 1.0;
    for (int k = 0; k < 3; ++k) det *= std::abs(1.0 + I * s * (b.mu0 + I * b.eigvals_B[k]));
    r.det_factor = 1.0 / std::sqrt(det);
    r.det_envelope = std::pow(lg, 2.5) * std::pow((s2 * s2 + tc * tc) / (s2 * s2 + t * t), 0.75);
    return r;
}

double smoothstep(double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    return x * x * x * (x * (6.0 * x - 15.0) + 10.0);
}

double TimeCutoffs::chi_u(double t) const { return 1.0 - smoothstep((t - t_c - 2.0 * width) / (2.0 * width)); }

double TimeCutoffs::chi_v(double t) const { return smoothstep((t - t_c + 4.0 * width) / (2.0 * width)); }

TimeCutoffs time_cutoffs(const RayEvent& event, const FrameParams& p) {
    if (!event.entering()) throw Error(ErrorKind::NotEntering, "time cutoffs need an entering ray");
    TimeCutoffs c;
    c.t_c = *event.t_c;
    c.width = p.sigma * std::log(1.0 / p.epsilon) / event.xi.norm();
    return c;
}

cplx boundary_residual_at(const FreePacket& p, const ReflectedBeam& b, double t, const Vec3& xs) {
    const Vec3& xc = *b.event.x_c;
    const cplx phase = std::exp(I * (t * p.xi.squaredNorm() - p.xi.dot(xs - xc)));
    return phase * (free_packet_eval_at(p, b.origin, t, xs) - reflected_eval(b, t, xs));
}

cplx boundary_residual(const ConvexBody& body, const FreePacket& p, const ReflectedBeam& b, double t, const Vec3& x) {
    const Vec3 xs = body.level(x) <= body.boundary_tolerance(x) ? x : nearest_boundary_point(body, x);
    return boundary_residual_at(p, b, t, xs);
}

ResidualWindow boundary_residual_window(const ConvexBody& body, const FreePacket& p, const ReflectedBeam& b,
                                        int n_time, int n_radial, int n_angle) {
    const FrameParams& fp = p.params;
    const double lg = std::log(1.0 / fp.epsilon);
    const double rad = fp.sigma * lg;
    const double tw = 4.0 * fp.sigma * lg / p.xi.norm();
    const double tc = *b.event.t_c;
    const Vec3& xc = *b.event.x_c;
    const BoundaryFrame& fr = *b.event.frame;

    std::vector<Vec3> pts{xc};
    for (int r = 1; r <= n_radial; ++r)
        for (int a = 0; a < n_angle; ++a) {
            const double rho = rad * r / n_radial, th = 2.0 * pi * a / n_angle;
            const Vec3 q = xc + rho * (std::cos(th) * fr.tau + std::sin(th) * fr.gamma);
            const Vec3 xs = body.level(q) <= body.boundary_tolerance(q) ? q : nearest_boundary_point(body, q);
            if ((xs - xc).norm() <= rad) pts.push_back(xs);
        }

    ResidualWindow w;
    for (int k = 0; k < n_time; ++k) {
        const double t = tc - tw + 2.0 * tw * k / std::max(1, n_time - 1);
        if (t < 0.0) continue;
        for (const auto& xs : pts) {
            const double a = std::abs(boundary_residual_at(p, b, t, xs));
            ++w.samples;
            if (a > w.sup) {
                w.sup = a;
                w.t_at = t;
                w.x_at = xs;
            }
        }
    }
    return w;
}

Parametrix::Parametrix(const ConvexBody& body, std::vector<FreePacket> packets, const Vec3& origin,
                       const ClassifyOptions& opt)
    : packets_(std::move(packets)), origin_(origin) {
    events_.reserve(packets_.size());
    beam_of_.assign(packets_.size(), -1);
    for (std::size_t q = 0; q < packets_.size(); ++q) {
        events_.push_back(classify(body, origin, packets_[q].xi, opt));
        if (events_.back().entering()) {
            beam_of_[q] = static_cast<int>(beams_.size());
            beams_.push_back(build_reflected(packets_[q], events_.back()));
            cutoffs_.push_back(time_cutoffs(events_.back(), packets_[q].params));
        }
    }
}

Parametrix Parametrix::from_decomposition(const ConvexBody& body, const Decomposition& d, const Vec3& origin,
                                          const ClassifyOptions& opt) {
    std::vector<FreePacket> ps;
    ps.reserve(d.admissible.size());
    for (const auto& n : d.admissible) ps.push_back(make_packet(d.params, n, d.coeff(n)));
    return Parametrix(body, std::move(ps), origin, opt);
}

cplx Parametrix::eval(double t, const Vec3& x) const {
    cplx s{};
    for (std::size_t q = 0; q < packets_.size(); ++q) {
        const FreePacket& p = packets_[q];
        const cplx u = free_packet_eval_at(p, origin_, t, x);
        if (beam_of_[q] < 0) {
            s += p.coeff * u;
            continue;
        }
        const auto& c = cutoffs_[beam_of_[q]];
        const double cu = c.chi_u(t), cv = c.chi_v(t);
        cplx term = cu * u;
        if (cv > 0.0) term -= cv * reflected_eval(beams_[beam_of_[q]], t, x);
        s += p.coeff * term;
    }
    return s;
}

cplx Parametrix::eval_free(double t, const Vec3& x) const {
    cplx s{};
    for (const auto& p : packets_) s += p.coeff * free_packet_eval_at(p, origin_, t, x);
    return s;
}

std::size_t Parametrix::entering_count() const { return beams_.size(); }

double Parametrix::grazing_mass_fraction() const {
    double g = 0.0, all = 0.0;
    for (std::size_t q = 0; q < packets_.size(); ++q) {
        const double m = std::norm(packets_[q].coeff);
        all += m;
        if (events_[q].cls == RayClass::NearGrazing) g += m;
    }
    return all > 0.0 ? g / all : 0.0;
}

}  // namespace obeam
