#pragma once

#include "obeam/rays.hpp"
#include "obeam/wavepackets.hpp"

#include <vector>

namespace obeam {

struct FreePacket {
    FrameParams params;
    Index3 n;
    Vec3 xi = Vec3::Zero();  // n / L
    cplx coeff{1.0, 0.0};
};

FreePacket make_packet(const FrameParams& p, const Index3& n, cplx coeff = 1.0);

/// Free evolution of gamma_n: the closed-form moving Gaussian.
cplx free_packet_eval(const FreePacket& p, double t, const Vec3& x);

/// Free evolution of the packet translated to `center`.
cplx free_packet_eval_at(const FreePacket& p, const Vec3& center, double t, const Vec3& x);

/// Dirichlet solution on {x3 >= 0}: u(t, x - y) - u(t, xbar - y), xbar = (x1, x2, -x3).
cplx halfspace_eval(const FreePacket& p, const Vec3& center_offset, double t, const Vec3& x);

struct ReflectedBeam {
    FreePacket packet;
    RayEvent event;
    Vec3 origin = Vec3::Zero();  // packet center at t = 0
    Vec3 eta = Vec3::Zero();
    Mat3 basis;                  // columns tau, gamma, nu
    Mat3 B;                      // frame coordinates
    CMat3 SigmaInv;              // frame coordinates
    CMat3 Sigma;                 // frame coordinates
    cplx detSigma_sqrt;          // prod over eigenvalues mu_k of Sigma^{-1} of mu_k^{-1/2}
    Vec3 eigvals_B = Vec3::Zero();  // (0, lambda1, lambda2), lambda2 <= lambda1 < 0
    Mat3 eigvecs_B;                 // columns match eigvals_B
    cplx mu0;                       // 1 / (sigma^2 + i t_c)
    double sigma_condition = 0.0;   // 2-norm condition number of Sigma^{-1}
};

/// Builds the curvature-matched beam for an entering ray launched from the
/// packet center (event.origin).
ReflectedBeam build_reflected(const FreePacket& p, const RayEvent& event);

/// B in (tau, gamma, nu) coordinates from xi components and principal radii.
Mat3 curvature_matrix(const Vec3& xi_frame, double R1, double R2);

cplx reflected_eval(const ReflectedBeam& b, double t, const Vec3& x);

struct CovarianceReport {
    double t = 0.0;
    double re_min = 0.0;       // min over sample vectors of Re v^T (Sigma + i s)^{-1} v, |v| = 1
    double re_envelope = 0.0;  // sigma^2 / (LL^25 (sigma^4 + log^4(1/eps) t^2))
    double norm_inv = 0.0;     // spectral norm of (Sigma + i s)^{-1}
    double norm_envelope = 0.0;
    double det_factor = 0.0;   // |det(Id + i s Sigma^{-1})|^{-1/2}
    double det_envelope = 0.0;
    bool positive = false;
    // Constants each inequality needs at this t.
    [[nodiscard]] double re_constant() const { return re_envelope / re_min; }
    [[nodiscard]] double norm_constant() const { return norm_inv / norm_envelope; }
    [[nodiscard]] double det_constant() const { return det_factor / det_envelope; }
};

CovarianceReport covariance_bounds_check(const ReflectedBeam& b, double t);

/// (Sigma + i (t - t_c))^{-1} in frame coordinates via the B eigenbasis.
CMat3 shifted_inverse(const ReflectedBeam& b, double t);

struct TimeCutoffs {
    double t_c = 0.0;
    double width = 0.0;  // sigma ln(1/eps) / |xi|
    [[nodiscard]] double chi_u(double t) const;
    [[nodiscard]] double chi_v(double t) const;
};

/// C^2 quintic smoothstep on [0, 1].
double smoothstep(double x);

TimeCutoffs time_cutoffs(const RayEvent& event, const FrameParams& p);

/// exp{i t |xi|^2 - i xi . (x* - x_c)} [u(t, x*) - v(t, x*)] at a boundary point x*.
cplx boundary_residual_at(const FreePacket& p, const ReflectedBeam& b, double t, const Vec3& xstar);
cplx boundary_residual(const ConvexBody& body, const FreePacket& p, const ReflectedBeam& b, double t, const Vec3& x);

struct ResidualWindow {
    double sup = 0.0;
    double t_at = 0.0;
    Vec3 x_at = Vec3::Zero();
    int samples = 0;
};

/// Sup of |A| over |x* - x_c| <= sigma ln(1/eps), |t - t_c| <= 4 sigma ln(1/eps) / |xi|.
/// Boundary points come from projecting tangent-plane offsets onto the body.
ResidualWindow boundary_residual_window(const ConvexBody& body, const FreePacket& p, const ReflectedBeam& b,
                                        int n_time = 17, int n_radial = 8, int n_angle = 16);

/// Coefficient-weighted sum of free packets and reflected beams.
class Parametrix {
public:
    Parametrix(const ConvexBody& body, std::vector<FreePacket> packets, const Vec3& origin, const ClassifyOptions& opt);

    static Parametrix from_decomposition(const ConvexBody& body, const Decomposition& d, const Vec3& origin,
                                         const ClassifyOptions& opt);

    [[nodiscard]] cplx eval(double t, const Vec3& x) const;
    /// Free part only (every packet propagated without the obstacle).
    [[nodiscard]] cplx eval_free(double t, const Vec3& x) const;

    [[nodiscard]] const std::vector<FreePacket>& packets() const { return packets_; }
    [[nodiscard]] const std::vector<RayEvent>& events() const { return events_; }
    [[nodiscard]] std::size_t entering_count() const;
    /// sum_{G} |c_n|^2 / sum |c_n|^2 over near-grazing packets G.
    [[nodiscard]] double grazing_mass_fraction() const;

private:
    std::vector<FreePacket> packets_;
    std::vector<RayEvent> events_;
    std::vector<int> beam_of_;  // index into beams_ or -1
    std::vector<ReflectedBeam> beams_;
    std::vector<TimeCutoffs> cutoffs_;
    Vec3 origin_;
};

}  // namespace obeam
