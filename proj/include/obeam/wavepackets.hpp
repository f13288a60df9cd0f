#pragma once

#include "obeam/types.hpp"

#include <map>
#include <string>
#include <vector>

namespace obeam {

struct FrameParams {
    double epsilon = 0.0;
    double delta = 0.0;
    double sigma = 0.0;    // sqrt(eps delta) ln(1/eps)
    double L = 0.0;        // sigma ln ln(1/eps)
    double loglog = 0.0;   // ln ln(1/eps)
    bool relaxed = false;  // built with 1/e > eps >= e^-e (L <= sigma allowed)

    /// Admissible band for |n| / L.
    [[nodiscard]] double band_low() const { return 1.0 / (epsilon * loglog); }
    [[nodiscard]] double band_high() const { return loglog / epsilon; }
    [[nodiscard]] bool admissible(const Index3& n) const;
    /// Upper edge of the band as an index radius, rounded up.
    [[nodiscard]] int default_window() const;
    /// exp(-pi^2 L^2 / (4 sigma^2)): leakage from periodizing the cube.
    [[nodiscard]] double periodization_leakage() const;
    [[nodiscard]] Vec3 xi_of(const Index3& n) const { return n.as_vec() / L; }
};

/// Requires 0 < eps <= delta and eps < e^-e. With `relaxed`, eps < 1/e is
/// accepted so that coarse ladders starting at 0.1 can be built.
FrameParams frame_params(double epsilon, double delta, bool relaxed = false);

cplx gamma(const Index3& n, const FrameParams& p, const Vec3& x);
double gram(const Index3& n, const Index3& m, const FrameParams& p);

/// Samples on the periodic cube [-pi L, pi L)^3, x_j = -pi L + j h, h = 2 pi L / N.
struct CubeField {
    int N = 0;
    double L = 0.0;
    std::vector<cplx> values;  // row-major (i, j, k)

    [[nodiscard]] double h() const { return 2.0 * pi * L / N; }
    [[nodiscard]] double coord(int j) const { return -pi * L + j * h(); }
    [[nodiscard]] Vec3 point(int i, int j, int k) const { return {coord(i), coord(j), coord(k)}; }
    [[nodiscard]] std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * N + j) * N + k;
    }
    [[nodiscard]] double l2_norm() const;
};

/// Built-in data profiles psi_eps(x) = eps^{-3/2} f((x - center) / eps) e^{i k0 . x}.
enum class ProfileKind { Bump, SmoothIndicator, PolyGaussian, Gaussian };

struct Profile {
    ProfileKind kind = ProfileKind::Bump;
    double scale = 1.0;  // eps
    Vec3 center = Vec3::Zero();
    Vec3 k0 = Vec3::Zero();

    [[nodiscard]] cplx operator()(const Vec3& x) const;
    /// Radius (in units of scale) beyond which the profile is below 1e-12 of its peak.
    [[nodiscard]] double support_radius() const;
};

ProfileKind parse_profile_kind(const std::string& name);

/// Smallest grid size meeting the resolution rule for `window` (>= 6 samples
/// per sigma, >= 4 per shortest wavelength) and at least `min_per_scale`
/// samples across one profile scale length.
int resolution_for(const FrameParams& p, int window, double profile_scale, double min_per_scale = 4.0);

CubeField sample_profile(const Profile& f, const FrameParams& p, int N);

struct DecomposeOptions {
    int window = 0;                 // 0: default_window()
    double tail_budget = 1.0;       // relative to ||psi||
    bool check_tail = true;
    bool check_support = true;      // off: integrate over the whole cube as sampled
};

struct Decomposition {
    FrameParams params;
    int window = 0;
    std::map<Index3, cplx> coeffs;  // every n with |n|_inf <= window
    std::vector<Index3> admissible;
    double psi_norm = 0.0;
    double residual_l2 = 0.0;       // || psi - sum_{n in S} c_n gamma_n || on the cube grid
    double tail_estimate = 0.0;     // envelope estimate for indices outside the window
    double envelope_constant = 0.0; // smallest C with |c_n| <= C * envelope(n) over the window

    [[nodiscard]] cplx coeff(const Index3& n) const;
};

/// (sigma eps)^{3/2} / L^3 * min{1, (L / (eps |n|))^k}.
double coefficient_envelope(const FrameParams& p, const Index3& n, int k = 3);

Decomposition decompose(const CubeField& psi, const FrameParams& p, const DecomposeOptions& opt = {});

/// L2 norm (whole space) of sum over window indices outside S, via the exact Gram form.
double tail_mass(const Decomposition& d);

/// sum_{n,m in set} c_n conj(c_m) gram(n,m) over a chosen index set.
double quadratic_form(const Decomposition& d, const std::vector<Index3>& set);

/// sum_{n in set} c_n gamma_n(x).
cplx reconstruct_at(const Decomposition& d, const std::vector<Index3>& set, const Vec3& x);

/// Same sum sampled on the cube grid of `like`.
CubeField reconstruct(const Decomposition& d, const std::vector<Index3>& set, const CubeField& like);

}  // namespace obeam
