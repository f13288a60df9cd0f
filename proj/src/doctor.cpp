#include "obeam/doctor.hpp"

#include "obeam/beams.hpp"
#include "obeam/error.hpp"
#include "obeam/solver.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

namespace obeam {

bool DoctorReport::pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const BoundCheck& c) { return c.pass; });
}

double curvature_identity_defect(const Mat3& B, const Vec3& xf, double R1, double R2) {
    const Vec3 eta(xf[0], xf[1], -xf[2]);
    const double scale = 16.0 * xf.squaredNorm() / (R1 * R2);
    const double sum = 4 * ((xf[0] * xf[0] + xf[2] * xf[2]) / (R1 * std::abs(xf[2])) +
                            (xf[1] * xf[1] + xf[2] * xf[2]) / (R2 * std::abs(xf[2])));
    Eigen::SelfAdjointEigenSolver<Mat3> es(0.5 * (B + B.transpose()));
    Vec3 l = es.eigenvalues();
    std::sort(l.data(), l.data() + 3, [](double a, double b) { return std::abs(a) > std::abs(b); });
    double defect = (B * eta).norm() / (B.norm() * eta.norm());
    defect = std::max(defect, std::abs(-B.trace() - (std::abs(l[0]) + std::abs(l[1]))) / sum);
    defect = std::max(defect, std::abs(l[0] * l[1] - scale) / scale);
    if (!(l[0] < 0.0 && l[1] < 0.0)) defect = std::max(defect, 1.0);
    return defect;
}

namespace {

void add(DoctorReport& r, const std::string& name, double lhs, double rhs) {
    r.checks.push_back({name, lhs, rhs, 0.0, lhs <= rhs});
}

}  // namespace

DoctorReport doctor() {
    const auto start = std::chrono::steady_clock::now();
    DoctorReport r;
    std::mt19937_64 rng(20260101);
    const FrameParams fp = frame_params(0.01, 0.1);

    // Frame norms: exact Gram diagonal and a direct quadrature of |gamma|^2.
    {
        double worst = 0.0;
        for (int k = 0; k < 8; ++k) {
            const Index3 n{int(rng() % 61) - 30, int(rng() % 61) - 30, int(rng() % 61) - 30};
            worst = std::max(worst, std::abs(gram(n, n, fp) - 1.0));
        }
        add(r, "frame_gram_diagonal", worst, 1e-12);

        const Index3 n{3, -2, 5};
        const double s = fp.sigma, h = s / 4, half = 7 * s;
        const int m = static_cast<int>(2 * half / h) + 1;
        double sum = 0.0;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j)
                for (int k = 0; k < m; ++k)
                    sum += std::norm(gamma(n, fp, Vec3(-half + i * h, -half + j * h, -half + k * h)));
        add(r, "frame_quadrature_norm", std::abs(sum * h * h * h - 1.0), 1e-6);
    }

    // Reflection law on random directions and normals.
    {
        std::normal_distribution<double> N;
        double worst = 0.0;
        for (int k = 0; k < 64; ++k) {
            const Vec3 xi(N(rng), N(rng), N(rng));
            const Vec3 nu = Vec3(N(rng), N(rng), N(rng)).normalized();
            const Vec3 eta = reflect(xi, nu);
            worst = std::max({worst, std::abs(eta.norm() - xi.norm()) / xi.norm(),
                              std::abs(eta.dot(nu) + xi.dot(nu)) / xi.norm(),
                              (eta - eta.dot(nu) * nu - (xi - xi.dot(nu) * nu)).norm() / xi.norm(),
                              (reflect(eta, nu) - xi).norm() / xi.norm()});
        }
        add(r, "reflection_law", worst, 1e-13);
    }

    // Sigma algebra on beams built from entering packets.
    {
        const auto body = make_ellipsoid(Vec3(0, 0, 1.5), Vec3(0.7, 1.1, 0.5));
        double inv = 0.0, ident = 0.0;
        int built = 0;
        while (built < 24) {
            const Index3 n{int(rng() % 41) - 20, int(rng() % 41) - 20, int(rng() % 30) + 5};
            const auto p = make_packet(fp, n);
            const auto ev = classify(body, Vec3::Zero(), p.xi, {0.05, 0.05, 0.0});
            if (!ev.entering()) continue;
            ++built;
            const auto b = build_reflected(p, ev);
            inv = std::max(inv, (b.Sigma * b.SigmaInv - CMat3::Identity()).norm());
            ident = std::max(ident, curvature_identity_defect(b.B, *ev.xi_frame, ev.frame->R1, ev.frame->R2));
        }
        add(r, "sigma_inverse", inv, 1e-12);
        add(r, "curvature_identities", ident, 1e-10);
    }

    // CN conserves the discrete mass on a small masked grid.
    {
        const auto g = std::make_shared<const Grid>(rasterize(make_sphere(Vec3::Zero(), 0.3), GridSpec::centered(20, 0.1)));
        GridField f = sample_field(g, [](const Vec3& x) {
            return std::exp(-(x - Vec3(0.5, 0, 0)).squaredNorm() / 0.1) * std::exp(I * (-4.0 * x[0]));
        });
        const double m0 = mass(f);
        double worst = 0.0;
        for (int s = 0; s < 10; ++s) {
            f = cn_step(f, 0.005);
            worst = std::max(worst, std::abs(mass(f) - m0) / m0);
        }
        add(r, "cn_mass_conservation", worst, 1e-10);
    }

    // Mask margin: an obstacle touching the box must be refused.
    {
        bool refused = false;
        try {
            (void)rasterize(make_sphere(Vec3(0.75, 0, 0), 0.3), GridSpec::centered(20, 0.1));
        } catch (const Error& e) {
            refused = e.kind() == ErrorKind::ObstacleTouchesBoundary;
        }
        add(r, "mask_margin_enforced", refused ? 0.0 : 1.0, 0.0);
    }

    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    add(r, "doctor_runtime_seconds", r.seconds, 60.0);
    return r;
}

}  // namespace obeam
