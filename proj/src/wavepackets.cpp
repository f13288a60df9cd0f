#include "obeam/wavepackets.hpp"

#include "obeam/error.hpp"
#include "obeam/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace obeam {

bool FrameParams::admissible(const Index3& n) const {
    const double r = n.norm() / L;
    return r >= band_low() && r <= band_high();
}

int FrameParams::default_window() const { return std::max(1, static_cast<int>(std::ceil(L * band_high() - 1e-12))); }

double FrameParams::periodization_leakage() const { return std::exp(-pi * pi * L * L / (4.0 * sigma * sigma)); }

FrameParams frame_params(double epsilon, double delta, bool relaxed) {
    if (!(epsilon > 0.0) || !(delta >= epsilon) || !std::isfinite(delta))
        throw Error(ErrorKind::InvalidScale, "need 0 < epsilon <= delta");
    const double cap = relaxed ? std::exp(-1.0) : std::exp(-std::exp(1.0));
    if (!(epsilon < cap))
        throw Error(ErrorKind::InvalidScale, relaxed ? "need epsilon < 1/e" : "need epsilon < e^-e so that L > sigma");
    FrameParams p;
    p.epsilon = epsilon;
    p.delta = delta;
    p.relaxed = relaxed;
    const double lg = std::log(1.0 / epsilon);
    p.loglog = std::log(lg);
    p.sigma = std::sqrt(epsilon * delta) * lg;
    p.L = p.sigma * p.loglog;
    return p;
}

cplx gamma(const Index3& n, const FrameParams& p, const Vec3& x) {
    const double amp = std::pow(2.0 * pi * p.sigma * p.sigma, -0.75);
    const double env = std::exp(-x.squaredNorm() / (4.0 * p.sigma * p.sigma));
    return amp * env * std::exp(I * (n.as_vec().dot(x) / p.L));
}

double gram(const Index3& n, const Index3& m, const FrameParams& p) {
    const Index3 d{n.i - m.i, n.j - m.j, n.k - m.k};
    const double r2 = d.as_vec().squaredNorm();
    return std::exp(-p.sigma * p.sigma * r2 / (2.0 * p.L * p.L));
}

double CubeField::l2_norm() const {
    double s = 0.0;
    for (const auto& v : values) s += std::norm(v);
    return std::sqrt(s * h() * h() * h());
}

cplx Profile::operator()(const Vec3& x) const {
    const Vec3 y = (x - center) / scale;
    const double r2 = y.squaredNorm();
    double f = 0.0;
    switch (kind) {
        case ProfileKind::Bump:
            f = r2 < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - r2)) : 0.0;
            break;
        case ProfileKind::SmoothIndicator: {
            const double r = std::sqrt(r2);
            auto e = [](double s) { return s > 0.0 ? std::exp(-1.0 / s) : 0.0; };
            const double s = (1.0 - r) / 0.5;  // 1 at r = 0.5, 0 at r = 1
            f = r <= 0.5 ? 1.0 : (r >= 1.0 ? 0.0 : e(s) / (e(s) + e(1.0 - s)));
            break;
        }
        case ProfileKind::PolyGaussian:
            f = (1.0 + y[0] + y[1] * y[1]) * std::exp(-4.0 * r2);
            break;
        case ProfileKind::Gaussian:
            f = std::exp(-2.0 * r2);
            break;
    }
    return std::pow(scale, -1.5) * f * std::exp(I * k0.dot(x));
}

double Profile::support_radius() const {
    switch (kind) {
        case ProfileKind::Bump:
        case ProfileKind::SmoothIndicator: return 1.0;
        case ProfileKind::PolyGaussian: return 3.0;
        case ProfileKind::Gaussian: return 3.75;
    }
    return 1.0;
}

ProfileKind parse_profile_kind(const std::string& name) {
    if (name == "bump") return ProfileKind::Bump;
    if (name == "smooth_indicator") return ProfileKind::SmoothIndicator;
    if (name == "poly_gaussian") return ProfileKind::PolyGaussian;
    if (name == "gaussian") return ProfileKind::Gaussian;
    throw Error(ErrorKind::Config, "unknown profile '" + name + "'");
}

int resolution_for(const FrameParams& p, int window, double profile_scale, double min_per_scale) {
    const double side = 2.0 * pi * p.L;
    double n = std::max({6.0 * side / p.sigma, 4.0 * window, min_per_scale * side / profile_scale, 8.0});
    int N = static_cast<int>(std::ceil(n - 1e-9));
    if (N % 2) ++N;
    return N;
}

CubeField sample_profile(const Profile& f, const FrameParams& p, int N) {
    CubeField c;
    c.N = N;
    c.L = p.L;
    c.values.assign(static_cast<std::size_t>(N) * N * N, cplx{});
    parallel_chunks(static_cast<std::size_t>(N), 1, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i)
            for (int j = 0; j < N; ++j)
                for (int k = 0; k < N; ++k) c.values[c.index(int(i), j, k)] = f(c.point(int(i), j, k));
    });
    return c;
}

cplx Decomposition::coeff(const Index3& n) const {
    const auto it = coeffs.find(n);
    return it == coeffs.end() ? cplx{} : it->second;
}

double coefficient_envelope(const FrameParams& p, const Index3& n, int k) {
    const double a = std::pow(p.sigma * p.epsilon, 1.5) / std::pow(p.L, 3);
    const double r = n.norm();
    if (r == 0.0) return a;
    return a * std::min(1.0, std::pow(p.L / (p.epsilon * r), k));
}

namespace {

// Dense (2W+1)^3 array of coefficients, index (n + W) row-major.
struct CoeffCube {
    int W = 0;
    int M = 0;
    std::vector<cplx> c;
    explicit CoeffCube(int w) : W(w), M(2 * w + 1), c(static_cast<std::size_t>(M) * M * M) {}
    std::size_t at(int a, int b, int d) const { return (static_cast<std::size_t>(a + W) * M + (b + W)) * M + (d + W); }
};

// For each axis value: table e^{sign i n x_j / L}, n in [-W, W], j in [0, N).
std::vector<cplx> twiddles(const CubeField& f, int W, double sign) {
    const int M = 2 * W + 1;
    std::vector<cplx> t(static_cast<std::size_t>(M) * f.N);
    for (int a = 0; a < M; ++a) {
        const int n = a - W;
        for (int j = 0; j < f.N; ++j) {
            // x_j / L = -pi + 2 pi j / N; reduce the integer phase exactly.
            const long long q = static_cast<long long>(n) * j % f.N;
            const double ph = sign * (-pi * n + 2.0 * pi * static_cast<double>(q) / f.N);
            t[static_cast<std::size_t>(a) * f.N + j] = std::polar(1.0, ph);
        }
    }
    return t;
}

// sum_{n} c_n e^{i n . x_j / L} on the grid (no envelope).
std::vector<cplx> synthesize(const CoeffCube& cc, const CubeField& like) {
    const int N = like.N, M = cc.M, W = cc.W;
    const auto tw = twiddles(like, W, +1.0);
    // Stage 1: over n3 -> (a, b, k).
    std::vector<cplx> s1(static_cast<std::size_t>(M) * M * N);
    for (int a = 0; a < M; ++a)
        for (int b = 0; b < M; ++b)
            for (int k = 0; k < N; ++k) {
                cplx acc{};
                for (int d = 0; d < M; ++d) acc += cc.c[(static_cast<std::size_t>(a) * M + b) * M + d] * tw[static_cast<std::size_t>(d) * N + k];
                s1[(static_cast<std::size_t>(a) * M + b) * N + k] = acc;
            }
    // Stage 2: over n2 -> (a, j, k).
    std::vector<cplx> s2(static_cast<std::size_t>(M) * N * N);
    for (int a = 0; a < M; ++a)
        for (int j = 0; j < N; ++j)
            for (int k = 0; k < N; ++k) {
                cplx acc{};
                for (int b = 0; b < M; ++b) acc += s1[(static_cast<std::size_t>(a) * M + b) * N + k] * tw[static_cast<std::size_t>(b) * N + j];
                s2[(static_cast<std::size_t>(a) * N + j) * N + k] = acc;
            }
    // Stage 3: over n1 -> (i, j, k).
    std::vector<cplx> out(static_cast<std::size_t>(N) * N * N);
    parallel_chunks(static_cast<std::size_t>(N), 1, [&](std::size_t b0, std::size_t e0) {
        for (std::size_t i = b0; i < e0; ++i)
            for (int j = 0; j < N; ++j)
                for (int k = 0; k < N; ++k) {
                    cplx acc{};
                    for (int a = 0; a < M; ++a)
                        acc += s2[(static_cast<std::size_t>(a) * N + j) * N + k] * tw[static_cast<std::size_t>(a) * N + i];
                    out[(i * N + j) * N + k] = acc;
                }
    });
    return out;
}

double envelope(const FrameParams& p, const Vec3& x) {
    return std::pow(2.0 * pi * p.sigma * p.sigma, -0.75) * std::exp(-x.squaredNorm() / (4.0 * p.sigma * p.sigma));
}

CoeffCube to_cube(const Decomposition& d, const std::vector<Index3>& set) {
    CoeffCube cc(d.window);
    for (const auto& n : set) {
        if (n.max_abs() > d.window) continue;
        cc.c[cc.at(n.i, n.j, n.k)] = d.coeff(n);
    }
    return cc;
}

// Sum over |n|_2 > W of envelope(n)^2, bounded by the radial integral.
double excluded_envelope_sq(const FrameParams& p, int W) {
    const double a = std::pow(p.sigma * p.epsilon, 1.5) / std::pow(p.L, 3);
    const double r0 = p.L / p.epsilon;
    const double rl = std::max<double>(W, 0.5);
    double s = 0.0;
    if (rl < r0) s += 4.0 * pi / 3.0 * (r0 * r0 * r0 - rl * rl * rl);
    const double lo = std::max(rl, r0);
    s += 4.0 * pi / 3.0 * std::pow(r0, 6) / (lo * lo * lo);
    return a * a * s;
}

}  // namespace

Decomposition decompose(const CubeField& psi, const FrameParams& p, const DecomposeOptions& opt) {
    const int N = psi.N;
    if (N < 8 || psi.values.size() != static_cast<std::size_t>(N) * N * N)
        throw Error(ErrorKind::InvalidArgument, "cube field has inconsistent size");
    if (std::abs(psi.L - p.L) > 1e-12 * p.L) throw Error(ErrorKind::InvalidArgument, "cube field built for another L");


    // Support check and index range of the half cube.
    double peak = 0.0;
    for (const auto& v : psi.values) peak = std::max(peak, std::abs(v));
    const double half = (opt.check_support ? 0.5 : 1.0) * pi * p.L * (1.0 + 1e-12);
    int jlo = N, jhi = -1;
    for (int j = 0; j < N; ++j)
        if (std::abs(psi.coord(j)) <= half) {
            jlo = std::min(jlo, j);
            jhi = std::max(jhi, j);
        }
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            for (int k = 0; k < N; ++k) {
                const bool inside = i >= jlo && i <= jhi && j >= jlo && j <= jhi && k >= jlo && k <= jhi;
                if (!inside && std::abs(psi.values[psi.index(i, j, k)]) > 1e-10 * peak)
                    throw Error(ErrorKind::SupportViolation, "field is not supported in the half cube");
            }
    const int S = jhi - jlo + 1;

    Decomposition d;
    d.params = p;
    d.window = opt.window > 0 ? opt.window : p.default_window();
    const int W = d.window, M = 2 * W + 1;
    if (N < 2 * W + 1) throw Error(ErrorKind::InvalidArgument, "grid too coarse for the requested window");

    // Weighted field on the support block, weight in extended precision.
    const long double s2 = static_cast<long double>(p.sigma) * p.sigma;
    const long double wamp = std::pow(2.0L * static_cast<long double>(pi) * s2, 0.75L);
    std::vector<std::complex<long double>> f(static_cast<std::size_t>(S) * S * S);
    for (int i = 0; i < S; ++i)
        for (int j = 0; j < S; ++j)
            for (int k = 0; k < S; ++k) {
                const Vec3 x = psi.point(i + jlo, j + jlo, k + jlo);
                const long double w = wamp * std::exp(static_cast<long double>(x.squaredNorm()) / (4.0L * s2));
                const cplx v = psi.values[psi.index(i + jlo, j + jlo, k + jlo)];
                f[(static_cast<std::size_t>(i) * S + j) * S + k] = std::complex<long double>(v.real(), v.imag()) * w;
            }

    const auto tw = twiddles(psi, W, -1.0);
    auto T = [&](int a, int j) { const cplx t = tw[static_cast<std::size_t>(a) * N + j + jlo]; return std::complex<long double>(t.real(), t.imag()); };

    // Stage 1 over x1, extended precision: (a, j, k).
    std::vector<std::complex<long double>> g1(static_cast<std::size_t>(M) * S * S);
    parallel_chunks(static_cast<std::size_t>(M), 1, [&](std::size_t b0, std::size_t e0) {
        for (std::size_t a = b0; a < e0; ++a)
            for (int j = 0; j < S; ++j)
                for (int k = 0; k < S; ++k) {
                    std::complex<long double> acc{};
                    for (int i = 0; i < S; ++i) acc += f[(static_cast<std::size_t>(i) * S + j) * S + k] * T(int(a), i);
                    g1[(a * S + j) * S + k] = acc;
                }
    });
    // Stage 2 over x2: (a, b, k).
    std::vector<std::complex<long double>> g2(static_cast<std::size_t>(M) * M * S);
    for (int a = 0; a < M; ++a)
        for (int b = 0; b < M; ++b)
            for (int k = 0; k < S; ++k) {
                std::complex<long double> acc{};
                for (int j = 0; j < S; ++j) acc += g1[(static_cast<std::size_t>(a) * S + j) * S + k] * T(b, j);
                g2[(static_cast<std::size_t>(a) * M + b) * S + k] = acc;
            }
    // Stage 3 over x3 and normalization.
    const double h = psi.h();
    const long double pref = static_cast<long double>(h * h * h) / std::pow(2.0L * static_cast<long double>(pi) * p.L, 3.0L);
    CoeffCube all(W);
    for (int a = 0; a < M; ++a)
        for (int b = 0; b < M; ++b)
            for (int c = 0; c < M; ++c) {
                std::complex<long double> acc{};
                for (int k = 0; k < S; ++k) acc += g2[(static_cast<std::size_t>(a) * M + b) * S + k] * T(c, k);
                acc *= pref;
                const Index3 n{a - W, b - W, c - W};
                const cplx cn(static_cast<double>(acc.real()), static_cast<double>(acc.imag()));
                d.coeffs.emplace(n, cn);
                all.c[(static_cast<std::size_t>(a) * M + b) * M + c] = cn;
                if (p.admissible(n)) d.admissible.push_back(n);
                d.envelope_constant = std::max(d.envelope_constant, std::abs(cn) / coefficient_envelope(p, n));
            }

    d.psi_norm = psi.l2_norm();

    // Residual of the admissible reconstruction on the cube grid.
    const CubeField rec = reconstruct(d, d.admissible, psi);
    double r2 = 0.0;
    for (std::size_t q = 0; q < rec.values.size(); ++q) r2 += std::norm(psi.values[q] - rec.values[q]);
    d.residual_l2 = std::sqrt(r2 * h * h * h);

    // Frame upper bound sum_m gram(0, m) times the excluded envelope mass.
    double g1d = 0.0;
    for (int k = -200; k <= 200; ++k) g1d += std::exp(-p.sigma * p.sigma * k * k / (2.0 * p.L * p.L));
    d.tail_estimate = d.envelope_constant * std::sqrt(excluded_envelope_sq(p, W) * g1d * g1d * g1d);
    if (opt.check_tail && d.tail_estimate > opt.tail_budget * d.psi_norm)
        throw Error(ErrorKind::WindowTooSmall, "coefficient tail beyond the window exceeds the budget");
    return d;
}

double quadratic_form(const Decomposition& d, const std::vector<Index3>& set) {
    const FrameParams& p = d.params;
    CoeffCube cc = to_cube(d, set);
    const int M = cc.M;
    std::vector<double> g(static_cast<std::size_t>(2 * M - 1));
    for (int k = -(M - 1); k <= M - 1; ++k) g[k + M - 1] = std::exp(-p.sigma * p.sigma * k * k / (2.0 * p.L * p.L));
    // Separable Gram convolution along each axis.
    std::vector<cplx> a = cc.c, b(a.size());
    const std::size_t strides[3] = {static_cast<std::size_t>(M) * M, static_cast<std::size_t>(M), 1};
    for (int ax = 0; ax < 3; ++ax) {
        const std::size_t st = strides[ax];
        for (std::size_t q = 0; q < a.size(); ++q) {
            const int pos = static_cast<int>((q / st) % M);
            const std::size_t base = q - pos * st;
            cplx acc{};
            for (int m = 0; m < M; ++m) acc += g[pos - m + M - 1] * a[base + m * st];
            b[q] = acc;
        }
        std::swap(a, b);
    }
    double s = 0.0;
    for (std::size_t q = 0; q < a.size(); ++q) s += (std::conj(cc.c[q]) * a[q]).real();
    return s;
}

double tail_mass(const Decomposition& d) {
    std::vector<Index3> out;
    for (const auto& [n, c] : d.coeffs)
        if (!d.params.admissible(n)) out.push_back(n);
    return std::sqrt(std::max(0.0, quadratic_form(d, out)));
}

cplx reconstruct_at(const Decomposition& d, const std::vector<Index3>& set, const Vec3& x) {
    cplx s{};
    for (const auto& n : set) s += d.coeff(n) * gamma(n, d.params, x);
    return s;
}

CubeField reconstruct(const Decomposition& d, const std::vector<Index3>& set, const CubeField& like) {
    const CoeffCube cc = to_cube(d, set);
    CubeField out;
    out.N = like.N;
    out.L = like.L;
    out.values = synthesize(cc, like);
    const int N = like.N;
    std::vector<double> e1(static_cast<std::size_t>(N));
    for (int j = 0; j < N; ++j) e1[j] = std::exp(-like.coord(j) * like.coord(j) / (4.0 * d.params.sigma * d.params.sigma));
    const double amp = envelope(d.params, Vec3::Zero());
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            for (int k = 0; k < N; ++k) out.values[out.index(i, j, k)] *= amp * e1[i] * e1[j] * e1[k];
    return out;
}

}  // namespace obeam
