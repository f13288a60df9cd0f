#include "obeam/solver.hpp"

#include "obeam/error.hpp"
#include "obeam/parallel.hpp"

#include <cmath>
#include <sstream>

namespace obeam {

namespace {

std::size_t slab(const Grid& g) { return std::size_t(g.dims()[1]) * g.dims()[2]; }

template <class T>
void neg_laplacian(const Grid& g, const std::vector<T>& in, std::vector<T>& out) {
    const int nx = g.dims()[0], ny = g.dims()[1], nz = g.dims()[2];
    const std::size_t sy = std::size_t(nz), sx = std::size_t(ny) * nz;
    const double ih2 = 1.0 / (g.h() * g.h());
    out.resize(in.size());
    parallel_chunks(std::size_t(nx), 1, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i)
            for (int j = 0; j < ny; ++j) {
                const std::size_t row = i * sx + std::size_t(j) * sy;
                for (int k = 0; k < nz; ++k) {
                    const std::size_t c = row + k;
                    if (g.masked(c)) {
                        out[c] = T{};
                        continue;
                    }
                    T s = 6.0 * in[c];
                    if (i > 0) s -= in[c - sx];
                    if (int(i) < nx - 1) s -= in[c + sx];
                    if (j > 0) s -= in[c - sy];
                    if (j < ny - 1) s -= in[c + sy];
                    if (k > 0) s -= in[c - 1];
                    if (k < nz - 1) s -= in[c + 1];
                    out[c] = s * ih2;
                }
            }
    });
}

// Chunked reductions; chunk boundaries fixed by the grid, so results do not
// depend on the thread count.
template <class T, class F>
T reduce(const Grid& g, F&& body) {
    const std::size_t n = g.size(), chunk = slab(g), nchunks = (n + chunk - 1) / chunk;
    std::vector<T> part(nchunks, T{});
    parallel_chunks(n, chunk, [&](std::size_t b, std::size_t e) {
        T acc{};
        for (std::size_t c = b; c < e; ++c) acc += body(c);
        part[b / chunk] = acc;
    });
    T s{};
    for (const T& p : part) s += p;
    return s;
}

template <class F>
void for_each(const Grid& g, F&& body) {
    parallel_chunks(g.size(), slab(g), [&](std::size_t b, std::size_t e) {
        for (std::size_t c = b; c < e; ++c) body(c);
    });
}

double norm2(const Grid& g, const std::vector<cplx>& v) {
    return reduce<double>(g, [&](std::size_t c) { return std::norm(v[c]); });
}
double norm2(const Grid& g, const std::vector<double>& v) {
    return reduce<double>(g, [&](std::size_t c) { return v[c] * v[c]; });
}

[[noreturn]] void diverged(const char* what, int it, double res) {
    std::ostringstream os;
    os << what << " did not reach tolerance after " << it << " iterations (relative residual " << res << ")";
    throw Error(ErrorKind::SolverDivergence, os.str());
}

void check_dt(double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorKind::InvalidArgument, "dt must be positive");
}

// Conjugate gradients for (alpha I + beta A) x = b with A = -Delta_h, alpha, beta, real,
// alpha I + beta A positive definite.
template <class T>
SolveStats cg_shifted(const Grid& g, double alpha, double beta, const std::vector<T>& b, std::vector<T>& x,
                      const SolverOptions& opt, const char* what) {
    std::vector<T> r(b.size()), p, q(b.size());
    auto apply = [&](const std::vector<T>& in, std::vector<T>& out) {
        neg_laplacian(g, in, out);
        for_each(g, [&](std::size_t c) { out[c] = g.masked(c) ? T{} : alpha * in[c] + beta * out[c]; });
    };
    const double bn = std::sqrt(norm2(g, b));
    SolveStats st;
    if (bn == 0.0) {
        std::fill(x.begin(), x.end(), T{});
        return st;
    }
    apply(x, q);
    for_each(g, [&](std::size_t c) { r[c] = b[c] - q[c]; });
    p = r;
    auto dot = [&](const std::vector<T>& u, const std::vector<T>& v) {
        if constexpr (std::is_same_v<T, double>)
            return reduce<double>(g, [&](std::size_t c) { return u[c] * v[c]; });
        else
            return reduce<double>(g, [&](std::size_t c) { return (std::conj(u[c]) * v[c]).real(); });
    };
    double rr = norm2(g, r);
    for (st.iterations = 0; st.iterations < opt.max_iterations; ++st.iterations) {
        st.relative_residual = std::sqrt(rr) / bn;
        if (!std::isfinite(st.relative_residual)) diverged(what, st.iterations, st.relative_residual);
        if (st.relative_residual <= opt.tolerance) return st;
        apply(p, q);
        const double a = rr / dot(p, q);
        for_each(g, [&](std::size_t c) {
            x[c] += a * p[c];
            r[c] -= a * q[c];
        });
        const double rr_new = norm2(g, r);
        const double beta_cg = rr_new / rr;
        rr = rr_new;
        for_each(g, [&](std::size_t c) { p[c] = r[c] + beta_cg * p[c]; });
    }
    st.relative_residual = std::sqrt(rr) / bn;
    if (st.relative_residual <= opt.tolerance) return st;
    diverged(what, st.iterations, st.relative_residual);
}

}  // namespace

void apply_neg_laplacian(const Grid& g, const std::vector<cplx>& in, std::vector<cplx>& out) { neg_laplacian(g, in, out); }
void apply_neg_laplacian(const Grid& g, const std::vector<double>& in, std::vector<double>& out) {
    neg_laplacian(g, in, out);
}

GridField cn_step(const GridField& f, double dt, const SolverOptions& opt, SolveStats* stats) {
    check_dt(dt);
    const Grid& g = *f.grid;
    const double th = 0.5 * dt;
    const cplx ith = I * th;
    std::vector<cplx> Au, b(f.size());
    neg_laplacian(g, f.values, Au);
    for_each(g, [&](std::size_t c) { b[c] = g.masked(c) ? cplx{} : f.values[c] - ith * Au[c]; });

    // CGLS on M x = b, M = I + i th A, M^H = I - i th A.
    GridField out(f.grid, f.time + dt);
    std::vector<cplx>& x = out.values;
    x = f.values;
    std::vector<cplx> r(f.size()), s(f.size()), p, q(f.size()), tmp;
    auto applyM = [&](const std::vector<cplx>& in, std::vector<cplx>& o, cplx coef) {
        neg_laplacian(g, in, tmp);
        for_each(g, [&](std::size_t c) { o[c] = g.masked(c) ? cplx{} : in[c] + coef * tmp[c]; });
    };
    const double bn = std::sqrt(norm2(g, b));
    SolveStats st;
    if (bn == 0.0) {
        std::fill(x.begin(), x.end(), cplx{});
        if (stats) *stats = st;
        return out;
    }
    applyM(x, q, ith);
    for_each(g, [&](std::size_t c) { r[c] = b[c] - q[c]; });
    applyM(r, s, -ith);
    p = s;
    double gam = norm2(g, s);
    for (st.iterations = 0;; ++st.iterations) {
        st.relative_residual = std::sqrt(norm2(g, r)) / bn;
        if (!std::isfinite(st.relative_residual)) diverged("cn_step", st.iterations, st.relative_residual);
        if (st.relative_residual <= opt.tolerance) break;
        if (st.iterations >= opt.max_iterations) diverged("cn_step", st.iterations, st.relative_residual);
        applyM(p, q, ith);
        const double a = gam / norm2(g, q);
        for_each(g, [&](std::size_t c) {
            x[c] += a * p[c];
            r[c] -= a * q[c];
        });
        applyM(r, s, -ith);
        const double gam_new = norm2(g, s);
        const double be = gam_new / gam;
        gam = gam_new;
        for_each(g, [&](std::size_t c) { p[c] = s[c] + be * p[c]; });
    }
    if (stats) *stats = st;
    return out;
}

GridField nls_step(const GridField& f, double dt, const SolverOptions& opt, SolveStats* stats) {
    check_dt(dt);
    auto kick = [&](GridField& u) {
        for_each(*u.grid, [&](std::size_t c) {
            const double a2 = std::norm(u.values[c]);
            u.values[c] *= std::polar(1.0, -0.5 * dt * a2 * a2);
        });
    };
    GridField u = f;
    kick(u);
    u = cn_step(u, dt, opt, stats);
    kick(u);
    return u;
}

GridField heat_step(const GridField& f, double dt, const SolverOptions& opt, SolveStats* stats) {
    check_dt(dt);
    const Grid& g = *f.grid;
    const double th = 0.5 * dt;
    std::vector<cplx> Au, b(f.size());
    neg_laplacian(g, f.values, Au);
    for_each(g, [&](std::size_t c) { b[c] = g.masked(c) ? cplx{} : f.values[c] - th * Au[c]; });
    GridField out(f.grid, f.time + dt);
    out.values = f.values;
    const auto st = cg_shifted(g, 1.0, th, b, out.values, opt, "heat_step");
    if (stats) *stats = st;
    return out;
}

GridField resolvent(std::shared_ptr<const Grid> grid, cplx z, std::size_t y, const SolverOptions& opt,
                    SolveStats* stats) {
    const Grid& g = *grid;
    const double dist = z.real() <= 0.0 ? std::abs(z) : std::abs(z.imag());
    if (!(dist >= 0.1)) throw Error(ErrorKind::InvalidArgument, "resolvent requires dist(z, [0, inf)) >= 0.1");
    if (y >= g.size() || g.masked(y)) throw Error(ErrorKind::InvalidArgument, "resolvent source must be an active node");
    const double src = 1.0 / g.cell_volume();
    GridField out(grid);
    SolveStats st;

    if (z.imag() == 0.0) {
        std::vector<double> b(g.size(), 0.0), x(g.size(), 0.0);
        b[y] = src;
        st = cg_shifted(g, -z.real(), 1.0, b, x, opt, "resolvent");
        for (std::size_t c = 0; c < g.size(); ++c) out.values[c] = x[c];
    } else {
        // COCG: complex symmetric A - z, unconjugated bilinear form.
        std::vector<cplx> b(g.size(), cplx{}), r, p, q(g.size()), tmp;
        std::vector<cplx>& x = out.values;
        b[y] = src;
        r = b;
        p = r;
        auto apply = [&](const std::vector<cplx>& in, std::vector<cplx>& o) {
            neg_laplacian(g, in, tmp);
            for_each(g, [&](std::size_t c) { o[c] = g.masked(c) ? cplx{} : tmp[c] - z * in[c]; });
        };
        auto bdot = [&](const std::vector<cplx>& u, const std::vector<cplx>& v) {
            return reduce<cplx>(g, [&](std::size_t c) { return u[c] * v[c]; });
        };
        const double bn = std::sqrt(norm2(g, b));
        cplx rho = bdot(r, r);
        for (st.iterations = 0;; ++st.iterations) {
            st.relative_residual = std::sqrt(norm2(g, r)) / bn;
            if (!std::isfinite(st.relative_residual)) diverged("resolvent", st.iterations, st.relative_residual);
            if (st.relative_residual <= opt.tolerance) break;
            if (st.iterations >= opt.max_iterations) diverged("resolvent", st.iterations, st.relative_residual);
            apply(p, q);
            const cplx pq = bdot(p, q);
            if (pq == cplx{}) diverged("resolvent (breakdown)", st.iterations, st.relative_residual);
            const cplx a = rho / pq;
            for_each(g, [&](std::size_t c) {
                x[c] += a * p[c];
                r[c] -= a * q[c];
            });
            const cplx rho_new = bdot(r, r);
            const cplx be = rho_new / rho;
            rho = rho_new;
            for_each(g, [&](std::size_t c) { p[c] = r[c] + be * p[c]; });
        }
    }
    if (stats) *stats = st;
    return out;
}

double free_green(double r, double z) { return std::exp(-std::sqrt(-z) * r) / (4.0 * pi * r); }

cplx free_green(double r, cplx z) {
    cplx k = std::sqrt(z);
    if (k.imag() < 0.0) k = -k;
    return std::exp(I * k * r) / (4.0 * pi * r);
}

double free_heat_kernel(double r, double t) { return std::pow(4.0 * pi * t, -1.5) * std::exp(-r * r / (4.0 * t)); }

}  // namespace obeam
