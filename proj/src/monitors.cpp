#include "obeam/monitors.hpp"

#include "obeam/beams.hpp"
#include "obeam/error.hpp"
#include "obeam/parallel.hpp"
#include "obeam/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace obeam {

namespace {

std::size_t slab(const Grid& g) { return std::size_t(g.dims()[1]) * g.dims()[2]; }

template <class F>
double grid_sum(const Grid& g, F&& body) {
    return parallel_sum(g.size(), slab(g), [&](std::size_t b, std::size_t e) {
        double acc = 0.0;
        for (std::size_t c = b; c < e; ++c) acc += body(c);
        return acc;
    });
}

// Value at (i, j, k) with zero outside the box; masked nodes already hold zero.
cplx at(const GridField& f, int i, int j, int k) {
    const auto& n = f.grid->dims();
    if (i < 0 || j < 0 || k < 0 || i >= n[0] || j >= n[1] || k >= n[2]) return {};
    return f.values[f.grid->index(i, j, k)];
}

// Sum over edges touching node c in the +e directions plus the box-face edges in -e.
double edge_sum(const GridField& f, std::size_t c) {
    const auto ijk = f.grid->coords(c);
    const cplx u = f.values[c];
    double s = 0.0;
    for (int a = 0; a < 3; ++a) {
        int p[3] = {ijk[0], ijk[1], ijk[2]};
        ++p[a];
        const cplx v = at(f, p[0], p[1], p[2]);
        if (u != cplx{} || v != cplx{}) s += std::norm(u - v);
        if (ijk[a] == 0) s += std::norm(u);
    }
    return s;
}

// Central-difference gradient with zero boundary values.
CVec3 central_gradient(const GridField& f, std::size_t c) {
    const auto ijk = f.grid->coords(c);
    const double inv = 0.5 / f.grid->h();
    CVec3 g;
    for (int a = 0; a < 3; ++a) {
        int p[3] = {ijk[0], ijk[1], ijk[2]}, m[3] = {ijk[0], ijk[1], ijk[2]};
        ++p[a];
        --m[a];
        g[a] = (at(f, p[0], p[1], p[2]) - at(f, m[0], m[1], m[2])) * inv;
    }
    return g;
}

double trapezoid(const std::vector<double>& t, const std::vector<double>& v) {
    double s = 0.0;
    for (std::size_t i = 1; i < t.size(); ++i) s += 0.5 * (t[i] - t[i - 1]) * (v[i] + v[i - 1]);
    return s;
}

// Mean of 1/|x| over the cell of side h centred at x (3^3 midpoint samples).
double cell_inverse_radius(const Vec3& x, double h) {
    double s = 0.0;
    for (int a = -1; a <= 1; ++a)
        for (int b = -1; b <= 1; ++b)
            for (int c = -1; c <= 1; ++c) s += 1.0 / (x + (h / 3.0) * Vec3(a, b, c)).norm();
    return s / 27.0;
}

// 1D squared distance transform (lower envelope of parabolas).
void edt_1d(const double* f, double* d, int n, std::vector<int>& v, std::vector<double>& z) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    v.assign(n, 0);
    z.assign(n + 1, 0.0);
    int k = -1;
    for (int q = 0; q < n; ++q) {
        if (f[q] == inf) continue;
        if (k < 0) {
            k = 0;
            v[0] = q;
            z[0] = -inf;
            z[1] = inf;
            continue;
        }
        double s;
        while (true) {
            s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * (q - v[k]));
            if (s <= z[k] && k > 0)
                --k;
            else
                break;
        }
        if (s <= z[k]) {
            v[k] = q;
            z[k + 1] = inf;
            continue;
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = inf;
    }
    if (k < 0) {
        std::fill(d, d + n, inf);
        return;
    }
    int j = 0;
    for (int q = 0; q < n; ++q) {
        while (z[j + 1] < q) ++j;
        d[q] = double(q - v[j]) * (q - v[j]) + f[v[j]];
    }
}

}  // namespace

void RunTrace::add(double t, Snapshot snap) {
    if (!times_.empty() && !(t > times_.back()))
        throw Error(ErrorKind::InvalidArgument, "RunTrace times must be strictly increasing");
    times_.push_back(t);
    snaps_.push_back(std::move(snap));
}

void RunTrace::add_field(const GridField& f) {
    auto copy = std::make_shared<const GridField>(f);
    add(f.time, [copy] { return *copy; });
}

void RunTrace::set_scalar(const std::string& name, double value) {
    if (times_.empty()) throw Error(ErrorKind::InvalidArgument, "set_scalar before any time was added");
    auto& s = scalars_[name];
    s.resize(times_.size(), std::numeric_limits<double>::quiet_NaN());
    s.back() = value;
}

bool RunTrace::has_snapshots() const {
    return !snaps_.empty() && std::all_of(snaps_.begin(), snaps_.end(), [](const Snapshot& s) { return bool(s); });
}

GridField RunTrace::snapshot(std::size_t i) const {
    if (i >= snaps_.size() || !snaps_[i]) throw Error(ErrorKind::InvalidArgument, "no snapshot at this index");
    return snaps_[i]();
}

const std::vector<double>& RunTrace::scalar(const std::string& name) const {
    const auto it = scalars_.find(name);
    if (it == scalars_.end()) throw Error(ErrorKind::InvalidArgument, "unknown scalar " + name);
    return it->second;
}

bool RunTrace::aligned() const {
    return std::all_of(scalars_.begin(), scalars_.end(), [&](const auto& kv) { return kv.second.size() == times_.size(); });
}

RunTrace RunTrace::slice(std::size_t begin, std::size_t end) const {
    if (begin > end || end > times_.size()) throw Error(ErrorKind::InvalidArgument, "bad trace slice");
    RunTrace out;
    for (std::size_t i = begin; i < end; ++i) out.add(times_[i], snaps_[i]);
    for (const auto& [name, v] : scalars_)
        if (v.size() == times_.size()) out.scalars_[name].assign(v.begin() + long(begin), v.begin() + long(end));
    return out;
}

double kinetic_energy(const GridField& f) {
    const Grid& g = *f.grid;
    return 0.5 * g.h() * grid_sum(g, [&](std::size_t c) { return edge_sum(f, c); });
}

double gradient_norm(const GridField& f) { return std::sqrt(2.0 * kinetic_energy(f)); }

double boundary_layer_mass(const GridField& f, int layers) {
    const Grid& g = *f.grid;
    const auto& n = g.dims();
    const double total = grid_sum(g, [&](std::size_t c) { return std::norm(f.values[c]); });
    if (!(total > 0.0)) return 0.0;
    const double edge = grid_sum(g, [&](std::size_t c) {
        const auto ijk = g.coords(c);
        for (int a = 0; a < 3; ++a)
            if (ijk[a] < layers || ijk[a] >= n[a] - layers) return std::norm(f.values[c]);
        return 0.0;
    });
    return edge / total;
}

double energy(const GridField& f) {
    const Grid& g = *f.grid;
    const double pot = grid_sum(g, [&](std::size_t c) {
        const double a2 = std::norm(f.values[c]);
        return a2 * a2 * a2;
    });
    return kinetic_energy(f) + pot * g.cell_volume() / 6.0;
}

double strichartz_norm(const RunTrace& trace, double q, double r) {
    if (q < 1.0 || r < 1.0) throw Error(ErrorKind::InvalidArgument, "Strichartz exponents must be >= 1");
    std::vector<double> v(trace.size());
    for (std::size_t i = 0; i < trace.size(); ++i) v[i] = std::pow(lp_norm(trace.snapshot(i), r), q);
    return std::pow(trapezoid(trace.times(), v), 1.0 / q);
}

double scattering_size(const RunTrace& trace) {
    std::vector<double> v(trace.size());
    for (std::size_t i = 0; i < trace.size(); ++i) v[i] = std::pow(lp_norm(trace.snapshot(i), 10.0), 10.0);
    return trapezoid(trace.times(), v);
}

double morawetz_phi(double s) {
    if (s <= 1.0) return 1.0;
    if (s >= 2.0) return 0.0;
    return 1.0 - smoothstep(s - 1.0);
}

Vec3 morawetz_grad_a(const Vec3& x, double R) {
    const double r = x.norm();
    if (r == 0.0) return Vec3::Zero();
    const double s = r / R;
    // d/ds of phi on (1, 2); smoothstep'(x) = 30 x^2 (1 - x)^2.
    const double dphi = (s > 1.0 && s < 2.0) ? -30.0 * (s - 1) * (s - 1) * (2 - s) * (2 - s) : 0.0;
    return (x / r) * (morawetz_phi(s) + s * dphi);
}

MorawetzTerms morawetz(const GridField& f, double R, bool require_origin_inside) {
    const Grid& g = *f.grid;
    if (require_origin_inside) {
        const Vec3 o = Vec3::Zero();
        const std::size_t c = g.nearest(o);
        if ((g.point(c) - o).norm() > g.h() || !g.masked(c))
            throw Error(ErrorKind::OriginOutsideObstacle, "the Morawetz weight needs the origin inside the obstacle");
    }
    if (!(R > 0.0)) throw Error(ErrorKind::InvalidArgument, "Morawetz radius must be positive");
    MorawetzTerms m;
    m.F = g.cell_volume() * grid_sum(g, [&](std::size_t c) {
        if (g.masked(c) || f.values[c] == cplx{}) return 0.0;
        const CVec3 du = central_gradient(f, c);
        const Vec3 da = morawetz_grad_a(g.point(c), R);
        double s = 0.0;
        for (int a = 0; a < 3; ++a) s += (std::conj(f.values[c]) * du[a]).imag() * da[a];
        return s;
    });
    m.potential_term = g.cell_volume() * grid_sum(g, [&](std::size_t c) {
        if (g.masked(c)) return 0.0;
        const Vec3 x = g.point(c);
        if (x.norm() > R) return 0.0;
        const double a2 = std::norm(f.values[c]);
        if (a2 == 0.0) return 0.0;
        return a2 * a2 * a2 * cell_inverse_radius(x, g.h());
    });
    return m;
}

BoundCheck morawetz_check(const RunTrace& trace, double A, double constant, bool require_origin_inside) {
    if (trace.size() < 2) throw Error(ErrorKind::InvalidArgument, "Morawetz check needs at least two samples");
    const double len = trace.times().back() - trace.times().front();
    const double R = A * std::sqrt(len);
    std::vector<double> v(trace.size());
    for (std::size_t i = 0; i < trace.size(); ++i) v[i] = morawetz(trace.snapshot(i), R, require_origin_inside).potential_term;
    BoundCheck b;
    b.name = "morawetz";
    b.lhs = trapezoid(trace.times(), v);
    b.rhs = R;
    b.fitted_constant = constant;
    b.pass = b.lhs <= constant * b.rhs;
    return b;
}

LocalSmoothing local_smoothing(const RunTrace& trace, const Vec3& z, double R) {
    if (!(R > 0.0)) throw Error(ErrorKind::InvalidArgument, "local smoothing radius must be positive");
    LocalSmoothing out;
    if (trace.size() == 0) return out;
    std::vector<double> v(trace.size());
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const GridField f = trace.snapshot(i);
        const Grid& g = *f.grid;
        v[i] = g.cell_volume() * grid_sum(g, [&](std::size_t c) {
            if (g.masked(c)) return 0.0;
            const double w = std::pow(1.0 + (g.point(c) - z).squaredNorm() / (R * R), -1.5);
            return central_gradient(f, c).squaredNorm() * w;
        });
        if (i == 0) out.rhs = R * std::sqrt(mass(f)) * gradient_norm(f);
    }
    out.lhs = trapezoid(trace.times(), v);
    return out;
}

std::vector<double> mask_distance(const Grid& g) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    const auto& n = g.dims();
    std::vector<double> d(g.size());
    for (std::size_t c = 0; c < g.size(); ++c) d[c] = g.masked(c) ? 0.0 : inf;
    if (g.masked_count() == 0) return d;
    std::vector<double> line, out;
    std::vector<int> v;
    std::vector<double> z;
    for (int a = 0; a < 3; ++a) {
        const int b = (a + 1) % 3, e = (a + 2) % 3;
        line.resize(n[a]);
        out.resize(n[a]);
        for (int p = 0; p < n[b]; ++p)
            for (int q = 0; q < n[e]; ++q) {
                int ijk[3];
                ijk[b] = p;
                ijk[e] = q;
                for (int s = 0; s < n[a]; ++s) {
                    ijk[a] = s;
                    line[s] = d[g.index(ijk[0], ijk[1], ijk[2])];
                }
                edt_1d(line.data(), out.data(), n[a], v, z);
                for (int s = 0; s < n[a]; ++s) {
                    ijk[a] = s;
                    d[g.index(ijk[0], ijk[1], ijk[2])] = out[s];
                }
            }
    }
    for (auto& x : d) x = std::sqrt(x) * g.h();
    return d;
}

namespace {

// Envelope pieces shared by the fit and by checks against frozen constants.
struct HeatEnvelope {
    std::vector<double> dist;
    double scale = 0.0;
    double fy = 1.0;
    double dy = 0.0;
    double diam = 0.0;

    HeatEnvelope(const Grid& g, std::size_t y, double T) : dist(mask_distance(g)), dy(dist[y]) {
        if (g.masked_count() > 0) {
            Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
            for (std::size_t c = 0; c < g.size(); ++c)
                if (g.masked(c)) {
                    lo = lo.cwiseMin(g.point(c));
                    hi = hi.cwiseMax(g.point(c));
                }
            diam = (hi - lo).norm();
        }
        scale = g.masked_count() > 0 ? std::min(std::sqrt(T), diam) : std::sqrt(T);
        fy = factor(dy);
    }
    [[nodiscard]] double factor(double d) const { return std::isinf(d) ? 1.0 : std::min(1.0, d / scale); }
    [[nodiscard]] double operator()(const Grid& g, std::size_t n, const Vec3& yp, double c, double T) const {
        const double r2 = (g.point(n) - yp).squaredNorm();
        return factor(dist[n]) * fy * std::exp(-c * r2 / T) * std::pow(T, -1.5);
    }
};

std::vector<std::size_t> heat_sample(const GridField& k) {
    const Grid& g = *k.grid;
    double peak = 0.0;
    for (const auto& v : k.values) peak = std::max(peak, v.real());
    std::vector<std::size_t> sample;
    for (std::size_t c = 0; c < g.size(); ++c)
        if (!g.masked(c) && k[c].real() > 1e-10 * peak) sample.push_back(c);
    return sample;
}

}  // namespace

HeatEnvelopeReport heat_envelope_check(std::shared_ptr<const Grid> grid, std::size_t y, double t, double dt) {
    const Grid& g = *grid;
    if (!(dt > 0.0) || t < 10.0 * dt) throw Error(ErrorKind::InvalidArgument, "heat envelope check needs t >= 10 dt");
    if (y >= g.size() || g.masked(y)) throw Error(ErrorKind::InvalidArgument, "heat source must be an active node");
    HeatEnvelopeReport rep;
    GridField k(grid);
    k[y] = 1.0 / g.cell_volume();
    const int steps = int(std::lround(t / dt));
    for (int s = 0; s < steps; ++s) k = heat_step(k, dt);
    rep.t = k.time;
    rep.y = y;
    const double T = rep.t;

    const HeatEnvelope env(g, y, T);
    rep.dy = env.dy;
    rep.diam = env.diam;
    const Vec3 yp = g.point(y);
    const auto sample = heat_sample(k);
    rep.sampled = sample.size();

    for (int j = 0; j <= 96; ++j) {
        const double c = 0.25 - 0.0025 * j;
        double K = 0.0;
        for (std::size_t n : sample)
            if ((g.point(n) - yp).squaredNorm() <= T) K = std::max(K, k[n].real() / env(g, n, yp, c, T));
        std::size_t viol = 0;
        for (std::size_t n : sample)
            if (k[n].real() > K * env(g, n, yp, c, T) * (1.0 + 1e-12)) ++viol;
        rep.c = c;
        rep.prefactor = K;
        rep.violations = viol;
        if (double(viol) <= 0.01 * double(sample.size())) break;
    }
    rep.kernel = std::move(k);
    return rep;
}

double heat_envelope_violations(const HeatEnvelopeReport& rep, double c, double prefactor) {
    if (!rep.kernel.grid) throw Error(ErrorKind::InvalidArgument, "heat report carries no kernel");
    const Grid& g = *rep.kernel.grid;
    const HeatEnvelope env(g, rep.y, rep.t);
    const Vec3 yp = g.point(rep.y);
    const auto sample = heat_sample(rep.kernel);
    std::size_t viol = 0;
    for (std::size_t n : sample)
        if (rep.kernel[n].real() > prefactor * env(g, n, yp, c, rep.t) * (1.0 + 1e-12)) ++viol;
    return sample.empty() ? 0.0 : double(viol) / double(sample.size());
}

}  // namespace obeam
