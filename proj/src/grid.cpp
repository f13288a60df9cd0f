#include "obeam/grid.hpp"

#include "obeam/error.hpp"
#include "obeam/parallel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace obeam {

static_assert(std::endian::native == std::endian::little, "OBGF IO assumes a little-endian host");

namespace {

constexpr std::uint32_t kObgfVersion = 1;

void check_spec(const GridSpec& s) {
    for (int d : s.dims)
        if (d < 8) throw Error(ErrorKind::InvalidArgument, "grid dims must each be >= 8");
    if (!(s.h > 0.0) || !std::isfinite(s.h)) throw Error(ErrorKind::InvalidArgument, "grid spacing must be positive");
}

void check_margin(const Grid& g) {
    const auto& n = g.dims();
    for (std::size_t c = 0; c < g.size(); ++c) {
        if (!g.masked(c)) continue;
        const auto ijk = g.coords(c);
        for (int a = 0; a < 3; ++a)
            if (ijk[a] < 4 || ijk[a] >= n[a] - 4) {
                std::ostringstream os;
                os << "masked node (" << ijk[0] << ", " << ijk[1] << ", " << ijk[2] << ") within 4h of the box face";
                throw Error(ErrorKind::ObstacleTouchesBoundary, os.str());
            }
    }
}

std::size_t slab(const Grid& g) { return std::size_t(g.dims()[1]) * g.dims()[2]; }

}  // namespace

GridSpec GridSpec::centered(int n, double h, const Vec3& center) {
    GridSpec s;
    s.dims = {n, n, n};
    s.h = h;
    s.origin = center - 0.5 * (n - 1) * h * Vec3::Ones();
    return s;
}

Grid::Grid(const GridSpec& spec) : spec_(spec) {
    check_spec(spec);
    mask_.assign(std::size_t(spec.dims[0]) * spec.dims[1] * spec.dims[2], 0);
}

std::array<int, 3> Grid::coords(std::size_t c) const {
    const int k = int(c % spec_.dims[2]);
    c /= spec_.dims[2];
    const int j = int(c % spec_.dims[1]);
    return {int(c / spec_.dims[1]), j, k};
}

Vec3 Grid::point(std::size_t c) const {
    const auto ijk = coords(c);
    return point(ijk[0], ijk[1], ijk[2]);
}

std::size_t Grid::nearest(const Vec3& x) const {
    int ijk[3];
    for (int a = 0; a < 3; ++a) {
        const long r = std::lround((x[a] - spec_.origin[a]) / spec_.h);
        ijk[a] = int(std::clamp<long>(r, 0, spec_.dims[a] - 1));
    }
    return index(ijk[0], ijk[1], ijk[2]);
}

std::size_t Grid::masked_count() const {
    std::size_t n = 0;
    for (auto m : mask_) n += m;
    return n;
}

std::string Grid::describe() const {
    std::ostringstream os;
    os << spec_.dims[0] << "x" << spec_.dims[1] << "x" << spec_.dims[2] << " h=" << spec_.h << " masked=" << masked_count();
    return os.str();
}

void Grid::set_mask(std::vector<std::uint8_t> mask) {
    if (mask.size() != mask_.size()) throw Error(ErrorKind::InvalidArgument, "mask size mismatch");
    for (auto& m : mask) m = m ? 1 : 0;
    mask_ = std::move(mask);
}

Grid rasterize(const GridSpec& spec) { return Grid(spec); }

Grid rasterize(const GridSpec& spec, const std::function<bool(const Vec3&)>& inside, bool allow_clip) {
    Grid g(spec);
    std::vector<std::uint8_t> m(g.size(), 0);
    parallel_chunks(std::size_t(spec.dims[0]), 1, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i)
            for (int j = 0; j < spec.dims[1]; ++j)
                for (int k = 0; k < spec.dims[2]; ++k) {
                    const std::size_t c = g.index(int(i), j, k);
                    m[c] = inside(g.point(c)) ? 1 : 0;
                }
    });
    g.set_mask(std::move(m));
    if (!allow_clip) check_margin(g);
    return g;
}

Grid rasterize(const ConvexBody& body, const GridSpec& spec, bool allow_clip) {
    return rasterize(spec, [&](const Vec3& x) { return body.level(x) <= 0.0; }, allow_clip);
}

GridField::GridField(std::shared_ptr<const Grid> g, double t) : grid(std::move(g)), values(grid->size(), 0.0), time(t) {}

void GridField::apply_mask() {
    for (std::size_t c = 0; c < values.size(); ++c)
        if (grid->masked(c)) values[c] = 0.0;
}

bool GridField::valid() const {
    for (std::size_t c = 0; c < values.size(); ++c) {
        if (!std::isfinite(values[c].real()) || !std::isfinite(values[c].imag())) return false;
        if (grid->masked(c) && values[c] != cplx{}) return false;
    }
    return true;
}

GridField sample_field(std::shared_ptr<const Grid> grid, const std::function<cplx(const Vec3&)>& f, double t) {
    GridField out(grid, t);
    const Grid& g = *grid;
    parallel_chunks(g.size(), slab(g), [&](std::size_t b, std::size_t e) {
        for (std::size_t c = b; c < e; ++c) out.values[c] = g.masked(c) ? cplx{} : f(g.point(c));
    });
    return out;
}

double mass(const GridField& f) {
    const double s = parallel_sum(f.size(), slab(*f.grid), [&](std::size_t b, std::size_t e) {
        double acc = 0.0;
        for (std::size_t c = b; c < e; ++c) acc += std::norm(f.values[c]);
        return acc;
    });
    return s * f.grid->cell_volume();
}

double lp_norm(const GridField& f, double p) {
    const double s = parallel_sum(f.size(), slab(*f.grid), [&](std::size_t b, std::size_t e) {
        double acc = 0.0;
        for (std::size_t c = b; c < e; ++c) acc += std::pow(std::abs(f.values[c]), p);
        return acc;
    });
    return std::pow(s * f.grid->cell_volume(), 1.0 / p);
}

double l2_distance(const GridField& a, const GridField& b) {
    if (a.grid->dims() != b.grid->dims() || a.grid->h() != b.grid->h())
        throw Error(ErrorKind::InvalidArgument, "l2_distance on mismatched grids");
    const double s = parallel_sum(a.size(), slab(*a.grid), [&](std::size_t lo, std::size_t hi) {
        double acc = 0.0;
        for (std::size_t c = lo; c < hi; ++c) acc += std::norm(a.values[c] - b.values[c]);
        return acc;
    });
    return std::sqrt(s * a.grid->cell_volume());
}

void write_obgf(const std::string& path, const GridField& f) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorKind::Io, "cannot open " + path + " for writing");
    auto put = [&](const void* p, std::size_t n) { os.write(static_cast<const char*>(p), std::streamsize(n)); };
    put("OBGF", 4);
    put(&kObgfVersion, 4);
    for (int d : f.grid->dims()) {
        const auto u = std::uint32_t(d);
        put(&u, 4);
    }
    const double h = f.grid->h();
    put(&h, 8);
    for (int a = 0; a < 3; ++a) {
        const double o = f.grid->origin()[a];
        put(&o, 8);
    }
    put(f.values.data(), f.values.size() * sizeof(cplx));
    if (!os) throw Error(ErrorKind::Io, "write failed for " + path);
}

GridField read_obgf(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error(ErrorKind::Io, "cannot open " + path);
    auto get = [&](void* p, std::size_t n) {
        is.read(static_cast<char*>(p), std::streamsize(n));
        if (!is) throw Error(ErrorKind::Io, "truncated grid file " + path);
    };
    char magic[4];
    get(magic, 4);
    if (std::memcmp(magic, "OBGF", 4) != 0) throw Error(ErrorKind::Io, path + " is not an OBGF file");
    std::uint32_t version = 0;
    get(&version, 4);
    if (version != kObgfVersion) throw Error(ErrorKind::Io, "unsupported OBGF version " + std::to_string(version));
    GridSpec s;
    for (int a = 0; a < 3; ++a) {
        std::uint32_t d = 0;
        get(&d, 4);
        s.dims[a] = int(d);
    }
    get(&s.h, 8);
    for (int a = 0; a < 3; ++a) get(&s.origin[a], 8);
    GridField f(std::make_shared<const Grid>(s));
    get(f.values.data(), f.values.size() * sizeof(cplx));
    return f;
}

}  // namespace obeam
