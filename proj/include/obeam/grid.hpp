#pragma once

#include "obeam/geometry.hpp"
#include "obeam/types.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace obeam {

/// Node-centred box: node (i, j, k) sits at origin + h (i, j, k). Values
/// beyond the box are zero, so the box faces act as Dirichlet walls.
struct GridSpec {
    std::array<int, 3> dims{8, 8, 8};
    double h = 1.0;
    Vec3 origin = Vec3::Zero();

    /// Cube of n^3 nodes with spacing h centred on `center`.
    static GridSpec centered(int n, double h, const Vec3& center = Vec3::Zero());
};

class Grid {
public:
    explicit Grid(const GridSpec& spec);

    [[nodiscard]] const GridSpec& spec() const { return spec_; }
    [[nodiscard]] const std::array<int, 3>& dims() const { return spec_.dims; }
    [[nodiscard]] double h() const { return spec_.h; }
    [[nodiscard]] double cell_volume() const { return spec_.h * spec_.h * spec_.h; }
    [[nodiscard]] const Vec3& origin() const { return spec_.origin; }
    [[nodiscard]] std::size_t size() const { return mask_.size(); }

    [[nodiscard]] std::size_t index(int i, int j, int k) const {
        return (std::size_t(i) * spec_.dims[1] + j) * spec_.dims[2] + k;
    }
    [[nodiscard]] std::array<int, 3> coords(std::size_t c) const;
    [[nodiscard]] Vec3 point(int i, int j, int k) const { return spec_.origin + spec_.h * Vec3(i, j, k); }
    [[nodiscard]] Vec3 point(std::size_t c) const;
    /// Node closest to x, clamped into the box.
    [[nodiscard]] std::size_t nearest(const Vec3& x) const;

    [[nodiscard]] bool masked(std::size_t c) const { return mask_[c] != 0; }
    [[nodiscard]] const std::vector<std::uint8_t>& mask() const { return mask_; }
    [[nodiscard]] std::size_t masked_count() const;
    [[nodiscard]] std::string describe() const;

    void set_mask(std::vector<std::uint8_t> mask);

private:
    GridSpec spec_;
    std::vector<std::uint8_t> mask_;
};

/// Mask true iff F(node) <= 0. Throws ObstacleTouchesBoundary when a masked
/// node lies within 4 nodes of a face, unless allow_clip.
Grid rasterize(const ConvexBody& body, const GridSpec& spec, bool allow_clip = false);
/// Obstacle-free grid.
Grid rasterize(const GridSpec& spec);
/// Mask from an arbitrary predicate (halfspaces, unions); same margin rule.
Grid rasterize(const GridSpec& spec, const std::function<bool(const Vec3&)>& inside, bool allow_clip = false);

struct GridField {
    std::shared_ptr<const Grid> grid;
    std::vector<cplx> values;
    double time = 0.0;

    GridField() = default;
    explicit GridField(std::shared_ptr<const Grid> g, double t = 0.0);

    [[nodiscard]] cplx& operator[](std::size_t c) { return values[c]; }
    [[nodiscard]] cplx operator[](std::size_t c) const { return values[c]; }
    [[nodiscard]] std::size_t size() const { return values.size(); }
    /// Zeroes masked nodes.
    void apply_mask();
    /// True if every value is finite and masked nodes are exactly zero.
    [[nodiscard]] bool valid() const;
};

/// Samples f(x) at every active node; masked nodes are zero.
GridField sample_field(std::shared_ptr<const Grid> grid, const std::function<cplx(const Vec3&)>& f, double t = 0.0);

/// Discrete norms with h^3 weights.
double mass(const GridField& f);
double lp_norm(const GridField& f, double p);
/// || a - b ||_2 with h^3 weights; grids must share dims and spacing.
double l2_distance(const GridField& a, const GridField& b);

/// Raw complex grid file: "OBGF", u32 version, 3 x u32 dims, f64 spacing,
/// 3 x f64 origin, then little-endian f64 (re, im) pairs in row-major order.
void write_obgf(const std::string& path, const GridField& f);
/// The mask is not stored; the returned field lives on an obstacle-free grid.
GridField read_obgf(const std::string& path);

}  // namespace obeam
