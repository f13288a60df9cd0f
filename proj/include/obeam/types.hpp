#pragma once

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <cstdint>
#include <functional>

namespace obeam {

using cplx = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using CVec3 = Eigen::Vector3cd;
using CMat3 = Eigen::Matrix3cd;

/// Integer lattice index of a wave packet.
struct Index3 {
    int i = 0, j = 0, k = 0;

    [[nodiscard]] double norm() const {
        return std::sqrt(double(i) * i + double(j) * j + double(k) * k);
    }
    [[nodiscard]] int max_abs() const;
    [[nodiscard]] Vec3 as_vec() const { return {double(i), double(j), double(k)}; }

    friend bool operator==(const Index3&, const Index3&) = default;
    friend auto operator<=>(const Index3&, const Index3&) = default;
};

inline int Index3::max_abs() const {
    auto a = [](int v) { return v < 0 ? -v : v; };
    int m = a(i);
    if (a(j) > m) m = a(j);
    if (a(k) > m) m = a(k);
    return m;
}

inline constexpr double pi = 3.141592653589793238462643383279502884;
inline constexpr cplx I{0.0, 1.0};

}  // namespace obeam
