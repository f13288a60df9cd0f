#pragma once

#include "obeam/types.hpp"

#include <algorithm>
#include <cmath>

namespace obeam::testing {

// Fourth-order central differences of a spacetime field f(t, x).
struct SchrodingerResidual {
    double residual = 0.0;  // |(i d_t + Laplacian) f|
    double scale = 0.0;     // max(|i d_t f|, |Laplacian f|)
    [[nodiscard]] double relative() const { return scale > 0.0 ? residual / scale : residual; }
};

template <class F>
SchrodingerResidual schrodinger_residual(F&& f, double t, const Vec3& x, double hx, double ht) {
    auto d2 = [&](const Vec3& e) {
        return (-f(t, x + 2 * hx * e) + 16.0 * f(t, x + hx * e) - 30.0 * f(t, x) + 16.0 * f(t, x - hx * e) -
                f(t, x - 2 * hx * e)) /
               (12.0 * hx * hx);
    };
    const cplx lap = d2(Vec3::UnitX()) + d2(Vec3::UnitY()) + d2(Vec3::UnitZ());
    const cplx dt = (-f(t + 2 * ht, x) + 8.0 * f(t + ht, x) - 8.0 * f(t - ht, x) + f(t - 2 * ht, x)) / (12.0 * ht);
    SchrodingerResidual r;
    r.residual = std::abs(I * dt + lap);
    r.scale = std::max(std::abs(dt), std::abs(lap));
    return r;
}

}  // namespace obeam::testing
