#pragma once

#include "obeam/grid.hpp"

namespace obeam {

struct SolverOptions {
    double tolerance = 1e-12;  // relative residual ||b - M x|| / ||b||
    int max_iterations = 10000;
};

struct SolveStats {
    int iterations = 0;
    double relative_residual = 0.0;
};

/// out = -Delta_h in with the 7-point stencil; masked nodes and nodes
/// beyond the box read as zero and are written as zero.
void apply_neg_laplacian(const Grid& g, const std::vector<cplx>& in, std::vector<cplx>& out);
void apply_neg_laplacian(const Grid& g, const std::vector<double>& in, std::vector<double>& out);

/// One Crank-Nicolson step of i u_t = -Delta_h u:
/// (I + i dt/2 A) u+ = (I - i dt/2 A) u with A = -Delta_h, solved by CG on
/// the normal equations (CGLS).
GridField cn_step(const GridField& f, double dt, const SolverOptions& opt = {}, SolveStats* stats = nullptr);

/// Strang splitting for i u_t + Delta u = |u|^4 u.
GridField nls_step(const GridField& f, double dt, const SolverOptions& opt = {}, SolveStats* stats = nullptr);

/// Crank-Nicolson step of u_t = Delta_h u (conjugate gradients).
GridField heat_step(const GridField& f, double dt, const SolverOptions& opt = {}, SolveStats* stats = nullptr);

/// Solves (-Delta_h - z) G = delta_y / h^3 on the active nodes. Real z uses
/// CG, complex z uses COCG. Requires dist(z, [0, inf)) >= 0.1.
GridField resolvent(std::shared_ptr<const Grid> grid, cplx z, std::size_t y, const SolverOptions& opt = {1e-9, 10000},
                    SolveStats* stats = nullptr);

/// Closed forms used as comparators.
double free_green(double r, double z);  // e^{-sqrt(-z) r} / (4 pi r), z < 0
cplx free_green(double r, cplx z);      // e^{i sqrt(z) r} / (4 pi r), Im sqrt(z) > 0
double free_heat_kernel(double r, double t);

}  // namespace obeam
