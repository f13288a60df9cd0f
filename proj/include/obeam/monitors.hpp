#pragma once

#include "obeam/grid.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace obeam {

/// Time-ordered samples of a run. Snapshots are produced on demand so that
/// closed-form evaluators and stored grid fields look the same.
class RunTrace {
public:
    using Snapshot = std::function<GridField()>;

    /// Appends a time (strictly increasing) and optionally its snapshot.
    void add(double t, Snapshot snap = {});
    /// Stores a copy of the field at f.time.
    void add_field(const GridField& f);
    /// Sets scalar `name` at the most recent time; earlier missing values become NaN.
    void set_scalar(const std::string& name, double value);

    [[nodiscard]] const std::vector<double>& times() const { return times_; }
    [[nodiscard]] std::size_t size() const { return times_.size(); }
    [[nodiscard]] bool has_snapshots() const;
    [[nodiscard]] GridField snapshot(std::size_t i) const;
    [[nodiscard]] const std::map<std::string, std::vector<double>>& scalars() const { return scalars_; }
    [[nodiscard]] const std::vector<double>& scalar(const std::string& name) const;
    /// Every scalar series has one value per time.
    [[nodiscard]] bool aligned() const;
    /// Samples [begin, end) as a new trace sharing the snapshots.
    [[nodiscard]] RunTrace slice(std::size_t begin, std::size_t end) const;

private:
    std::vector<double> times_;
    std::vector<Snapshot> snaps_;
    std::map<std::string, std::vector<double>> scalars_;
};

/// int 1/2 |grad u|^2 + 1/6 |u|^6 with edge differences; edges into masked
/// nodes or past the box use the zero boundary value.
double energy(const GridField& f);
double kinetic_energy(const GridField& f);
/// || grad u ||_2 from the same edge differences.
double gradient_norm(const GridField& f);
/// Fraction of the mass within `layers` nodes of a box face.
double boundary_layer_mass(const GridField& f, int layers = 2);

/// (int_I ||u(t)||_r^q dt)^{1/q} with the trapezoid rule in time.
double strichartz_norm(const RunTrace& trace, double q, double r);
/// int_I int |u|^10 dx dt (trapezoid in time); additive over adjacent intervals.
double scattering_size(const RunTrace& trace);

struct MorawetzTerms {
    double F = 0.0;               // int Im(conj(u) grad u) . grad a
    double potential_term = 0.0;  // int_{|x| <= R} |u|^6 / |x|
};

/// a(x) = |x| phi(|x| / R) with phi = 1 on [0, 1], 0 on [2, inf), C^2 in between.
double morawetz_phi(double s);
Vec3 morawetz_grad_a(const Vec3& x, double R);

/// Throws OriginOutsideObstacle unless the node nearest the origin is masked
/// (skip with require_origin_inside = false for obstacle-free checks).
MorawetzTerms morawetz(const GridField& f, double R, bool require_origin_inside = true);

struct BoundCheck {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    double fitted_constant = 0.0;  // constant the bound is checked against
    bool pass = false;
    [[nodiscard]] double ratio() const { return rhs > 0.0 ? lhs / rhs : 0.0; }
};

/// lhs = int_I potential_term(R = A |I|^{1/2}) dt, rhs = A |I|^{1/2}; pass iff
/// lhs <= constant * rhs.
BoundCheck morawetz_check(const RunTrace& trace, double A, double constant, bool require_origin_inside = true);

struct LocalSmoothing {
    double lhs = 0.0;  // int int |grad u|^2 <(x - z) / R>^{-3}
    double rhs = 0.0;  // R ||u0||_2 ||grad u0||_2
    [[nodiscard]] double ratio() const { return rhs > 0.0 ? lhs / rhs : 0.0; }
};

LocalSmoothing local_smoothing(const RunTrace& trace, const Vec3& z, double R);

struct HeatEnvelopeReport {
    double t = 0.0;
    std::size_t y = 0;        // source node
    double c = 0.0;           // largest exponent constant on the scan that the envelope supports
    double prefactor = 0.0;   // fitted on the core |x - y|^2 <= t
    std::size_t sampled = 0;  // active nodes with kernel above 1e-10 of its peak
    std::size_t violations = 0;
    double dy = 0.0;          // distance from y to the nearest masked node (inf if none)
    double diam = 0.0;        // diameter of the masked set (0 if none)
    GridField kernel;
    [[nodiscard]] double violation_fraction() const { return sampled ? double(violations) / double(sampled) : 0.0; }
};

/// Evolves delta_y / h^3 by heat_step with step dt up to t and fits the
/// two-sided envelope (d(x)/(sqrt t ^ diam) ^ 1)(d(y)/(sqrt t ^ diam) ^ 1) e^{-c|x-y|^2/t} t^{-3/2}.
HeatEnvelopeReport heat_envelope_check(std::shared_ptr<const Grid> grid, std::size_t y, double t, double dt);

/// Fraction of the sampled nodes of rep.kernel lying above the envelope with
/// the given exponent constant and prefactor (constants frozen elsewhere).
double heat_envelope_violations(const HeatEnvelopeReport& rep, double c, double prefactor);

/// Distance from every node to the nearest masked node (inf without a mask).
std::vector<double> mask_distance(const Grid& g);

}  // namespace obeam
