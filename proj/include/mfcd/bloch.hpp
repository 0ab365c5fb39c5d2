#pragma once

// Mean-field magnetization dynamics with the counter-diabatic y field.
//
// Each site carries a unit Bloch vector m_i precessing as
//     dm_i/dt = 2 m_i x B_i,
// with B_z,i = f sum_{j!=i} J_ij m_z,j + g h_i and B_x,i = (1 - f) Gamma_D + Gamma.
// With CD enabled, B_y,i is chosen so that m_i co-rotates with (B_x,i, B_z,i):
//     B_y = (dB_z/dt B_x - dB_x/dt B_z) / (2 (B_x^2 + B_z^2)).
// dB_z,i/dt depends on dm_z,j/dt, which depends on B_y,j, so the rates form an
// N x N linear system that is solved at every right-hand-side evaluation.

#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfcd/model.hpp"

namespace mfcd {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    double norm() const;
};

inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

/// Raised when the field-rate system cannot be solved at time t, or when the
/// integrator loses the unit norm of the magnetization.
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, double time) : std::runtime_error(what), time_(time) {}
    double time() const { return time_; }

private:
    double time_;
};

struct BlochOptions {
    double denominator_guard = 1e-12;  // minimum B_x^2 + B_z^2
    double min_rcond = 1e-12;          // reciprocal condition estimate of the rate system
    double max_norm_drift = 1e-6;
    // Mutation switch for the verification suite: flips the sign of the
    // dB_z,j/dt feedback term in the rate system. Never set in production runs.
    bool corrupt_feedback_sign = false;
};

/// Per-site field components and rates at one instant.
struct EffectiveField {
    std::vector<double> bx, by, bz;
    std::vector<double> bx_dot, bz_dot;
};

struct TransverseLongitudinal {
    std::vector<double> bx, bz;
};

struct FieldRates {
    std::vector<double> bx_dot, bz_dot;
};

TransverseLongitudinal effective_field(const ProblemInstance& inst, const Schedule& sch, std::span<const Vec3> m,
                                       double t);

/// Solves the linear system for dB_z/dt:
///   v_i - f sum_j J_ij (m_x,j B_x,j / D_j) v_j
///     = fdot sum_j J_ij m_z,j + gdot h_i
///       - f sum_j J_ij (m_x,j B_z,j / D_j) dB_x,j/dt - 2 f sum_j J_ij m_y,j B_x,j
/// with D_j = B_x,j^2 + B_z,j^2. Dense LU with partial pivoting.
FieldRates solve_field_derivatives(const ProblemInstance& inst, const Schedule& sch, std::span<const Vec3> m,
                                   double t, const BlochOptions& options = {});

/// Counter-diabatic y field for one site. Throws std::domain_error when
/// bx^2 + bz^2 is below `guard`.
double cd_field(double bx, double bz, double bx_dot, double bz_dot, double guard = 1e-12);

enum class CdMode { Off, On };

struct MagnetizationTrajectory {
    int n_sites = 0;
    bool cd_enabled = false;
    std::vector<double> grid;          // K + 1 uniform points on [0, T]
    std::vector<Vec3> m;               // (K + 1) * n_sites, grid-major
    std::vector<EffectiveField> field; // K + 1 entries
    double max_norm_drift = 0.0;

    int steps() const { return static_cast<int>(grid.size()) - 1; }
    double total_time() const { return grid.back(); }
    const Vec3& at(int k, int site) const { return m[static_cast<std::size_t>(k) * n_sites + site]; }
    std::span<const Vec3> snapshot(int k) const {
        return {m.data() + static_cast<std::size_t>(k) * n_sites, static_cast<std::size_t>(n_sites)};
    }

    /// B_y at arbitrary t by linear interpolation between grid points.
    std::vector<double> by_at(double t) const;
    /// B_y of one site at every grid point.
    std::vector<double> by_profile(int site) const;
};

/// Fixed-step classical RK4 from m_i(0) = (1, 0, 0). Fields and, with CD on,
/// rates and B_y are recomputed from the stage magnetization at every stage.
MagnetizationTrajectory integrate_bloch(const ProblemInstance& inst, const Schedule& sch, CdMode cd, int steps,
                                        const BlochOptions& options = {});

/// Uniform-grid central differences of B_z along a trajectory compared with
/// the solved rates. Returns the RMS over interior points and all sites.
double derivative_consistency_rms(const MagnetizationTrajectory& traj);

struct FixedPointOptions {
    double damping = 0.5;
    double tolerance = 1e-10;
    int max_sweeps = 10000;
};

struct FixedPointResult {
    std::vector<double> m_z;
    double residual = 0.0;  // max_i |m_z,i - B_z,i / |B_i||
    int iterations = 0;
    bool converged = false;
};

/// Max-norm defect of the single-site mean-field ground-state condition
/// m_z,i = B_z,i / sqrt(B_z,i^2 + B_x,i^2).
double self_consistency_defect(const ProblemInstance& inst, const Schedule& sch, double t,
                               std::span<const double> m_z);

/// Damped fixed-point iteration of the self-consistency condition. Non
/// convergence is reported through the result flag, not an exception.
FixedPointResult self_consistent_magnetization(const ProblemInstance& inst, const Schedule& sch, double t,
                                               std::span<const double> init_mz,
                                               const FixedPointOptions& options = {});

/// CSV with columns t,site,m_x,m_y,m_z,bx,by,bz.
void write_trajectory_csv(std::ostream& os, const MagnetizationTrajectory& traj);

}  // namespace mfcd
