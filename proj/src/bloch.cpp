#include "mfcd/bloch.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include <Eigen/Dense>

#include "mfcd/csv.hpp"

namespace mfcd {

double Vec3::norm() const { return std::sqrt(x * x + y * y + z * z); }

TransverseLongitudinal effective_field(const ProblemInstance& inst, const Schedule& sch, std::span<const Vec3> m,
                                       double t) {
    const int n = inst.n_sites;
    const double f = sch.f(t);
    const double g = sch.g(t);
    const double bx = (1.0 - f) * inst.gamma_d + inst.gamma;
    TransverseLongitudinal out{std::vector<double>(n, bx), std::vector<double>(n)};
    for (int i = 0; i < n; ++i) {
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
            if (j != i) sum += inst.coupling(i, j) * m[j].z;
        }
        out.bz[i] = f * sum + g * inst.fields[i];
    }
    return out;
}

namespace {

FieldRates solve_rates(const ProblemInstance& inst, const Schedule& sch, std::span<const Vec3> m, double t,
                       const TransverseLongitudinal& field, const BlochOptions& options) {
    const int n = inst.n_sites;
    const double f = sch.f(t);
    const double f_dot = sch.f_dot(t);
    const double g_dot = sch.g_dot(t);

    FieldRates out{std::vector<double>(n, -f_dot * inst.gamma_d), std::vector<double>(n)};

    std::vector<double> w_feedback(n), w_bx(n);
    for (int j = 0; j < n; ++j) {
        const double d = field.bx[j] * field.bx[j] + field.bz[j] * field.bz[j];
        if (!(d > options.denominator_guard)) {
            std::ostringstream os;
            os << "field-rate system: B_x^2 + B_z^2 vanishes at site " << j << ", t = " << t;
            throw SolverError(os.str(), t);
        }
        w_feedback[j] = m[j].x * field.bx[j] / d;
        w_bx[j] = m[j].x * field.bz[j] / d;
    }

    Eigen::VectorXd rhs(n);
    for (int i = 0; i < n; ++i) {
        double s_mz = 0.0, s_bxdot = 0.0, s_my = 0.0;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            const double jij = inst.coupling(i, j);
            s_mz += jij * m[j].z;
            s_bxdot += jij * w_bx[j] * out.bx_dot[j];
            s_my += jij * m[j].y * field.bx[j];
        }
        rhs[i] = f_dot * s_mz + g_dot * inst.fields[i] - f * s_bxdot - 2.0 * f * s_my;
    }

    if (n == 1 || f == 0.0) {
        // No coupling feedback: the system matrix is the identity.
        for (int i = 0; i < n; ++i) out.bz_dot[i] = rhs[i];
        return out;
    }

    const double sign = options.corrupt_feedback_sign ? -1.0 : 1.0;
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (j != i) a(i, j) -= sign * f * inst.coupling(i, j) * w_feedback[j];
        }
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    const double rcond = lu.rcond();
    if (!(rcond > options.min_rcond)) {
        std::ostringstream os;
        os << "field-rate system is singular or ill-conditioned at t = " << t << " (rcond = " << rcond << ")";
        throw SolverError(os.str(), t);
    }
    Eigen::VectorXd v = lu.solve(rhs);
    for (int i = 0; i < n; ++i) out.bz_dot[i] = v[i];
    return out;
}

// Without CD the rates are explicit: dm_z,j/dt = -2 m_y,j B_x,j.
FieldRates explicit_rates(const ProblemInstance& inst, const Schedule& sch, std::span<const Vec3> m, double t,
                          const TransverseLongitudinal& field) {
    const int n = inst.n_sites;
    const double f = sch.f(t);
    const double f_dot = sch.f_dot(t);
    const double g_dot = sch.g_dot(t);
    FieldRates out{std::vector<double>(n, -f_dot * inst.gamma_d), std::vector<double>(n)};
    for (int i = 0; i < n; ++i) {
        double s_mz = 0.0, s_mzdot = 0.0;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            s_mz += inst.coupling(i, j) * m[j].z;
            s_mzdot += inst.coupling(i, j) * (-2.0 * m[j].y * field.bx[j]);
        }
        out.bz_dot[i] = f_dot * s_mz + f * s_mzdot + g_dot * inst.fields[i];
    }
    return out;
}

EffectiveField full_field(const ProblemInstance& inst, const Schedule& sch, std::span<const Vec3> m, double t,
                          CdMode cd, const BlochOptions& options) {
    auto xz = effective_field(inst, sch, m, t);
    FieldRates rates = cd == CdMode::On ? solve_rates(inst, sch, m, t, xz, options)
                                        : explicit_rates(inst, sch, m, t, xz);
    EffectiveField out;
    out.by.assign(inst.n_sites, 0.0);
    if (cd == CdMode::On) {
        for (int i = 0; i < inst.n_sites; ++i) {
            out.by[i] = cd_field(xz.bx[i], xz.bz[i], rates.bx_dot[i], rates.bz_dot[i], options.denominator_guard);
        }
    }
    out.bx = std::move(xz.bx);
    out.bz = std::move(xz.bz);
    out.bx_dot = std::move(rates.bx_dot);
    out.bz_dot = std::move(rates.bz_dot);
    return out;
}

void precession(std::span<const Vec3> m, const EffectiveField& field, std::span<Vec3> dm) {
    for (std::size_t i = 0; i < m.size(); ++i) {
        Vec3 b{field.bx[i], field.by[i], field.bz[i]};
        Vec3 c = cross(m[i], b);
        dm[i] = {2.0 * c.x, 2.0 * c.y, 2.0 * c.z};
    }
}

}  // namespace

FieldRates solve_field_derivatives(const ProblemInstance& inst, const Schedule& sch, std::span<const Vec3> m,
                                   double t, const BlochOptions& options) {
    return solve_rates(inst, sch, m, t, effective_field(inst, sch, m, t), options);
}

double cd_field(double bx, double bz, double bx_dot, double bz_dot, double guard) {
    const double d = bx * bx + bz * bz;
    if (!(d > guard)) throw std::domain_error("cd_field: B_x^2 + B_z^2 below guard");
    return 0.5 * (bz_dot * bx - bx_dot * bz) / d;
}

std::vector<double> MagnetizationTrajectory::by_at(double t) const {
    const int k_max = steps();
    const double dt = total_time() / k_max;
    double pos = std::clamp(t / dt, 0.0, static_cast<double>(k_max));
    if (std::abs(pos - std::round(pos)) < 1e-9) pos = std::round(pos);  // shared node
    int k = std::min(static_cast<int>(pos), k_max - 1);
    double w = pos - k;
    std::vector<double> out(n_sites);
    const auto& lo = field[k].by;
    const auto& hi = field[k + 1].by;
    for (int i = 0; i < n_sites; ++i) out[i] = w == 0.0 ? lo[i] : (1.0 - w) * lo[i] + w * hi[i];
    return out;
}

std::vector<double> MagnetizationTrajectory::by_profile(int site) const {
    std::vector<double> out(field.size());
    for (std::size_t k = 0; k < field.size(); ++k) out[k] = field[k].by[site];
    return out;
}

MagnetizationTrajectory integrate_bloch(const ProblemInstance& inst, const Schedule& sch, CdMode cd, int steps,
                                        const BlochOptions& options) {
    if (steps < 1) throw std::invalid_argument("integrate_bloch: steps must be positive");
    const int n = inst.n_sites;
    const double total = sch.total_time();
    const double dt = total / steps;

    MagnetizationTrajectory traj;
    traj.n_sites = n;
    traj.cd_enabled = cd == CdMode::On;
    traj.grid.resize(steps + 1);
    for (int k = 0; k <= steps; ++k) traj.grid[k] = k == steps ? total : k * dt;
    traj.m.reserve(static_cast<std::size_t>(steps + 1) * n);
    traj.field.reserve(steps + 1);

    std::vector<Vec3> m(n, Vec3{1.0, 0.0, 0.0});
    std::vector<Vec3> k1(n), k2(n), k3(n), k4(n), tmp(n);

    auto stage_state = [&](const std::vector<Vec3>& slope, double h) {
        for (int i = 0; i < n; ++i) {
            tmp[i] = {m[i].x + h * slope[i].x, m[i].y + h * slope[i].y, m[i].z + h * slope[i].z};
        }
    };

    for (int k = 0; k < steps; ++k) {
        const double t = traj.grid[k];
        EffectiveField f1 = full_field(inst, sch, m, t, cd, options);
        precession(m, f1, k1);
        traj.m.insert(traj.m.end(), m.begin(), m.end());
        traj.field.push_back(std::move(f1));

        stage_state(k1, 0.5 * dt);
        precession(tmp, full_field(inst, sch, tmp, t + 0.5 * dt, cd, options), k2);
        stage_state(k2, 0.5 * dt);
        precession(tmp, full_field(inst, sch, tmp, t + 0.5 * dt, cd, options), k3);
        stage_state(k3, dt);
        precession(tmp, full_field(inst, sch, tmp, traj.grid[k + 1], cd, options), k4);

        for (int i = 0; i < n; ++i) {
            m[i].x += dt / 6.0 * (k1[i].x + 2.0 * k2[i].x + 2.0 * k3[i].x + k4[i].x);
            m[i].y += dt / 6.0 * (k1[i].y + 2.0 * k2[i].y + 2.0 * k3[i].y + k4[i].y);
            m[i].z += dt / 6.0 * (k1[i].z + 2.0 * k2[i].z + 2.0 * k3[i].z + k4[i].z);
            const double drift = std::abs(m[i].norm() - 1.0);
            traj.max_norm_drift = std::max(traj.max_norm_drift, drift);
            if (!(drift <= options.max_norm_drift)) {
                std::ostringstream os;
                os << "Bloch integration lost unit norm at site " << i << ", t = " << traj.grid[k + 1]
                   << " (|m| - 1 = " << drift << ")";
                throw SolverError(os.str(), traj.grid[k + 1]);
            }
        }
    }
    traj.m.insert(traj.m.end(), m.begin(), m.end());
    traj.field.push_back(full_field(inst, sch, m, total, cd, options));
    return traj;
}

double derivative_consistency_rms(const MagnetizationTrajectory& traj) {
    const int k_max = traj.steps();
    const double dt = traj.total_time() / k_max;
    double sum = 0.0;
    std::size_t count = 0;
    for (int k = 1; k < k_max; ++k) {
        for (int i = 0; i < traj.n_sites; ++i) {
            const double fd = (traj.field[k + 1].bz[i] - traj.field[k - 1].bz[i]) / (2.0 * dt);
            const double e = traj.field[k].bz_dot[i] - fd;
            sum += e * e;
            ++count;
        }
    }
    return count ? std::sqrt(sum / static_cast<double>(count)) : 0.0;
}

namespace {

void ground_targets(const ProblemInstance& inst, const Schedule& sch, double t, std::span<const double> m_z,
                    std::vector<double>& target) {
    const int n = inst.n_sites;
    const double f = sch.f(t);
    const double g = sch.g(t);
    const double bx = (1.0 - f) * inst.gamma_d + inst.gamma;
    for (int i = 0; i < n; ++i) {
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
            if (j != i) sum += inst.coupling(i, j) * m_z[j];
        }
        const double bz = f * sum + g * inst.fields[i];
        target[i] = bz / std::sqrt(bz * bz + bx * bx);
    }
}

}  // namespace

double self_consistency_defect(const ProblemInstance& inst, const Schedule& sch, double t,
                               std::span<const double> m_z) {
    std::vector<double> target(inst.n_sites);
    ground_targets(inst, sch, t, m_z, target);
    double defect = 0.0;
    for (int i = 0; i < inst.n_sites; ++i) defect = std::max(defect, std::abs(target[i] - m_z[i]));
    return defect;
}

FixedPointResult self_consistent_magnetization(const ProblemInstance& inst, const Schedule& sch, double t,
                                               std::span<const double> init_mz, const FixedPointOptions& options) {
    const int n = inst.n_sites;
    if (static_cast<int>(init_mz.size()) != n) throw std::invalid_argument("fixed point: init_mz has wrong size");
    for (double v : init_mz) {
        if (!(v >= -1.0 && v <= 1.0)) throw std::invalid_argument("fixed point: init_mz entries must lie in [-1, 1]");
    }
    FixedPointResult result;
    result.m_z.assign(init_mz.begin(), init_mz.end());
    std::vector<double> target(n);
    const double alpha = options.damping;
    for (;;) {
        ground_targets(inst, sch, t, result.m_z, target);
        double defect = 0.0;
        for (int i = 0; i < n; ++i) defect = std::max(defect, std::abs(target[i] - result.m_z[i]));
        result.residual = defect;
        if (defect <= options.tolerance) {
            result.converged = true;
            break;
        }
        if (result.iterations >= options.max_sweeps) break;
        for (int i = 0; i < n; ++i) result.m_z[i] = (1.0 - alpha) * result.m_z[i] + alpha * target[i];
        ++result.iterations;
    }
    return result;
}

void write_trajectory_csv(std::ostream& os, const MagnetizationTrajectory& traj) {
    os << "t,site,m_x,m_y,m_z,bx,by,bz\n";
    for (int k = 0; k <= traj.steps(); ++k) {
        for (int i = 0; i < traj.n_sites; ++i) {
            const Vec3& v = traj.at(k, i);
            const auto& fld = traj.field[k];
            os << format_double(traj.grid[k]) << ',' << i << ',' << format_double(v.x) << ',' << format_double(v.y)
               << ',' << format_double(v.z) << ',' << format_double(fld.bx[i]) << ',' << format_double(fld.by[i])
               << ',' << format_double(fld.bz[i]) << '\n';
        }
    }
}

}  // namespace mfcd
