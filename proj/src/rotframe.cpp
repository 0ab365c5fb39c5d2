#include "mfcd/rotframe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "mfcd/csv.hpp"
#include "mfcd/quantum.hpp"

namespace mfcd {

namespace {

constexpr double kAngleGuard = 1e-12;

std::vector<double> centered_derivative(const std::vector<double>& y, double dt) {
    const std::size_t n = y.size();
    std::vector<double> d(n, 0.0);
    if (n < 2) return d;
    if (n == 2) {
        d[0] = d[1] = (y[1] - y[0]) / dt;
        return d;
    }
    // Five-point centered stencil in the interior, three-point next to the
    // ends, second-order one-sided at the ends.
    for (std::size_t k = 1; k + 1 < n; ++k) {
        if (k >= 2 && k + 2 < n) {
            d[k] = (y[k - 2] - 8.0 * y[k - 1] + 8.0 * y[k + 1] - y[k + 2]) / (12.0 * dt);
        } else {
            d[k] = (y[k + 1] - y[k - 1]) / (2.0 * dt);
        }
    }
    d[0] = (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * dt);
    d[n - 1] = (3.0 * y[n - 1] - 4.0 * y[n - 2] + y[n - 3]) / (2.0 * dt);
    return d;
}

// Linear interpolation of a uniform-grid profile.
double sample_uniform(const std::vector<double>& values, double total_time, double t) {
    const auto k_max = static_cast<double>(values.size() - 1);
    double pos = std::clamp(t / total_time * k_max, 0.0, k_max);
    if (std::abs(pos - std::round(pos)) < 1e-9) pos = std::round(pos);
    auto k = std::min(static_cast<std::size_t>(pos), values.size() - 2);
    const double w = pos - static_cast<double>(k);
    if (w == 0.0) return values[k];
    return (1.0 - w) * values[k] + w * values[k + 1];
}

}  // namespace

FrameAngle frame_angle(const Schedule& sch, const std::vector<double>& grid,
                       const std::vector<std::vector<double>>& by_trace, double gamma_d) {
    if (grid.size() < 3) throw FrameError("frame_angle: grid needs at least 3 points");
    FrameAngle out;
    out.n_sites = static_cast<int>(by_trace.size());
    out.grid = grid;
    const std::size_t last = grid.size() - 1;
    const double dt = (grid.back() - grid.front()) / static_cast<double>(last);
    for (const auto& by : by_trace) {
        if (by.size() != grid.size()) throw FrameError("frame_angle: B_y profile does not match the grid");
        std::vector<double> phi(grid.size());
        for (std::size_t k = 0; k <= last; ++k) {
            const double a = (1.0 - sch.f(grid[k])) * gamma_d;
            const double b = by[k];
            if (std::abs(a) < kAngleGuard && std::abs(b) < kAngleGuard) {
                if (k == last && k > 0) {
                    phi[k] = phi[k - 1];
                    out.endpoint_from_limit = true;
                    continue;
                }
                if (k == 0) {
                    phi[k] = 0.0;
                    continue;
                }
                std::ostringstream os;
                os << "frame_angle: undefined frame at interior t = " << grid[k];
                throw FrameError(os.str());
            }
            phi[k] = std::atan2(b, a);
        }
        out.phi_dot.push_back(centered_derivative(phi, dt));
        out.phi.push_back(std::move(phi));
    }
    return out;
}

FrameAngle frame_angle(const Schedule& sch, const MagnetizationTrajectory& traj, double gamma_d) {
    std::vector<std::vector<double>> by(traj.n_sites);
    for (int i = 0; i < traj.n_sites; ++i) by[i] = traj.by_profile(i);
    return frame_angle(sch, traj.grid, by, gamma_d);
}

HardwareTraces hardware_schedules(const Schedule& sch, const std::vector<double>& grid,
                                  const std::vector<double>& by, const std::vector<double>& phi_dot) {
    if (by.size() != grid.size() || phi_dot.size() != grid.size()) {
        throw FrameError("hardware_schedules: trace lengths do not match the grid");
    }
    HardwareTraces out;
    out.grid = grid;
    out.total_time = sch.total_time();
    out.a.resize(grid.size());
    out.b.resize(grid.size());
    out.g_prime.resize(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double t = grid[k];
        const double f = sch.f(t);
        const double r = std::hypot(1.0 - f, by[k]);
        const double a = f / (f + r);
        out.a[k] = a;
        // r / (f + r), written as the complement so that A + B == 1 in floating point.
        out.b[k] = 1.0 - a;
        out.g_prime[k] = a > 0.0 ? -(sch.g(t) + 0.5 * phi_dot[k]) / (12.0 * a)
                                 : std::numeric_limits<double>::quiet_NaN();
    }
    return out;
}

double interpolate_breakpoints(const std::vector<std::pair<double, double>>& points, double s) {
    if (points.empty()) throw FrameError("interpolate_breakpoints: empty list");
    if (s <= points.front().first) return points.front().second;
    if (s >= points.back().first) return points.back().second;
    auto it = std::upper_bound(points.begin(), points.end(), s,
                               [](double v, const std::pair<double, double>& p) { return v < p.first; });
    const auto& hi = *it;
    const auto& lo = *(it - 1);
    const double w = (s - lo.first) / (hi.first - lo.first);
    return lo.second + w * (hi.second - lo.second);
}

AnnealScheduleExport export_schedule(const HardwareTraces& traces, int n_breakpoints, double ramp_end) {
    if (n_breakpoints < 4) throw ConfigError("export_schedule: n_breakpoints must be >= 4");
    if (!(ramp_end > 0.0 && ramp_end < 1.0)) throw ConfigError("export_schedule: ramp_end must lie in (0, 1)");
    if (traces.grid.size() < 2) throw FrameError("export_schedule: empty traces");

    std::vector<double> s_points;
    for (int k = 0; k < n_breakpoints; ++k) s_points.push_back(k == n_breakpoints - 1 ? 1.0 : k / (n_breakpoints - 1.0));
    s_points.push_back(ramp_end);
    std::sort(s_points.begin(), s_points.end());
    s_points.erase(std::unique(s_points.begin(), s_points.end(),
                               [](double x, double y) { return std::abs(x - y) < 1e-12; }),
                   s_points.end());

    const double total = traces.total_time;
    AnnealScheduleExport out;
    out.annealing_time = total;
    out.ramp_end = ramp_end;
    std::vector<std::pair<double, double>> offending;
    out.breakpoints_g.emplace_back(0.0, 0.0);
    for (double s : s_points) {
        const double t = s * total;
        out.breakpoints_a.emplace_back(s, sample_uniform(traces.a, total, t));
        if (s < ramp_end || s == 0.0) continue;
        const double gp = sample_uniform(traces.g_prime, total, t);
        out.breakpoints_g.emplace_back(s, gp);
        if (!(std::abs(gp) <= kHardwareFieldRange)) offending.emplace_back(s, gp);
    }
    if (!offending.empty()) {
        std::ostringstream os;
        os << "export_schedule: " << offending.size() << " g' breakpoint(s) outside [-3, 3]:";
        for (const auto& [s, v] : offending) os << " (s=" << s << ", g'=" << v << ")";
        throw RangeError(os.str(), std::move(offending));
    }
    out.metadata = {{"n_breakpoints", n_breakpoints}, {"hardware_field_range", kHardwareFieldRange}};
    return out;
}

nlohmann::json to_json(const AnnealScheduleExport& schedule) {
    auto pairs = [](const std::vector<std::pair<double, double>>& pts) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& [s, v] : pts) arr.push_back({s, v});
        return arr;
    };
    return {{"annealing_time", schedule.annealing_time},
            {"ramp_end", schedule.ramp_end},
            {"breakpoints_A", pairs(schedule.breakpoints_a)},
            {"breakpoints_g", pairs(schedule.breakpoints_g)},
            {"metadata", schedule.metadata}};
}

AnnealScheduleExport schedule_from_json(const nlohmann::json& j) {
    AnnealScheduleExport out;
    try {
        out.annealing_time = j.at("annealing_time").get<double>();
        out.ramp_end = j.at("ramp_end").get<double>();
        for (const auto& p : j.at("breakpoints_A")) out.breakpoints_a.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
        for (const auto& p : j.at("breakpoints_g")) out.breakpoints_g.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
        out.metadata = j.value("metadata", nlohmann::json::object());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("schedule file: ") + e.what());
    }
    return out;
}

void write_schedule_csv(std::ostream& os, const AnnealScheduleExport& schedule) {
    os << "series,s,value\n";
    for (const auto& [s, v] : schedule.breakpoints_a) os << "A," << format_double(s) << ',' << format_double(v) << '\n';
    for (const auto& [s, v] : schedule.breakpoints_g) os << "g," << format_double(s) << ',' << format_double(v) << '\n';
}

StateTrajectory evolve_rotating_frame(const ProblemInstance& inst, const Schedule& sch,
                                      const MagnetizationTrajectory& traj, const EvolveOptions& options) {
    if (inst.gamma != 0.0) throw FrameError("evolve_rotating_frame: requires Gamma = 0");
    if (!traj.cd_enabled) throw FrameError("evolve_rotating_frame: trajectory must have CD enabled");
    if (traj.n_sites != inst.n_sites || traj.total_time() != sch.total_time()) {
        throw FrameError("evolve_rotating_frame: trajectory does not match the instance or schedule");
    }
    if (options.steps < 1 || traj.steps() % (2 * options.steps) != 0) {
        throw FrameError("evolve_rotating_frame: trajectory steps must be a multiple of 2 * steps");
    }
    const int n = inst.n_sites;
    const double total = sch.total_time();
    const FrameAngle frame = frame_angle(sch, traj, inst.gamma_d);
    const DiagonalTerms terms = DiagonalTerms::from(inst);
    const std::size_t d = terms.zz.size();
    HamiltonianAction rotating = [&](double t, const StateVector& in, StateVector& out) {
        const double f = sch.f(t);
        const double g = sch.g(t);
        const double a = (1.0 - f) * inst.gamma_d;
        const std::vector<double> by = traj.by_at(t);
        std::vector<double> r(n), half_rate(n);
        for (int i = 0; i < n; ++i) {
            r[i] = std::hypot(a, by[i]);
            half_rate[i] = 0.5 * sample_uniform(frame.phi_dot[i], total, t);
        }
        for (std::size_t b = 0; b < d; ++b) {
            const auto bi = static_cast<Eigen::Index>(b);
            double diag = f * terms.zz[b] + g * terms.hz[b];
            cplx acc = 0.0;
            for (int i = 0; i < n; ++i) {
                diag -= half_rate[i] * (((b >> i) & 1U) ? -1.0 : 1.0);
                acc -= r[i] * in[static_cast<Eigen::Index>(b ^ (std::size_t{1} << i))];
            }
            out[bi] = acc + diag * in[bi];
        }
    };
    // U(0) = 1 because phi(0) = 0, so both frames start from the same state.
    return propagate(rotating, initial_state(inst, sch), total, options);
}

FrameEquivalenceReport verify_frame_equivalence(const ProblemInstance& inst, const Schedule& sch,
                                                const MagnetizationTrajectory& traj, int steps) {
    if (inst.gamma != 0.0) throw FrameError("verify_frame_equivalence: requires Gamma = 0");
    if (!traj.cd_enabled) throw FrameError("verify_frame_equivalence: trajectory must have CD enabled");
    if (steps < 1 || traj.steps() % (2 * steps) != 0) {
        throw FrameError("verify_frame_equivalence: trajectory steps must be a multiple of 2 * steps");
    }
    EvolveOptions options;
    options.steps = steps;
    options.record_every = 1;
    const StateTrajectory lab = evolve(inst, sch, Drive::Mfcd, &traj, options);
    const StateTrajectory rot = evolve_rotating_frame(inst, sch, traj, options);

    FrameEquivalenceReport report;
    report.steps = steps;
    for (std::size_t k = 0; k < lab.grid.size(); ++k) {
        double worst = 0.0;
        for (Eigen::Index b = 0; b < lab.states[k].size(); ++b) {
            worst = std::max(worst, std::abs(std::norm(lab.states[k][b]) - std::norm(rot.states[k][b])));
        }
        report.max_discrepancy = std::max(report.max_discrepancy, worst);
        if (k + 1 == lab.grid.size()) report.final_discrepancy = worst;
    }
    return report;
}

}  // namespace mfcd
