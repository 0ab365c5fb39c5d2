#pragma once

// Rotating-frame compilation of the MFCD-driven Hamiltonian.
//
// U(t) = exp(i/2 sum_i phi_i(t) Z_i) with phi_i = atan2(B_y,i, (1 - f) Gamma_D)
// turns the transverse pair -(1-f) Gamma_D X_i - B_y,i Y_i into
// -sqrt((1-f)^2 Gamma_D^2 + B_y,i^2) X_i and adds -1/2 dphi_i/dt Z_i.
// Dividing by f + sqrt((1-f)^2 + B_y^2) gives the hardware form A + B = 1.

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfcd/bloch.hpp"
#include "mfcd/model.hpp"
#include "mfcd/quantum.hpp"

namespace mfcd {

class FrameError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised by export_schedule when resampled g' leaves the hardware range.
class RangeError : public std::runtime_error {
public:
    RangeError(const std::string& what, std::vector<std::pair<double, double>> offending)
        : std::runtime_error(what), offending_(std::move(offending)) {}
    const std::vector<std::pair<double, double>>& offending() const { return offending_; }

private:
    std::vector<std::pair<double, double>> offending_;
};

inline constexpr double kHardwareFieldRange = 3.0;

struct FrameAngle {
    int n_sites = 0;
    std::vector<double> grid;
    std::vector<std::vector<double>> phi;      // [site][k]
    std::vector<std::vector<double>> phi_dot;  // [site][k]
    // True when the final point took the previous value because both atan2
    // arguments vanished there.
    bool endpoint_from_limit = false;
};

/// Frame angles from per-site B_y profiles by_trace[site][k] on a uniform
/// grid. phi_dot uses centered differences (five-point in the interior,
/// one-sided at the ends).
FrameAngle frame_angle(const Schedule& sch, const std::vector<double>& grid,
                       const std::vector<std::vector<double>>& by_trace, double gamma_d = 1.0);

FrameAngle frame_angle(const Schedule& sch, const MagnetizationTrajectory& traj, double gamma_d = 1.0);

/// Hardware schedule functions on the trajectory grid for one (uniform) site
/// profile. g' is NaN where A = 0.
struct HardwareTraces {
    std::vector<double> grid;
    std::vector<double> a;
    std::vector<double> b;
    std::vector<double> g_prime;
    double total_time = 0.0;
};

HardwareTraces hardware_schedules(const Schedule& sch, const std::vector<double>& grid,
                                  const std::vector<double>& by, const std::vector<double>& phi_dot);

struct AnnealScheduleExport {
    double annealing_time = 0.0;
    double ramp_end = 0.05;
    std::vector<std::pair<double, double>> breakpoints_a;
    std::vector<std::pair<double, double>> breakpoints_g;
    nlohmann::json metadata = nlohmann::json::object();
};

/// Piecewise-linear resampling at `n_breakpoints` uniform s values plus
/// ramp_end. g' ramps linearly from 0 at s = 0 to its value at ramp_end.
/// Throws RangeError if any |g'| breakpoint exceeds the hardware range.
AnnealScheduleExport export_schedule(const HardwareTraces& traces, int n_breakpoints = 100,
                                     double ramp_end = 0.05);

nlohmann::json to_json(const AnnealScheduleExport& schedule);
AnnealScheduleExport schedule_from_json(const nlohmann::json& j);
void write_schedule_csv(std::ostream& os, const AnnealScheduleExport& schedule);

/// Piecewise-linear evaluation of a breakpoint list.
double interpolate_breakpoints(const std::vector<std::pair<double, double>>& points, double s);

/// Evolves the rotating-frame Hamiltonian
///   H_rot = f H_P + g H_L - 1/2 sum_i phi_dot_i Z_i - sum_i sqrt(((1-f) Gamma_D)^2 + B_y,i^2) X_i
/// from the ground state of H(0). Same grid rules as the lab-frame MFCD drive.
StateTrajectory evolve_rotating_frame(const ProblemInstance& inst, const Schedule& sch,
                                      const MagnetizationTrajectory& traj, const EvolveOptions& options);

struct FrameEquivalenceReport {
    double final_discrepancy = 0.0;  // max_z | |<z|lab>|^2 - |<z|rot>|^2 | at T
    double max_discrepancy = 0.0;    // same, maximised over the matched quantum grid
    int steps = 0;
};

/// Evolves H_0 + H_cd in the lab frame and H_rot in the rotating frame from
/// the same initial state and compares z-basis populations. Requires
/// Gamma = 0 and a cd-enabled trajectory whose step count is a multiple of
/// 2 * steps.
FrameEquivalenceReport verify_frame_equivalence(const ProblemInstance& inst, const Schedule& sch,
                                                const MagnetizationTrajectory& traj, int steps);

}  // namespace mfcd
