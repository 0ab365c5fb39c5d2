// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Thresholds are fixed here and never tuned to the results.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "mfcd/bloch.hpp"
#include "mfcd/cli.hpp"
#include "mfcd/quantum.hpp"
#include "mfcd/rotframe.hpp"

using namespace mfcd;

namespace {

constexpr double kDelta = 1e-3;
constexpr int kSteps = 2000;  // quantum RK4 steps; Bloch runs use mfcd_bloch_steps

// Conservation and boundary data gathered by criteria 1-7 for criterion 8.
struct Ledger {
    double worst_state_drift = 0.0;
    double worst_bloch_drift = 0.0;
    int lost_norm_runs = 0;  // Bloch runs aborted for losing the unit norm
    double worst_boundary_by = 0.0;
    double worst_boundary_by_gamma0 = 0.0;  // same, restricted to Gamma = 0 instances
    double worst_a_plus_b = 0.0;
    int exports = 0;
    int exports_rejected = 0;
    double worst_exported_g = 0.0;

    void state(const StateTrajectory& s) { worst_state_drift = std::max(worst_state_drift, s.max_norm_drift); }
    void bloch(const MagnetizationTrajectory& t, double gamma) {
        worst_bloch_drift = std::max(worst_bloch_drift, t.max_norm_drift);
        if (!t.cd_enabled) return;
        double worst = 0.0;
        for (double v : t.field.front().by) worst = std::max(worst, std::abs(v));
        for (double v : t.field.back().by) worst = std::max(worst, std::abs(v));
        worst_boundary_by = std::max(worst_boundary_by, worst);
        if (gamma == 0.0) worst_boundary_by_gamma0 = std::max(worst_boundary_by_gamma0, worst);
    }
    void hardware(const Schedule& sch, const MagnetizationTrajectory& t) {
        const FrameAngle frame = frame_angle(sch, t);
        const HardwareTraces hw = hardware_schedules(sch, t.grid, t.by_profile(0), frame.phi_dot[0]);
        for (std::size_t k = 0; k < hw.a.size(); ++k) worst_a_plus_b = std::max(worst_a_plus_b, std::abs(hw.a[k] + hw.b[k] - 1.0));
        ++exports;
        try {
            const AnnealScheduleExport ex = export_schedule(hw);
            for (const auto& [s, g] : ex.breakpoints_g) worst_exported_g = std::max(worst_exported_g, std::abs(g));
        } catch (const RangeError&) {
            ++exports_rejected;
        }
    }
};

Ledger ledger;
int failures = 0;

void report(int id, bool pass, const std::string& text) {
    std::printf("%s criterion %d: %s\n", pass ? "PASS" : "FAIL", id, text.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(const char* format, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

ProblemInstance uniform_ferromagnet(int n, double j, double h) {
    ProblemInstance inst;
    inst.n_sites = n;
    inst.couplings.assign(static_cast<std::size_t>(n * n), j);
    for (int i = 0; i < n; ++i) inst.couplings[static_cast<std::size_t>(i * n + i)] = 0.0;
    inst.fields.assign(static_cast<std::size_t>(n), h);
    inst.gamma = 0.0;
    inst.gamma_d = 1.0;
    inst.topology = n == 1 ? Topology::Custom : Topology::FullyConnected;
    inst.validate();
    return inst;
}

// 1. Single-spin exactness.
void criterion_single_spin() {
    const auto start = std::chrono::steady_clock::now();
    const ProblemInstance inst = uniform_ferromagnet(1, 0.0, 0.5);
    const Schedule sch = Schedule::trig(0.1, kDelta);
    const auto traj = integrate_bloch(inst, sch, CdMode::On, mfcd_bloch_steps(kSteps));
    ledger.bloch(traj, inst.gamma);
    double sup = 0.0;
    for (std::size_t k = 0; k < traj.grid.size(); ++k) {
        const Eigen::MatrixXcd mf = build_cd_operator(traj.field[k].by).dense();
        sup = std::max(sup, (mf - exact_cd_operator(inst, sch, traj.grid[k])).cwiseAbs().maxCoeff());
    }
    EvolveOptions opts;
    opts.steps = kSteps;
    const auto states = evolve(inst, sch, Drive::Mfcd, &traj, opts);
    ledger.state(states);
    const double infidelity = 1.0 - ground_fidelity(states.final_state(), ground_subspace(inst, sch, 0.1));
    const double elapsed = seconds_since(start);
    report(1, infidelity <= 1e-8 && sup <= 1e-10 && elapsed < 1.0,
           fmt("N=1 infidelity=%.3e (<=1e-8), |H_mf - H_exact|_sup=%.3e (<=1e-10), %.2fs (<1s)", infidelity, sup,
               elapsed));
}

// 2. Exact-CD oracle on the uniform ferromagnet.
void criterion_exact_cd() {
    const auto start = std::chrono::steady_clock::now();
    const ProblemInstance inst = uniform_ferromagnet(3, 1.0, 1.0);
    double worst = 0.0;
    for (double total : {0.01, 0.1, 1.0}) {
        const Schedule sch = Schedule::trig(total, kDelta);
        EvolveOptions opts;
        opts.steps = kSteps;
        opts.record_every = 1;
        const auto states = evolve(inst, sch, Drive::Exact, nullptr, opts);
        ledger.state(states);
        for (double f : fidelity_trace(states, inst, sch).fidelity) worst = std::max(worst, 1.0 - f);
    }
    const double elapsed = seconds_since(start);
    report(2, worst <= 1e-6 && elapsed < 10.0,
           fmt("N=3 ferromagnet, T in {0.01,0.1,1}: worst infidelity on grid=%.3e (<=1e-6), %.1fs (<10s)", worst,
               elapsed));
}

// 3. Mean-field tracking over 30 coupling seeds.
void criterion_tracking() {
    const auto start = std::chrono::steady_clock::now();
    const Schedule sch = Schedule::trig(1.0, kDelta);
    const int bloch_steps = mfcd_bloch_steps(kSteps);
    int good = 0;
    int solver_failures = 0;
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        const ProblemInstance inst = make_random_instance(8, 1.0, Topology::FullyConnected, 0.1, 1.0, seed, seed);
        MagnetizationTrajectory traj;
        try {
            traj = integrate_bloch(inst, sch, CdMode::On, bloch_steps);
        } catch (const SolverError&) {
            ++solver_failures;
            ++ledger.lost_norm_runs;
            continue;
        }
        ledger.bloch(traj, inst.gamma);
        double max_my = 0.0, max_gap = 0.0;
        for (int k = 0; k <= bloch_steps; ++k) {
            for (int i = 0; i < 8; ++i) max_my = std::max(max_my, std::abs(traj.at(k, i).y));
        }
        for (int s = 0; s <= 10; ++s) {
            const int k = s * bloch_steps / 10;
            std::vector<double> mz(8);
            for (int i = 0; i < 8; ++i) mz[i] = traj.at(k, i).z;
            const FixedPointResult fp = self_consistent_magnetization(inst, sch, traj.grid[k], mz);
            for (int i = 0; i < 8; ++i) max_gap = std::max(max_gap, std::abs(fp.m_z[i] - mz[i]));
            if (!fp.converged) max_gap = std::max(max_gap, 1.0);
        }
        if (max_my <= 0.05 && max_gap <= 0.05) ++good;
    }
    const double fraction = good / 30.0;
    const double elapsed = seconds_since(start);
    report(3, fraction >= 0.9 && elapsed < 60.0,
           fmt("N=8 spin glass, 30 seeds: %d/30 track (max|m_y|<=0.05, fixed-point gap<=0.05; need >=90%%), "
               "%d solver failures, %.1fs (<60s)",
               good, solver_failures, elapsed));
}

struct BatchOutcome {
    int improved = 0;
    int samples = 0;
    int failures = 0;
    double median_cd = 0.0;
    double median_plain = 0.0;
    double seconds = 0.0;
};

BatchOutcome fidelity_batch(Topology topology) {
    const auto start = std::chrono::steady_clock::now();
    cli::RunConfig config = cli::config_from_json(nlohmann::json::object());
    config.instance.generator = "gaussian";
    config.instance.n_sites = 8;
    config.instance.topology = topology;
    config.instance.gamma = 0.1;
    config.instance.gamma_d = 1.0;
    config.schedule.total_time = 1.0;
    config.schedule.delta = kDelta;
    config.steps = kSteps;
    config.sweep.j_seeds = {1};
    const auto samples = cli::run_fidelity_batch(config);
    const auto group = cli::summarize_batch(config, samples).front();

    // Per-sample records carry the state drift; a failed sample is a Bloch run
    // that lost its unit norm.
    for (const auto& s : samples) {
        if (s.ok) {
            ledger.worst_state_drift = std::max(ledger.worst_state_drift, s.max_norm_drift);
        } else {
            ++ledger.lost_norm_runs;
        }
    }
    return {group.improved, group.samples, group.failures, group.median_cd, group.median_plain, seconds_since(start)};
}

// 4. Fully connected fidelity batch.
void criterion_batch_fully_connected() {
    const BatchOutcome b = fidelity_batch(Topology::FullyConnected);
    const double fraction = static_cast<double>(b.improved) / b.samples;
    const bool pass = fraction >= 0.8 && b.median_cd >= b.median_plain + 0.1 && b.seconds < 600.0;
    report(4, pass,
           fmt("fully connected N=8, J seed 1 x 100 h seeds: improved %d/%d=%.2f (>=0.80), %d solver failures, "
               "median %.4f vs %.4f (+%.4f, need +0.1), %.0fs (<600s)",
               b.improved, b.samples, fraction, b.failures, b.median_cd, b.median_plain, b.median_cd - b.median_plain,
               b.seconds));
}

// 5. Chain fidelity batch.
void criterion_batch_chain() {
    const BatchOutcome b = fidelity_batch(Topology::Chain);
    const double fraction = static_cast<double>(b.improved) / b.samples;
    report(5, fraction >= 0.7 && b.seconds < 600.0,
           fmt("chain N=8, J seed 1 x 100 h seeds: improved %d/%d=%.2f (>=0.70), %d solver failures, median %.4f vs "
               "%.4f, %.0fs (<600s)",
               b.improved, b.samples, fraction, b.failures, b.median_cd, b.median_plain, b.seconds));
}

// 6. Lab vs rotating frame.
void criterion_frame_equivalence() {
    const auto start = std::chrono::steady_clock::now();
    const ProblemInstance inst = staggered_instance(4, 1.1);
    const Schedule sch = Schedule::trig(1.0, kDelta);
    const auto traj = integrate_bloch(inst, sch, CdMode::On, mfcd_bloch_steps(4000));
    const auto fine_traj = integrate_bloch(inst, sch, CdMode::On, mfcd_bloch_steps(8000));
    ledger.bloch(traj, inst.gamma);
    ledger.bloch(fine_traj, inst.gamma);
    ledger.hardware(sch, traj);
    const auto at_k = verify_frame_equivalence(inst, sch, traj, 4000);
    const auto at_half_dt = verify_frame_equivalence(inst, sch, fine_traj, 8000);
    EvolveOptions opts;
    opts.steps = 4000;
    ledger.state(evolve(inst, sch, Drive::Mfcd, &traj, opts));
    ledger.state(evolve_rotating_frame(inst, sch, traj, opts));
    const double ratio = at_k.max_discrepancy / at_half_dt.max_discrepancy;
    const double elapsed = seconds_since(start);
    report(6, at_k.max_discrepancy <= 1e-6 && ratio >= 4.0 && elapsed < 30.0,
           fmt("N=4 staggered AFM, K=4000: max population discrepancy=%.3e (<=1e-6), halving dt -> %.3e, ratio "
               "%.2f (>=4), %.1fs (<30s)",
               at_k.max_discrepancy, at_half_dt.max_discrepancy, ratio, elapsed));
}

// 7. Success probability, compiled MFCD vs linear.
void criterion_success_curve() {
    const auto start = std::chrono::steady_clock::now();
    cli::RunConfig config = cli::config_from_json(nlohmann::json::object());
    config.instance.generator = "staggered";
    config.instance.n_sites = 8;
    config.instance.h = 1.1;
    config.schedule.delta = kDelta;
    config.steps = kSteps;
    config.shots = 1000;
    config.sweep.total_times = {0.5, 1.0, 2.0, 5.0};
    const auto points = cli::run_success_curve(config);

    const ProblemInstance inst = cli::build_instance(config);
    for (double total : config.sweep.total_times) {
        const Schedule sch = Schedule::trig(total, kDelta);
        const auto traj = integrate_bloch(inst, sch, CdMode::On, mfcd_bloch_steps(kSteps));
        ledger.bloch(traj, inst.gamma);
        ledger.hardware(sch, traj);
    }
    bool pass = true;
    std::string detail;
    for (std::size_t k = 0; k + 1 < points.size(); k += 2) {
        const auto& mf = points[k];
        const auto& lin = points[k + 1];
        ledger.worst_state_drift = std::max({ledger.worst_state_drift, mf.max_norm_drift, lin.max_norm_drift});
        const bool ordered = mf.probability >= lin.probability;
        const bool separated = mf.total_time > 1.0 || mf.wilson.lo > lin.wilson.hi || lin.wilson.lo > mf.wilson.hi;
        pass = pass && ordered && separated;
        detail += fmt(" T=%g: %.3f[%.3f,%.3f] vs %.3f[%.3f,%.3f];", mf.total_time, mf.probability, mf.wilson.lo,
                      mf.wilson.hi, lin.probability, lin.wilson.lo, lin.wilson.hi);
    }
    const double elapsed = seconds_since(start);
    pass = pass && elapsed < 300.0;
    report(7, pass,
           fmt("N=8 staggered AFM h=1.1, 1000 shots, target %s, MFCD vs linear:", points.front().target.c_str()) +
               detail + fmt(" %.1fs (<300s)", elapsed));
}

// 8. Conservation and boundary checks over everything above.
void criterion_conservation() {
    const Ledger& l = ledger;
    const bool drift = l.worst_state_drift <= 1e-8 && l.worst_bloch_drift <= 1e-8 && l.lost_norm_runs == 0;
    const bool boundary = l.worst_boundary_by <= 1e-9;
    const bool sum = l.worst_a_plus_b == 0.0;
    const bool range = l.exports_rejected == 0 && l.worst_exported_g <= kHardwareFieldRange;
    report(8, drift && boundary && sum && range,
           fmt("max state drift=%.2e, max Bloch drift=%.2e, lost-norm runs=%d (need <=1e-8, 0); max |B_y(0)|,|B_y(T)|"
               "=%.2e (<=1e-9; %.2e on Gamma=0 instances); max |A+B-1|=%.1e (exact); exports within |g'|<=3: %d/%d (max |g'| %.2f)",
               l.worst_state_drift, l.worst_bloch_drift, l.lost_norm_runs, l.worst_boundary_by, l.worst_boundary_by_gamma0, l.worst_a_plus_b,
               l.exports - l.exports_rejected, l.exports, l.worst_exported_g));
}

// 9. Finite-difference consistency of the solved dB_z/dt.
void criterion_derivative_consistency() {
    const Schedule sch = Schedule::trig(1.0, kDelta);
    int within = 0, ordered = 0, failed = 0;
    double worst_rms = 0.0, worst_ratio = 1e300;
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        const ProblemInstance inst = make_random_instance(8, 1.0, Topology::FullyConnected, 0.1, 1.0, seed, seed);
        try {
            const double coarse = derivative_consistency_rms(integrate_bloch(inst, sch, CdMode::On, 1000));
            const double fine = derivative_consistency_rms(integrate_bloch(inst, sch, CdMode::On, 2000));
            within += coarse <= 1e-4;
            ordered += coarse / fine >= 4.0;
            worst_rms = std::max(worst_rms, coarse);
            worst_ratio = std::min(worst_ratio, coarse / fine);
        } catch (const SolverError&) {
            ++failed;
        }
    }
    report(9, within == 30 && ordered == 30,
           fmt("30 spin-glass seeds at dt=1e-3: RMS<=1e-4 on %d/30 (worst %.2e), ratio>=4 on %d/30 (worst %.3f), "
               "%d solver failures",
               within, worst_rms, ordered, worst_ratio, failed));
}

}  // namespace

int main() {
    const std::vector<std::function<void()>> criteria = {
        criterion_single_spin,       criterion_exact_cd,          criterion_tracking,
        criterion_batch_fully_connected, criterion_batch_chain,   criterion_frame_equivalence,
        criterion_success_curve,     criterion_conservation,      criterion_derivative_consistency,
    };
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        try {
            criteria[k]();
        } catch (const std::exception& e) {
            report(static_cast<int>(k + 1), false, std::string("exception: ") + e.what());
        }
    }
    std::printf("%d of %zu criteria failed\n", failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
