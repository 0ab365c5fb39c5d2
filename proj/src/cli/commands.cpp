#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include "mfcd/bloch.hpp"
#include "mfcd/cli.hpp"
#include "mfcd/csv.hpp"
#include "mfcd/rotframe.hpp"

namespace mfcd::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path prepare_output(const RunConfig& config) {
    fs::path dir(config.output_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("config.output_dir: cannot create " + dir.string() + ": " + ec.message());
    return dir;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json run_header(const RunConfig& config, const std::string& command) {
    return {{"command", command}, {"config", to_json(config)}};
}

json instance_record(const ProblemInstance& inst) {
    return {{"instance", to_json(inst)}, {"instance_hash", instance_hash(inst)}};
}

std::string csv_safe(std::string text) {
    std::replace(text.begin(), text.end(), ',', ';');
    std::replace(text.begin(), text.end(), '\n', ' ');
    return text;
}

double median(std::vector<double> values) {
    if (values.empty()) return std::nan("");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

MagnetizationTrajectory thin(const MagnetizationTrajectory& traj, int points) {
    const int stride = traj.steps() / (points - 1);
    MagnetizationTrajectory out;
    out.n_sites = traj.n_sites;
    out.cd_enabled = traj.cd_enabled;
    out.max_norm_drift = traj.max_norm_drift;
    for (int k = 0; k <= traj.steps(); k += stride) {
        out.grid.push_back(traj.grid[k]);
        auto snap = traj.snapshot(k);
        out.m.insert(out.m.end(), snap.begin(), snap.end());
        out.field.push_back(traj.field[k]);
    }
    return out;
}

// B_y profiles agree up to sign on every site (uniform-site instance).
bool uniform_by(const MagnetizationTrajectory& traj, double tol) {
    for (const auto& f : traj.field) {
        for (int i = 1; i < traj.n_sites; ++i) {
            if (std::abs(std::abs(f.by[i]) - std::abs(f.by[0])) > tol) return false;
        }
    }
    return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// bloch
// ---------------------------------------------------------------------------

int cmd_bloch(const RunConfig& config, std::ostream& log) {
    const ProblemInstance inst = build_instance(config);
    const Schedule sch = build_schedule(config.schedule);
    const int bloch_steps = mfcd_bloch_steps(config.steps);
    const fs::path dir = prepare_output(config);

    json report = run_header(config, "bloch");
    report.update(instance_record(inst));

    MagnetizationTrajectory with_cd, without_cd;
    try {
        with_cd = integrate_bloch(inst, sch, CdMode::On, bloch_steps);
        without_cd = integrate_bloch(inst, sch, CdMode::Off, bloch_steps);
    } catch (const SolverError& e) {
        log << "bloch: " << e.what() << '\n';
        report["error"] = e.what();
        write_json(dir / "bloch.json", report);
        return kInvariantFailure;
    }

    {
        std::ostringstream os;
        write_trajectory_csv(os, thin(with_cd, config.output_grid));
        write_text(dir / "bloch_cd.csv", os.str());
    }
    {
        std::ostringstream os;
        write_trajectory_csv(os, thin(without_cd, config.output_grid));
        write_text(dir / "bloch_plain.csv", os.str());
    }

    std::ostringstream snap_csv;
    snap_csv << "t,site,m_y,m_z_bloch,m_z_fixed_point,fixed_point_residual,fixed_point_converged\n";
    double worst_gap = 0.0;
    double worst_my = 0.0;
    int unconverged = 0;
    for (int s = 0; s < config.snapshots; ++s) {
        const int k = static_cast<int>(std::lround(static_cast<double>(s) * bloch_steps / (config.snapshots - 1)));
        const double t = with_cd.grid[k];
        std::vector<double> mz(inst.n_sites);
        for (int i = 0; i < inst.n_sites; ++i) mz[i] = with_cd.at(k, i).z;
        const FixedPointResult fp = self_consistent_magnetization(inst, sch, t, mz);
        if (!fp.converged) ++unconverged;
        for (int i = 0; i < inst.n_sites; ++i) {
            const Vec3& m = with_cd.at(k, i);
            worst_gap = std::max(worst_gap, std::abs(m.z - fp.m_z[i]));
            worst_my = std::max(worst_my, std::abs(m.y));
            snap_csv << format_double(t) << ',' << i << ',' << format_double(m.y) << ',' << format_double(m.z) << ','
                     << format_double(fp.m_z[i]) << ',' << format_double(fp.residual) << ','
                     << (fp.converged ? 1 : 0) << '\n';
        }
    }
    write_text(dir / "snapshots.csv", snap_csv.str());

    report["summary"] = {{"bloch_steps", bloch_steps},
                         {"max_abs_m_y", worst_my},
                         {"max_fixed_point_gap", worst_gap},
                         {"unconverged_snapshots", unconverged},
                         {"norm_drift_cd", with_cd.max_norm_drift},
                         {"norm_drift_plain", without_cd.max_norm_drift}};
    write_json(dir / "bloch.json", report);
    log << "bloch: N=" << inst.n_sites << " T=" << sch.total_time() << " max|m_y|=" << worst_my
        << " max fixed-point gap=" << worst_gap << '\n';
    return kOk;
}

// ---------------------------------------------------------------------------
// fidelity-batch
// ---------------------------------------------------------------------------

std::vector<BatchSample> run_fidelity_batch(const RunConfig& config) {
    std::vector<BatchSample> samples;
    for (auto js : config.sweep.j_seeds) {
        for (auto hs : config.sweep.h_seeds) {
            BatchSample s;
            s.j_seed = js;
            s.h_seed = hs;
            samples.push_back(s);
        }
    }
    const Schedule sch = build_schedule(config.schedule);
    EvolveOptions options;
    options.steps = config.steps;

    auto run_one = [&](BatchSample& s) {
        try {
            const ProblemInstance inst = build_instance(config, s.j_seed, s.h_seed);
            StateTrajectory driven;
            double drift = 0.0;
            if (config.drive == Drive::Exact) {
                driven = evolve(inst, sch, Drive::Exact, nullptr, options);
            } else {
                const auto traj = integrate_bloch(inst, sch, CdMode::On, mfcd_bloch_steps(config.steps));
                drift = traj.max_norm_drift;
                driven = evolve(inst, sch, Drive::Mfcd, &traj, options);
            }
            const StateTrajectory plain = evolve(inst, sch, Drive::None, nullptr, options);
            const GroundSubspace ground = ground_subspace(inst, sch, sch.total_time());
            s.fidelity_cd = ground_fidelity(driven.final_state(), ground);
            s.fidelity_plain = ground_fidelity(plain.final_state(), ground);
            s.max_norm_drift = std::max({drift, driven.max_norm_drift, plain.max_norm_drift});
            s.ok = true;
        } catch (const std::exception& e) {
            s.ok = false;
            s.error = e.what();
        }
    };

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < samples.size(); k = next++) run_one(samples[k]);
    };
    const int n_workers = std::min<int>(config.workers, static_cast<int>(samples.size()));
    std::vector<std::thread> pool;
    for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return samples;
}

std::vector<BatchGroupSummary> summarize_batch(const RunConfig& config, const std::vector<BatchSample>& samples) {
    std::vector<BatchGroupSummary> groups;
    for (auto js : config.sweep.j_seeds) {
        BatchGroupSummary g;
        g.j_seed = js;
        std::vector<double> cd, plain;
        for (const auto& s : samples) {
            if (s.j_seed != js) continue;
            ++g.samples;
            if (!s.ok) {
                ++g.failures;
                continue;
            }
            cd.push_back(s.fidelity_cd);
            plain.push_back(s.fidelity_plain);
            if (s.fidelity_cd > s.fidelity_plain) ++g.improved;
        }
        g.fraction_improved = g.samples > 0 ? static_cast<double>(g.improved) / g.samples : 0.0;
        g.median_cd = median(cd);
        g.median_plain = median(plain);
        groups.push_back(g);
    }
    return groups;
}

int cmd_fidelity_batch(const RunConfig& config, std::ostream& log) {
    if (config.instance.source != "generator" || config.instance.generator != "gaussian") {
        throw ConfigError("config.instance.generator: fidelity-batch requires the 'gaussian' generator");
    }
    if (config.drive == Drive::None) throw ConfigError("config.drive: fidelity-batch needs 'mfcd' or 'exact'");
    if (config.drive == Drive::Exact && config.instance.n_sites > kMaxExactCdSites) {
        throw ConfigError("config.drive: 'exact' is limited to n_sites <= " + std::to_string(kMaxExactCdSites));
    }
    const fs::path dir = prepare_output(config);
    const auto samples = run_fidelity_batch(config);
    const auto groups = summarize_batch(config, samples);

    std::ostringstream csv;
    csv << "j_seed,h_seed,status,fidelity_cd,fidelity_plain,improved,max_norm_drift,error\n";
    int failures = 0;
    for (const auto& s : samples) {
        csv << s.j_seed << ',' << s.h_seed << ',' << (s.ok ? "ok" : "failed") << ',';
        if (s.ok) {
            csv << format_double(s.fidelity_cd) << ',' << format_double(s.fidelity_plain) << ','
                << (s.fidelity_cd > s.fidelity_plain ? 1 : 0) << ',' << format_double(s.max_norm_drift) << ",\n";
        } else {
            ++failures;
            csv << ",,,," << csv_safe(s.error) << '\n';
        }
    }
    write_text(dir / "samples.csv", csv.str());

    json summary = run_header(config, "fidelity-batch");
    json jgroups = json::array();
    for (const auto& g : groups) {
        jgroups.push_back({{"j_seed", g.j_seed},
                           {"samples", g.samples},
                           {"failures", g.failures},
                           {"improved", g.improved},
                           {"fraction_improved", g.fraction_improved},
                           {"median_fidelity_cd", g.median_cd},
                           {"median_fidelity_plain", g.median_plain}});
        log << "fidelity-batch: J seed " << g.j_seed << ": improved " << g.improved << '/' << g.samples
            << ", failures " << g.failures << ", median " << g.median_cd << " vs " << g.median_plain << '\n';
    }
    summary["groups"] = jgroups;
    summary["samples"] = samples.size();
    summary["failures"] = failures;
    summary["successes"] = static_cast<int>(samples.size()) - failures;
    write_json(dir / "summary.json", summary);
    return failures > 0 ? kPartialBatchFailure : kOk;
}

// ---------------------------------------------------------------------------
// success-curve
// ---------------------------------------------------------------------------

std::vector<SuccessPoint> run_success_curve(const RunConfig& config) {
    const ProblemInstance inst = build_instance(config);
    EvolveOptions options;
    options.steps = config.steps;
    std::vector<SuccessPoint> points;
    for (double total : config.sweep.total_times) {
        const Schedule trig = Schedule::trig(total, config.schedule.delta);
        const Schedule linear = Schedule::linear(total, config.schedule.delta);
        const std::string target = ground_bitstring(inst, trig, total);
        const GroundSubspace ground = ground_subspace(inst, trig, total);

        const auto traj = integrate_bloch(inst, trig, CdMode::On, mfcd_bloch_steps(config.steps));
        // The compiled schedule is the sigma_y-free rotating-frame Hamiltonian;
        // U(t) is diagonal, so z-basis samples need no back-rotation.
        const StateTrajectory driven = evolve_rotating_frame(inst, trig, traj, options);
        const StateTrajectory plain = evolve(inst, linear, Drive::None, nullptr, options);

        auto add = [&](const std::string& label, const StateTrajectory& states, double drift) {
            std::ostringstream stream;
            stream << "shots/" << label << "/T=" << format_double(total);
            const RngSpec rng{"mt19937_64", config.shot_seed, stream.str()};
            const MeasurementRecord record = sample_measurements(states.final_state(), config.shots, rng);
            SuccessPoint p;
            p.total_time = total;
            p.schedule = label;
            p.target = target;
            p.shots = config.shots;
            auto it = record.counts.find(target);
            p.successes = it == record.counts.end() ? 0 : it->second;
            p.probability = success_probability(record, target);
            p.wilson = wilson_interval(p.successes, p.shots);
            p.ground_population = ground_fidelity(states.final_state(), ground);
            p.max_norm_drift = std::max(drift, states.max_norm_drift);
            points.push_back(p);
        };
        add("mfcd", driven, traj.max_norm_drift);
        add("linear", plain, 0.0);
    }
    return points;
}

int cmd_success_curve(const RunConfig& config, std::ostream& log) {
    if (config.instance.source != "generator" || config.instance.generator != "staggered") {
        throw ConfigError("config.instance.generator: success-curve requires the 'staggered' generator");
    }
    const fs::path dir = prepare_output(config);
    json report = run_header(config, "success-curve");
    report.update(instance_record(build_instance(config)));
    std::vector<SuccessPoint> points;
    try {
        points = run_success_curve(config);
    } catch (const std::exception& e) {
        log << "success-curve: " << e.what() << '\n';
        report["error"] = e.what();
        write_json(dir / "success_curve.json", report);
        return kInvariantFailure;
    }
    std::ostringstream csv;
    csv << "total_time,schedule,target,successes,shots,probability,wilson_lo,wilson_hi,ground_population,"
           "max_norm_drift\n";
    json rows = json::array();
    for (const auto& p : points) {
        csv << format_double(p.total_time) << ',' << p.schedule << ',' << p.target << ',' << p.successes << ','
            << p.shots << ',' << format_double(p.probability) << ',' << format_double(p.wilson.lo) << ','
            << format_double(p.wilson.hi) << ',' << format_double(p.ground_population) << ','
            << format_double(p.max_norm_drift) << '\n';
        rows.push_back({{"total_time", p.total_time},
                        {"schedule", p.schedule},
                        {"target", p.target},
                        {"successes", p.successes},
                        {"shots", p.shots},
                        {"probability", p.probability},
                        {"wilson", {p.wilson.lo, p.wilson.hi}}});
        log << "success-curve: T=" << p.total_time << ' ' << p.schedule << " p=" << p.probability << " ["
            << p.wilson.lo << ", " << p.wilson.hi << "]\n";
    }
    write_text(dir / "success_curve.csv", csv.str());
    report["points"] = rows;
    write_json(dir / "success_curve.json", report);
    return kOk;
}

// ---------------------------------------------------------------------------
// export-schedule
// ---------------------------------------------------------------------------

int cmd_export_schedule(const RunConfig& config, std::ostream& log) {
    const ProblemInstance inst = build_instance(config);
    if (inst.gamma != 0.0 || inst.gamma_d != 1.0) {
        throw ConfigError("config.instance: export-schedule needs gamma = 0 and gamma_d = 1");
    }
    const Schedule sch = build_schedule(config.schedule);
    if (sch.family() != ScheduleFamily::Trig) {
        throw ConfigError("config.schedule.family: export-schedule compiles the trig-default schedule");
    }
    const fs::path dir = prepare_output(config);
    const int bloch_steps = mfcd_bloch_steps(config.steps);

    json base_meta = run_header(config, "export-schedule");
    base_meta.update({{"instance_hash", instance_hash(inst)}});
    if (inst.provenance) {
        json rng = json::object();
        if (inst.provenance->couplings_rng) rng["couplings"] = to_json(*inst.provenance->couplings_rng);
        if (inst.provenance->fields_rng) rng["fields"] = to_json(*inst.provenance->fields_rng);
        base_meta["rng"] = rng;
        base_meta["generator"] = inst.provenance->generator;
    }

    auto emit = [&](const std::string& stem, const AnnealScheduleExport& exported) -> bool {
        const json j = to_json(exported);
        write_json(dir / (stem + ".json"), j);
        std::ostringstream os;
        write_schedule_csv(os, exported);
        write_text(dir / (stem + ".csv"), os.str());
        const AnnealScheduleExport back = schedule_from_json(json::parse(j.dump()));
        return back.breakpoints_a == exported.breakpoints_a && back.breakpoints_g == exported.breakpoints_g;
    };

    // Linear baseline: B_y = 0, phi = 0.
    const Schedule lin = Schedule::linear(sch.total_time(), sch.delta());
    std::vector<double> grid(bloch_steps + 1);
    for (int k = 0; k <= bloch_steps; ++k) grid[k] = sch.total_time() * k / bloch_steps;
    const std::vector<double> zeros(grid.size(), 0.0);
    AnnealScheduleExport linear_export;
    try {
        linear_export = export_schedule(hardware_schedules(lin, grid, zeros, zeros),
                                        config.export_options.n_breakpoints, config.export_options.ramp_end);
    } catch (const RangeError& e) {
        log << "export-schedule (linear): " << e.what() << '\n';
        return kInvariantFailure;
    }
    linear_export.metadata.update(base_meta);
    linear_export.metadata["schedule_family"] = to_string(ScheduleFamily::Linear);
    if (!emit("schedule_linear", linear_export)) {
        log << "export-schedule: linear schedule did not round-trip\n";
        return kInvariantFailure;
    }

    MagnetizationTrajectory traj;
    try {
        traj = integrate_bloch(inst, sch, CdMode::On, bloch_steps);
    } catch (const SolverError& e) {
        log << "export-schedule: " << e.what() << '\n';
        return kInvariantFailure;
    }
    if (!uniform_by(traj, 1e-9)) {
        throw ConfigError("config.instance: export-schedule needs a uniform-site instance (|B_y| differs between sites)");
    }
    const FrameAngle frame = frame_angle(sch, traj, inst.gamma_d);
    const HardwareTraces traces = hardware_schedules(sch, traj.grid, traj.by_profile(0), frame.phi_dot[0]);
    AnnealScheduleExport mfcd_export;
    try {
        mfcd_export = export_schedule(traces, config.export_options.n_breakpoints, config.export_options.ramp_end);
    } catch (const RangeError& e) {
        log << "export-schedule: " << e.what() << '\n';
        json failure = base_meta;
        json bad = json::array();
        for (const auto& [s, v] : e.offending()) bad.push_back({s, v});
        failure["offending_g_prime"] = bad;
        write_json(dir / "schedule_mfcd.rejected.json", failure);
        return kInvariantFailure;
    }
    mfcd_export.metadata.update(base_meta);
    mfcd_export.metadata["schedule_family"] = to_string(sch.family());
    mfcd_export.metadata["phi_T_convention"] =
        frame.endpoint_from_limit ? "final point takes the previous grid value" : "atan2 at the final point";
    mfcd_export.metadata["phi_T"] = frame.phi[0].back();
    if (!emit("schedule_mfcd", mfcd_export)) {
        log << "export-schedule: MFCD schedule did not round-trip\n";
        return kInvariantFailure;
    }
    log << "export-schedule: wrote " << mfcd_export.breakpoints_a.size() << " A and "
        << mfcd_export.breakpoints_g.size() << " g' breakpoints\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

std::vector<CheckResult> run_verify(const RunConfig& config) {
    const VerifyConfig& v = config.verify;
    std::vector<CheckResult> checks;
    auto check = [&](const std::string& name, double value, double threshold, bool passed, std::string detail = {}) {
        checks.push_back({name, passed, value, threshold, std::move(detail)});
    };
    auto error = [&](const std::string& name, double threshold, const std::exception& e) {
        checks.push_back({name, false, std::nan(""), threshold, e.what()});
    };

    // Single-spin oracle: the mean-field CD operator is exact for N = 1.
    {
        ProblemInstance one;
        one.n_sites = 1;
        one.couplings = {0.0};
        one.fields = {0.5};
        one.gamma = 0.0;
        one.gamma_d = 1.0;
        const Schedule sch = Schedule::trig(0.1, config.schedule.delta);
        try {
            const auto traj = integrate_bloch(one, sch, CdMode::On, mfcd_bloch_steps(config.steps));
            double worst = 0.0;
            for (std::size_t k = 0; k < traj.grid.size(); ++k) {
                const Eigen::MatrixXcd mf = build_cd_operator(traj.field[k].by).dense();
                const Eigen::MatrixXcd ex = exact_cd_operator(one, sch, traj.grid[k]);
                worst = std::max(worst, (mf - ex).cwiseAbs().maxCoeff());
            }
            check("single_spin_operator", worst, v.oracle_tolerance, worst <= v.oracle_tolerance);
            EvolveOptions options;
            options.steps = config.steps;
            const auto states = evolve(one, sch, Drive::Mfcd, &traj, options);
            const double infidelity = 1.0 - ground_fidelity(states.final_state(), ground_subspace(one, sch, 0.1));
            check("single_spin_infidelity", infidelity, 1e-8, infidelity <= 1e-8);
        } catch (const std::exception& e) {
            error("single_spin_operator", v.oracle_tolerance, e);
        }
    }

    const ProblemInstance inst = build_instance(config);
    const Schedule sch = build_schedule(config.schedule);
    BlochOptions bloch_options;
    bloch_options.corrupt_feedback_sign = v.corrupt_feedback_sign;

    MagnetizationTrajectory traj;
    bool have_traj = false;
    try {
        traj = integrate_bloch(inst, sch, CdMode::On, mfcd_bloch_steps(config.steps), bloch_options);
        have_traj = true;
        check("bloch_norm_drift", traj.max_norm_drift, v.norm_tolerance, traj.max_norm_drift <= v.norm_tolerance);
        const auto& first = traj.field.front().by;
        const auto& last = traj.field.back().by;
        double edge = 0.0;
        for (int i = 0; i < inst.n_sites; ++i) edge = std::max({edge, std::abs(first[i]), std::abs(last[i])});
        check("boundary_cd_field", edge, v.boundary_tolerance, edge <= v.boundary_tolerance);
    } catch (const std::exception& e) {
        error("bloch_norm_drift", v.norm_tolerance, e);
    }

    if (have_traj) {
        try {
            EvolveOptions options;
            options.steps = config.steps;
            const auto states = evolve(inst, sch, Drive::Mfcd, &traj, options);
            check("state_norm_drift", states.max_norm_drift, v.norm_tolerance,
                  states.max_norm_drift <= v.norm_tolerance);
            options.steps = config.steps / 2;
            const auto coarse = evolve(inst, sch, Drive::Mfcd, &traj, options);
            std::ostringstream detail;
            detail << "steps=" << options.steps;
            check("state_norm_drift_half_steps", coarse.max_norm_drift, v.norm_tolerance,
                  coarse.max_norm_drift <= v.norm_tolerance, detail.str());
        } catch (const std::exception& e) {
            error("state_norm_drift", v.norm_tolerance, e);
        }
    }

    // Finite-difference consistency of the solved dB_z/dt at dt = 1e-3 and 5e-4.
    try {
        const int fd_steps = std::max(2, static_cast<int>(std::lround(sch.total_time() / 1e-3)));
        const auto coarse = integrate_bloch(inst, sch, CdMode::On, fd_steps, bloch_options);
        const auto fine = integrate_bloch(inst, sch, CdMode::On, 2 * fd_steps, bloch_options);
        const double r1 = derivative_consistency_rms(coarse);
        const double r2 = derivative_consistency_rms(fine);
        const double ratio = r1 / r2;
        std::ostringstream detail;
        detail << "rms(dt/2)=" << r2 << " ratio=" << ratio << " (min " << v.fd_min_ratio << ")";
        check("derivative_consistency", r1, v.fd_tolerance, r1 <= v.fd_tolerance && ratio >= v.fd_min_ratio,
              detail.str());
    } catch (const std::exception& e) {
        error("derivative_consistency", v.fd_tolerance, e);
    }

    if (have_traj && inst.gamma == 0.0) {
        try {
            const auto report = verify_frame_equivalence(inst, sch, traj, config.steps);
            check("frame_equivalence", report.max_discrepancy, v.frame_tolerance,
                  report.max_discrepancy <= v.frame_tolerance);
            if (uniform_by(traj, 1e-9)) {
                const FrameAngle frame = frame_angle(sch, traj, inst.gamma_d);
                const auto hw = hardware_schedules(sch, traj.grid, traj.by_profile(0), frame.phi_dot[0]);
                double worst = 0.0;
                for (std::size_t k = 0; k < hw.a.size(); ++k) worst = std::max(worst, std::abs(hw.a[k] + hw.b[k] - 1.0));
                check("hardware_a_plus_b", worst, 0.0, worst == 0.0);
            }
        } catch (const std::exception& e) {
            error("frame_equivalence", v.frame_tolerance, e);
        }
    }
    return checks;
}

int cmd_verify(const RunConfig& config, std::ostream& log) {
    const fs::path dir = prepare_output(config);
    const auto checks = run_verify(config);
    json report = run_header(config, "verify");
    json rows = json::array();
    bool all = true;
    for (const auto& c : checks) {
        all = all && c.passed;
        rows.push_back({{"name", c.name},
                        {"passed", c.passed},
                        {"value", std::isnan(c.value) ? json(nullptr) : json(c.value)},
                        {"threshold", c.threshold},
                        {"detail", c.detail}});
        log << (c.passed ? "PASS " : "FAIL ") << c.name << " value=" << c.value << " threshold=" << c.threshold;
        if (!c.detail.empty()) log << "  " << c.detail;
        log << '\n';
    }
    report["checks"] = rows;
    report["passed"] = all;
    write_json(dir / "verify.json", report);
    return all ? kOk : kInvariantFailure;
}

}  // namespace mfcd::cli
