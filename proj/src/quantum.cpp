#include "mfcd/quantum.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "mfcd/csv.hpp"

namespace mfcd {

namespace {

constexpr cplx kI{0.0, 1.0};

inline double z_value(std::size_t b, int site) { return ((b >> site) & 1U) ? -1.0 : 1.0; }

void check_size(int n, int limit, const char* what) {
    if (n < 1 || n > limit) {
        std::ostringstream os;
        os << what << ": N = " << n << " outside supported range [1, " << limit << "]";
        throw QuantumError(os.str());
    }
}

double transverse(const ProblemInstance& inst, const Schedule& sch, double t) {
    return (1.0 - sch.f(t)) * inst.gamma_d + inst.gamma;
}

}  // namespace

// ---------------------------------------------------------------------------
// SpinOperator
// ---------------------------------------------------------------------------

SpinOperator::SpinOperator(int n_sites)
    : diagonal(std::size_t{1} << n_sites, 0.0), x_coeff(n_sites, 0.0), y_coeff(n_sites, 0.0), n_sites_(n_sites) {}

void SpinOperator::apply(const StateVector& in, StateVector& out) const {
    const std::size_t d = dim();
    for (std::size_t b = 0; b < d; ++b) {
        cplx acc = diagonal[b] * in[static_cast<Eigen::Index>(b)];
        for (int i = 0; i < n_sites_; ++i) {
            const std::size_t flipped = b ^ (std::size_t{1} << i);
            const cplx amp = in[static_cast<Eigen::Index>(flipped)];
            if (x_coeff[i] != 0.0) acc += x_coeff[i] * amp;
            if (y_coeff[i] != 0.0) {
                // <up|Y|down> = -i, <down|Y|up> = +i
                acc += (((b >> i) & 1U) ? kI : -kI) * y_coeff[i] * amp;
            }
        }
        out[static_cast<Eigen::Index>(b)] = acc;
    }
}

Eigen::MatrixXcd SpinOperator::dense() const {
    const auto d = static_cast<Eigen::Index>(dim());
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(d, d);
    for (Eigen::Index b = 0; b < d; ++b) {
        m(b, b) = diagonal[static_cast<std::size_t>(b)];
        for (int i = 0; i < n_sites_; ++i) {
            const Eigen::Index flipped = b ^ (Eigen::Index{1} << i);
            m(b, flipped) += x_coeff[i];
            m(b, flipped) += (((b >> i) & 1) ? kI : -kI) * y_coeff[i];
        }
    }
    return m;
}

Eigen::MatrixXd SpinOperator::dense_real() const {
    for (double y : y_coeff) {
        if (y != 0.0) throw QuantumError("dense_real: operator has Y terms");
    }
    const auto d = static_cast<Eigen::Index>(dim());
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index b = 0; b < d; ++b) {
        m(b, b) = diagonal[static_cast<std::size_t>(b)];
        for (int i = 0; i < n_sites_; ++i) m(b, b ^ (Eigen::Index{1} << i)) += x_coeff[i];
    }
    return m;
}

SpinOperator& SpinOperator::operator+=(const SpinOperator& other) {
    if (other.n_sites_ != n_sites_) throw QuantumError("SpinOperator: site count mismatch");
    for (std::size_t b = 0; b < diagonal.size(); ++b) diagonal[b] += other.diagonal[b];
    for (int i = 0; i < n_sites_; ++i) {
        x_coeff[i] += other.x_coeff[i];
        y_coeff[i] += other.y_coeff[i];
    }
    return *this;
}

DiagonalTerms DiagonalTerms::from(const ProblemInstance& inst) {
    const int n = inst.n_sites;
    check_size(n, kMaxStateVectorSites, "diagonal terms");
    const std::size_t d = std::size_t{1} << n;
    DiagonalTerms out{std::vector<double>(d), std::vector<double>(d)};
    for (std::size_t b = 0; b < d; ++b) {
        double zz = 0.0, hz = 0.0;
        for (int i = 0; i < n; ++i) {
            const double zi = z_value(b, i);
            hz -= inst.fields[i] * zi;
            for (int j = i + 1; j < n; ++j) zz -= inst.coupling(i, j) * zi * z_value(b, j);
        }
        out.zz[b] = zz;
        out.hz[b] = hz;
    }
    return out;
}

namespace {

SpinOperator assemble(const DiagonalTerms& terms, int n, double f, double g, double bx) {
    SpinOperator h(n);
    for (std::size_t b = 0; b < h.dim(); ++b) h.diagonal[b] = f * terms.zz[b] + g * terms.hz[b];
    std::fill(h.x_coeff.begin(), h.x_coeff.end(), -bx);
    return h;
}

// dH/dt with the schedule derivatives applied term by term.
SpinOperator assemble_rate(const DiagonalTerms& terms, const ProblemInstance& inst, const Schedule& sch, double t) {
    SpinOperator h(inst.n_sites);
    const double f_dot = sch.f_dot(t);
    const double g_dot = sch.g_dot(t);
    for (std::size_t b = 0; b < h.dim(); ++b) h.diagonal[b] = f_dot * terms.zz[b] + g_dot * terms.hz[b];
    std::fill(h.x_coeff.begin(), h.x_coeff.end(), f_dot * inst.gamma_d);
    return h;
}

}  // namespace

SpinOperator build_hamiltonian(const ProblemInstance& inst, const Schedule& sch, double t) {
    check_size(inst.n_sites, kMaxStateVectorSites, "build_hamiltonian");
    return assemble(DiagonalTerms::from(inst), inst.n_sites, sch.f(t), sch.g(t), transverse(inst, sch, t));
}

SpinOperator build_cd_operator(std::span<const double> by) {
    const int n = static_cast<int>(by.size());
    check_size(n, kMaxStateVectorSites, "build_cd_operator");
    SpinOperator h(n);
    for (int i = 0; i < n; ++i) h.y_coeff[i] = -by[i];
    return h;
}

namespace {

Eigen::MatrixXcd exact_cd_from(const DiagonalTerms& terms, const ProblemInstance& inst, const Schedule& sch,
                               double t, double cutoff) {
    const Eigen::MatrixXd h =
        assemble(terms, inst.n_sites, sch.f(t), sch.g(t), transverse(inst, sch, t)).dense_real();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h);
    if (eig.info() != Eigen::Success) throw QuantumError("exact_cd_operator: eigensolver failed");
    const Eigen::VectorXd& e = eig.eigenvalues();
    const Eigen::MatrixXd& v = eig.eigenvectors();
    const Eigen::MatrixXd rate = v.transpose() * assemble_rate(terms, inst, sch, t).dense_real() * v;
    const Eigen::Index d = e.size();
    Eigen::MatrixXcd c = Eigen::MatrixXcd::Zero(d, d);
    for (Eigen::Index n = 0; n < d; ++n) {
        for (Eigen::Index m = 0; m < d; ++m) {
            if (m == n) continue;
            const double gap = e[m] - e[n];
            if (std::abs(gap) < cutoff) continue;
            c(n, m) = kI * rate(n, m) / gap;
        }
    }
    Eigen::MatrixXcd op = v.cast<cplx>() * c * v.transpose().cast<cplx>();
    return 0.5 * (op + op.adjoint());
}

}  // namespace

Eigen::MatrixXcd exact_cd_operator(const ProblemInstance& inst, const Schedule& sch, double t,
                                   double degeneracy_cutoff) {
    check_size(inst.n_sites, kMaxExactCdSites, "exact_cd_operator");
    return exact_cd_from(DiagonalTerms::from(inst), inst, sch, t, degeneracy_cutoff);
}

namespace {

GroundSubspace ground_from(const DiagonalTerms& terms, const ProblemInstance& inst, const Schedule& sch, double t,
                           double tol_deg) {
    const Eigen::MatrixXd h =
        assemble(terms, inst.n_sites, sch.f(t), sch.g(t), transverse(inst, sch, t)).dense_real();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h);
    if (eig.info() != Eigen::Success) throw QuantumError("ground_subspace: eigensolver failed");
    const Eigen::VectorXd& e = eig.eigenvalues();
    Eigen::Index dim = 1;
    while (dim < e.size() && e[dim] <= e[0] + tol_deg) ++dim;
    GroundSubspace out;
    out.energy = e[0];
    out.basis = eig.eigenvectors().leftCols(dim);
    out.gap = dim < e.size() ? e[dim] - e[0] : 0.0;
    return out;
}

}  // namespace

GroundSubspace ground_subspace(const ProblemInstance& inst, const Schedule& sch, double t, double tol_deg) {
    return ground_from(DiagonalTerms::from(inst), inst, sch, t, tol_deg);
}

StateVector initial_state(const ProblemInstance& inst, const Schedule& sch) {
    return ground_subspace(inst, sch, 0.0).basis.col(0).cast<cplx>();
}

std::string to_string(Drive drive) {
    switch (drive) {
        case Drive::None: return "none";
        case Drive::Mfcd: return "mfcd";
        case Drive::Exact: return "exact";
    }
    return "none";
}

Drive parse_drive(const std::string& tag) {
    if (tag == "none") return Drive::None;
    if (tag == "mfcd") return Drive::Mfcd;
    if (tag == "exact") return Drive::Exact;
    throw ConfigError("unknown drive '" + tag + "'");
}

StateTrajectory propagate(const HamiltonianAction& hamiltonian, StateVector psi0, double total_time,
                          const EvolveOptions& options) {
    const int steps = options.steps;
    if (steps < 1) throw QuantumError("propagate: steps must be positive");
    const int every = options.record_every > 0 ? options.record_every : steps;
    if (steps % every != 0) throw QuantumError("propagate: record_every must divide steps");
    const double dt = total_time / steps;

    StateTrajectory out;
    auto record = [&](double t, const StateVector& psi) {
        const double nrm = psi.norm();
        out.grid.push_back(t);
        out.raw_norm.push_back(nrm);
        out.states.push_back(psi / nrm);
    };

    StateVector psi = std::move(psi0);
    const Eigen::Index d = psi.size();
    StateVector k1(d), k2(d), k3(d), k4(d), tmp(d), h_psi(d);
    record(0.0, psi);

    // k = -i H psi
    auto slope = [&](double t, const StateVector& in, StateVector& k) {
        hamiltonian(t, in, h_psi);
        k = -kI * h_psi;
    };

    for (int s = 0; s < steps; ++s) {
        const double t = s * dt;
        const double t_next = s + 1 == steps ? total_time : (s + 1) * dt;
        slope(t, psi, k1);
        tmp = psi + (0.5 * dt) * k1;
        slope(t + 0.5 * dt, tmp, k2);
        tmp = psi + (0.5 * dt) * k2;
        slope(t + 0.5 * dt, tmp, k3);
        tmp = psi + dt * k3;
        slope(t_next, tmp, k4);
        psi += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

        const double drift = std::abs(psi.norm() - 1.0);
        out.max_norm_drift = std::max(out.max_norm_drift, drift);
        if (!(drift <= options.max_norm_drift)) {
            std::ostringstream os;
            os << "state norm drift " << drift << " exceeds " << options.max_norm_drift << " at t = " << t_next;
            throw QuantumError(os.str());
        }
        if ((s + 1) % every == 0) record(t_next, psi);
    }
    return out;
}

StateTrajectory evolve(const ProblemInstance& inst, const Schedule& sch, Drive drive,
                       const MagnetizationTrajectory* traj, const EvolveOptions& options) {
    const int n = inst.n_sites;
    check_size(n, drive == Drive::Exact ? kMaxExactCdSites : kMaxStateVectorSites, "evolve");
    const double total = sch.total_time();

    if (drive == Drive::Mfcd) {
        if (traj == nullptr || !traj->cd_enabled) {
            throw QuantumError("evolve: MFCD drive needs a cd-enabled Bloch trajectory");
        }
        if (traj->n_sites != n || std::abs(traj->total_time() - total) > 1e-12 * total ||
            traj->steps() % options.steps != 0) {
            std::ostringstream os;
            os << "evolve: grid mismatch (trajectory N = " << traj->n_sites << ", T = " << traj->total_time()
               << ", K = " << traj->steps() << "; run N = " << n << ", T = " << total << ", K = " << options.steps
               << ")";
            throw QuantumError(os.str());
        }
    }

    const DiagonalTerms terms = DiagonalTerms::from(inst);
    const std::size_t d = terms.zz.size();
    const StateVector psi0 = ground_from(terms, inst, sch, 0.0, 1e-9).basis.col(0).cast<cplx>();

    HamiltonianAction action;
    if (drive == Drive::Exact) {
        action = [&](double t, const StateVector& in, StateVector& out) {
            Eigen::MatrixXcd h =
                assemble(terms, n, sch.f(t), sch.g(t), transverse(inst, sch, t)).dense().eval();
            h += exact_cd_from(terms, inst, sch, t, 1e-9);
            out.noalias() = h * in;
        };
    } else {
        action = [&, d](double t, const StateVector& in, StateVector& out) {
            const double f = sch.f(t);
            const double g = sch.g(t);
            const double bx = transverse(inst, sch, t);
            std::vector<double> by = drive == Drive::Mfcd ? traj->by_at(t) : std::vector<double>(n, 0.0);
            for (std::size_t b = 0; b < d; ++b) {
                const auto bi = static_cast<Eigen::Index>(b);
                cplx acc = (f * terms.zz[b] + g * terms.hz[b]) * in[bi];
                for (int i = 0; i < n; ++i) {
                    const auto flipped = static_cast<Eigen::Index>(b ^ (std::size_t{1} << i));
                    // -bx X_i - by_i Y_i
                    const cplx y_elem = ((b >> i) & 1U) ? kI : -kI;
                    acc += (-bx - by[i] * y_elem) * in[flipped];
                }
                out[bi] = acc;
            }
        };
    }
    return propagate(action, psi0, total, options);
}

double ground_fidelity(const StateVector& state, const GroundSubspace& ground) {
    const Eigen::VectorXcd overlaps = ground.basis.cast<cplx>().adjoint() * state;
    return overlaps.squaredNorm() / state.squaredNorm();
}

FidelityTrace fidelity_trace(const StateTrajectory& states, const ProblemInstance& inst, const Schedule& sch,
                             double tol_deg) {
    const DiagonalTerms terms = DiagonalTerms::from(inst);
    FidelityTrace out;
    for (std::size_t k = 0; k < states.grid.size(); ++k) {
        const double t = states.grid[k];
        GroundSubspace ground = ground_from(terms, inst, sch, t, tol_deg);
        out.grid.push_back(t);
        out.fidelity.push_back(ground_fidelity(states.states[k], ground));
        out.gap.push_back(ground.gap);
    }
    return out;
}

void write_fidelity_csv(std::ostream& os, const FidelityTrace& trace) {
    os << "t,fidelity,gap\n";
    for (std::size_t k = 0; k < trace.grid.size(); ++k) {
        os << format_double(trace.grid[k]) << ',' << format_double(trace.fidelity[k]) << ','
           << format_double(trace.gap[k]) << '\n';
    }
}

std::string bitstring(std::size_t index, int n_sites) {
    std::string s(static_cast<std::size_t>(n_sites), '0');
    for (int i = 0; i < n_sites; ++i) {
        if ((index >> i) & 1U) s[static_cast<std::size_t>(i)] = '1';
    }
    return s;
}

MeasurementRecord sample_measurements(const StateVector& state, int shots, const RngSpec& rng_spec) {
    if (shots < 0) throw std::invalid_argument("sample_measurements: shots must be >= 0");
    const auto d = static_cast<std::size_t>(state.size());
    int n = 0;
    while ((std::size_t{1} << n) < d) ++n;
    std::vector<double> cdf(d);
    double acc = 0.0;
    for (std::size_t b = 0; b < d; ++b) {
        acc += std::norm(state[static_cast<Eigen::Index>(b)]);
        cdf[b] = acc;
    }
    MeasurementRecord record;
    record.shots = shots;
    record.rng = rng_spec;
    Rng rng(rng_spec);
    std::vector<int> hits(d, 0);
    for (int s = 0; s < shots; ++s) {
        const double u = rng.uniform() * acc;
        auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        auto b = static_cast<std::size_t>(std::distance(cdf.begin(), it));
        b = std::min(b, d - 1);
        // Never land on a zero-probability outcome through rounding.
        while (b > 0 && cdf[b] == cdf[b - 1]) --b;
        ++hits[b];
    }
    for (std::size_t b = 0; b < d; ++b) {
        if (hits[b] > 0) record.counts[bitstring(b, n)] = hits[b];
    }
    return record;
}

double success_probability(const MeasurementRecord& record, const std::string& target) {
    if (record.shots == 0) return 0.0;
    auto it = record.counts.find(target);
    return it == record.counts.end() ? 0.0 : static_cast<double>(it->second) / record.shots;
}

Interval wilson_interval(int successes, int trials, double z) {
    if (trials <= 0) return {0.0, 1.0};
    const double nn = trials;
    const double p = successes / nn;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / nn;
    const double centre = (p + z2 / (2.0 * nn)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
    // The bounds are exactly 0 and 1 at the extremes; avoid rounding residue.
    const double lo = successes <= 0 ? 0.0 : std::max(0.0, centre - half);
    const double hi = successes >= trials ? 1.0 : std::min(1.0, centre + half);
    return {lo, hi};
}

std::string ground_bitstring(const ProblemInstance& inst, const Schedule& sch, double t) {
    GroundSubspace ground = ground_subspace(inst, sch, t);
    if (ground.basis.cols() != 1) {
        std::ostringstream os;
        os << "ground_bitstring: ground subspace at t = " << t << " has dimension " << ground.basis.cols();
        throw QuantumError(os.str());
    }
    Eigen::Index best = 0;
    ground.basis.col(0).cwiseAbs().maxCoeff(&best);
    return bitstring(static_cast<std::size_t>(best), inst.n_sites);
}

void write_measurement_csv(std::ostream& os, const MeasurementRecord& record) {
    os << "bitstring,count\n";
    for (const auto& [bits, count] : record.counts) os << bits << ',' << count << '\n';
}

}  // namespace mfcd
