#pragma once

// Exact state-vector simulation of the annealing Hamiltonian
//
//   H(t) = -f sum_{i<j} J_ij Z_i Z_j - [(1 - f) Gamma_D + Gamma] sum_i X_i - g sum_i h_i Z_i
//
// optionally driven by the mean-field CD term -sum_i B_y,i Y_i or by the exact
// (non-local) CD operator.
//
// Basis convention: index b stores site i in bit i; bit value 0 is spin up
// (Z = +1). Bitstrings render site 0 leftmost.

#include <complex>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mfcd/bloch.hpp"
#include "mfcd/model.hpp"

namespace mfcd {

using cplx = std::complex<double>;
using StateVector = Eigen::VectorXcd;

inline constexpr int kMaxStateVectorSites = 14;
inline constexpr int kMaxExactCdSites = 6;

class QuantumError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// z-diagonal part plus single-site X and Y terms:
///   sum_b diagonal[b] |b><b| + sum_i x_coeff[i] X_i + sum_i y_coeff[i] Y_i
class SpinOperator {
public:
    explicit SpinOperator(int n_sites);

    int n_sites() const { return n_sites_; }
    std::size_t dim() const { return diagonal.size(); }

    std::vector<double> diagonal;
    std::vector<double> x_coeff;
    std::vector<double> y_coeff;

    /// out = H * in
    void apply(const StateVector& in, StateVector& out) const;
    Eigen::MatrixXcd dense() const;
    /// Dense real matrix; throws if any Y coefficient is nonzero.
    Eigen::MatrixXd dense_real() const;

    SpinOperator& operator+=(const SpinOperator& other);

private:
    int n_sites_;
};

/// Z-basis diagonals of the coupling and longitudinal terms, cached per
/// instance:  zz[b] = -sum_{i<j} J_ij z_i z_j,  hz[b] = -sum_i h_i z_i.
struct DiagonalTerms {
    std::vector<double> zz;
    std::vector<double> hz;

    static DiagonalTerms from(const ProblemInstance& inst);
};

SpinOperator build_hamiltonian(const ProblemInstance& inst, const Schedule& sch, double t);

/// -sum_i by[i] Y_i
SpinOperator build_cd_operator(std::span<const double> by);

/// i sum_{n!=m} <n|dH/dt|m> / (E_m - E_n) |n><m| from a full eigendecomposition
/// of H(t). Pairs closer than `degeneracy_cutoff` are skipped.
Eigen::MatrixXcd exact_cd_operator(const ProblemInstance& inst, const Schedule& sch, double t,
                                   double degeneracy_cutoff = 1e-9);

struct GroundSubspace {
    double energy = 0.0;
    Eigen::MatrixXd basis;  // orthonormal columns
    double gap = 0.0;       // first level above the subspace minus `energy` (0 if none)
};

GroundSubspace ground_subspace(const ProblemInstance& inst, const Schedule& sch, double t, double tol_deg = 1e-9);

/// Ground state of H(0); the first basis vector if H(0) is degenerate.
StateVector initial_state(const ProblemInstance& inst, const Schedule& sch);

enum class Drive { None, Mfcd, Exact };

std::string to_string(Drive drive);
Drive parse_drive(const std::string& tag);

struct EvolveOptions {
    int steps = 2000;
    int record_every = 0;  // 0 records only t = 0 and t = T
    double max_norm_drift = 1e-6;
};

struct StateTrajectory {
    std::vector<double> grid;
    std::vector<StateVector> states;  // normalized for reporting
    std::vector<double> raw_norm;
    double max_norm_drift = 0.0;

    const StateVector& final_state() const { return states.back(); }
};

/// Signature of a time-dependent Hamiltonian action: out = H(t) in.
using HamiltonianAction = std::function<void(double t, const StateVector& in, StateVector& out)>;

/// Fixed-step RK4 for i d/dt psi = H(t) psi on [0, total_time].
StateTrajectory propagate(const HamiltonianAction& hamiltonian, StateVector psi0, double total_time,
                          const EvolveOptions& options);

/// Number of Bloch steps whose grid contains every node and midpoint of a
/// K-step quantum RK4 run.
inline int mfcd_bloch_steps(int quantum_steps) { return 2 * quantum_steps; }

/// Evolves the ground state of H(0). Drive::Mfcd consumes `traj` (cd enabled,
/// same N and T, step count a multiple of options.steps) by linear
/// interpolation of B_y.
StateTrajectory evolve(const ProblemInstance& inst, const Schedule& sch, Drive drive,
                       const MagnetizationTrajectory* traj, const EvolveOptions& options);

struct FidelityTrace {
    std::vector<double> grid;
    std::vector<double> fidelity;
    std::vector<double> gap;
};

double ground_fidelity(const StateVector& state, const GroundSubspace& ground);

FidelityTrace fidelity_trace(const StateTrajectory& states, const ProblemInstance& inst, const Schedule& sch,
                             double tol_deg = 1e-9);

void write_fidelity_csv(std::ostream& os, const FidelityTrace& trace);

// ---------------------------------------------------------------------------
// Measurement
// ---------------------------------------------------------------------------

std::string bitstring(std::size_t index, int n_sites);

struct MeasurementRecord {
    int shots = 0;
    std::map<std::string, int> counts;
    RngSpec rng;
};

/// i.i.d. computational-basis samples from |amplitude|^2 (inverse CDF on the
/// portable uniform stream).
MeasurementRecord sample_measurements(const StateVector& state, int shots, const RngSpec& rng);

double success_probability(const MeasurementRecord& record, const std::string& target);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Wilson score interval; z = 1.96 gives 95% coverage.
Interval wilson_interval(int successes, int trials, double z = 1.959963984540054);

/// Dominant basis state of the nondegenerate ground state of H(t). Throws
/// QuantumError if the ground subspace at t is degenerate.
std::string ground_bitstring(const ProblemInstance& inst, const Schedule& sch, double t);

void write_measurement_csv(std::ostream& os, const MeasurementRecord& record);

}  // namespace mfcd
