#pragma once

// Problem instances, annealing schedules and seeded generators.
//
// Units: energies in GHz, times in ns, hbar = 1. No factor 2*pi is applied
// anywhere in the library.

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace mfcd {

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class Topology { FullyConnected, Chain, Custom };

std::string to_string(Topology topology);
Topology parse_topology(const std::string& tag);

// ---------------------------------------------------------------------------
// Random numbers
// ---------------------------------------------------------------------------

/// Identifies a reproducible random stream. The only supported algorithm is
/// "mt19937_64", whose output sequence is fixed by the C++ standard.
struct RngSpec {
    std::string algorithm = "mt19937_64";
    std::uint64_t seed = 0;
    std::string stream = "default";

    bool operator==(const RngSpec&) const = default;
};

nlohmann::json to_json(const RngSpec& spec);
RngSpec rng_spec_from_json(const nlohmann::json& j);

/// Portable draws on top of mt19937_64.
///
/// Uniform variates take the top 53 bits of each 64-bit word. Normal variates
/// use the Box-Muller transform (both outputs of a pair are used, cosine
/// branch first). Neither depends on the standard library's distribution
/// classes, so sequences agree across toolchains.
class Rng {
public:
    explicit Rng(const RngSpec& spec);

    double uniform();  // [0, 1)
    double normal();   // zero mean, unit variance
    std::uint64_t next_u64();

private:
    std::mt19937_64 engine_;
    std::optional<double> spare_normal_;
};

/// Seed actually fed to the engine: splitmix64 of the user seed mixed with a
/// hash of the stream label.
std::uint64_t derive_stream_seed(const RngSpec& spec);

// ---------------------------------------------------------------------------
// Problem instance
// ---------------------------------------------------------------------------

struct Provenance {
    std::optional<RngSpec> couplings_rng;
    std::optional<RngSpec> fields_rng;
    std::optional<double> sigma;
    std::string generator;  // "gaussian", "staggered", "file", ...
};

/// 2-local transverse-field Ising instance.
///
///   H_P = -sum_{i<j} J_ij sz_i sz_j,  H_L = -sum_i h_i sz_i,
///   total transverse coefficient (1 - f) Gamma_D + Gamma.
struct ProblemInstance {
    int n_sites = 0;
    std::vector<double> couplings;  // row-major n x n, symmetric, zero diagonal
    std::vector<double> fields;
    double gamma = 0.0;
    double gamma_d = 1.0;
    Topology topology = Topology::Custom;
    std::optional<Provenance> provenance;

    double coupling(int i, int j) const { return couplings[static_cast<std::size_t>(i) * n_sites + j]; }

    /// Throws ConfigError naming the first violated invariant.
    void validate() const;
};

nlohmann::json to_json(const ProblemInstance& inst);
ProblemInstance instance_from_json(const nlohmann::json& j);

/// FNV-1a of the canonical JSON dump; used to tag exported artifacts.
std::string instance_hash(const ProblemInstance& inst);

/// Symmetric Gaussian couplings (standard deviation sigma) on the pairs
/// permitted by `topology`, drawn in row-major order over i < j.
std::vector<double> sample_gaussian_couplings(int n, double sigma, Topology topology, const RngSpec& rng);

/// i.i.d. uniform longitudinal fields on [0, 1].
std::vector<double> sample_uniform_fields(int n, const RngSpec& rng);

/// Gaussian couplings plus uniform fields, with provenance recorded.
ProblemInstance make_random_instance(int n, double sigma, Topology topology, double gamma, double gamma_d,
                                     std::uint64_t coupling_seed, std::uint64_t field_seed);

/// Fully connected antiferromagnet (J_ij = -1) with staggered fields
/// h_i = +h on even sites and -h on odd sites (site 0 is even).
/// Gamma = 0 and Gamma_D = 1.
ProblemInstance staggered_instance(int n, double h);

// ---------------------------------------------------------------------------
// Schedule
// ---------------------------------------------------------------------------

enum class ScheduleFamily { Trig, Linear, Tabulated };

std::string to_string(ScheduleFamily family);
ScheduleFamily parse_schedule_family(const std::string& tag);

/// Annealing schedule f(t), g(t) on [0, T] with analytic derivatives.
///
///   trig:      f = (1 - cos(pi t/T)) / 2,  g = sin^2(pi t/T) / 2 + delta
///   linear:    f = t/T,                    g = t/(2T) + delta
///   tabulated: piecewise-linear through user nodes; derivatives are the
///              segment slopes (right-continuous).
class Schedule {
public:
    static Schedule trig(double total_time, double delta);
    static Schedule linear(double total_time, double delta);
    static Schedule tabulated(double total_time, double delta, std::vector<double> s_nodes,
                              std::vector<double> f_nodes, std::vector<double> g_nodes);

    double total_time() const { return total_time_; }
    double delta() const { return delta_; }
    ScheduleFamily family() const { return family_; }

    double f(double t) const;
    double f_dot(double t) const;
    double g(double t) const;
    double g_dot(double t) const;

    nlohmann::json to_json() const;

private:
    Schedule(ScheduleFamily family, double total_time, double delta);

    ScheduleFamily family_;
    double total_time_;
    double delta_;
    // Tabulated family only; nodes in s = t / T.
    std::vector<double> s_nodes_, f_nodes_, g_nodes_;

    std::size_t segment(double s) const;
};

inline Schedule make_trig_schedule(double total_time, double delta) { return Schedule::trig(total_time, delta); }

}  // namespace mfcd
