#include "mfcd/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace mfcd {

using nlohmann::json;

std::string to_string(Topology topology) {
    switch (topology) {
        case Topology::FullyConnected: return "fully-connected";
        case Topology::Chain: return "chain";
        case Topology::Custom: return "custom";
    }
    return "custom";
}

Topology parse_topology(const std::string& tag) {
    if (tag == "fully-connected") return Topology::FullyConnected;
    if (tag == "chain") return Topology::Chain;
    if (tag == "custom") return Topology::Custom;
    throw ConfigError("unknown topology tag '" + tag + "'");
}

// ---------------------------------------------------------------------------
// Rng
// ---------------------------------------------------------------------------

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// sin(k pi x) with the zeros at x = 0 and x = 1 returned exactly.
double sin_pi(double k, double x) {
    if (x == 0.0 || x == 1.0) return 0.0;
    return std::sin(k * std::numbers::pi * x);
}

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

std::uint64_t derive_stream_seed(const RngSpec& spec) {
    return splitmix64(spec.seed ^ splitmix64(fnv1a(spec.stream)));
}

Rng::Rng(const RngSpec& spec) : engine_(derive_stream_seed(spec)) {
    if (spec.algorithm != "mt19937_64") {
        throw ConfigError("unsupported rng algorithm '" + spec.algorithm + "'");
    }
}

std::uint64_t Rng::next_u64() { return engine_(); }

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
    if (spare_normal_) {
        double z = *spare_normal_;
        spare_normal_.reset();
        return z;
    }
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * std::numbers::pi * u2;
    spare_normal_ = r * std::sin(theta);
    return r * std::cos(theta);
}

json to_json(const RngSpec& spec) {
    return json{{"algorithm", spec.algorithm}, {"seed", spec.seed}, {"stream", spec.stream}};
}

RngSpec rng_spec_from_json(const json& j) {
    RngSpec spec;
    spec.algorithm = j.value("algorithm", spec.algorithm);
    spec.seed = j.value("seed", spec.seed);
    spec.stream = j.value("stream", spec.stream);
    return spec;
}

// ---------------------------------------------------------------------------
// ProblemInstance
// ---------------------------------------------------------------------------

void ProblemInstance::validate() const {
    if (n_sites < 1) throw ConfigError("instance: n_sites must be positive");
    const auto n = static_cast<std::size_t>(n_sites);
    if (couplings.size() != n * n) throw ConfigError("instance: couplings must hold n_sites^2 entries");
    if (fields.size() != n) throw ConfigError("instance: fields must hold n_sites entries");
    if (!(gamma >= 0.0) || !(gamma_d >= 0.0)) throw ConfigError("instance: gamma and gamma_d must be >= 0");
    if (gamma == 0.0 && gamma_d == 0.0) throw ConfigError("instance: gamma and gamma_d are both zero");
    for (int i = 0; i < n_sites; ++i) {
        if (coupling(i, i) != 0.0) {
            throw ConfigError("instance: couplings[" + std::to_string(i) + "][" + std::to_string(i) + "] must be 0");
        }
        for (int j = i + 1; j < n_sites; ++j) {
            if (coupling(i, j) != coupling(j, i)) {
                throw ConfigError("instance: couplings not symmetric at (" + std::to_string(i) + ", " +
                                  std::to_string(j) + ")");
            }
            if (topology == Topology::Chain && j != i + 1 && coupling(i, j) != 0.0) {
                throw ConfigError("instance: chain topology has non-neighbour coupling (" + std::to_string(i) +
                                  ", " + std::to_string(j) + ")");
            }
        }
    }
}

json to_json(const ProblemInstance& inst) {
    json j{{"n_sites", inst.n_sites},
           {"couplings", inst.couplings},
           {"fields", inst.fields},
           {"gamma", inst.gamma},
           {"gamma_d", inst.gamma_d},
           {"topology", to_string(inst.topology)}};
    if (inst.provenance) {
        const auto& p = *inst.provenance;
        json pj{{"generator", p.generator}};
        if (p.couplings_rng) pj["couplings_rng"] = to_json(*p.couplings_rng);
        if (p.fields_rng) pj["fields_rng"] = to_json(*p.fields_rng);
        if (p.sigma) pj["sigma"] = *p.sigma;
        j["provenance"] = pj;
    }
    return j;
}

ProblemInstance instance_from_json(const json& j) {
    ProblemInstance inst;
    try {
        inst.n_sites = j.at("n_sites").get<int>();
        inst.couplings = j.at("couplings").get<std::vector<double>>();
        inst.fields = j.at("fields").get<std::vector<double>>();
        inst.gamma = j.value("gamma", 0.0);
        inst.gamma_d = j.value("gamma_d", 1.0);
        inst.topology = parse_topology(j.value("topology", std::string("custom")));
        if (j.contains("provenance")) {
            const auto& pj = j.at("provenance");
            Provenance p;
            p.generator = pj.value("generator", std::string());
            if (pj.contains("couplings_rng")) p.couplings_rng = rng_spec_from_json(pj.at("couplings_rng"));
            if (pj.contains("fields_rng")) p.fields_rng = rng_spec_from_json(pj.at("fields_rng"));
            if (pj.contains("sigma")) p.sigma = pj.at("sigma").get<double>();
            inst.provenance = p;
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("instance: ") + e.what());
    }
    inst.validate();
    return inst;
}

std::string instance_hash(const ProblemInstance& inst) {
    std::ostringstream os;
    os << std::hex << fnv1a(to_json(inst).dump());
    return os.str();
}

std::vector<double> sample_gaussian_couplings(int n, double sigma, Topology topology, const RngSpec& rng_spec) {
    if (n < 1) throw ConfigError("couplings: n must be >= 1");
    if (!(sigma > 0.0)) throw ConfigError("couplings: sigma must be > 0");
    if (topology == Topology::Custom) throw ConfigError("couplings: cannot sample topology 'custom'");
    Rng rng(rng_spec);
    const auto un = static_cast<std::size_t>(n);
    std::vector<double> j(un * un, 0.0);
    for (std::size_t a = 0; a < un; ++a) {
        for (std::size_t b = a + 1; b < un; ++b) {
            if (topology == Topology::Chain && b != a + 1) continue;
            double v = sigma * rng.normal();
            j[a * un + b] = v;
            j[b * un + a] = v;
        }
    }
    return j;
}

std::vector<double> sample_uniform_fields(int n, const RngSpec& rng_spec) {
    if (n < 1) throw ConfigError("fields: n must be >= 1");
    Rng rng(rng_spec);
    std::vector<double> h(static_cast<std::size_t>(n));
    for (auto& v : h) v = rng.uniform();
    return h;
}

ProblemInstance make_random_instance(int n, double sigma, Topology topology, double gamma, double gamma_d,
                                     std::uint64_t coupling_seed, std::uint64_t field_seed) {
    RngSpec jr{"mt19937_64", coupling_seed, "couplings"};
    RngSpec hr{"mt19937_64", field_seed, "fields"};
    ProblemInstance inst;
    inst.n_sites = n;
    inst.couplings = sample_gaussian_couplings(n, sigma, topology, jr);
    inst.fields = sample_uniform_fields(n, hr);
    inst.gamma = gamma;
    inst.gamma_d = gamma_d;
    inst.topology = topology;
    inst.provenance = Provenance{jr, hr, sigma, "gaussian"};
    inst.validate();
    return inst;
}

ProblemInstance staggered_instance(int n, double h) {
    if (n < 2 || n % 2 != 0) throw ConfigError("staggered instance: n must be even and >= 2");
    ProblemInstance inst;
    inst.n_sites = n;
    const auto un = static_cast<std::size_t>(n);
    inst.couplings.assign(un * un, -1.0);
    for (std::size_t i = 0; i < un; ++i) inst.couplings[i * un + i] = 0.0;
    inst.fields.resize(un);
    for (std::size_t i = 0; i < un; ++i) inst.fields[i] = (i % 2 == 0) ? h : -h;
    inst.gamma = 0.0;
    inst.gamma_d = 1.0;
    inst.topology = Topology::FullyConnected;
    inst.provenance = Provenance{std::nullopt, std::nullopt, std::nullopt, "staggered"};
    return inst;
}

// ---------------------------------------------------------------------------
// Schedule
// ---------------------------------------------------------------------------

std::string to_string(ScheduleFamily family) {
    switch (family) {
        case ScheduleFamily::Trig: return "trig-default";
        case ScheduleFamily::Linear: return "linear";
        case ScheduleFamily::Tabulated: return "tabulated";
    }
    return "tabulated";
}

ScheduleFamily parse_schedule_family(const std::string& tag) {
    if (tag == "trig-default" || tag == "trig") return ScheduleFamily::Trig;
    if (tag == "linear") return ScheduleFamily::Linear;
    if (tag == "tabulated") return ScheduleFamily::Tabulated;
    throw ConfigError("unknown schedule family '" + tag + "'");
}

Schedule::Schedule(ScheduleFamily family, double total_time, double delta)
    : family_(family), total_time_(total_time), delta_(delta) {
    if (!(total_time > 0.0) || !std::isfinite(total_time)) throw ConfigError("schedule: total time must be > 0");
    if (!(delta >= 0.0)) throw ConfigError("schedule: delta must be >= 0");
}

Schedule Schedule::trig(double total_time, double delta) { return {ScheduleFamily::Trig, total_time, delta}; }

Schedule Schedule::linear(double total_time, double delta) { return {ScheduleFamily::Linear, total_time, delta}; }

Schedule Schedule::tabulated(double total_time, double delta, std::vector<double> s_nodes,
                             std::vector<double> f_nodes, std::vector<double> g_nodes) {
    Schedule s(ScheduleFamily::Tabulated, total_time, delta);
    if (s_nodes.size() < 2 || f_nodes.size() != s_nodes.size() || g_nodes.size() != s_nodes.size()) {
        throw ConfigError("schedule: tabulated nodes need >= 2 entries of equal length");
    }
    if (s_nodes.front() != 0.0 || s_nodes.back() != 1.0) {
        throw ConfigError("schedule: tabulated s nodes must start at 0 and end at 1");
    }
    for (std::size_t k = 1; k < s_nodes.size(); ++k) {
        if (!(s_nodes[k] > s_nodes[k - 1])) throw ConfigError("schedule: tabulated s nodes must increase");
    }
    s.s_nodes_ = std::move(s_nodes);
    s.f_nodes_ = std::move(f_nodes);
    s.g_nodes_ = std::move(g_nodes);
    return s;
}

std::size_t Schedule::segment(double s) const {
    auto it = std::upper_bound(s_nodes_.begin(), s_nodes_.end(), s);
    auto k = static_cast<std::size_t>(std::distance(s_nodes_.begin(), it));
    if (k == 0) return 0;
    return std::min(k - 1, s_nodes_.size() - 2);
}

double Schedule::f(double t) const {
    const double x = t / total_time_;
    switch (family_) {
        case ScheduleFamily::Trig: return 0.5 * (1.0 - std::cos(std::numbers::pi * x));
        case ScheduleFamily::Linear: return x;
        case ScheduleFamily::Tabulated: {
            auto k = segment(x);
            double w = (x - s_nodes_[k]) / (s_nodes_[k + 1] - s_nodes_[k]);
            return f_nodes_[k] + w * (f_nodes_[k + 1] - f_nodes_[k]);
        }
    }
    return 0.0;
}

double Schedule::f_dot(double t) const {
    const double x = t / total_time_;
    switch (family_) {
        case ScheduleFamily::Trig:
            return 0.5 * std::numbers::pi / total_time_ * sin_pi(1.0, x);
        case ScheduleFamily::Linear: return 1.0 / total_time_;
        case ScheduleFamily::Tabulated: {
            auto k = segment(x);
            return (f_nodes_[k + 1] - f_nodes_[k]) / ((s_nodes_[k + 1] - s_nodes_[k]) * total_time_);
        }
    }
    return 0.0;
}

double Schedule::g(double t) const {
    const double x = t / total_time_;
    switch (family_) {
        case ScheduleFamily::Trig: {
            double s = sin_pi(1.0, x);
            return 0.5 * s * s + delta_;
        }
        case ScheduleFamily::Linear: return 0.5 * x + delta_;
        case ScheduleFamily::Tabulated: {
            auto k = segment(x);
            double w = (x - s_nodes_[k]) / (s_nodes_[k + 1] - s_nodes_[k]);
            return g_nodes_[k] + w * (g_nodes_[k + 1] - g_nodes_[k]);
        }
    }
    return 0.0;
}

double Schedule::g_dot(double t) const {
    const double x = t / total_time_;
    switch (family_) {
        case ScheduleFamily::Trig: {
            // d/dt [sin^2(pi t/T) / 2] = (pi / 2T) sin(2 pi t/T)
            return 0.5 * std::numbers::pi / total_time_ * sin_pi(2.0, x);
        }
        case ScheduleFamily::Linear: return 0.5 / total_time_;
        case ScheduleFamily::Tabulated: {
            auto k = segment(x);
            return (g_nodes_[k + 1] - g_nodes_[k]) / ((s_nodes_[k + 1] - s_nodes_[k]) * total_time_);
        }
    }
    return 0.0;
}

json Schedule::to_json() const {
    json j{{"family", to_string(family_)}, {"total_time", total_time_}, {"delta", delta_}};
    if (family_ == ScheduleFamily::Tabulated) {
        j["s_nodes"] = s_nodes_;
        j["f_nodes"] = f_nodes_;
        j["g_nodes"] = g_nodes_;
    }
    return j;
}

}  // namespace mfcd
