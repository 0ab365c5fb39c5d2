#include <fstream>
#include <numeric>
#include <set>

#include "mfcd/cli.hpp"

namespace mfcd::cli {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& message) {
    throw ConfigError(path + ": " + message);
}

void reject_unknown(const json& obj, const std::string& path, const std::set<std::string>& known) {
    if (!obj.is_object()) fail(path, "expected an object");
    for (const auto& [key, value] : obj.items()) {
        if (!known.count(key)) fail(path + "." + key, "unknown key");
    }
}

template <typename T>
T read(const json& obj, const std::string& key, const T& fallback, const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    try {
        if constexpr (std::is_same_v<T, double>) {
            if (!it->is_number()) fail(path + "." + key, "expected a number");
        } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
            if (!it->is_number_integer()) fail(path + "." + key, "expected an integer");
            if constexpr (std::is_unsigned_v<T>) {
                if (!it->is_number_unsigned() && it->get<std::int64_t>() < 0) fail(path + "." + key, "must be >= 0");
            }
        } else if constexpr (std::is_same_v<T, bool>) {
            if (!it->is_boolean()) fail(path + "." + key, "expected true or false");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!it->is_string()) fail(path + "." + key, "expected a string");
        }
        return it->get<T>();
    } catch (const json::exception& e) {
        fail(path + "." + key, e.what());
    }
}

template <typename T>
std::vector<T> read_list(const json& obj, const std::string& key, const std::vector<T>& fallback,
                         const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_array()) fail(path + "." + key, "expected an array");
    std::vector<T> out;
    for (std::size_t k = 0; k < it->size(); ++k) {
        const json& v = (*it)[k];
        const std::string where = path + "." + key + "[" + std::to_string(k) + "]";
        if constexpr (std::is_same_v<T, double>) {
            if (!v.is_number()) fail(where, "expected a number");
        } else {
            if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
                fail(where, "expected a non-negative integer");
            }
        }
        out.push_back(v.get<T>());
    }
    return out;
}

void require(bool ok, const std::string& path, const std::string& message) {
    if (!ok) fail(path, message);
}

std::vector<std::uint64_t> default_h_seeds() {
    std::vector<std::uint64_t> seeds(100);
    std::iota(seeds.begin(), seeds.end(), std::uint64_t{1});
    return seeds;
}

InstanceConfig parse_instance(const json& j, const std::string& path) {
    reject_unknown(j, path, {"source", "generator", "n_sites", "sigma", "topology", "gamma", "gamma_d", "h",
                             "coupling_seed", "field_seed", "path", "inline"});
    InstanceConfig c;
    c.source = read(j, "source", c.source, path);
    c.generator = read(j, "generator", c.generator, path);
    c.n_sites = read(j, "n_sites", c.n_sites, path);
    c.sigma = read(j, "sigma", c.sigma, path);
    try {
        c.topology = parse_topology(read(j, "topology", to_string(c.topology), path));
    } catch (const ConfigError& e) {
        fail(path + ".topology", e.what());
    }
    c.gamma = read(j, "gamma", c.gamma, path);
    c.gamma_d = read(j, "gamma_d", c.gamma_d, path);
    c.h = read(j, "h", c.h, path);
    c.coupling_seed = read(j, "coupling_seed", c.coupling_seed, path);
    c.field_seed = read(j, "field_seed", c.field_seed, path);
    c.path = read(j, "path", c.path, path);
    if (j.contains("inline")) c.inline_instance = j.at("inline");

    require(c.source == "generator" || c.source == "inline" || c.source == "file", path + ".source",
            "expected 'generator', 'inline' or 'file'");
    if (c.source == "generator") {
        require(c.generator == "gaussian" || c.generator == "staggered", path + ".generator",
                "expected 'gaussian' or 'staggered'");
        require(c.n_sites >= 1 && c.n_sites <= kMaxStateVectorSites, path + ".n_sites",
                "must lie in [1, " + std::to_string(kMaxStateVectorSites) + "]");
        require(c.sigma > 0.0, path + ".sigma", "must be > 0");
        require(c.gamma >= 0.0, path + ".gamma", "must be >= 0");
        require(c.gamma_d >= 0.0, path + ".gamma_d", "must be >= 0");
        require(c.gamma + c.gamma_d > 0.0, path + ".gamma_d", "gamma and gamma_d cannot both be zero");
        if (c.generator == "staggered") {
            require(c.n_sites % 2 == 0, path + ".n_sites", "staggered generator needs an even number of sites");
            require(c.topology == Topology::FullyConnected, path + ".topology",
                    "staggered generator is fully connected");
        } else {
            require(c.topology != Topology::Custom, path + ".topology", "gaussian generator cannot be 'custom'");
        }
    }
    if (c.source == "inline") require(c.inline_instance.is_object(), path + ".inline", "expected an instance object");
    if (c.source == "file") require(!c.path.empty(), path + ".path", "required when source is 'file'");
    return c;
}

ScheduleConfig parse_schedule(const json& j, const std::string& path) {
    reject_unknown(j, path, {"family", "total_time", "delta"});
    ScheduleConfig c;
    try {
        c.family = parse_schedule_family(read(j, "family", to_string(c.family), path));
    } catch (const ConfigError& e) {
        fail(path + ".family", e.what());
    }
    require(c.family != ScheduleFamily::Tabulated, path + ".family", "tabulated schedules are library-only");
    c.total_time = read(j, "total_time", c.total_time, path);
    c.delta = read(j, "delta", c.delta, path);
    require(c.total_time > 0.0, path + ".total_time", "must be > 0");
    require(c.delta >= 0.0, path + ".delta", "must be >= 0");
    return c;
}

SweepConfig parse_sweep(const json& j, const std::string& path) {
    reject_unknown(j, path, {"j_seeds", "h_seeds", "total_times"});
    SweepConfig c;
    c.j_seeds = read_list(j, "j_seeds", c.j_seeds, path);
    c.h_seeds = read_list(j, "h_seeds", default_h_seeds(), path);
    c.total_times = read_list(j, "total_times", c.total_times, path);
    require(!c.j_seeds.empty(), path + ".j_seeds", "must not be empty");
    require(!c.h_seeds.empty(), path + ".h_seeds", "must not be empty");
    require(!c.total_times.empty(), path + ".total_times", "must not be empty");
    for (std::size_t k = 0; k < c.total_times.size(); ++k) {
        require(c.total_times[k] > 0.0, path + ".total_times[" + std::to_string(k) + "]", "must be > 0");
    }
    return c;
}

}  // namespace

RunConfig config_from_json(const json& j) {
    const std::string root = "config";
    reject_unknown(j, root, {"instance", "schedule", "drive", "steps", "output_grid", "snapshots", "sweep", "shots",
                             "shot_seed", "export", "verify", "workers", "output_dir"});
    RunConfig c;
    c.sweep.h_seeds = default_h_seeds();
    if (j.contains("instance")) c.instance = parse_instance(j.at("instance"), root + ".instance");
    if (j.contains("schedule")) c.schedule = parse_schedule(j.at("schedule"), root + ".schedule");
    if (j.contains("sweep")) c.sweep = parse_sweep(j.at("sweep"), root + ".sweep");
    try {
        c.drive = parse_drive(read(j, "drive", to_string(c.drive), root));
    } catch (const ConfigError& e) {
        fail(root + ".drive", e.what());
    }
    c.steps = read(j, "steps", c.steps, root);
    c.output_grid = read(j, "output_grid", c.output_grid, root);
    c.snapshots = read(j, "snapshots", c.snapshots, root);
    c.shots = read(j, "shots", c.shots, root);
    c.shot_seed = read(j, "shot_seed", c.shot_seed, root);
    c.workers = read(j, "workers", c.workers, root);
    c.output_dir = read(j, "output_dir", c.output_dir, root);

    if (j.contains("export")) {
        const json& e = j.at("export");
        const std::string path = root + ".export";
        reject_unknown(e, path, {"n_breakpoints", "ramp_end"});
        c.export_options.n_breakpoints = read(e, "n_breakpoints", c.export_options.n_breakpoints, path);
        c.export_options.ramp_end = read(e, "ramp_end", c.export_options.ramp_end, path);
    }
    if (j.contains("verify")) {
        const json& v = j.at("verify");
        const std::string path = root + ".verify";
        reject_unknown(v, path, {"norm_tolerance", "boundary_tolerance", "fd_tolerance", "fd_min_ratio",
                                 "frame_tolerance", "oracle_tolerance", "corrupt_feedback_sign"});
        VerifyConfig& vc = c.verify;
        vc.norm_tolerance = read(v, "norm_tolerance", vc.norm_tolerance, path);
        vc.boundary_tolerance = read(v, "boundary_tolerance", vc.boundary_tolerance, path);
        vc.fd_tolerance = read(v, "fd_tolerance", vc.fd_tolerance, path);
        vc.fd_min_ratio = read(v, "fd_min_ratio", vc.fd_min_ratio, path);
        vc.frame_tolerance = read(v, "frame_tolerance", vc.frame_tolerance, path);
        vc.oracle_tolerance = read(v, "oracle_tolerance", vc.oracle_tolerance, path);
        vc.corrupt_feedback_sign = read(v, "corrupt_feedback_sign", vc.corrupt_feedback_sign, path);
    }

    require(c.steps >= 2, root + ".steps", "must be >= 2");
    require(c.output_grid >= 2, root + ".output_grid", "must be >= 2");
    require((2 * c.steps) % (c.output_grid - 1) == 0, root + ".output_grid",
            "output_grid - 1 must divide the Bloch step count 2 * steps");
    require(c.snapshots >= 2, root + ".snapshots", "must be >= 2");
    require(c.shots >= 1, root + ".shots", "must be >= 1");
    require(c.workers >= 1, root + ".workers", "must be >= 1");
    require(!c.output_dir.empty(), root + ".output_dir", "must not be empty");
    require(c.export_options.n_breakpoints >= 4, root + ".export.n_breakpoints", "must be >= 4");
    require(c.export_options.ramp_end > 0.0 && c.export_options.ramp_end < 1.0, root + ".export.ramp_end",
            "must lie in (0, 1)");
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config: " + path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

json to_json(const RunConfig& c) {
    json instance = {{"source", c.instance.source},
                     {"generator", c.instance.generator},
                     {"n_sites", c.instance.n_sites},
                     {"sigma", c.instance.sigma},
                     {"topology", to_string(c.instance.topology)},
                     {"gamma", c.instance.gamma},
                     {"gamma_d", c.instance.gamma_d},
                     {"h", c.instance.h},
                     {"coupling_seed", c.instance.coupling_seed},
                     {"field_seed", c.instance.field_seed},
                     {"path", c.instance.path}};
    if (!c.instance.inline_instance.is_null()) instance["inline"] = c.instance.inline_instance;
    return {{"instance", instance},
            {"schedule",
             {{"family", to_string(c.schedule.family)},
              {"total_time", c.schedule.total_time},
              {"delta", c.schedule.delta}}},
            {"drive", to_string(c.drive)},
            {"steps", c.steps},
            {"output_grid", c.output_grid},
            {"snapshots", c.snapshots},
            {"sweep",
             {{"j_seeds", c.sweep.j_seeds}, {"h_seeds", c.sweep.h_seeds}, {"total_times", c.sweep.total_times}}},
            {"shots", c.shots},
            {"shot_seed", c.shot_seed},
            {"export", {{"n_breakpoints", c.export_options.n_breakpoints}, {"ramp_end", c.export_options.ramp_end}}},
            {"verify",
             {{"norm_tolerance", c.verify.norm_tolerance},
              {"boundary_tolerance", c.verify.boundary_tolerance},
              {"fd_tolerance", c.verify.fd_tolerance},
              {"fd_min_ratio", c.verify.fd_min_ratio},
              {"frame_tolerance", c.verify.frame_tolerance},
              {"oracle_tolerance", c.verify.oracle_tolerance},
              {"corrupt_feedback_sign", c.verify.corrupt_feedback_sign}}},
            {"workers", c.workers},
            {"output_dir", c.output_dir}};
}

void apply_seed_override(RunConfig& config, std::uint64_t seed) {
    config.instance.coupling_seed = seed;
    config.sweep.j_seeds = {seed};
}

ProblemInstance build_instance(const RunConfig& config) {
    return build_instance(config, config.instance.coupling_seed, config.instance.field_seed);
}

ProblemInstance build_instance(const RunConfig& config, std::uint64_t coupling_seed, std::uint64_t field_seed) {
    const InstanceConfig& c = config.instance;
    if (c.source == "inline") return instance_from_json(c.inline_instance);
    if (c.source == "file") {
        std::ifstream in(c.path);
        if (!in) throw ConfigError("config.instance.path: cannot open " + c.path);
        try {
            return instance_from_json(json::parse(in));
        } catch (const json::parse_error& e) {
            throw ConfigError("config.instance.path: " + std::string(e.what()));
        }
    }
    if (c.generator == "staggered") return staggered_instance(c.n_sites, c.h);
    return make_random_instance(c.n_sites, c.sigma, c.topology, c.gamma, c.gamma_d, coupling_seed, field_seed);
}

Schedule build_schedule(const ScheduleConfig& config) { return build_schedule(config, config.total_time); }

Schedule build_schedule(const ScheduleConfig& config, double total_time) {
    if (config.family == ScheduleFamily::Linear) return Schedule::linear(total_time, config.delta);
    return Schedule::trig(total_time, config.delta);
}

}  // namespace mfcd::cli
