#pragma once

// Experiment configuration: a JSON document with a fixed schema. Every key is
// optional and falls back to the desk-scale default; unknown keys, wrong
// types and out-of-range values raise ValidationError.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mfclt/error.hpp"

namespace mfclt {

using json = nlohmann::ordered_json;

struct GridConfig {
    int d = 1;
    int L = 4;
    double a = 1.0;
};

struct PotentialConfig {
    std::string shape = "gaussian"; // gaussian | constant | delta | zero
    double g = 0.5;
    double w = 1.0;
};

struct InitialStateConfig {
    std::string shape = "gaussian"; // gaussian | plane_wave | constant
    int center = 0;
    double width = 1.0;
    int momentum = 1;
};

struct ObservableConfig {
    std::vector<int> k_list{1, 2};
    std::string preset = "random_hermitian"; // random_hermitian | rank_one | tensor_power | identity | file
    std::uint32_t seed = 7;
    std::vector<std::pair<double, double>> field; // rank_one vector as (re, im) per site
    std::string path;                            // file preset, one CSV per k with "{k}" substituted
};

struct StatsConfig {
    std::vector<double> tau_list{0.5, 1.0, 2.0};
    std::vector<std::pair<double, double>> intervals{{-0.5, 0.5}, {-1.0, 1.0}, {0.0, 1.0}};
    std::vector<double> delta_factors{0.1, 0.2, 0.4};
    double epsilon = 0.05;
};

struct CutoffConfig {
    std::string nmax_rule = "N+12"; // "N+<m>" or "tail:<eps>"
    long dense_cap = 6000;
    long dim_cap = 20000;
};

struct SolverConfig {
    double dt_hartree = 1e-3;
    double dt_store = 0.0; ///< 0 selects T / 200
    double dt_flow = 0.0;  ///< 0 selects t / 2000 with automatic halving
    double dt_fock = 0.005;
    std::string scheme = "strang";
    std::string kernel_convention = "exchange";
    double pairing_prefactor = 0.5;
    double krylov_tol = 1e-12;
};

struct FlagConfig {
    bool project_final_condition = true;
};

struct Config {
    std::string experiment = "default";
    GridConfig grid;
    PotentialConfig potential;
    InitialStateConfig initial_state;
    ObservableConfig observable;
    std::vector<int> N_list{2, 4, 6};
    std::vector<double> t_list{0.0, 0.5, 1.0};
    StatsConfig stats;
    CutoffConfig cutoffs;
    SolverConfig solver;
    FlagConfig flags;
    std::string output_dir = "out";

    double max_time() const
    {
        double T = 0.0;
        for (double t : t_list) T = std::max(T, t);
        return T;
    }
};

namespace detail {

class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path))
    {
        require(j_.is_object(), where() + " must be an object");
    }

    void allow(std::initializer_list<const char*> keys)
    {
        std::set<std::string> ok(keys.begin(), keys.end());
        for (const auto& item : j_.items())
            if (!ok.count(item.key())) throw ValidationError("config: unknown key '" + join(item.key()) + "'");
    }

    bool has(const char* key) const { return j_.contains(key); }
    const json& at(const char* key) const { return j_.at(key); }
    std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    template <class T>
    void get(const char* key, T& out) const
    {
        if (!has(key)) return;
        out = convert<T>(j_.at(key), join(key));
    }

    template <class T>
    static T convert(const json& v, const std::string& name)
    {
        if constexpr (std::is_same_v<T, bool>) {
            require(v.is_boolean(), "config: '" + name + "' must be a boolean");
        } else if constexpr (std::is_integral_v<T>) {
            require(v.is_number_integer(), "config: '" + name + "' must be an integer");
            if constexpr (std::is_unsigned_v<T>)
                require(v.get<long long>() >= 0, "config: '" + name + "' must be nonnegative");
        } else if constexpr (std::is_floating_point_v<T>) {
            require(v.is_number(), "config: '" + name + "' must be a number");
        } else if constexpr (std::is_same_v<T, std::string>) {
            require(v.is_string(), "config: '" + name + "' must be a string");
        } else if constexpr (std::is_same_v<T, std::vector<std::pair<double, double>>>) {
            require(v.is_array(), "config: '" + name + "' must be an array of pairs");
            T out;
            for (const auto& e : v) {
                require(e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number(),
                        "config: '" + name + "' entries must be [x, y] number pairs");
                out.emplace_back(e[0].get<double>(), e[1].get<double>());
            }
            return out;
        } else {
            require(v.is_array(), "config: '" + name + "' must be an array");
            T out;
            for (const auto& e : v) out.push_back(convert<typename T::value_type>(e, name + "[]"));
            return out;
        }
        return v.get<T>();
    }

private:
    std::string where() const { return path_.empty() ? "config" : "config: '" + path_ + "'"; }

    const json& j_;
    std::string path_;
};

inline void require_one_of(const std::string& value, std::initializer_list<const char*> options, const std::string& name)
{
    for (const char* o : options)
        if (value == o) return;
    throw ValidationError("config: '" + name + "' has unsupported value '" + value + "'");
}

} // namespace detail

/// Parsed "N+<m>" or "tail:<eps>" rule.
struct NmaxRule {
    bool tail = false;
    int margin = 12;
    double eps = 0.0;
};

inline NmaxRule parse_nmax_rule(const std::string& rule)
{
    NmaxRule r;
    const auto bad = [&] { return ValidationError("config: cannot parse Nmax rule '" + rule + "'"); };
    try {
        std::size_t used = 0;
        if (rule.rfind("N+", 0) == 0) {
            r.margin = std::stoi(rule.substr(2), &used);
            if (used != rule.size() - 2 || r.margin < 0) throw bad();
        } else if (rule.rfind("tail:", 0) == 0) {
            r.tail = true;
            r.eps = std::stod(rule.substr(5), &used);
            if (used != rule.size() - 5 || !(r.eps > 0.0 && r.eps < 1.0)) throw bad();
        } else {
            throw bad();
        }
    } catch (const std::logic_error&) {
        throw bad();
    }
    return r;
}

inline void validate(const Config& c)
{
    using detail::require;
    require(c.grid.d >= 1 && c.grid.d <= 3, "config: grid.d must be 1, 2 or 3");
    require(c.grid.L >= 2, "config: grid.L must be at least 2");
    require(c.grid.a > 0.0, "config: grid.a must be positive");
    detail::require_one_of(c.potential.shape, {"gaussian", "constant", "delta", "zero"}, "potential.shape");
    require(std::isfinite(c.potential.g), "config: potential.g must be finite");
    require(c.potential.w > 0.0, "config: potential.w must be positive");
    detail::require_one_of(c.initial_state.shape, {"gaussian", "plane_wave", "constant"}, "initial_state.shape");
    require(c.initial_state.width > 0.0, "config: initial_state.width must be positive");
    long M = 1;
    for (int i = 0; i < c.grid.d; ++i) M *= c.grid.L;
    require(c.initial_state.center >= 0 && c.initial_state.center < M, "config: initial_state.center out of range");
    require(c.initial_state.momentum >= 0 && c.initial_state.momentum < M, "config: initial_state.momentum out of range");
    detail::require_one_of(c.observable.preset, {"random_hermitian", "rank_one", "tensor_power", "identity", "file"},
                           "observable.preset");
    require(!c.observable.k_list.empty(), "config: observable.k must not be empty");
    for (int k : c.observable.k_list) require(k >= 1 && k <= 4, "config: observable.k entries must lie in 1..4");
    if (c.observable.preset == "rank_one") {
        require(static_cast<long>(c.observable.field.size()) == M, "config: observable.field needs one entry per site");
        for (int k : c.observable.k_list) require(k == 1, "config: rank_one is a one-particle preset");
    }
    if (c.observable.preset == "file") require(!c.observable.path.empty(), "config: observable.path is required");
    require(!c.N_list.empty(), "config: N_list must not be empty");
    for (int N : c.N_list) require(N >= 1, "config: N_list entries must be positive");
    require(!c.t_list.empty(), "config: t_list must not be empty");
    for (double t : c.t_list) require(t >= 0.0 && std::isfinite(t), "config: t_list entries must be finite and >= 0");
    for (double tau : c.stats.tau_list) require(std::isfinite(tau), "config: stats.tau_list entries must be finite");
    require(c.stats.epsilon > 0.0, "config: stats.epsilon must be positive");
    for (const auto& [a, b] : c.stats.intervals)
        require(b - a > 2.0 * c.stats.epsilon, "config: every stats.intervals entry needs b - a > 2 epsilon");
    for (double f : c.stats.delta_factors) require(f > 0.0, "config: stats.delta_factors must be positive");
    parse_nmax_rule(c.cutoffs.nmax_rule);
    require(c.cutoffs.dense_cap >= 1, "config: cutoffs.dense_cap must be positive");
    require(c.cutoffs.dim_cap >= 1, "config: cutoffs.dim_cap must be positive");
    require(c.solver.dt_hartree > 0.0, "config: solver.dt_hartree must be positive");
    require(c.solver.dt_store >= 0.0, "config: solver.dt_store must be nonnegative");
    require(c.solver.dt_store == 0.0 || c.solver.dt_store >= c.solver.dt_hartree,
            "config: solver.dt_store must not be smaller than dt_hartree");
    require(c.solver.dt_flow >= 0.0, "config: solver.dt_flow must be nonnegative");
    require(c.solver.dt_fock > 0.0, "config: solver.dt_fock must be positive");
    require(c.solver.krylov_tol > 0.0, "config: solver.krylov_tol must be positive");
    detail::require_one_of(c.solver.scheme, {"strang", "yoshida4"}, "solver.scheme");
    detail::require_one_of(c.solver.kernel_convention, {"exchange", "transposed", "printed"}, "solver.kernel_convention");
    require(std::isfinite(c.solver.pairing_prefactor), "config: solver.pairing_prefactor must be finite");
    require(!c.output_dir.empty(), "config: output_dir must not be empty");
}

inline Config config_from_json(const json& j)
{
    Config c;
    detail::Reader root(j, "");
    root.allow({"experiment", "grid", "potential", "initial_state", "observable", "N_list", "t_list", "stats", "cutoffs",
                "solver", "flags", "output_dir"});
    root.get("experiment", c.experiment);
    root.get("N_list", c.N_list);
    root.get("t_list", c.t_list);
    root.get("output_dir", c.output_dir);
    if (root.has("grid")) {
        detail::Reader r(root.at("grid"), "grid");
        r.allow({"d", "L", "a"});
        r.get("d", c.grid.d);
        r.get("L", c.grid.L);
        r.get("a", c.grid.a);
    }
    if (root.has("potential")) {
        detail::Reader r(root.at("potential"), "potential");
        r.allow({"shape", "g", "w"});
        r.get("shape", c.potential.shape);
        r.get("g", c.potential.g);
        r.get("w", c.potential.w);
    }
    if (root.has("initial_state")) {
        detail::Reader r(root.at("initial_state"), "initial_state");
        r.allow({"shape", "center", "width", "momentum"});
        r.get("shape", c.initial_state.shape);
        r.get("center", c.initial_state.center);
        r.get("width", c.initial_state.width);
        r.get("momentum", c.initial_state.momentum);
    }
    if (root.has("observable")) {
        detail::Reader r(root.at("observable"), "observable");
        r.allow({"k", "preset", "seed", "field", "path"});
        if (r.has("k")) {
            const json& k = r.at("k");
            if (k.is_array()) c.observable.k_list = detail::Reader::convert<std::vector<int>>(k, "observable.k");
            else c.observable.k_list = {detail::Reader::convert<int>(k, "observable.k")};
        }
        r.get("preset", c.observable.preset);
        r.get("seed", c.observable.seed);
        r.get("field", c.observable.field);
        r.get("path", c.observable.path);
    }
    if (root.has("stats")) {
        detail::Reader r(root.at("stats"), "stats");
        r.allow({"tau_list", "intervals", "delta_factors", "epsilon"});
        r.get("tau_list", c.stats.tau_list);
        r.get("intervals", c.stats.intervals);
        r.get("delta_factors", c.stats.delta_factors);
        r.get("epsilon", c.stats.epsilon);
    }
    if (root.has("cutoffs")) {
        detail::Reader r(root.at("cutoffs"), "cutoffs");
        r.allow({"Nmax_rule", "dense_cap", "dim_cap"});
        r.get("Nmax_rule", c.cutoffs.nmax_rule);
        r.get("dense_cap", c.cutoffs.dense_cap);
        r.get("dim_cap", c.cutoffs.dim_cap);
    }
    if (root.has("solver")) {
        detail::Reader r(root.at("solver"), "solver");
        r.allow({"dt_hartree", "dt_store", "dt_flow", "dt_fock", "scheme", "kernel_convention", "pairing_prefactor",
                 "krylov_tol"});
        r.get("dt_hartree", c.solver.dt_hartree);
        r.get("dt_store", c.solver.dt_store);
        r.get("dt_flow", c.solver.dt_flow);
        r.get("dt_fock", c.solver.dt_fock);
        r.get("scheme", c.solver.scheme);
        r.get("kernel_convention", c.solver.kernel_convention);
        r.get("pairing_prefactor", c.solver.pairing_prefactor);
        r.get("krylov_tol", c.solver.krylov_tol);
    }
    if (root.has("flags")) {
        detail::Reader r(root.at("flags"), "flags");
        r.allow({"project_final_condition"});
        r.get("project_final_condition", c.flags.project_final_condition);
    }
    validate(c);
    return c;
}

inline Config parse_config(const std::string& text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config: malformed JSON: ") + e.what());
    }
    return config_from_json(j);
}

inline Config load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ValidationError("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

/// The fully resolved configuration, including every default.
inline json to_json(const Config& c)
{
    const auto pairs = [](const std::vector<std::pair<double, double>>& v) {
        json out = json::array();
        for (const auto& [x, y] : v) out.push_back({x, y});
        return out;
    };
    json j;
    j["experiment"] = c.experiment;
    j["grid"] = {{"d", c.grid.d}, {"L", c.grid.L}, {"a", c.grid.a}};
    j["potential"] = {{"shape", c.potential.shape}, {"g", c.potential.g}, {"w", c.potential.w}};
    j["initial_state"] = {{"shape", c.initial_state.shape},
                          {"center", c.initial_state.center},
                          {"width", c.initial_state.width},
                          {"momentum", c.initial_state.momentum}};
    j["observable"] = {{"k", c.observable.k_list}, {"preset", c.observable.preset}, {"seed", c.observable.seed},
                       {"field", pairs(c.observable.field)}, {"path", c.observable.path}};
    j["N_list"] = c.N_list;
    j["t_list"] = c.t_list;
    j["stats"] = {{"tau_list", c.stats.tau_list},
                  {"intervals", pairs(c.stats.intervals)},
                  {"delta_factors", c.stats.delta_factors},
                  {"epsilon", c.stats.epsilon}};
    j["cutoffs"] = {{"Nmax_rule", c.cutoffs.nmax_rule}, {"dense_cap", c.cutoffs.dense_cap}, {"dim_cap", c.cutoffs.dim_cap}};
    j["solver"] = {{"dt_hartree", c.solver.dt_hartree},
                   {"dt_store", c.solver.dt_store},
                   {"dt_flow", c.solver.dt_flow},
                   {"dt_fock", c.solver.dt_fock},
                   {"scheme", c.solver.scheme},
                   {"kernel_convention", c.solver.kernel_convention},
                   {"pairing_prefactor", c.solver.pairing_prefactor},
                   {"krylov_tol", c.solver.krylov_tol}};
    j["flags"] = {{"project_final_condition", c.flags.project_final_condition}};
    j["output_dir"] = c.output_dir;
    return j;
}

} // namespace mfclt
