#pragma once
// JSON run configuration. Grammar (all keys optional, unknown keys rejected):
//
//   {
//     "mode":    "figure2" | "figure3" | "table1" | "verify" | "sweep",
//     "engine":  "analytic" | "exact" | "both",
//     "workers": <int >= 1>,
//     "fixed":   { "k", "wm_t", "alpha2", "delta", "gamma", "r": <number>,
//                  "optical_cutoff", "mirror_cutoff", "steps": <int>,
//                  "exact_alpha2": <number> },
//     "axes":    { "<param>": [v, ...] | {"from", "to", "count", "scale": "linear"|"log"} },
//     "pairs":   [ {"p_target": <number>, "k": <number>}, ... ],
//     "outputs": { "csv": <path>, "svg": <path> }
//   }
//
// Numbers may also be written as strings in multiples of pi: "pi", "2pi",
// "pi/2", "1.5*pi". Axis params are k, wm_t, alpha2, delta, gamma; the
// first listed axis varies slowest.

#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "optoweak/errors.hpp"

namespace optoweak {

enum class Command { figure2, figure3, table1, verify, sweep };
enum class Engine { analytic, exact, both };

inline const char* to_string(Command c) {
    switch (c) {
        case Command::figure2: return "figure2";
        case Command::figure3: return "figure3";
        case Command::table1: return "table1";
        case Command::verify: return "verify";
        case Command::sweep: return "sweep";
    }
    return "unknown";
}

inline const char* to_string(Engine e) {
    switch (e) {
        case Engine::analytic: return "analytic";
        case Engine::exact: return "exact";
        case Engine::both: return "both";
    }
    return "unknown";
}

inline Command command_from_string(const std::string& s) {
    for (Command c : {Command::figure2, Command::figure3, Command::table1, Command::verify, Command::sweep}) {
        if (s == to_string(c)) return c;
    }
    throw ConfigError("unknown mode '" + s + "'");
}

inline Engine engine_from_string(const std::string& s) {
    for (Engine e : {Engine::analytic, Engine::exact, Engine::both}) {
        if (s == to_string(e)) return e;
    }
    throw ConfigError("unknown engine '" + s + "' (expected analytic|exact|both)");
}

struct FixedParams {
    double k = 0.005;
    double wm_t = std::numbers::pi;
    double alpha2 = 30.0;
    double delta = 0.005;
    double gamma = 0.0;
    double r = 0.0;
    std::optional<int> optical_cutoff;
    std::optional<int> mirror_cutoff;
    int steps = 2000;
    double exact_alpha2 = 2.0;  ///< |α|² of the figure2 exact overlay
};

struct Axis {
    std::string name;
    std::vector<double> values;
};

struct ProbabilityPair {
    double p_target = 0.0;
    double k = 0.0;
};

struct SweepConfig {
    std::optional<Command> mode;
    Engine engine = Engine::analytic;
    unsigned workers = 1;
    FixedParams fixed;
    std::vector<Axis> axes;
    std::vector<ProbabilityPair> pairs;
    std::string csv;
    std::string svg;

    const Axis* axis(const std::string& name) const {
        for (const auto& a : axes) {
            if (a.name == name) return &a;
        }
        return nullptr;
    }
};

inline const std::vector<std::string>& axis_names() {
    static const std::vector<std::string> names{"k", "wm_t", "alpha2", "delta", "gamma"};
    return names;
}

namespace detail {

using ojson = nlohmann::ordered_json;

inline void reject_unknown(const ojson& obj, const std::vector<std::string>& allowed, const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const auto& a : allowed) ok = ok || it.key() == a;
        if (!ok) throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
}

inline double parse_number(const ojson& v, const std::string& where) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        static const std::regex re(R"(^\s*([0-9]*\.?[0-9]+)?\s*\*?\s*pi\s*(/\s*([0-9]*\.?[0-9]+))?\s*$)");
        const std::string s = v.get<std::string>();
        std::smatch m;
        if (std::regex_match(s, m, re)) {
            double x = std::numbers::pi;
            if (m[1].matched) x *= std::stod(m[1].str());
            if (m[3].matched) x /= std::stod(m[3].str());
            return x;
        }
        throw ConfigError(where + ": cannot parse '" + s + "' as a number");
    }
    throw ConfigError(where + ": expected a number");
}

inline int parse_int(const ojson& v, const std::string& where) {
    if (!v.is_number_integer()) throw ConfigError(where + ": expected an integer");
    return v.get<int>();
}

inline std::vector<double> parse_axis(const ojson& v, const std::string& name) {
    const std::string where = "axes." + name;
    std::vector<double> out;
    if (v.is_array()) {
        for (const auto& x : v) out.push_back(parse_number(x, where));
        if (out.empty()) throw ConfigError(where + ": empty value list");
        return out;
    }
    if (!v.is_object()) throw ConfigError(where + ": expected a list or {from, to, count}");
    reject_unknown(v, {"from", "to", "count", "scale"}, where);
    if (!v.contains("from") || !v.contains("to") || !v.contains("count")) {
        throw ConfigError(where + ": range needs from, to and count");
    }
    const double from = parse_number(v["from"], where + ".from");
    const double to = parse_number(v["to"], where + ".to");
    const int count = parse_int(v["count"], where + ".count");
    if (count < 2) throw ConfigError(where + ": range count must be >= 2");
    const std::string scale = v.value("scale", std::string("linear"));
    if (scale == "linear") {
        for (int i = 0; i < count; ++i) out.push_back(from + (to - from) * i / (count - 1));
    } else if (scale == "log") {
        if (!(from > 0.0 && to > 0.0)) throw ConfigError(where + ": log range needs positive bounds");
        const double lf = std::log(from);
        const double lt = std::log(to);
        for (int i = 0; i < count; ++i) out.push_back(std::exp(lf + (lt - lf) * i / (count - 1)));
    } else {
        throw ConfigError(where + ": scale must be linear or log");
    }
    out.front() = from;
    out.back() = to;
    return out;
}

inline void check_param(const std::string& name, double v) {
    if (!std::isfinite(v)) throw ConfigError(name + " must be finite");
    if ((name == "k" || name == "wm_t" || name == "alpha2" || name == "gamma" || name == "exact_alpha2") && v < 0.0) {
        throw ConfigError(name + " must be >= 0");
    }
    if (name == "delta" && !(std::abs(v) < std::numbers::pi / 4.0)) throw ConfigError("|delta| must be < pi/4");
}

}  // namespace detail

namespace detail {

inline SweepConfig parse_config_object(const ojson& j);

}  // namespace detail

inline SweepConfig parse_config(const std::string& text) {
    detail::ojson j;
    try {
        j = detail::ojson::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed JSON: ") + e.what());
    }
    try {
        return detail::parse_config_object(j);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad value type: ") + e.what());
    }
}

inline SweepConfig detail::parse_config_object(const ojson& j) {
    if (!j.is_object()) throw ConfigError("top level must be an object");
    detail::reject_unknown(j, {"mode", "engine", "workers", "fixed", "axes", "pairs", "outputs"}, "config");

    SweepConfig cfg;
    if (j.contains("mode")) cfg.mode = command_from_string(j["mode"].get<std::string>());
    if (j.contains("engine")) cfg.engine = engine_from_string(j["engine"].get<std::string>());
    if (j.contains("workers")) {
        const int w = detail::parse_int(j["workers"], "workers");
        if (w < 1) throw ConfigError("workers must be >= 1");
        cfg.workers = static_cast<unsigned>(w);
    }

    if (j.contains("fixed")) {
        const auto& f = j["fixed"];
        if (!f.is_object()) throw ConfigError("fixed must be an object");
        detail::reject_unknown(f, {"k", "wm_t", "alpha2", "delta", "gamma", "r", "optical_cutoff", "mirror_cutoff",
                                   "steps", "exact_alpha2"},
                               "fixed");
        auto num = [&](const char* key, double& dst) {
            if (f.contains(key)) dst = detail::parse_number(f[key], std::string("fixed.") + key);
            detail::check_param(key, dst);
        };
        num("k", cfg.fixed.k);
        num("wm_t", cfg.fixed.wm_t);
        num("alpha2", cfg.fixed.alpha2);
        num("delta", cfg.fixed.delta);
        num("gamma", cfg.fixed.gamma);
        num("r", cfg.fixed.r);
        num("exact_alpha2", cfg.fixed.exact_alpha2);
        if (f.contains("optical_cutoff")) {
            cfg.fixed.optical_cutoff = detail::parse_int(f["optical_cutoff"], "fixed.optical_cutoff");
            if (*cfg.fixed.optical_cutoff < 1) throw ConfigError("fixed.optical_cutoff must be >= 1");
        }
        if (f.contains("mirror_cutoff")) {
            cfg.fixed.mirror_cutoff = detail::parse_int(f["mirror_cutoff"], "fixed.mirror_cutoff");
            if (*cfg.fixed.mirror_cutoff < 1) throw ConfigError("fixed.mirror_cutoff must be >= 1");
        }
        if (f.contains("steps")) {
            cfg.fixed.steps = detail::parse_int(f["steps"], "fixed.steps");
            if (cfg.fixed.steps < 1) throw ConfigError("fixed.steps must be >= 1");
        }
    }

    if (j.contains("axes")) {
        const auto& a = j["axes"];
        if (!a.is_object()) throw ConfigError("axes must be an object");
        detail::reject_unknown(a, axis_names(), "axes");
        for (auto it = a.begin(); it != a.end(); ++it) {
            Axis axis{it.key(), detail::parse_axis(it.value(), it.key())};
            for (double v : axis.values) detail::check_param(axis.name, v);
            cfg.axes.push_back(std::move(axis));
        }
    }

    if (j.contains("pairs")) {
        const auto& ps = j["pairs"];
        if (!ps.is_array() || ps.empty()) throw ConfigError("pairs must be a non-empty list");
        for (const auto& p : ps) {
            if (!p.is_object()) throw ConfigError("pairs entries must be objects");
            detail::reject_unknown(p, {"p_target", "k"}, "pairs");
            if (!p.contains("p_target") || !p.contains("k")) throw ConfigError("pairs entries need p_target and k");
            ProbabilityPair pp{detail::parse_number(p["p_target"], "pairs.p_target"),
                               detail::parse_number(p["k"], "pairs.k")};
            if (!(pp.p_target > 0.0 && pp.p_target <= 1.0)) throw ConfigError("pairs.p_target must be in (0, 1]");
            if (!(pp.k > 0.0)) throw ConfigError("pairs.k must be > 0");
            cfg.pairs.push_back(pp);
        }
    }

    if (j.contains("outputs")) {
        const auto& o = j["outputs"];
        if (!o.is_object()) throw ConfigError("outputs must be an object");
        detail::reject_unknown(o, {"csv", "svg"}, "outputs");
        if (o.contains("csv")) cfg.csv = o["csv"].get<std::string>();
        if (o.contains("svg")) cfg.svg = o["svg"].get<std::string>();
    }
    return cfg;
}

inline SweepConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

}  // namespace optoweak
