#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "worldline/detector.hpp"
#include "worldline/dynamics.hpp"
#include "worldline/errors.hpp"
#include "worldline/grid.hpp"
#include "worldline/io.hpp"
#include "worldline/kernels.hpp"

namespace wl {

using json = nlohmann::json;

/// One requested post-processing step.
struct AnalysisSpec {
    std::string name;               // equilibrium | fdr | noise_psd | unruh_fit | correlation_propagation
    std::size_t detector = 0;       // subject detector
    std::size_t pair_source = 1;    // source detector for pair analyses
};

/// Pass/fail gates; only the configured ones decide the exit status.
struct CheckConfig {
    std::optional<double> fdr_max;
    std::optional<double> corrprop_max;
    std::optional<double> unruh_expected;
    std::optional<double> unruh_rtol;
    std::optional<double> varq_fdr_rtol;
    bool horizon_identity = false;
};

struct ScenarioConfig {
    std::vector<DetectorConfig> detectors;
    FieldConfig field{};
    Grid grid{};
    std::uint64_t seed = 0;
    std::size_t realizations = 1;
    IntegratorMode mode = IntegratorMode::Local;
    std::size_t keep_realizations = 4;
    std::vector<AnalysisSpec> analyses;
    CheckConfig checks{};

    /// Canonical defaults-filled echo; hashed into the manifest.
    json echo() const;
    std::string canonical_dump() const { return echo().dump(2); }
    std::uint64_t config_hash() const { return fnv1a64(canonical_dump()); }
};

namespace detail {

[[noreturn]] inline void cfg_fail(const std::string& where, const std::string& what) {
    throw validation_error("config: " + where + ": " + what);
}

inline void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) ok = true;
        if (!ok) cfg_fail(where, "unknown key '" + it.key() + "'");
    }
}

inline double num_at(const json& obj, const std::string& where, const char* key, double dflt) {
    if (!obj.contains(key)) return dflt;
    if (!obj[key].is_number()) cfg_fail(where, std::string(key) + " must be a number");
    return obj[key].get<double>();
}

inline Trajectory parse_trajectory(const json& j, const std::string& where, const std::filesystem::path& base_dir) {
    if (!j.is_object()) cfg_fail(where, "must be an object");
    if (!j.contains("kind")) cfg_fail(where, "missing 'kind'");
    std::string kind = j["kind"].get<std::string>();
    if (kind == "static") {
        check_keys(j, where, {"kind", "x0", "tau0"});
        return Trajectory::make_static(num_at(j, where, "x0", 0.0), num_at(j, where, "tau0", 0.0));
    }
    if (kind == "inertial") {
        check_keys(j, where, {"kind", "v0", "x0", "tau0"});
        double v0 = num_at(j, where, "v0", 0.0);
        if (!(std::abs(v0) < 1.0)) cfg_fail(where + ".v0", "|v0| must be < 1, got " + fmt_g15(v0));
        return Trajectory::inertial(v0, num_at(j, where, "x0", 0.0), num_at(j, where, "tau0", 0.0));
    }
    if (kind == "uniformly_accelerated") {
        check_keys(j, where, {"kind", "a", "x0", "tau0"});
        double a = num_at(j, where, "a", 1.0);
        if (!(a > 0.0)) cfg_fail(where + ".a", "acceleration must be > 0, got " + fmt_g15(a));
        return Trajectory::uniformly_accelerated(a, num_at(j, where, "x0", 0.0), num_at(j, where, "tau0", 0.0));
    }
    if (kind == "tabulated") {
        check_keys(j, where, {"kind", "table"});
        if (!j.contains("table")) cfg_fail(where, "tabulated trajectory needs 'table' (csv path)");
        std::filesystem::path p = j["table"].get<std::string>();
        if (p.is_relative()) p = base_dir / p;
        return Trajectory::from_csv(p.string());
    }
    cfg_fail(where + ".kind", "unknown trajectory kind '" + kind + "'");
}

inline json trajectory_echo(const Trajectory& tr) {
    json j;
    j["kind"] = to_string(tr.kind());
    switch (tr.kind()) {
        case TrajectoryKind::Static:
            j["x0"] = tr.x0();
            j["tau0"] = tr.tau0();
            break;
        case TrajectoryKind::Inertial:
            j["v0"] = tr.v0();
            j["x0"] = tr.x0();
            j["tau0"] = tr.tau0();
            break;
        case TrajectoryKind::UniformlyAccelerated:
            j["a"] = tr.acceleration();
            j["x0"] = tr.x0();
            j["tau0"] = tr.tau0();
            break;
        case TrajectoryKind::Tabulated:
            j["rows"] = tr.table_tau().size();
            j["domain"] = {tr.domain_lo(), tr.domain_hi()};
            break;
    }
    return j;
}

inline DetectorConfig parse_detector(const json& j, const std::string& where, const std::filesystem::path& base_dir) {
    check_keys(j, where, {"e", "omega", "switch", "trajectory", "backreaction"});
    DetectorConfig d;
    d.e = num_at(j, where, "e", 1.0);
    d.omega = num_at(j, where, "omega", 1.0);
    if (!(d.omega > 0.0)) cfg_fail(where + ".omega", "must be > 0");
    if (j.contains("backreaction")) {
        if (!j["backreaction"].is_boolean()) cfg_fail(where + ".backreaction", "must be a boolean");
        d.backreaction_enabled = j["backreaction"].get<bool>();
    }
    if (j.contains("switch")) {
        const json& s = j["switch"];
        check_keys(s, where + ".switch", {"type", "tau_on", "width"});
        std::string type = s.contains("type") ? s["type"].get<std::string>() : "step";
        if (type == "step")
            d.sw.type = SwitchSpec::Type::Step;
        else if (type == "ramp")
            d.sw.type = SwitchSpec::Type::Ramp;
        else
            cfg_fail(where + ".switch.type", "must be 'step' or 'ramp'");
        d.sw.tau_on = num_at(s, where + ".switch", "tau_on", 0.0);
        d.sw.width = num_at(s, where + ".switch", "width", 0.0);
        if (d.sw.width < 0.0) cfg_fail(where + ".switch.width", "must be >= 0");
        if (d.sw.type == SwitchSpec::Type::Step && d.sw.width != 0.0)
            cfg_fail(where + ".switch", "step takes no width");
    } else {
        d.sw.tau_on = -1e9;  // on since long before any practical grid
    }
    if (j.contains("trajectory")) d.trajectory = parse_trajectory(j["trajectory"], where + ".trajectory", base_dir);
    return d;
}

}  // namespace detail

inline ScenarioConfig parse_scenario_json(const json& root, const std::filesystem::path& base_dir = {}) {
    if (!root.is_object()) throw validation_error("config: top level must be an object");
    detail::check_keys(root, "top level",
                       {"detectors", "field", "grid", "seed", "realizations", "mode", "keep_realizations", "analyses",
                        "checks"});
    ScenarioConfig cfg;

    if (!root.contains("detectors") || !root["detectors"].is_array() || root["detectors"].empty())
        detail::cfg_fail("detectors", "need a non-empty array");
    for (std::size_t i = 0; i < root["detectors"].size(); ++i)
        cfg.detectors.push_back(
            detail::parse_detector(root["detectors"][i], "detectors[" + std::to_string(i) + "]", base_dir));

    if (root.contains("field")) {
        const json& f = root["field"];
        detail::check_keys(f, "field", {"lambda_ir", "lambda_uv", "beta"});
        cfg.field.lambda_ir = detail::num_at(f, "field", "lambda_ir", 1e-3);
        cfg.field.lambda_uv = detail::num_at(f, "field", "lambda_uv", 50.0);
        if (f.contains("beta")) {
            if (f["beta"].is_string() && f["beta"].get<std::string>() == "inf")
                cfg.field.beta = std::numeric_limits<double>::infinity();
            else if (f["beta"].is_number())
                cfg.field.beta = f["beta"].get<double>();
            else
                detail::cfg_fail("field.beta", "must be a positive number or \"inf\"");
        }
        cfg.field.validate();
    }

    if (!root.contains("grid")) detail::cfg_fail("grid", "required");
    {
        const json& g = root["grid"];
        detail::check_keys(g, "grid", {"tau_start", "tau_end", "n_steps"});
        cfg.grid.tau_start = detail::num_at(g, "grid", "tau_start", 0.0);
        cfg.grid.tau_end = detail::num_at(g, "grid", "tau_end", 1.0);
        if (!g.contains("n_steps") || !g["n_steps"].is_number_unsigned())
            detail::cfg_fail("grid.n_steps", "must be a positive integer");
        cfg.grid.n_steps = g["n_steps"].get<std::size_t>();
        cfg.grid.validate();
        if (cfg.grid.dt() * cfg.field.lambda_uv > 0.5 + 1e-12)
            detail::cfg_fail("grid", "dt*lambda_uv = " + fmt_g15(cfg.grid.dt() * cfg.field.lambda_uv) +
                                         " violates dt*Lambda <= 0.5");
    }

    if (root.contains("seed")) {
        if (!root["seed"].is_number_unsigned()) detail::cfg_fail("seed", "must be an unsigned integer");
        cfg.seed = root["seed"].get<std::uint64_t>();
    }
    if (root.contains("realizations")) {
        if (!root["realizations"].is_number_unsigned() || root["realizations"].get<std::size_t>() < 1)
            detail::cfg_fail("realizations", "must be a positive integer");
        cfg.realizations = root["realizations"].get<std::size_t>();
    }
    if (root.contains("keep_realizations")) {
        if (!root["keep_realizations"].is_number_unsigned())
            detail::cfg_fail("keep_realizations", "must be a non-negative integer");
        cfg.keep_realizations = root["keep_realizations"].get<std::size_t>();
    }
    if (root.contains("mode")) {
        std::string m = root["mode"].get<std::string>();
        if (m == "local")
            cfg.mode = IntegratorMode::Local;
        else if (m == "memory")
            cfg.mode = IntegratorMode::Memory;
        else
            detail::cfg_fail("mode", "must be 'local' or 'memory'");
    }

    if (root.contains("analyses")) {
        if (!root["analyses"].is_array()) detail::cfg_fail("analyses", "must be an array");
        static const std::vector<std::string> known = {"equilibrium", "fdr", "noise_psd", "unruh_fit",
                                                       "correlation_propagation"};
        for (const auto& a : root["analyses"]) {
            AnalysisSpec spec;
            if (a.is_string()) {
                spec.name = a.get<std::string>();
            } else if (a.is_object()) {
                detail::check_keys(a, "analyses[]", {"name", "detector", "pair"});
                spec.name = a.value("name", "");
                spec.detector = a.value("detector", 0);
                if (a.contains("pair")) {
                    if (!a["pair"].is_array() || a["pair"].size() != 2)
                        detail::cfg_fail("analyses[].pair", "must be [receiver, source]");
                    spec.detector = a["pair"][0].get<std::size_t>();
                    spec.pair_source = a["pair"][1].get<std::size_t>();
                }
            } else {
                detail::cfg_fail("analyses[]", "entries must be names or objects");
            }
            if (std::find(known.begin(), known.end(), spec.name) == known.end())
                detail::cfg_fail("analyses[]", "unknown analysis '" + spec.name + "'");
            if (spec.detector >= cfg.detectors.size() || spec.pair_source >= cfg.detectors.size())
                detail::cfg_fail("analyses[]", "detector index out of range in '" + spec.name + "'");
            cfg.analyses.push_back(spec);
        }
    }

    if (root.contains("checks")) {
        const json& c = root["checks"];
        detail::check_keys(c, "checks",
                           {"fdr_max", "corrprop_max", "unruh_expected", "unruh_rtol", "varq_fdr_rtol",
                            "horizon_identity"});
        auto opt = [&](const char* k) -> std::optional<double> {
            if (!c.contains(k)) return std::nullopt;
            return c[k].get<double>();
        };
        cfg.checks.fdr_max = opt("fdr_max");
        cfg.checks.corrprop_max = opt("corrprop_max");
        cfg.checks.unruh_expected = opt("unruh_expected");
        cfg.checks.unruh_rtol = opt("unruh_rtol");
        cfg.checks.varq_fdr_rtol = opt("varq_fdr_rtol");
        cfg.checks.horizon_identity = c.value("horizon_identity", false);
    }

    for (const auto& d : cfg.detectors) d.validate();
    return cfg;
}

inline json ScenarioConfig::echo() const {
    json j;
    for (std::size_t i = 0; i < detectors.size(); ++i) {
        const auto& d = detectors[i];
        json jd;
        jd["e"] = d.e;
        jd["omega"] = d.omega;
        jd["backreaction"] = d.backreaction_enabled;
        jd["switch"] = {{"type", to_string(d.sw.type)}, {"tau_on", d.sw.tau_on}, {"width", d.sw.width}};
        jd["trajectory"] = detail::trajectory_echo(d.trajectory);
        j["detectors"].push_back(jd);
    }
    j["field"]["lambda_ir"] = field.lambda_ir;
    j["field"]["lambda_uv"] = field.lambda_uv;
    if (field.is_vacuum())
        j["field"]["beta"] = "inf";
    else
        j["field"]["beta"] = field.beta;
    j["grid"] = {{"tau_start", grid.tau_start}, {"tau_end", grid.tau_end}, {"n_steps", grid.n_steps}};
    j["seed"] = seed;
    j["realizations"] = realizations;
    j["keep_realizations"] = keep_realizations;
    j["mode"] = to_string(mode);
    j["analyses"] = json::array();
    for (const auto& a : analyses) {
        json ja;
        ja["name"] = a.name;
        ja["detector"] = a.detector;
        if (a.name == "correlation_propagation") ja["pair"] = {a.detector, a.pair_source};
        j["analyses"].push_back(ja);
    }
    json jc = json::object();
    if (checks.fdr_max) jc["fdr_max"] = *checks.fdr_max;
    if (checks.corrprop_max) jc["corrprop_max"] = *checks.corrprop_max;
    if (checks.unruh_expected) jc["unruh_expected"] = *checks.unruh_expected;
    if (checks.unruh_rtol) jc["unruh_rtol"] = *checks.unruh_rtol;
    if (checks.varq_fdr_rtol) jc["varq_fdr_rtol"] = *checks.varq_fdr_rtol;
    if (checks.horizon_identity) jc["horizon_identity"] = true;
    j["checks"] = jc;
    return j;
}

/// Loads and validates a scenario file. Parse errors report the byte offset;
/// validation errors name the violated field.
inline ScenarioConfig load_config(const std::filesystem::path& path) {
    json root;
    try {
        root = json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw validation_error("config: parse error in " + path.string() + ": " + e.what());
    }
    return parse_scenario_json(root, path.parent_path());
}

// ---------------------------------------------------------------------------
// Bundled presets: the four standard scenarios.
//   a) one inertial detector in the vacuum
//   b) one uniformly accelerated detector (Unruh temperature readout)
//   c) two inertial detectors coupled through the field
//   d) accelerated detector plus a probe switched on beyond its horizon
// ---------------------------------------------------------------------------

inline const std::map<std::string, std::string>& scenario_presets() {
    static const std::map<std::string, std::string> presets = {
        {"scenario_a", R"json({
  "detectors": [
    {"e": 1.0, "omega": 1.0,
     "switch": {"type": "ramp", "tau_on": 0.0, "width": 1.0},
     "trajectory": {"kind": "inertial", "v0": 0.0, "x0": 0.0}}
  ],
  "grid": {"tau_start": 0.0, "tau_end": 40.0, "n_steps": 4000},
  "seed": 424242,
  "realizations": 200,
  "mode": "local",
  "analyses": [
    {"name": "equilibrium", "detector": 0},
    {"name": "fdr", "detector": 0},
    {"name": "noise_psd", "detector": 0}
  ],
  "checks": {"fdr_max": 0.02, "varq_fdr_rtol": 0.2}
})json"},
        {"scenario_b", R"json({
  "detectors": [
    {"e": 1.0, "omega": 1.0,
     "switch": {"type": "step", "tau_on": -1000000000.0},
     "trajectory": {"kind": "uniformly_accelerated", "a": 6.283185307179586}}
  ],
  "field": {"lambda_ir": 1e-6, "lambda_uv": 50.0},
  "grid": {"tau_start": -2.0, "tau_end": 2.0, "n_steps": 400},
  "seed": 7,
  "realizations": 16,
  "mode": "local",
  "analyses": [{"name": "unruh_fit", "detector": 0}],
  "checks": {"unruh_expected": 1.0, "unruh_rtol": 0.02}
})json"},
        {"scenario_c", R"json({
  "detectors": [
    {"e": 1.0, "omega": 1.0,
     "switch": {"type": "ramp", "tau_on": 0.0, "width": 1.0},
     "trajectory": {"kind": "inertial", "v0": 0.0, "x0": 0.0}},
    {"e": 1.0, "omega": 1.0,
     "switch": {"type": "ramp", "tau_on": 0.0, "width": 1.0},
     "trajectory": {"kind": "inertial", "v0": 0.0, "x0": 1.0}}
  ],
  "field": {"lambda_ir": 1e-3, "lambda_uv": 25.0},
  "grid": {"tau_start": 0.0, "tau_end": 30.0, "n_steps": 1500},
  "seed": 1234,
  "realizations": 80,
  "mode": "local",
  "analyses": [
    {"name": "equilibrium", "detector": 0},
    {"name": "correlation_propagation", "pair": [0, 1]}
  ],
  "checks": {"corrprop_max": 0.01}
})json"},
        {"scenario_d", R"json({
  "detectors": [
    {"e": 1.0, "omega": 1.0,
     "switch": {"type": "step", "tau_on": -1000000000.0},
     "trajectory": {"kind": "uniformly_accelerated", "a": 1.0}},
    {"e": 0.7, "omega": 1.2,
     "switch": {"type": "step", "tau_on": 1.6},
     "trajectory": {"kind": "static", "x0": 1.0}}
  ],
  "field": {"lambda_ir": 1e-3, "lambda_uv": 25.0},
  "grid": {"tau_start": 0.0, "tau_end": 8.0, "n_steps": 400},
  "seed": 99,
  "realizations": 48,
  "mode": "local",
  "analyses": [{"name": "correlation_propagation", "pair": [0, 1]}],
  "checks": {"horizon_identity": true}
})json"}};
    return presets;
}

/// Resolves a preset name or a config path.
inline ScenarioConfig resolve_scenario(const std::string& name_or_path) {
    const auto& presets = scenario_presets();
    if (auto it = presets.find(name_or_path); it != presets.end())
        return parse_scenario_json(json::parse(it->second));
    return load_config(name_or_path);
}

}  // namespace wl
