/*
   Copyright 2026 The evacsim Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "evac/bec.hpp"
#include "evac/fixtures.hpp"
#include "evac/model.hpp"
#include "evac/sim.hpp"

namespace evac {

using Json = nlohmann::ordered_json;

inline constexpr int kScenarioVersion = 1;

namespace detail {

inline const Json& req(const Json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) throw ConfigError(where + ": missing field '" + key + "'");
    return j.at(key);
}

/// Accepts a number, or a string holding a decimal or "p/q".
inline double parse_prob(const Json& j, const std::string& where) {
    if (j.is_number()) return j.get<double>();
    if (!j.is_string()) throw ConfigError(where + ": probability must be a number or string");
    const std::string s = j.get<std::string>();
    try {
        const auto slash = s.find('/');
        std::size_t used = 0;
        if (slash == std::string::npos) {
            const double v = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        }
        const std::string a = s.substr(0, slash), b = s.substr(slash + 1);
        const double num = std::stod(a, &used);
        if (used != a.size()) throw std::invalid_argument(s);
        const double den = std::stod(b, &used);
        if (used != b.size() || den == 0.0) throw std::invalid_argument(s);
        return num / den;
    } catch (const std::logic_error&) {
        throw ConfigError(where + ": cannot parse probability '" + s + "'");
    }
}

inline std::vector<int> int_vector(const Json& j, std::size_t n, const std::string& where) {
    if (!j.is_array() || j.size() != n)
        throw ConfigError(where + ": expected an array of " + std::to_string(n) + " integers");
    std::vector<int> v;
    for (const auto& x : j) {
        if (!x.is_number_integer()) throw ConfigError(where + ": entries must be integers");
        v.push_back(x.get<int>());
    }
    return v;
}

template <class F>
auto wrap(const std::string& where, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const Json::exception& e) {
        throw ConfigError(where + ": " + e.what());
    } catch (const PreconditionError& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

}  // namespace detail

/// Builds a SystemSpec from its JSON form. The result is not validated; call
/// validate_spec to get diagnostics.
inline SystemSpec spec_from_json(const Json& j) {
    return detail::wrap("system", [&] {
        const std::string w = "system";
        const int version = detail::req(j, "spec_version", w).get<int>();
        if (version != kScenarioVersion)
            throw ConfigError("system: unsupported spec_version " + std::to_string(version));
        const auto n = detail::req(j, "classes", w).get<std::size_t>();
        if (n == 0) throw ConfigError("system: classes must be positive");
        SystemBuilder b(j.value("name", std::string("scenario")), n);
        const auto inputs = j.value("inputs", n);
        if (inputs > n) throw ConfigError("system: inputs exceeds classes");
        b.inputs(inputs);
        std::map<std::string, StateId> states;
        for (const auto& s : detail::req(j, "states", w)) {
            const std::string name = s.is_string() ? s.get<std::string>() : detail::req(s, "name", "state").get<std::string>();
            const bool phase = s.is_object() && s.value("phase", false);
            if (states.count(name)) throw ConfigError("system: duplicate state '" + name + "'");
            states[name] = b.state(name, phase);
        }
        auto state_ref = [&](const Json& x, const std::string& where) {
            const std::string name = x.get<std::string>();
            auto it = states.find(name);
            if (it == states.end()) throw ConfigError(where + ": unknown state '" + name + "'");
            return it->second;
        };
        std::map<std::string, ControlId> controls;
        std::map<std::string, std::vector<std::string>> actions;
        for (const auto& c : detail::req(j, "controls", w)) {
            const std::string name = detail::req(c, "name", "control").get<std::string>();
            const auto acts = c.value("actions", std::vector<std::string>{});
            if (controls.count(name)) throw ConfigError("system: duplicate control '" + name + "'");
            controls[name] = b.control(name, acts);
            actions[name] = acts;
        }
        auto control_ref = [&](const Json& x, const std::string& where) {
            const std::string name = x.get<std::string>();
            auto it = controls.find(name);
            if (it == controls.end()) throw ConfigError(where + ": unknown control '" + name + "'");
            return it->second;
        };
        std::map<std::string, OutcomeId> outcomes;
        for (const auto& o : j.value("outcomes", Json::array())) outcomes[o.get<std::string>()] = b.outcome(o.get<std::string>());
        auto outcome_ref = [&](const Json& x, const std::string& where) {
            const std::string name = x.get<std::string>();
            auto it = outcomes.find(name);
            if (it == outcomes.end()) throw ConfigError(where + ": unknown outcome '" + name + "'");
            return it->second;
        };
        std::size_t row_no = 0;
        for (const auto& r : detail::req(j, "kernel", w)) {
            const std::string where = "kernel[" + std::to_string(row_no++) + "]";
            const StateId s = state_ref(detail::req(r, "state", where), where);
            const ControlId g = control_ref(detail::req(r, "control", where), where);
            std::vector<KernelEntry> entries;
            for (const auto& e : detail::req(r, "entries", where)) {
                KernelEntry k;
                k.prob = detail::parse_prob(detail::req(e, "prob", where), where);
                k.outcome = outcome_ref(detail::req(e, "outcome", where), where);
                k.next = state_ref(detail::req(e, "next_state", where), where);
                entries.push_back(k);
            }
            b.transition(s, g, std::move(entries));
        }
        std::size_t eff_no = 0;
        for (const auto& e : j.value("effects", Json::array())) {
            const std::string where = "effects[" + std::to_string(eff_no++) + "]";
            EffectRule rule;
            rule.state = state_ref(detail::req(e, "state", where), where);
            const std::string cname = detail::req(e, "control", where).get<std::string>();
            rule.control = control_ref(Json(cname), where);
            const std::string aname = detail::req(e, "action", where).get<std::string>();
            const auto& acts = actions[cname];
            if (aname == "null") {
                rule.action = kNullAction;
            } else {
                auto it = std::find(acts.begin(), acts.end(), aname);
                if (it == acts.end()) throw ConfigError(where + ": unknown action '" + aname + "'");
                rule.action = static_cast<ActionId>(it - acts.begin() + 1);
            }
            if (e.contains("outcome") && !e.at("outcome").is_null()) rule.outcome = outcome_ref(e.at("outcome"), where);
            rule.take = e.contains("take") ? detail::int_vector(e.at("take"), n, where + ".take") : std::vector<int>(n, 0);
            rule.give = e.contains("give") ? detail::int_vector(e.at("give"), n, where + ".give") : std::vector<int>(n, 0);
            rule.flush = e.value("flush", false);
            if (e.contains("guard")) {
                const auto& gj = e.at("guard");
                rule.guard.min_total = gj.value("min_total", 0L);
                rule.guard.max_total = gj.value("max_total", LONG_MAX);
                rule.guard.zero_classes = gj.value("zero_classes", std::vector<int>{});
                rule.guard.positive_classes = gj.value("positive_classes", std::vector<int>{});
                for (int c : rule.guard.zero_classes)
                    if (c < 0 || static_cast<std::size_t>(c) >= n) throw ConfigError(where + ": guard class out of range");
                for (int c : rule.guard.positive_classes)
                    if (c < 0 || static_cast<std::size_t>(c) >= n) throw ConfigError(where + ": guard class out of range");
            }
            b.effect(std::move(rule));
        }
        if (j.contains("initial_state")) b.initial(state_ref(j.at("initial_state"), "initial_state"));
        return b.build();
    });
}

inline Json spec_to_json(const SystemSpec& spec) {
    Json j;
    j["spec_version"] = kScenarioVersion;
    j["name"] = spec.name();
    j["classes"] = spec.classes();
    j["inputs"] = spec.inputs();
    Json states = Json::array();
    for (StateId s = 0; s < spec.num_states(); ++s) states.push_back({{"name", spec.state_name(s)}, {"phase", spec.is_phase(s)}});
    j["states"] = states;
    j["initial_state"] = spec.state_name(spec.initial_state());
    Json controls = Json::array();
    for (ControlId g = 0; g < spec.num_controls(); ++g) {
        Json acts = Json::array();
        for (ActionId a = 1; a < spec.num_actions(g); ++a) acts.push_back(spec.action_name(g, a));
        controls.push_back({{"name", spec.control_name(g)}, {"actions", acts}});
    }
    j["controls"] = controls;
    Json outcomes = Json::array();
    for (OutcomeId w = 0; w < spec.num_outcomes(); ++w) outcomes.push_back(spec.outcome_name(w));
    j["outcomes"] = outcomes;
    Json kernel = Json::array();
    for (StateId s = 0; s < spec.num_states(); ++s)
        for (ControlId g : spec.controls_of(s)) {
            if (!spec.has_row(s, g)) continue;
            Json entries = Json::array();
            for (const auto& e : spec.kernel_row(s, g))
                entries.push_back({{"prob", e.prob}, {"outcome", spec.outcome_name(e.outcome)},
                                   {"next_state", spec.state_name(e.next)}});
            kernel.push_back({{"state", spec.state_name(s)}, {"control", spec.control_name(g)}, {"entries", entries}});
        }
    j["kernel"] = kernel;
    Json effects = Json::array();
    for (const auto& r : spec.effects()) {
        Json e;
        e["state"] = spec.state_name(r.state);
        e["control"] = spec.control_name(r.control);
        e["action"] = spec.action_name(r.control, r.action);
        if (r.outcome) e["outcome"] = spec.outcome_name(*r.outcome);
        e["take"] = r.take;
        e["give"] = r.give;
        if (r.flush) e["flush"] = true;
        const auto& g = r.guard;
        if (g.min_total != 0 || g.max_total != LONG_MAX || !g.zero_classes.empty() || !g.positive_classes.empty()) {
            Json gj;
            if (g.min_total != 0) gj["min_total"] = g.min_total;
            if (g.max_total != LONG_MAX) gj["max_total"] = g.max_total;
            if (!g.zero_classes.empty()) gj["zero_classes"] = g.zero_classes;
            if (!g.positive_classes.empty()) gj["positive_classes"] = g.positive_classes;
            e["guard"] = gj;
        }
        effects.push_back(e);
    }
    j["effects"] = effects;
    return j;
}

/// {"n", "per_user_eps" | "pattern_pmf", "L", "coded"}.
inline BecSpec bec_from_json(const Json& j) {
    return detail::wrap("bec", [&] {
        const auto n = detail::req(j, "n", "bec").get<std::size_t>();
        const int L = j.value("L", 1024);
        if (j.contains("per_user_eps")) {
            const auto eps = j.at("per_user_eps").get<std::vector<double>>();
            if (eps.size() != n) throw ConfigError("bec: per_user_eps needs n entries");
            return make_independent_bec(eps, L);
        }
        BecSpec b;
        b.n = n;
        b.L = L;
        b.pattern_pmf.clear();
        for (const auto& p : detail::req(j, "pattern_pmf", "bec")) b.pattern_pmf.push_back(detail::parse_prob(p, "bec"));
        b.validate();
        return b;
    });
}

/// {"classes": [{"bernoulli": x} | {"pmf": [...]} | {"script": [...]}], "initial": [...]}
inline ArrivalProcess arrivals_from_json(const Json& j, std::size_t inputs) {
    return detail::wrap("arrivals", [&] {
        const auto& cls = detail::req(j, "classes", "arrivals");
        if (!cls.is_array() || cls.size() != inputs)
            throw ConfigError("arrivals: expected " + std::to_string(inputs) + " class entries");
        std::vector<ClassArrivals> c(inputs);
        std::vector<std::pair<std::size_t, std::vector<int>>> scripts;
        for (std::size_t i = 0; i < inputs; ++i) {
            const auto& x = cls[i];
            if (x.contains("bernoulli")) {
                const double p = detail::parse_prob(x.at("bernoulli"), "arrivals");
                if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("arrivals: Bernoulli rate must be in [0, 1]");
                c[i].pmf = {1.0 - p, p};
            } else if (x.contains("pmf")) {
                c[i].pmf.clear();
                for (const auto& p : x.at("pmf")) c[i].pmf.push_back(detail::parse_prob(p, "arrivals"));
            } else if (x.contains("script")) {
                scripts.emplace_back(i, x.at("script").get<std::vector<int>>());
            } else if (x.contains("none")) {
                c[i].pmf = {1.0};
            } else {
                throw ConfigError("arrivals: class " + std::to_string(i) + " needs bernoulli, pmf, script or none");
            }
        }
        ArrivalProcess a(std::move(c));
        for (auto& [i, s] : scripts) a.script(i, std::move(s));
        if (j.contains("initial")) a.with_initial(CountVector(detail::int_vector(j.at("initial"), inputs, "arrivals.initial")));
        return a;
    });
}

/// A system (inline or from the fixture registry) plus optional run settings.
struct Scenario {
    std::string name;
    SystemSpec spec;
    std::optional<Fixture> fixture;
    std::optional<BecSpec> bec;
    bool coded = false;
    std::optional<CountVector> kmax;
    std::optional<ArrivalProcess> arrivals;
    std::optional<long> horizon;
    std::string policy = "epoch";
};

inline Scenario scenario_from_json(const Json& j) {
    Scenario sc;
    sc.name = j.value("name", std::string("scenario"));
    int sources = 0;
    if (j.contains("fixture")) {
        ++sources;
        const auto params = j.value("params", std::map<std::string, double>{});
        try {
            sc.fixture = build_fixture(j.at("fixture").get<std::string>(), params);
        } catch (const PreconditionError& e) {
            throw ConfigError(std::string("fixture: ") + e.what());
        }
        sc.spec = sc.fixture->spec;
        sc.kmax = sc.fixture->default_kmax;
    }
    if (j.contains("system")) {
        ++sources;
        sc.spec = spec_from_json(j.at("system"));
    }
    if (j.contains("bec")) {
        ++sources;
        sc.bec = bec_from_json(j.at("bec"));
        sc.coded = j.at("bec").value("coded", false);
        sc.spec = sc.coded ? make_xor2_spec(*sc.bec) : make_bec_spec(*sc.bec);
    }
    if (sources != 1) throw ConfigError("scenario needs exactly one of 'fixture', 'system', 'bec'");
    if (j.contains("kmax")) sc.kmax = CountVector(detail::int_vector(j.at("kmax"), sc.spec.classes(), "kmax"));
    if (j.contains("arrivals")) sc.arrivals = arrivals_from_json(j.at("arrivals"), sc.spec.inputs());
    if (j.contains("horizon")) sc.horizon = j.at("horizon").get<long>();
    sc.policy = j.value("policy", std::string("epoch"));
    return sc;
}

inline Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        throw ConfigError("'" + path + "': " + e.what());
    }
}

inline Scenario load_scenario(const std::string& path) { return scenario_from_json(read_json_file(path)); }

inline void save_spec(const std::string& path, const SystemSpec& spec) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << spec_to_json(spec).dump(2) << '\n';
}

}  // namespace evac
