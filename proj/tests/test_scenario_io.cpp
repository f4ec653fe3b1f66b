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

#include <gtest/gtest.h>

#include <filesystem>

#include "evac/scenario_io.hpp"
#include "evac/solver.hpp"

using namespace evac;

namespace {

Json queue_json() {
    return Json::parse(R"({
      "spec_version": 1, "name": "q", "classes": 1,
      "states": [{"name": "s0"}],
      "controls": [{"name": "serve", "actions": ["send"]}],
      "outcomes": ["ok", "erased"],
      "kernel": [{"state": "s0", "control": "serve",
                  "entries": [{"prob": "1/2", "outcome": "ok", "next_state": "s0"},
                              {"prob": 0.5, "outcome": "erased", "next_state": "s0"}]}],
      "effects": [{"state": "s0", "control": "serve", "action": "send", "outcome": "ok", "take": [1]}]
    })");
}

// Structural equality; numbers may differ by renormalization rounding.
bool same_json(const Json& a, const Json& b) {
    if (a.is_number() && b.is_number()) return std::abs(a.get<double>() - b.get<double>()) <= 1e-15;
    if (a.type() != b.type() || a.size() != b.size()) return false;
    if (a.is_object()) {
        for (auto it = a.begin(); it != a.end(); ++it)
            if (!b.contains(it.key()) || !same_json(it.value(), b.at(it.key()))) return false;
        return true;
    }
    if (a.is_array()) {
        for (std::size_t i = 0; i < a.size(); ++i)
            if (!same_json(a[i], b[i])) return false;
        return true;
    }
    return a == b;
}

}  // namespace

TEST(SpecJson, LoadsAndSolves) {
    const SystemSpec s = spec_from_json(queue_json());
    EXPECT_TRUE(validate_spec(s).ok());
    const EvacTable t = solve_evac_table(s, CountVector{5});
    EXPECT_NEAR(t.value(CountVector{5}, 0), 10.0, 1e-9);
}

TEST(SpecJson, RoundTripEveryFixture) {
    for (const auto& n : fixture_names()) {
        const Fixture f = build_fixture(n);
        const Json j = spec_to_json(f.spec);
        const SystemSpec back = spec_from_json(j);
        EXPECT_TRUE(same_json(spec_to_json(back), j)) << n;
        EXPECT_TRUE(validate_spec(back).ok()) << n;
    }
}

TEST(SpecJson, RoundTripPreservesValues) {
    const Fixture f = build_fixture("two_server");
    const SystemSpec back = spec_from_json(spec_to_json(f.spec));
    const EvacTable a = solve_evac_table(f.spec, CountVector{6});
    const EvacTable b = solve_evac_table(back, CountVector{6});
    for (int k = 0; k <= 6; ++k)
        for (StateId s = 0; s < f.spec.num_states(); ++s) EXPECT_EQ(a.value(CountVector{k}, s), b.value(CountVector{k}, s));
}

TEST(SpecJson, RowMassDiagnostic) {
    Json j = queue_json();
    j["kernel"][0]["entries"][1]["prob"] = 0.4;
    const SystemSpec s = spec_from_json(j);
    const auto rep = validate_spec(s);
    ASSERT_FALSE(rep.ok());
    EXPECT_NE(rep.to_string().find("row mass"), std::string::npos);
}

TEST(SpecJson, Errors) {
    Json j = queue_json();
    j["spec_version"] = 2;
    EXPECT_THROW(spec_from_json(j), ConfigError);
    j = queue_json();
    j["kernel"][0]["state"] = "nowhere";
    EXPECT_THROW(spec_from_json(j), ConfigError);
    j = queue_json();
    j["kernel"][0]["entries"][0]["prob"] = "1/0";
    EXPECT_THROW(spec_from_json(j), ConfigError);
    j = queue_json();
    j["effects"][0]["take"] = Json::array({1, 0});
    EXPECT_THROW(spec_from_json(j), ConfigError);
    j = queue_json();
    j.erase("states");
    EXPECT_THROW(spec_from_json(j), ConfigError);
}

TEST(Scenario, FixtureReference) {
    const auto sc = scenario_from_json(Json::parse(R"({"fixture": "pairing_aA", "params": {"A": 4}, "kmax": [5, 5]})"));
    ASSERT_TRUE(sc.fixture.has_value());
    EXPECT_EQ(sc.fixture->params.at("A"), 4);
    EXPECT_EQ(*sc.kmax, (CountVector{5, 5}));
}

TEST(Scenario, BecAndArrivals) {
    const auto sc = scenario_from_json(Json::parse(R"({
      "bec": {"n": 2, "per_user_eps": [0.5, 0.5], "coded": true},
      "arrivals": {"classes": [{"bernoulli": 0.2}, {"script": [1, 0]}], "initial": [2, 0]},
      "horizon": 5000
    })"));
    EXPECT_EQ(sc.spec.classes(), 4u);
    EXPECT_TRUE(sc.coded);
    ASSERT_TRUE(sc.arrivals.has_value());
    EXPECT_NEAR(sc.arrivals->rate()[0], 0.2, 1e-15);
    EXPECT_TRUE(sc.arrivals->scripted());
    EXPECT_EQ(*sc.arrivals->initial(), (CountVector{2, 0}));
    EXPECT_EQ(*sc.horizon, 5000);
    const auto pm = scenario_from_json(Json::parse(R"({"bec": {"n": 1, "pattern_pmf": ["3/4", "1/4"]}})"));
    EXPECT_NEAR(pm.bec->marginal_erasure(0), 0.25, 1e-15);
}

TEST(Scenario, Errors) {
    EXPECT_THROW(scenario_from_json(Json::parse(R"({})")), ConfigError);
    EXPECT_THROW(scenario_from_json(Json::parse(R"({"fixture": "single_queue", "bec": {"n": 1}})")), ConfigError);
    EXPECT_THROW(scenario_from_json(Json::parse(R"({"fixture": "single_queue", "arrivals": {"classes": []}})")),
                 ConfigError);
    EXPECT_THROW(scenario_from_json(Json::parse(R"({"fixture": "single_queue", "params": {"eps": 2}})")), ConfigError);
    EXPECT_THROW(scenario_from_json(Json::parse(R"({"bec": {"n": 1, "pattern_pmf": [0.5, 0.4]}})")), ConfigError);
    EXPECT_THROW(load_scenario("/nonexistent/x.json"), ConfigError);
}

TEST(Scenario, ShippedFilesLoad) {
    const std::filesystem::path dir = EVAC_SCENARIO_DIR;
    std::size_t seen = 0;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (e.path().extension() != ".json") continue;
        ++seen;
        const Scenario sc = load_scenario(e.path().string());
        EXPECT_TRUE(validate_spec(sc.spec).ok()) << e.path();
    }
    EXPECT_GE(seen, 4u);
}
