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

#include <cmath>
#include <string>

#include "evac/bec.hpp"
#include "evac/fixtures.hpp"
#include "evac/io.hpp"
#include "evac/limit.hpp"
#include "evac/scenario_io.hpp"
#include "evac/sim.hpp"
#include "evac/solver.hpp"

// JSON views of results. Non-finite numbers are written as strings.

namespace evac {

inline Json num(double x) {
    if (std::isfinite(x)) return x;
    return fmt_num(x);
}

inline Json to_json(const CountVector& k) { return k.values(); }

inline Json to_json(const RateVector& r) {
    Json a = Json::array();
    for (double x : r.values()) a.push_back(num(x));
    return a;
}

inline Json to_json(const ThatEstimate& e) {
    Json s = Json::array(), t = Json::array();
    for (double x : e.samples) s.push_back(num(x));
    for (double x : e.schedule) t.push_back(num(x));
    return {{"r", to_json(e.r)}, {"schedule", t}, {"samples", s}, {"estimate", num(e.estimate)},
            {"error_bound", num(e.error_bound)}, {"D", num(e.D)}, {"heuristic_bound", true}};
}

inline Json to_json(const MembershipResult& m) {
    return {{"point", to_json(m.point)}, {"estimate", num(m.estimate)}, {"bound", num(m.bound)},
            {"verdict", to_string(m.verdict)}};
}

inline Json to_json(const RegionReport& r) {
    Json a = Json::array();
    for (const auto& d : r.directions)
        a.push_back({{"direction", to_json(d.direction)}, {"estimate", num(d.estimate)},
                     {"error_bound", num(d.error_bound)}, {"rho_star", num(d.rho_star)},
                     {"rho_error", num(d.rho_error)}, {"unbounded", d.unbounded}});
    return {{"directions", a}, {"heuristic_bounds", r.heuristic_bounds}};
}

inline Json to_json(const StabilityVerdict& v) {
    Json q = Json::array(), p = Json::array();
    for (double x : v.q_grid) q.push_back(num(x));
    for (double x : v.tail_probs) p.push_back(num(x));
    return {{"verdict", to_string(v.verdict)}, {"qt_slope", num(v.qt_slope)}, {"r2", num(v.r2)},
            {"tail_prob", num(v.tail_prob)}, {"q_grid", q}, {"tail_probs", p}};
}

inline Json to_json(const DriftFit& d) {
    Json bins = Json::array();
    for (const auto& b : d.bins)
        bins.push_back({{"lo", b.lo}, {"hi", b.hi}, {"count", b.count}, {"mean_next", num(b.mean_next)}});
    return {{"slope", num(d.slope)}, {"U_hat", num(d.U_hat)}, {"delta_hat", num(d.delta_hat)},
            {"pairs", d.pairs}, {"conclusive", d.conclusive}, {"bins", bins}};
}

inline Json to_json(const SystemSpec& spec, const CycleReport& c) {
    return {{"anchor_T", c.anchor_T}, {"anchor_S", spec.state_name(c.anchor_S)}, {"visits", c.visits},
            {"cycles", c.cycles.size()}, {"mean", num(c.mean)}, {"first_half_mean", num(c.first_half_mean)},
            {"second_half_mean", num(c.second_half_mean)}, {"combined_se", num(c.combined_se)},
            {"halves_agree", c.halves_agree}, {"conclusive", c.conclusive}};
}

inline Json to_json(const QleEstimate& q) {
    return {{"l0", q.l0}, {"l", q.l}, {"r", to_json(q.r)}, {"delta", num(q.delta)}, {"reps", q.reps},
            {"batch", to_json(q.batch)}, {"batches", q.batches}, {"that", num(q.that)}, {"q_hat", num(q.q_hat)},
            {"ci_halfwidth", num(q.ci_halfwidth)}, {"no_guarantee", q.no_guarantee}};
}

inline Json to_json(const CapacityReport& r) {
    Json a = Json::array();
    for (const auto& d : r.directions)
        a.push_back({{"direction", to_json(d.direction)}, {"radius", num(d.radius)},
                     {"radius_bound", num(d.radius_bound)}, {"qle_rate", num(d.qle_rate)},
                     {"stable_rate", num(d.stable_rate)}, {"spread", num(d.spread)}, {"agree", d.agree},
                     {"mean_bootstrap_charge", num(d.mean_bootstrap_charge)},
                     {"buffer_ordering_holds", d.buffer_ordering_holds}});
    return {{"tolerance", num(r.tolerance)}, {"directions", a}, {"all_agree", r.all_agree()}};
}

inline Json fixtures_json() {
    Json a = Json::array();
    for (const auto& n : fixture_names()) {
        const Fixture f = build_fixture(n);
        Json p = Json::object();
        for (const auto& [k, v] : f.params) p[k] = v;
        a.push_back({{"name", f.name}, {"admissible", f.admissible}, {"has_oracle", f.has_oracle()},
                     {"classes", f.spec.classes()}, {"states", f.spec.num_states()}, {"params", p},
                     {"default_kmax", to_json(f.default_kmax)}, {"notes", f.notes}});
    }
    return a;
}

}  // namespace evac
