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

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "evac/model.hpp"
#include "evac/policy.hpp"
#include "evac/solver.hpp"

namespace evac {

using ValueOracle = std::function<double(const CountVector&, StateId)>;

struct Fixture {
    std::string name;
    SystemSpec spec;
    bool admissible = true;
    std::string notes;
    std::map<std::string, double> params;
    CountVector default_kmax;
    /// Closed-form values on non-phase states, k != 0. Empty when none is known.
    ValueOracle oracle;
    /// Counts where the closed form is claimed (default: everywhere).
    std::function<bool(const CountVector&)> oracle_domain;

    bool has_oracle() const { return static_cast<bool>(oracle); }
};

namespace detail {

inline double param(const std::map<std::string, double>& p, const std::string& key) {
    auto it = p.find(key);
    if (it == p.end()) throw PreconditionError("missing fixture parameter '" + key + "'");
    return it->second;
}

inline int int_param(const std::map<std::string, double>& p, const std::string& key, int lo) {
    const double v = param(p, key);
    if (v != std::floor(v) || v < lo)
        throw PreconditionError("fixture parameter '" + key + "' must be an integer >= " + std::to_string(lo));
    return static_cast<int>(v);
}

inline EffectRule take_rule(StateId s, ControlId g, ActionId a, std::vector<int> take,
                            std::optional<OutcomeId> w = std::nullopt, EffectGuard guard = {}) {
    EffectRule r;
    r.state = s;
    r.control = g;
    r.action = a;
    r.outcome = w;
    r.take = std::move(take);
    r.guard = std::move(guard);
    return r;
}

// Service lasting `slots` slots that starts in `home` with control `start`
// and delivers `take` at the end of the last slot, returning to `home`.
// Intermediate slots run through phase states driven by `cont`.
inline void service_chain(SystemBuilder& b, const std::string& prefix, StateId home, ControlId start,
                          ControlId cont, int slots, const std::vector<int>& take, OutcomeId done,
                          EffectGuard guard = {}) {
    if (slots <= 1) {
        b.transition(home, start, home, done);
        b.effect(take_rule(home, start, 1, take, std::nullopt, guard));
        return;
    }
    std::vector<StateId> ph;
    for (int j = 1; j < slots; ++j) ph.push_back(b.phase_state(prefix + "_" + std::to_string(j)));
    b.transition(home, start, ph.front(), done);
    for (std::size_t j = 0; j + 1 < ph.size(); ++j) b.transition(ph[j], cont, ph[j + 1], done);
    b.transition(ph.back(), cont, home, done);
    b.effect(take_rule(ph.back(), cont, 1, take, std::nullopt, guard));
}

inline std::map<std::string, double> merge(std::map<std::string, double> defaults,
                                           const std::map<std::string, double>& overrides) {
    for (const auto& [k, v] : overrides) {
        if (!defaults.count(k)) throw PreconditionError("unknown fixture parameter '" + k + "'");
        defaults[k] = v;
    }
    return defaults;
}

}  // namespace detail

inline Fixture make_single_queue(const std::map<std::string, double>& overrides = {}) {
    Fixture f;
    f.name = "single_queue";
    f.params = detail::merge({{"eps", 0.5}}, overrides);
    const double eps = detail::param(f.params, "eps");
    if (!(eps >= 0.0 && eps < 1.0)) throw PreconditionError("eps must be in [0, 1)");
    SystemBuilder b(f.name, 1);
    const StateId s0 = b.state("s0");
    const ControlId serve = b.control("serve", {"send"});
    const OutcomeId ok = b.outcome("ok"), erased = b.outcome("erased");
    b.transition(s0, serve, {{1.0 - eps, ok, s0}, {eps, erased, s0}});
    b.effect(detail::take_rule(s0, serve, 1, {1}, ok));
    f.spec = b.build();
    f.default_kmax = CountVector{12};
    f.notes = "geometric server; each attempt succeeds with probability 1 - eps";
    f.oracle = [eps](const CountVector& k, StateId) { return k[0] / (1.0 - eps); };
    return f;
}

inline Fixture make_two_link(const std::map<std::string, double>& overrides = {}) {
    Fixture f;
    f.name = "two_link";
    f.params = detail::merge({{"blocked_slots", 9}, {"erasure", 0.5}}, overrides);
    const int blocked = detail::int_param(f.params, "blocked_slots", 1);
    const double eps = detail::param(f.params, "erasure");
    SystemBuilder b(f.name, 1);
    std::vector<StateId> st;
    for (int i = 0; i <= blocked; ++i) st.push_back(b.state(std::to_string(i)));
    const ControlId g0 = b.control("g0"), g1 = b.control("g1", {"transmit"}), g2 = b.control("g2", {"transmit"});
    const OutcomeId inactive = b.outcome("inactive"), ok = b.outcome("ok"), erased = b.outcome("erased");
    b.transition(st[0], g0, st[0], inactive);
    b.transition(st[0], g1, st[static_cast<std::size_t>(blocked)], ok);
    b.transition(st[0], g2, {{1.0 - eps, ok, st[0]}, {eps, erased, st[0]}});
    for (int i = 1; i <= blocked; ++i)
        b.transition(st[static_cast<std::size_t>(i)], g0, st[static_cast<std::size_t>(i - 1)], inactive);
    b.effect(detail::take_rule(st[0], g1, 1, {1}, ok));
    b.effect(detail::take_rule(st[0], g2, 1, {1}, ok));
    f.spec = b.build();
    f.default_kmax = CountVector{12};
    f.notes = "link 1 delivers in one slot then blocks both links; link 2 is an erasure link";
    return f;
}

inline Fixture make_two_channel(const std::map<std::string, double>& overrides = {}) {
    Fixture f;
    f.name = "two_channel";
    f.params = detail::merge({{"stay", 0.8}, {"rate_l_lo", 0.3}, {"rate_l_hi", 0.6}, {"rate_h_lo", 0.7},
                              {"rate_h_hi", 0.9}},
                             overrides);
    const double stay = detail::param(f.params, "stay");
    SystemBuilder b(f.name, 2);
    const char* lv = "lh";
    std::vector<StateId> st;
    for (int c1 = 0; c1 < 2; ++c1)
        for (int c2 = 0; c2 < 2; ++c2)
            st.push_back(b.state(std::string("(") + lv[c1] + "," + lv[c2] + ")"));
    const OutcomeId ok = b.outcome("ok"), fail = b.outcome("fail");
    const ControlId idle = b.control("idle");
    auto next_dist = [&](std::size_t s) {
        std::vector<std::pair<StateId, double>> d;
        const int c1 = static_cast<int>(s / 2), c2 = static_cast<int>(s % 2);
        for (int n1 = 0; n1 < 2; ++n1)
            for (int n2 = 0; n2 < 2; ++n2) {
                const double p = (n1 == c1 ? stay : 1 - stay) * (n2 == c2 ? stay : 1 - stay);
                d.push_back({st[static_cast<std::size_t>(n1 * 2 + n2)], p});
            }
        return d;
    };
    for (std::size_t s = 0; s < st.size(); ++s) {
        std::vector<KernelEntry> row;
        for (auto [n, p] : next_dist(s)) row.push_back({p, fail, n});
        b.transition(st[s], idle, row);
    }
    const std::string pw[2] = {"lo", "hi"};
    for (int ch = 0; ch < 2; ++ch)
        for (int p = 0; p < 2; ++p) {
            const ControlId g = b.control("ch" + std::to_string(ch + 1) + "_" + pw[p], {"a_A", "a_B"});
            for (std::size_t s = 0; s < st.size(); ++s) {
                const int level = ch == 0 ? static_cast<int>(s / 2) : static_cast<int>(s % 2);
                const double rate =
                    detail::param(f.params, std::string("rate_") + lv[level] + "_" + pw[p]);
                std::vector<KernelEntry> row;
                for (auto [n, q] : next_dist(s)) {
                    row.push_back({q * rate, ok, n});
                    row.push_back({q * (1 - rate), fail, n});
                }
                b.transition(st[s], g, row);
                b.effect(detail::take_rule(st[s], g, 1, {1, 0}, ok));
                b.effect(detail::take_rule(st[s], g, 2, {0, 1}, ok));
            }
        }
    f.spec = b.build();
    f.default_kmax = CountVector{6, 6};
    f.notes = "two Markov channels, power level chooses per-slot success probability; no closed form";
    return f;
}

inline Fixture make_aloha(int variant, const std::map<std::string, double>& overrides = {}) {
    Fixture f;
    f.name = "aloha_pi" + std::to_string(variant);
    f.params = detail::merge(variant == 3 ? std::map<std::string, double>{{"commit_after", 3}}
                                          : std::map<std::string, double>{},
                             overrides);
    SystemBuilder b(f.name, 2);
    const StateId s0 = b.state("s0");
    const ControlId idle = b.control("idle");
    const ControlId tx1 = b.control("tx1", {"send"}), tx2 = b.control("tx2", {"send"});
    const OutcomeId none = b.outcome("none"), ok = b.outcome("ok"), col = b.outcome("collision");
    b.transition(s0, idle, s0, none);
    b.transition(s0, tx1, s0, ok);
    b.transition(s0, tx2, s0, ok);
    if (variant == 1) {
        const ControlId both = b.control("tx_both", {"send"});
        b.transition(s0, both, s0, col);
        b.effect(detail::take_rule(s0, tx1, 1, {1, 0}));
        b.effect(detail::take_rule(s0, tx2, 1, {0, 1}));
        f.admissible = true;
        f.notes = "free choice of transmitter; simultaneous activation collides and delivers nothing";
        f.oracle = [](const CountVector& k, StateId) { return static_cast<double>(k[0] + k[1]); };
    } else {
        EffectGuard only1, only2, both_busy;
        only1.zero_classes = {1};
        only2.zero_classes = {0};
        both_busy.positive_classes = {0, 1};
        b.effect(detail::take_rule(s0, tx1, 1, {1, 0}, std::nullopt, only1));
        b.effect(detail::take_rule(s0, tx2, 1, {0, 1}, std::nullopt, only2));
        const OutcomeId o1 = b.outcome("only1"), o2 = b.outcome("only2");
        for (int q : {25, 50, 75}) {
            const double p = q / 100.0;
            const ControlId g = b.control("random_q" + std::to_string(q), {"send"});
            b.transition(s0, g,
                         {{(1 - p) * (1 - p), none, s0}, {p * (1 - p), o1, s0}, {p * (1 - p), o2, s0}, {p * p, col, s0}});
            b.effect(detail::take_rule(s0, g, 1, {1, 0}, o1, both_busy));
            b.effect(detail::take_rule(s0, g, 1, {0, 1}, o2, both_busy));
        }
        f.admissible = false;
        f.notes = variant == 2 ? "with both queues busy only a common random access probability may be used"
                               : "as aloha_pi2, and the access probability freezes after commit_after choices";
    }
    f.spec = b.build();
    f.default_kmax = CountVector{8, 8};
    return f;
}

inline Fixture make_pairing(const std::map<std::string, double>& overrides = {}) {
    Fixture f;
    f.name = "pairing_aA";
    f.params = detail::merge({{"a", 1}, {"A", 3}}, overrides);
    const int a = detail::int_param(f.params, "a", 1), A = detail::int_param(f.params, "A", 1);
    if (A <= a) throw PreconditionError("pairing_aA requires A > a");
    SystemBuilder b(f.name, 2);
    const StateId s0 = b.state("s0");
    const ControlId pair = b.control("pair", {"send"}), s1 = b.control("single_1", {"send"}),
                    s2 = b.control("single_2", {"send"}), idle = b.control("idle");
    const ControlId cont = b.control("continue", {"send"});
    const OutcomeId done = b.outcome("done");
    detail::service_chain(b, "pair", s0, pair, cont, a, {1, 1}, done);
    detail::service_chain(b, "single_1", s0, s1, cont, A, {1, 0}, done);
    detail::service_chain(b, "single_2", s0, s2, cont, A, {0, 1}, done);
    b.transition(s0, idle, s0, done);
    f.spec = b.build();
    f.default_kmax = CountVector{8, 8};
    f.notes = "pairs depart after a slots, singles after A slots; defaults a=1, A=3";
    f.oracle = [a, A](const CountVector& k, StateId) {
        return static_cast<double>(a * std::min(k[0], k[1]) + A * std::abs(k[0] - k[1]));
    };
    return f;
}

inline Fixture make_necessity_3slot(bool restricted, const std::map<std::string, double>& overrides = {}) {
    Fixture f;
    f.name = restricted ? "necessity_3slot_restricted" : "necessity_3slot";
    f.params = detail::merge({{"pair_slots", 3}}, overrides);
    const int P = detail::int_param(f.params, "pair_slots", 1);
    SystemBuilder b(f.name, 2);
    const StateId s0 = b.state("s0");
    const ControlId idle = b.control("idle");
    const ControlId pair = b.control("pair", {"send"});
    const ControlId a1 = b.control("single_1", {"send"}), a2 = b.control("single_2", {"send"});
    const ControlId cont = b.control("continue", {"send"});
    const OutcomeId done = b.outcome("done");
    b.transition(s0, idle, s0, done);
    detail::service_chain(b, "pair", s0, pair, cont, P, {1, 1}, done);
    EffectGuard alone1, alone2;
    alone1.zero_classes = {1};
    alone2.zero_classes = {0};
    detail::service_chain(b, "single_1", s0, a1, cont, 1, {1, 0}, done, alone1);
    detail::service_chain(b, "single_2", s0, a2, cont, 1, {0, 1}, done, alone2);
    if (!restricted) {
        const ControlId b1 = b.control("single_1_busy", {"send"}), b2 = b.control("single_2_busy", {"send"});
        detail::service_chain(b, "busy_1", s0, b1, cont, P, {1, 0}, done);
        detail::service_chain(b, "busy_2", s0, b2, cont, P, {0, 1}, done);
    }
    f.spec = b.build();
    f.default_kmax = CountVector{8, 8};
    f.admissible = false;
    f.notes = restricted ? "with both queues busy only pairs may be processed (pair_slots slots)"
                         : "relaxation: a single may also be sent while the other queue is busy, at pair cost";
    f.oracle = [P](const CountVector& k, StateId) {
        return static_cast<double>(P * std::min(k[0], k[1]) + std::abs(k[0] - k[1]));
    };
    return f;
}

inline Fixture make_m_batch(const std::map<std::string, double>& overrides = {}) {
    Fixture f;
    f.name = "m_batch";
    f.params = detail::merge({{"M", 3}, {"kmax", 12}}, overrides);
    const int M = detail::int_param(f.params, "M", 2), kmax = detail::int_param(f.params, "kmax", 1);
    SystemBuilder b(f.name, 1);
    const StateId s0 = b.state("s0");
    const ControlId idle = b.control("idle");
    std::vector<std::string> acts;
    for (int m = 1; m <= 2 * M - 1; ++m) acts.push_back("deliver_" + std::to_string(m));
    const OutcomeId done = b.outcome("done");
    b.transition(s0, idle, s0, done);
    const int lmax = std::max(1, kmax / M);
    for (int l = 1; l <= lmax; ++l) {
        const ControlId start = b.control("batch_" + std::to_string(l), acts);
        ControlId cont = start;
        StateId last = s0;
        if (l == 1) {
            b.transition(s0, start, s0, done);
        } else {
            cont = b.control("batch_" + std::to_string(l) + "_continue", acts);
            std::vector<StateId> ph;
            for (int j = 1; j < l; ++j) ph.push_back(b.phase_state("batch_" + std::to_string(l) + "_" + std::to_string(j)));
            b.transition(s0, start, ph.front(), done);
            for (std::size_t j = 0; j + 1 < ph.size(); ++j) b.transition(ph[j], cont, ph[j + 1], done);
            b.transition(ph.back(), cont, s0, done);
            last = ph.back();
        }
        for (int m = 1; m <= 2 * M - 1; ++m) {
            EffectGuard g;
            if (l == 1) {
                g.min_total = m;
            } else {
                g.min_total = std::max<long>(static_cast<long>(l) * M, m + static_cast<long>(l - 1) * M);
            }
            g.max_total = static_cast<long>(l) * M + M - 1;
            b.effect(detail::take_rule(last, cont, static_cast<ActionId>(m), {m}, std::nullopt, g));
        }
    }
    f.spec = b.build();
    f.default_kmax = CountVector{kmax};
    f.admissible = false;
    f.notes = "with k = lM + v packets, up to M + v packets are sent and take l slots; below M one slot";
    f.oracle = [M](const CountVector& k, StateId) {
        const int l = k[0] / M;
        return l * (l + 1) / 2.0;
    };
    f.oracle_domain = [M](const CountVector& k) { return k[0] >= M; };
    return f;
}

inline Fixture make_priority_switchover(const std::map<std::string, double>& overrides = {}) {
    Fixture f;
    f.name = "priority_switchover";
    f.params = detail::merge({}, overrides);
    SystemBuilder b(f.name, 2);
    const StateId s1 = b.state("s1"), s2 = b.state("s2");
    const ControlId idle = b.control("idle");
    const ControlId serve1 = b.control("serve_1", {"send"}), serve2 = b.control("serve_2", {"send"});
    const ControlId sw = b.control("switch");
    const OutcomeId done = b.outcome("done");
    b.transition(s1, idle, s1, done);
    b.transition(s2, idle, s2, done);
    b.transition(s1, serve1, s1, done);
    b.transition(s2, serve2, s2, done);
    b.transition(s1, sw, s2, done);
    b.transition(s2, sw, s1, done);
    b.effect(detail::take_rule(s1, serve1, 1, {1, 0}));
    EffectGuard no_priority;
    no_priority.zero_classes = {0};
    b.effect(detail::take_rule(s2, serve2, 1, {0, 1}, std::nullopt, no_priority));
    b.initial(s1);
    f.spec = b.build();
    f.default_kmax = CountVector{8, 8};
    f.admissible = false;
    f.notes = "input 1 has priority; changing the served input costs one idle slot";
    f.oracle = [s1, s2](const CountVector& k, StateId s) {
        const double k1 = k[0], k2 = k[1];
        if (s == s1) return k2 != 0 ? k1 + 1 + k2 : k1;
        (void)s2;
        if (k1 != 0 && k2 != 0) return 1 + k1 + 1 + k2;
        if (k2 == 0) return 1 + k1;
        return k2;
    };
    return f;
}

inline Fixture make_two_server(const std::map<std::string, double>& overrides = {}) {
    Fixture f;
    f.name = "two_server";
    f.params = detail::merge({{"l", 1}, {"L", 3}}, overrides);
    const int l = detail::int_param(f.params, "l", 1), L = detail::int_param(f.params, "L", 1);
    if (L <= l) throw PreconditionError("two_server requires L > l");
    SystemBuilder b(f.name, 1);
    const StateId s00 = b.state("(0,0)"), s10 = b.state("(1,0)"), s01 = b.state("(0,1)");
    const ControlId run = b.control("run", {"send"});
    const ControlId cont = b.control("continue", {"send"});
    const OutcomeId done = b.outcome("done");
    b.transition(s00, run, {{1.0 / 3, done, s00}, {1.0 / 3, done, s10}, {1.0 / 3, done, s01}});
    detail::service_chain(b, "server1", s10, run, cont, l, {1}, done);
    detail::service_chain(b, "server2", s01, run, cont, L, {1}, done);
    f.spec = b.build();
    f.default_kmax = CountVector{12};
    f.notes = "server 1 takes l slots, server 2 takes L slots; from (0,0) the active server is drawn at random";
    f.oracle = [s00, s10, l, L](const CountVector& k, StateId s) {
        const double n = k[0];
        if (s == s00) return 1.5 + (l + L) / 2.0 * n;
        if (s == s10) return l * n;
        return L * n;
    };
    return f;
}

inline Fixture make_degenerate_flush(const std::map<std::string, double>& overrides = {}) {
    Fixture f;
    f.name = "degenerate_flush";
    f.params = detail::merge({}, overrides);
    SystemBuilder b(f.name, 1);
    const StateId s0 = b.state("s0");
    const ControlId flush = b.control("flush", {"drop_all"});
    const OutcomeId done = b.outcome("done");
    b.transition(s0, flush, s0, done);
    EffectRule r = detail::take_rule(s0, flush, 1, {1});
    r.flush = true;
    b.effect(r);
    f.spec = b.build();
    f.default_kmax = CountVector{12};
    f.notes = "every backlog leaves in one slot, so the limit function vanishes";
    f.oracle = [](const CountVector&, StateId) { return 1.0; };
    return f;
}

/// Registered fixture names in listing order.
inline const std::vector<std::string>& fixture_names() {
    static const std::vector<std::string> names{
        "single_queue",   "two_link",   "two_channel",      "aloha_pi1",
        "aloha_pi2",      "aloha_pi3",  "pairing_aA",       "necessity_3slot",
        "necessity_3slot_restricted",   "m_batch",          "priority_switchover",
        "two_server",     "degenerate_flush"};
    return names;
}

inline Fixture build_fixture(const std::string& name, const std::map<std::string, double>& params = {}) {
    if (name == "single_queue") return make_single_queue(params);
    if (name == "two_link") return make_two_link(params);
    if (name == "two_channel") return make_two_channel(params);
    if (name == "aloha_pi1") return make_aloha(1, params);
    if (name == "aloha_pi2") return make_aloha(2, params);
    if (name == "aloha_pi3") return make_aloha(3, params);
    if (name == "pairing_aA") return make_pairing(params);
    if (name == "necessity_3slot") return make_necessity_3slot(false, params);
    if (name == "necessity_3slot_restricted") return make_necessity_3slot(true, params);
    if (name == "m_batch") return make_m_batch(params);
    if (name == "priority_switchover") return make_priority_switchover(params);
    if (name == "two_server") return make_two_server(params);
    if (name == "degenerate_flush") return make_degenerate_flush(params);
    std::string list;
    for (const auto& n : fixture_names()) list += (list.empty() ? "" : ", ") + n;
    throw RegistryError("unknown fixture '" + name + "'; valid names: " + list);
}

/// Largest |solver - oracle| over the table box (non-phase states, k != 0).
inline double oracle_check(const Fixture& fixture, const EvacTable& table) {
    if (!fixture.has_oracle()) throw UnsupportedError("fixture '" + fixture.name + "' has no closed-form oracle");
    double worst = 0.0;
    const Box& ib = table.input_box();
    for (std::size_t c = 1; c < ib.cells(); ++c) {
        const CountVector k = ib.at(c);
        if (fixture.oracle_domain && !fixture.oracle_domain(k)) continue;
        const CountVector kf = table.embed(k);
        double crit = -INFINITY, crit_oracle = -INFINITY;
        for (StateId s = 0; s < table.num_states(); ++s) {
            if (!table.is_system_state(s)) continue;
            const double o = fixture.oracle(k, s);
            worst = std::max(worst, std::abs(table.value(kf, s) - o));
            crit_oracle = std::max(crit_oracle, o);
            crit = std::max(crit, table.value(kf, s));
        }
        worst = std::max(worst, std::abs(table.critical(k) - crit_oracle));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Slot-level demonstration rules for the non-admissible fixtures.

/// Serves whatever is present at once: pairs when both inputs are busy,
/// otherwise a single packet. Phase states continue the running service.
class ImmediatePairingPolicy final : public SlotPolicy {
public:
    explicit ImmediatePairingPolicy(const SystemSpec& spec)
        : spec_(&spec),
          idle_(spec.control_id("idle")),
          pair_(spec.control_id("pair")),
          single1_(spec.control_id("single_1")),
          single2_(spec.control_id("single_2")),
          cont_(spec.control_id("continue")) {}

    Decision decide(const SlotView& v) override {
        if (spec_->is_phase(v.state)) return {cont_, 1};
        const auto& k = v.counts;
        if (k[0] > 0 && k[1] > 0) return {pair_, 1};
        if (k[0] > 0) return {single1_, 1};
        if (k[1] > 0) return {single2_, 1};
        return {idle_, kNullAction};
    }

private:
    const SystemSpec* spec_;
    ControlId idle_, pair_, single1_, single2_, cont_;
};

/// Sends every packet present at once (valid while the backlog stays below 2M).
class MBatchImmediatePolicy final : public SlotPolicy {
public:
    MBatchImmediatePolicy(const SystemSpec& spec, int M) : spec_(&spec), M_(M) {}

    Decision decide(const SlotView& v) override {
        const int k = v.counts[0];
        if (spec_->is_phase(v.state)) {
            const std::string& name = spec_->state_name(v.state);
            const std::string chain = name.substr(0, name.rfind('_'));
            const ControlId cont = spec_->control_id(chain + "_continue");
            return {cont, static_cast<ActionId>(std::clamp(k - (chain_l_ - 1) * M_, 1, 2 * M_ - 1))};
        }
        if (k == 0) return {spec_->control_id("idle"), kNullAction};
        chain_l_ = std::max(1, k / M_);
        const int m = std::min(k, std::min(2 * M_ - 1, M_ + k % M_));
        return {spec_->control_id("batch_" + std::to_string(chain_l_)), static_cast<ActionId>(m)};
    }

private:
    const SystemSpec* spec_;
    int M_;
    int chain_l_ = 1;
};

/// Input 1 first; switches only when the current input is empty.
class PriorityExhaustivePolicy final : public SlotPolicy {
public:
    explicit PriorityExhaustivePolicy(const SystemSpec& spec)
        : s1_(spec.state_id("s1")),
          idle_(spec.control_id("idle")),
          serve1_(spec.control_id("serve_1")),
          serve2_(spec.control_id("serve_2")),
          switch_(spec.control_id("switch")) {}

    Decision decide(const SlotView& v) override {
        const auto& k = v.counts;
        if (v.state == s1_) {
            if (k[0] > 0) return {serve1_, 1};
            if (k[1] > 0) return {switch_, kNullAction};
            return {idle_, kNullAction};
        }
        if (k[0] > 0) return {switch_, kNullAction};
        if (k[1] > 0) return {serve2_, 1};
        return {idle_, kNullAction};
    }

private:
    StateId s1_;
    ControlId idle_, serve1_, serve2_, switch_;
};

/// Random-access rule for the aloha fixtures: a lone busy queue transmits
/// alone; with both busy a common access probability is drawn from the
/// available levels in rotation and frozen after `commit_after` choices
/// (commit_after < 0 never freezes).
class AlohaCommitPolicy final : public SlotPolicy {
public:
    AlohaCommitPolicy(const SystemSpec& spec, int commit_after)
        : idle_(spec.control_id("idle")),
          tx1_(spec.control_id("tx1")),
          tx2_(spec.control_id("tx2")),
          levels_{spec.control_id("random_q25"), spec.control_id("random_q50"), spec.control_id("random_q75")},
          commit_after_(commit_after) {}

    void reset() override { choices_ = 0; }

    Decision decide(const SlotView& v) override {
        const auto& k = v.counts;
        if (k[0] > 0 && k[1] > 0) {
            if (commit_after_ < 0 || choices_ < commit_after_) {
                current_ = levels_[static_cast<std::size_t>(choices_) % levels_.size()];
                ++choices_;
            }
            return {current_, 1};
        }
        if (k[0] > 0) return {tx1_, 1};
        if (k[1] > 0) return {tx2_, 1};
        return {idle_, kNullAction};
    }

private:
    ControlId idle_, tx1_, tx2_;
    std::vector<ControlId> levels_;
    int commit_after_;
    int choices_ = 0;
    ControlId current_ = 0;
};

}  // namespace evac
