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

#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "evac/bec.hpp"
#include "evac/fixtures.hpp"
#include "evac/limit.hpp"
#include "evac/parallel.hpp"
#include "evac/report.hpp"
#include "evac/sim.hpp"
#include "evac/solver.hpp"

namespace evac {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    Json metrics = Json::object();
    double seconds = 0.0;       ///< wall time, never serialized
    double time_limit = 0.0;    ///< seconds; 0 = none
};

struct AcceptanceOptions {
    std::uint64_t seed = 1;
    unsigned jobs = 1;
};

namespace acceptance {

inline double rel_err(double got, double want) { return std::abs(got - want) / std::max(std::abs(want), 1e-300); }

inline CriterionResult oracle_equivalence(const AcceptanceOptions&) {
    CriterionResult r{1, "oracle equivalence", true};
    r.time_limit = 60;
    const std::vector<std::pair<std::string, CountVector>> cases{
        {"pairing_aA", CountVector{8, 8}},     {"necessity_3slot", CountVector{8, 8}},
        {"priority_switchover", CountVector{8, 8}}, {"two_server", CountVector{12}},
        {"m_batch", CountVector{12}}};
    for (const auto& [name, kmax] : cases) {
        const Fixture f = build_fixture(name);
        const EvacTable t = solve_evac_table(f.spec, kmax);
        const double err = oracle_check(f, t);
        r.metrics[name] = num(err);
        r.pass = r.pass && err <= 1e-6;
    }
    return r;
}

inline CriterionResult subadditivity(const AcceptanceOptions&) {
    CriterionResult r{2, "subadditivity", true};
    r.time_limit = 30;
    for (const auto& name : fixture_names()) {
        const Fixture f = build_fixture(name);
        if (!f.admissible) continue;
        const auto v = check_subadditivity(solve_evac_table(f.spec, f.default_kmax), 1e-9);
        r.metrics[name] = v.size();
        r.pass = r.pass && v.empty();
    }
    return r;
}

inline CriterionResult lipschitz(const AcceptanceOptions&) {
    CriterionResult r{3, "bounded decrease and Lipschitz", true};
    const Fixture f = build_fixture("pairing_aA");
    const double A = f.params.at("A");
    const EvacTable t = solve_evac_table(f.spec, CountVector{8, 8});
    int nonmonotone = 0;
    for (int k = 0; k < 8; ++k)
        if (t.critical(CountVector{k, k + 1}) > t.critical(CountVector{k + 1, k + 1}) + 1e-9) ++nonmonotone;
    const auto lc = check_bounded_decrease(t);
    r.metrics["pairing_nonmonotone_pairs"] = nonmonotone;
    r.metrics["pairing_D0"] = num(lc.D0);
    r.metrics["pairing_D"] = num(lc.D);
    r.metrics["pairing_worst_ratio"] = num(lc.worst_ratio);
    r.metrics["pairing_exhaustive"] = lc.exhaustive;
    r.pass = nonmonotone > 0 && lc.D0 <= A + 1e-9 && lc.holds() && lc.exhaustive;
    Json others = Json::object();
    for (const auto& name : fixture_names()) {
        const Fixture g = build_fixture(name);
        if (!g.admissible || name == "pairing_aA") continue;
        const auto lg = check_bounded_decrease(solve_evac_table(g.spec, g.default_kmax));
        others[name] = num(lg.worst_ratio);
        r.pass = r.pass && lg.holds();
    }
    r.metrics["admissible_worst_ratio"] = others;
    return r;
}

inline RateVector draw_rate(RngStream& rng, std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = 0.05 + 0.95 * rng.uniform();
    return RateVector(std::move(v));
}

inline CriterionResult limit_properties(const AcceptanceOptions& opt) {
    CriterionResult r{4, "limit properties", true};
    r.time_limit = 120;
    struct Case {
        std::string name;
        std::vector<std::pair<RateVector, double>> limits;  // closed-form T(r)
    };
    const std::vector<Case> cases{
        {"pairing_aA",
         {{RateVector{1.0, 0.0}, 3.0}, {RateVector{0.0, 1.0}, 3.0}, {RateVector{0.5, 0.5}, 0.5},
          {RateVector{0.25, 0.75}, 1.75}, {RateVector{0.75, 0.25}, 1.75}}},
        {"two_server", {{RateVector{1.0}, 3.0}, {RateVector{0.5}, 1.5}}},
        {"single_queue", {{RateVector{1.0}, 2.0}, {RateVector{0.4}, 0.8}, {RateVector{0.25}, 0.5}}}};
    for (std::size_t c = 0; c < cases.size(); ++c) {
        const Fixture f = build_fixture(cases[c].name);
        const EvacTable t = solve_evac_table(f.spec, f.default_kmax);
        const LimitAnalyzer an(t);
        RngStream rng(derive_seed(opt.seed, 400 + c));
        int hom_fail = 0, cvx_fail = 0;
        for (int i = 0; i < 20; ++i) {
            const RateVector x = draw_rate(rng, an.dims());
            const double rho = 0.25 + 1.75 * rng.uniform();
            hom_fail += !homogeneity_check(an, x, rho).pass;
        }
        for (int i = 0; i < 20; ++i) {
            const RateVector a = draw_rate(rng, an.dims()), b = draw_rate(rng, an.dims());
            cvx_fail += !convexity_check(an, a, b, rng.uniform()).pass;
        }
        double worst = 0.0;
        for (const auto& [x, want] : cases[c].limits) worst = std::max(worst, rel_err(an.estimate(x).estimate, want));
        r.metrics[cases[c].name] = {{"homogeneity_failures", hom_fail},
                                    {"convexity_failures", cvx_fail},
                                    {"worst_limit_rel_err", num(worst)}};
        r.pass = r.pass && hom_fail == 0 && cvx_fail == 0 && worst <= 0.10;
    }
    return r;
}

inline CriterionResult region_boundary(const AcceptanceOptions& opt) {
    CriterionResult r{5, "region boundary", true};
    const Fixture ts = build_fixture("two_server");
    const EvacTable tt = solve_evac_table(ts.spec, ts.default_kmax);
    const auto a = sweep_region_boundary(LimitAnalyzer(tt), {RateVector{1.0}}, {}, opt.jobs);
    const Fixture pa = build_fixture("pairing_aA");
    const EvacTable tp = solve_evac_table(pa.spec, pa.default_kmax);
    const auto b = sweep_region_boundary(LimitAnalyzer(tp), {RateVector{0.5, 0.5}}, {}, opt.jobs);
    const double ra = a.directions[0].rho_star, rb = b.directions[0].rho_star;
    r.metrics["two_server_radius"] = num(ra);
    r.metrics["pairing_diagonal_radius"] = num(rb);
    r.pass = rel_err(ra, 1.0 / 3.0) <= 0.10 && rel_err(rb, 2.0) <= 0.10;
    return r;
}

struct QueueRun {
    Verdict verdict = Verdict::inconclusive;
    double qt_slope = 0.0;
    double drift_slope = 0.0;
    bool drift_conclusive = false;
};

/// Ten seeds at each of lambda = 0.4 and 0.6 on the eps = 0.5 single queue.
inline std::vector<QueueRun> single_queue_runs(const AcceptanceOptions& opt) {
    const Fixture f = build_fixture("single_queue");
    const EvacTable t = solve_evac_table(f.spec, CountVector{64});
    return parallel_map(opt.jobs, 20, [&](std::size_t i) {
        const double lambda = i < 10 ? 0.4 : 0.6;
        const auto tr = run_epoch_policy(f.spec, t, ArrivalProcess::bernoulli(RateVector{lambda}), 200000,
                                         derive_seed(opt.seed, 600 + i));
        const auto v = stability_verdict(tr);
        const auto d = estimate_drift(tr);
        return QueueRun{v.verdict, v.qt_slope, d.slope, d.conclusive};
    });
}

inline CriterionResult stability_dichotomy(const std::vector<QueueRun>& runs) {
    CriterionResult r{6, "stability dichotomy", true};
    r.time_limit = 300;
    int stable = 0, unstable = 0;
    Json s04 = Json::array(), s06 = Json::array();
    for (std::size_t i = 0; i < runs.size(); ++i) {
        if (i < 10) {
            stable += runs[i].verdict == Verdict::stable;
            s04.push_back(to_string(runs[i].verdict));
        } else {
            unstable += runs[i].verdict == Verdict::unstable;
            s06.push_back(to_string(runs[i].verdict));
        }
    }
    r.metrics["lambda_0.4_stable"] = stable;
    r.metrics["lambda_0.6_unstable"] = unstable;
    r.metrics["lambda_0.4_verdicts"] = s04;
    r.metrics["lambda_0.6_verdicts"] = s06;
    r.pass = stable >= 9 && unstable >= 9;
    return r;
}

inline CriterionResult drift(const std::vector<QueueRun>& runs) {
    CriterionResult r{7, "drift", true};
    Json s = Json::array(), u = Json::array();
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const bool ok = i < 10 ? runs[i].drift_slope <= 0.9 : runs[i].drift_slope >= 1.05;
        r.pass = r.pass && ok;
        (i < 10 ? s : u).push_back(num(runs[i].drift_slope));
    }
    r.metrics["stable_slopes"] = s;
    r.metrics["unstable_slopes"] = u;
    return r;
}

inline CriterionResult counterexamples(const AcceptanceOptions& opt) {
    CriterionResult r{8, "counterexamples", true};
    const long H = 200000;
    const std::uint64_t seed = derive_seed(opt.seed, 800);
    {
        const Fixture f = build_fixture("priority_switchover");
        PriorityExhaustivePolicy pol(f.spec);
        auto arr = ArrivalProcess::bernoulli(RateVector{0.0, 0.6});
        arr.script(0, {1, 0, 0, 0});
        const auto tr = run_generic_policy(f.spec, pol, arr, H, seed);
        const auto v = stability_verdict(tr);
        const double rate2 = static_cast<double>(tr.class_outflow[1]) / static_cast<double>(H);
        r.metrics["priority"] = {{"lambda_sum", num(arr.rate().sum())},
                                 {"input2_departure_rate", num(rate2)},
                                 {"verdict", to_string(v.verdict)}};
        r.pass = r.pass && rate2 <= 0.5 && v.verdict == Verdict::unstable && arr.rate().sum() < 1.0;
    }
    {
        const Fixture f = build_fixture("m_batch");
        const int M = static_cast<int>(f.params.at("M"));
        MBatchImmediatePolicy pol(f.spec, M);
        std::vector<double> pmf(static_cast<std::size_t>(2 * M), 1.0 / (2 * M));
        const auto arr = ArrivalProcess::iid({pmf});
        const auto tr = run_generic_policy(f.spec, pol, arr, H, derive_seed(seed, 1));
        const auto v = stability_verdict(tr);
        const EvacTable t = solve_evac_table(f.spec, f.default_kmax);
        const auto m = region_membership(LimitAnalyzer(t), arr.rate());
        r.metrics["m_batch"] = {{"max_arrivals_per_slot", 2 * M - 1},
                                {"verdict", to_string(v.verdict)},
                                {"formal_estimate", num(m.estimate)},
                                {"formal_membership", to_string(m.verdict)}};
        r.pass = r.pass && v.verdict == Verdict::stable && m.verdict == Membership::outside;
    }
    {
        const Fixture f = build_fixture("necessity_3slot_restricted");
        ImmediatePairingPolicy pol(f.spec);
        auto arr = ArrivalProcess::none(2);
        arr.script(0, {1, 0}).script(1, {0, 1});
        const auto tr = run_generic_policy(f.spec, pol, arr, H, derive_seed(seed, 2));
        const auto v = stability_verdict(tr);
        const EvacTable t = solve_evac_table(f.spec, f.default_kmax);
        const auto m = region_membership(LimitAnalyzer(t), RateVector{0.5, 0.5});
        r.metrics["restricted_pairing"] = {{"verdict", to_string(v.verdict)},
                                           {"formal_estimate", num(m.estimate)},
                                           {"formal_membership", to_string(m.verdict)}};
        r.pass = r.pass && v.verdict == Verdict::stable && m.verdict == Membership::outside;
    }
    return r;
}

inline CriterionResult bec(const AcceptanceOptions& opt) {
    CriterionResult r{9, "broadcast erasure channel", true};
    r.time_limit = 600;
    const std::uint64_t seed = derive_seed(opt.seed, 900);
    const BecSpec one = make_independent_bec({0.5});
    const SystemSpec s1 = make_bec_spec(one);
    const EvacTable t1 = solve_evac_table(s1, CountVector{64});

    CompareOptions co;
    co.seed = derive_seed(seed, 1);
    co.jobs = opt.jobs;
    const auto cmp = capacity_stability_compare(one, s1, t1, {RateVector{1.0}}, co);
    r.metrics["compare"] = to_json(cmp);
    r.pass = r.pass && cmp.all_agree();

    const RateVector rq{0.4};
    const double that = LimitAnalyzer(t1).estimate(rq).estimate;
    const auto l0 = choose_l0(t1, rq, that, 0.01);
    Json q = Json::array();
    std::vector<QleEstimate> est;
    if (l0)
        for (long l : {200L, 400L, 800L})
            est.push_back(estimate_qle(s1, t1, rq, *l0, l, 0.01, 10000, derive_seed(seed, 2 + l), opt.jobs));
    bool trend = est.size() == 3;
    for (std::size_t i = 0; i < est.size(); ++i) {
        q.push_back({{"l", est[i].l}, {"q_hat", num(est[i].q_hat)}, {"ci", num(est[i].ci_halfwidth)}});
        if (i > 0) trend = trend && est[i].q_hat <= est[i - 1].q_hat + est[i - 1].ci_halfwidth + est[i].ci_halfwidth;
    }
    r.metrics["qle_l0"] = l0 ? Json(*l0) : Json(nullptr);
    r.metrics["qle"] = q;
    r.pass = r.pass && trend && !est.empty() && est.back().q_hat <= 0.05;

    const BecSpec two = make_independent_bec({0.5, 0.5});
    const SystemSpec plain = make_bec_spec(two), coded = make_xor2_spec(two);
    const auto o = evacuation_stats(plain, [&] { return std::make_unique<OboPolicy>(plain); }, CountVector{4, 4},
                                    100000, derive_seed(seed, 3), opt.jobs);
    const auto x = evacuation_stats(coded, [&] { return std::make_unique<Xor2Policy>(coded); },
                                    CountVector{4, 4, 0, 0}, 100000, derive_seed(seed, 4), opt.jobs);
    const double se = std::sqrt(o.sd * o.sd / static_cast<double>(o.reps) + x.sd * x.sd / static_cast<double>(x.reps));
    const double z = (o.mean - x.mean) / se;
    r.metrics["obo_mean"] = num(o.mean);
    r.metrics["xor2_mean"] = num(x.mean);
    r.metrics["separation_sigma"] = num(z);
    r.pass = r.pass && z >= 3.0 && o.all_delivered && x.all_delivered;
    return r;
}

template <class F>
CriterionResult timed(F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    CriterionResult r = f();
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

}  // namespace acceptance

/// Criteria 1 to 9. Criterion 10 (repeatability of the serialized results)
/// is checked by running this suite more than once.
inline std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opt) {
    using namespace acceptance;
    std::vector<CriterionResult> out;
    out.push_back(timed([&] { return oracle_equivalence(opt); }));
    out.push_back(timed([&] { return subadditivity(opt); }));
    out.push_back(timed([&] { return lipschitz(opt); }));
    out.push_back(timed([&] { return limit_properties(opt); }));
    out.push_back(timed([&] { return region_boundary(opt); }));
    std::vector<QueueRun> runs;
    out.push_back(timed([&] {
        runs = single_queue_runs(opt);
        return stability_dichotomy(runs);
    }));
    out.push_back(timed([&] { return drift(runs); }));
    out.push_back(timed([&] { return counterexamples(opt); }));
    out.push_back(timed([&] { return bec(opt); }));
    return out;
}

/// Deterministic serialization: no timings, no host data.
inline Json acceptance_json(const std::vector<CriterionResult>& results, const AcceptanceOptions& opt) {
    Json a = Json::array();
    for (const auto& r : results)
        a.push_back({{"id", r.id}, {"name", r.name}, {"pass", r.pass}, {"metrics", r.metrics}});
    return {{"seed", opt.seed}, {"criteria", a}};
}

}  // namespace evac
