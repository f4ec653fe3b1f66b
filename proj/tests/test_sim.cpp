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

#include <cmath>

#include "evac/fixtures.hpp"
#include "evac/sim.hpp"

using namespace evac;

namespace {

struct Queue {
    Fixture fx = build_fixture("single_queue");
    EvacTable table = solve_evac_table(fx.spec, CountVector{64});
};

const Queue& queue() {
    static const Queue q;
    return q;
}

SimTrace queue_run(double lambda, long horizon, std::uint64_t seed) {
    return run_epoch_policy(queue().fx.spec, queue().table, ArrivalProcess::bernoulli(RateVector{lambda}), horizon,
                            seed);
}

// Epoch bookkeeping recomputed from the per-slot arrays alone.
void expect_epoch_isolation(const SimTrace& tr) {
    long t = 0;
    for (const auto& e : tr.epochs) {
        EXPECT_EQ(e.start, t);
        EXPECT_GE(e.T, 1);
        long out = 0;
        for (long u = e.start; u < e.start + e.T; ++u) {
            EXPECT_EQ(tr.epoch_of[static_cast<std::size_t>(u)], e.m);
            out += tr.departures[static_cast<std::size_t>(u)];
        }
        if (!e.truncated) EXPECT_EQ(out, e.k.total()) << "epoch " << e.m;
        else EXPECT_LE(out, e.k.total());
        t += e.T;
    }
    EXPECT_EQ(t, tr.horizon);
}

class SwitchToIllegal final : public SlotPolicy {
public:
    Decision decide(const SlotView& v) override { return {0, static_cast<ActionId>(v.t == 5 ? 99 : 0)}; }
};

}  // namespace

TEST(Arrivals, Validation) {
    EXPECT_THROW(ArrivalProcess::iid({{0.5, 0.4}}), PreconditionError);
    EXPECT_THROW(ArrivalProcess::iid({{1.2, -0.2}}), PreconditionError);
    EXPECT_THROW(ArrivalProcess::bernoulli(RateVector{1.5}), PreconditionError);
    EXPECT_THROW(ArrivalProcess::none(1).script(0, {}), PreconditionError);
    EXPECT_THROW(ArrivalProcess::none(2).with_initial(CountVector{1}), PreconditionError);
    EXPECT_NO_THROW(ArrivalProcess::iid({{0.3, 0.3, 0.4 + 1e-13}}));
}

TEST(Arrivals, RateIsPmfMean) {
    const auto a = ArrivalProcess::iid({{0.2, 0.3, 0.5}, {1.0}});
    EXPECT_NEAR(a.rate()[0], 0.3 + 1.0, 1e-12);
    EXPECT_EQ(a.rate()[1], 0.0);
    auto s = ArrivalProcess::none(2);
    s.script(0, {1, 0, 0, 0});
    EXPECT_DOUBLE_EQ(s.rate()[0], 0.25);
    EXPECT_TRUE(s.scripted());
    RngStream rng(1);
    EXPECT_EQ(s.sample(4, rng)[0], 1);
    EXPECT_EQ(s.sample(6, rng)[0], 0);
}

TEST(Arrivals, EmpiricalMean) {
    const auto a = ArrivalProcess::iid({{0.1, 0.2, 0.7}});
    RngStream rng(5);
    const int n = 200000;
    double sum = 0;
    for (int t = 0; t < n; ++t) sum += a.sample(t, rng)[0];
    const double sd = std::sqrt((0.2 + 4 * 0.7 - 1.6 * 1.6) / n);
    EXPECT_NEAR(sum / n, 1.6, 4 * sd);
}

TEST(EpochPolicy, NoArrivalsAfterInitialBatch) {
    const auto& q = queue();
    const auto arr = ArrivalProcess::none(1).with_initial(CountVector{6});
    const auto tr = run_epoch_policy(q.fx.spec, q.table, arr, 2000, 3);
    EXPECT_EQ(tr.Q[0], 6);
    ASSERT_GE(tr.epochs.size(), 2u);
    EXPECT_EQ(tr.epochs[0].k, CountVector{6});
    for (std::size_t m = 1; m < tr.epochs.size(); ++m) {
        EXPECT_EQ(tr.epochs[m].T, 1);
        EXPECT_TRUE(tr.epochs[m].k.is_zero());
    }
    for (std::size_t t = static_cast<std::size_t>(tr.epochs[0].T); t < tr.Q.size(); ++t) ASSERT_EQ(tr.Q[t], 0);
    expect_epoch_isolation(tr);
    EXPECT_EQ(conservation_error(tr), 0);
}

TEST(EpochPolicy, FirstEpochMeanIsTableValue) {
    const auto& q = queue();
    const auto arr = ArrivalProcess::none(1).with_initial(CountVector{4});
    const int reps = 20000;
    double sum = 0, sq = 0;
    for (int r = 0; r < reps; ++r) {
        const double T = static_cast<double>(run_epoch_policy(q.fx.spec, q.table, arr, 60, derive_seed(9, r)).epochs[0].T);
        sum += T;
        sq += T * T;
    }
    const double mean = sum / reps, sd = std::sqrt(sq / reps - mean * mean);
    EXPECT_NEAR(mean, q.table.value(CountVector{4}, 0), 3 * sd / std::sqrt(reps));
}

TEST(EpochPolicy, ZeroArrivalsIdleEpochs) {
    const auto& q = queue();
    const auto tr = run_epoch_policy(q.fx.spec, q.table, ArrivalProcess::none(1), 20000, 1);
    EXPECT_EQ(tr.epochs.size(), 20000u);
    const auto d = estimate_drift(tr);
    EXPECT_EQ(d.slope, 0.0);
    EXPECT_TRUE(d.conclusive);
    const auto v = stability_verdict(tr);
    EXPECT_EQ(v.verdict, Verdict::stable);
    EXPECT_EQ(v.tail_prob, 0.0);
    const auto c = regeneration_cycles(tr, {1, 0});
    EXPECT_TRUE(c.conclusive);
    for (long L : c.cycles) ASSERT_EQ(L, 1);
    EXPECT_EQ(most_frequent_anchor(tr), (std::pair<long, StateId>{1, 0}));
}

TEST(EpochPolicy, ConservationIsolationDeterminism) {
    for (double lambda : {0.2, 0.4, 0.6}) {
        const auto a = queue_run(lambda, 30000, 17);
        const auto b = queue_run(lambda, 30000, 17);
        EXPECT_EQ(conservation_error(a), 0) << lambda;
        expect_epoch_isolation(a);
        EXPECT_EQ(a.Q, b.Q);
        EXPECT_EQ(a.departures, b.departures);
        ASSERT_EQ(a.epochs.size(), b.epochs.size());
        for (std::size_t t = 0; t < a.Q.size(); ++t) {
            ASSERT_EQ(a.Q[t], a.Q_vec(static_cast<long>(t)).total());
            ASSERT_LE(a.Q[t], a.Q_buffer[t]);
        }
        EXPECT_NE(queue_run(lambda, 30000, 18).Q, a.Q);
    }
}

TEST(EpochPolicy, OversizedEpochFallsBack) {
    const auto& q = queue();
    const EvacTable small = solve_evac_table(q.fx.spec, CountVector{4});
    const auto arr = ArrivalProcess::none(1).with_initial(CountVector{11});
    const auto tr = run_epoch_policy(q.fx.spec, small, arr, 500, 2);
    EXPECT_TRUE(tr.epochs[0].fallback);
    EXPECT_FALSE(tr.epochs[0].truncated);
    EXPECT_FALSE(tr.epochs[1].fallback);
    expect_epoch_isolation(tr);
}

TEST(EpochPolicy, TruncatedLastEpoch) {
    const auto& q = queue();
    const auto arr = ArrivalProcess::none(1).with_initial(CountVector{30});
    const auto tr = run_epoch_policy(q.fx.spec, q.table, arr, 10, 2);
    ASSERT_EQ(tr.epochs.size(), 1u);
    EXPECT_TRUE(tr.epochs[0].truncated);
    EXPECT_TRUE(tr.completed_epochs().empty());
    EXPECT_FALSE(estimate_drift(tr).conclusive);
}

TEST(EpochPolicy, Preconditions) {
    const auto& q = queue();
    EXPECT_THROW(run_epoch_policy(q.fx.spec, q.table, ArrivalProcess::none(2), 10, 1), PreconditionError);
    EXPECT_THROW(run_epoch_policy(q.fx.spec, q.table, ArrivalProcess::none(1), 0, 1), PreconditionError);
    const auto tr = run_epoch_policy(q.fx.spec, q.table, ArrivalProcess::none(1), 9999, 1);
    EXPECT_THROW(stability_verdict(tr), PreconditionError);
}

TEST(Stability, SingleQueueStableAtPointFour) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const auto tr = queue_run(0.4, 200000, seed);
        const auto v = stability_verdict(tr);
        EXPECT_EQ(v.verdict, Verdict::stable) << seed;
        EXPECT_LE(v.qt_slope, 0.005);
        const auto d = estimate_drift(tr);
        EXPECT_TRUE(d.conclusive);
        EXPECT_FALSE(d.bins.empty());
        // drift consistency: slope <= 1 - (1 - 0.8) / 2
        EXPECT_LE(d.slope, 0.9);
        const auto c = regeneration_cycles(tr, most_frequent_anchor(tr));
        EXPECT_TRUE(c.conclusive);
        EXPECT_TRUE(std::isfinite(c.mean));
        EXPECT_TRUE(c.halves_agree) << c.first_half_mean << " vs " << c.second_half_mean;
    }
}

TEST(Stability, SingleQueueUnstableAtPointSix) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const auto tr = queue_run(0.6, 200000, seed);
        const auto v = stability_verdict(tr);
        EXPECT_EQ(v.verdict, Verdict::unstable) << seed;
        // net growth: 0.6 in, at most 0.5 out per slot
        EXPECT_NEAR(v.qt_slope, 0.1, 0.02);
        EXPECT_GE(estimate_drift(tr).slope, 1.05);
        EXPECT_FALSE(regeneration_cycles(tr, most_frequent_anchor(tr)).conclusive);
    }
}

TEST(GenericPolicy, NullPolicyIsUnstable) {
    const auto& q = queue();
    NullPolicy idle(q.fx.spec);
    const auto tr = run_generic_policy(q.fx.spec, idle, ArrivalProcess::bernoulli(RateVector{0.1}), 20000, 4);
    EXPECT_EQ(stability_verdict(tr).verdict, Verdict::unstable);
    EXPECT_EQ(conservation_error(tr), 0);
}

TEST(GenericPolicy, UnavailableControlIsContractError) {
    const auto& q = queue();
    SwitchToIllegal bad;
    EXPECT_THROW(run_generic_policy(q.fx.spec, bad, ArrivalProcess::none(1), 20, 4), ContractError);
}

TEST(GenericPolicy, MBatchImmediateIsStable) {
    const Fixture f = build_fixture("m_batch");
    MBatchImmediatePolicy pol(f.spec, 3);
    const auto arr = ArrivalProcess::iid({{1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6}});
    const auto tr = run_generic_policy(f.spec, pol, arr, 50000, 6);
    EXPECT_EQ(stability_verdict(tr).verdict, Verdict::stable);
    EXPECT_LE(*std::max_element(tr.Q.begin(), tr.Q.end()), 5);
    EXPECT_EQ(conservation_error(tr), 0);
}

TEST(GenericPolicy, RestrictedPairingAlternatingIsStable) {
    const Fixture f = build_fixture("necessity_3slot_restricted");
    ImmediatePairingPolicy pol(f.spec);
    auto arr = ArrivalProcess::none(2);
    arr.script(0, {1, 0}).script(1, {0, 1});
    const auto tr = run_generic_policy(f.spec, pol, arr, 20000, 1);
    EXPECT_EQ(stability_verdict(tr).verdict, Verdict::stable);
    EXPECT_TRUE(tr.scripted_arrivals);
}

TEST(GenericPolicy, PrioritySwitchoverIsUnstable) {
    const Fixture f = build_fixture("priority_switchover");
    PriorityExhaustivePolicy pol(f.spec);
    auto arr = ArrivalProcess::bernoulli(RateVector{0.0, 0.6});
    arr.script(0, {1, 0, 0, 0});
    const long H = 100000;
    const auto tr = run_generic_policy(f.spec, pol, arr, H, 8);
    EXPECT_EQ(stability_verdict(tr).verdict, Verdict::unstable);
    EXPECT_LE(static_cast<double>(tr.class_outflow[1]) / H, 0.5);
    EXPECT_EQ(conservation_error(tr), 0);
}

TEST(Drift, LeastSquaresOracle) {
    const auto f = least_squares(std::vector<int>{0, 1, 2, 3}, std::vector<int>{1, 3, 5, 7});
    EXPECT_DOUBLE_EQ(f.slope, 2.0);
    EXPECT_DOUBLE_EQ(f.intercept, 1.0);
    EXPECT_DOUBLE_EQ(f.r2, 1.0);
    const auto flat = least_squares(std::vector<int>{2, 2, 2}, std::vector<int>{1, 5, 9});
    EXPECT_EQ(flat.slope, 0.0);
}

TEST(Regeneration, HandBuiltTrace) {
    SimTrace tr;
    tr.horizon = 0;
    for (long T : {1, 3, 1, 2, 2, 1}) {
        EpochRecord e;
        e.m = static_cast<long>(tr.epochs.size());
        e.T = T;
        tr.epochs.push_back(e);
    }
    const auto c = regeneration_cycles(tr, {1, 0}, 2);
    ASSERT_EQ(c.visits, 3u);
    EXPECT_EQ(c.cycles, (std::vector<long>{4, 5}));
    EXPECT_TRUE(c.conclusive);
    EXPECT_DOUBLE_EQ(c.mean, 4.5);
}
