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

#include "evac/bec.hpp"

using namespace evac;

namespace {

template <class P>
PolicyFactory factory(const SystemSpec& spec) {
    return [&spec] { return std::make_unique<P>(spec); };
}

// E[2N - 1] for N ~ NegBin(2 successes, p = 1/2), summed directly.
double obo_two_zero_oracle() {
    double e = 0;
    for (int n = 2; n < 200; ++n) e += (2.0 * n - 1) * (n - 1) * std::pow(0.5, n);
    return e;
}

void expect_mean(const EvacStats& s, double want, const char* what) {
    EXPECT_NEAR(s.mean, want, 3 * s.sd / std::sqrt(static_cast<double>(s.reps)) + 1e-12) << what;
}

}  // namespace

TEST(BecSpec, ProductPmf) {
    const auto b = make_independent_bec({0.5, 0.5});
    ASSERT_EQ(b.pattern_pmf.size(), 4u);
    for (double p : b.pattern_pmf) EXPECT_DOUBLE_EQ(p, 0.25);
    const auto c = make_independent_bec({0.2, 0.7});
    EXPECT_NEAR(c.marginal_erasure(0), 0.2, 1e-15);
    EXPECT_NEAR(c.marginal_erasure(1), 0.7, 1e-15);
    EXPECT_NEAR(c.pattern_pmf[3], 0.14, 1e-15);
    EXPECT_DOUBLE_EQ(c.max_erasure(), 0.7);
}

TEST(BecSpec, Validation) {
    BecSpec b;
    b.n = 1;
    b.pattern_pmf = {0.5, 0.4};
    EXPECT_THROW(make_bec_spec(b), PreconditionError);
    b.pattern_pmf = {0.0, 1.0};
    EXPECT_THROW(make_bec_spec(b), PreconditionError);
    b.pattern_pmf = {1.0};
    EXPECT_THROW(make_bec_spec(b), PreconditionError);
    EXPECT_THROW(make_independent_bec({1.0}), PreconditionError);
    EXPECT_EQ(erasure_outcome_name(0), "clear");
    EXPECT_EQ(erasure_outcome_name(3), "erase_1+2");
}

TEST(BecSpec, SolverValues) {
    const auto spec = make_bec_spec(make_independent_bec({0.5}));
    EXPECT_TRUE(validate_spec(spec).ok());
    const auto t = solve_evac_table(spec, CountVector{12});
    for (int k = 1; k <= 12; ++k) EXPECT_NEAR(t.value(CountVector{k}, 0), 2.0 * k, 1e-6);
    const auto spec0 = make_bec_spec(make_independent_bec({0.0}));
    const auto t0 = solve_evac_table(spec0, CountVector{12});
    for (int k = 1; k <= 12; ++k) EXPECT_NEAR(t0.value(CountVector{k}, 0), k, 1e-9);
}

TEST(Obo, SingleUserGeometric) {
    const auto spec = make_bec_spec(make_independent_bec({0.5}));
    expect_mean(evacuation_stats(spec, factory<OboPolicy>(spec), CountVector{4}, 100000, 3), 8.0, "k=4");
}

TEST(Obo, NoErasures) {
    const auto spec = make_bec_spec(make_independent_bec({0.0, 0.0}));
    const auto s = evacuation_stats(spec, factory<OboPolicy>(spec), CountVector{1, 1}, 10, 1);
    EXPECT_EQ(s.mean, 2.0);
    EXPECT_EQ(s.sd, 0.0);
}

TEST(Obo, ResidueSlotsOnly) {
    const auto spec = make_bec_spec(make_independent_bec({0.5, 0.5}));
    const double want = obo_two_zero_oracle();
    EXPECT_NEAR(want, 7.0, 1e-9);
    expect_mean(evacuation_stats(spec, factory<OboPolicy>(spec), CountVector{2, 0}, 100000, 5), want, "k=(2,0)");
}

TEST(Obo, LinearBound) {
    const auto bec = make_independent_bec({0.5, 0.5});
    const auto spec = make_bec_spec(bec);
    const double C = 2 / (1 - 0.5), C0 = 2;
    for (int a = 0; a <= 6; ++a)
        for (int b = 0; b <= 6; ++b) {
            const auto s = evacuation_stats(spec, factory<OboPolicy>(spec), CountVector{a, b}, 2000,
                                            derive_seed(a, b));
            EXPECT_LE(s.mean, C * (a + b) + C0) << a << ',' << b;
            EXPECT_TRUE(s.all_delivered);
        }
}

TEST(OboEndSignal, Examples) {
    const auto spec = make_bec_spec(make_independent_bec({0.0}));
    EXPECT_EQ(evacuation_stats(spec, factory<OboEndSignalPolicy>(spec), CountVector{1}, 5, 1).mean, 2.0);
    EXPECT_EQ(evacuation_stats(spec, factory<OboEndSignalPolicy>(spec), CountVector{0}, 5, 1).mean, 1.0);
    const auto spec2 = make_bec_spec(make_independent_bec({0.0, 0.0}));
    EXPECT_EQ(evacuation_stats(spec2, factory<OboEndSignalPolicy>(spec2), CountVector{1, 1}, 5, 1).mean, 4.0);
}

TEST(OboEndSignal, StillLinear) {
    const auto spec = make_bec_spec(make_independent_bec({0.5, 0.5}));
    for (int a = 0; a <= 6; a += 2)
        for (int b = 0; b <= 6; b += 3) {
            const auto s = evacuation_stats(spec, factory<OboEndSignalPolicy>(spec), CountVector{a, b}, 2000, 9);
            EXPECT_LE(s.mean, 4.0 * (a + b) + 2 + 2);
        }
}

TEST(Xor2, Structure) {
    EXPECT_THROW(make_xor2_spec(make_independent_bec({0.5})), UnsupportedError);
    const auto spec = make_xor2_spec(make_independent_bec({0.5, 0.5}));
    EXPECT_TRUE(validate_spec(spec).ok());
    EXPECT_EQ(spec.classes(), 4u);
    EXPECT_EQ(spec.inputs(), 2u);
}

TEST(Xor2, NoErasuresMatchesInterleaving) {
    const auto spec = make_xor2_spec(make_independent_bec({0.0, 0.0}));
    for (int a = 0; a <= 4; ++a)
        for (int b = 0; b <= 4; ++b) {
            const auto s = evacuation_stats(spec, factory<Xor2Policy>(spec), CountVector{a, b, 0, 0}, 3, 1);
            EXPECT_EQ(s.mean, a + b);
        }
}

TEST(Xor2, SingleUserIsGeometric) {
    const auto spec = make_xor2_spec(make_independent_bec({0.5, 0.5}));
    expect_mean(evacuation_stats(spec, factory<Xor2Policy>(spec), CountVector{1, 0, 0, 0}, 100000, 2), 2.0,
                "k=(1,0)");
}

TEST(Xor2, BeatsObo) {
    const auto bec = make_independent_bec({0.5, 0.5});
    const auto plain = make_bec_spec(bec);
    const auto coded = make_xor2_spec(bec);
    const auto o = evacuation_stats(plain, factory<OboPolicy>(plain), CountVector{4, 4}, 100000, 11);
    const auto x = evacuation_stats(coded, factory<Xor2Policy>(coded), CountVector{4, 4, 0, 0}, 100000, 12);
    const double se = std::sqrt(o.sd * o.sd / o.reps + x.sd * x.sd / x.reps);
    EXPECT_GT(o.mean - x.mean, 3 * se);
    EXPECT_TRUE(x.all_delivered);
    EXPECT_TRUE(o.all_delivered);
}

TEST(Xor2, OptimalBoundaryBeyondUncoded) {
    const auto bec = make_independent_bec({0.5, 0.5});
    const auto plain = make_bec_spec(bec);
    const auto coded = make_xor2_spec(bec);
    const auto tp = solve_evac_table(plain, CountVector{8, 8});
    const auto tc = solve_evac_table(coded, CountVector{8, 8, 8, 8});
    const RateVector diag{0.5, 0.5};
    const double up = LimitAnalyzer(tp).estimate(diag).estimate;
    const double uc = LimitAnalyzer(tc).estimate(diag).estimate;
    EXPECT_NEAR(up, 2.0, 0.2);
    EXPECT_LT(uc, up - 0.1);
}

TEST(Bootstrap, Charge) {
    const auto b = make_independent_bec({0.5});
    EXPECT_DOUBLE_EQ(bootstrap_charge(b, CountVector{3}), 4.0);
    EXPECT_DOUBLE_EQ(bootstrap_charge(b, CountVector{0}), 0.0);
}

TEST(Qle, DeterministicChannel) {
    const auto spec = make_bec_spec(make_independent_bec({0.0}));
    const auto t = solve_evac_table(spec, CountVector{12});
    const auto q = estimate_qle(spec, t, RateVector{0.5}, 10, 100, 0.01, 50, 1);
    EXPECT_EQ(q.batch, CountVector{5});
    EXPECT_EQ(q.batches, 11);
    EXPECT_EQ(q.q_hat, 0.0);
    EXPECT_EQ(q.ci_halfwidth, 0.0);
}

TEST(Qle, ChooseL0) {
    const auto spec = make_bec_spec(make_independent_bec({0.5}));
    const auto t = solve_evac_table(spec, CountVector{12});
    const RateVector r{0.4};
    const double that = LimitAnalyzer(t).estimate(r).estimate;
    EXPECT_NEAR(that, 0.8, 1e-9);
    EXPECT_EQ(choose_l0(t, r, that, 0.01), 5);
    EXPECT_FALSE(choose_l0(t, RateVector{0.49}, 0.98, 0.001).has_value());
}

TEST(Qle, DecreasesWithLength) {
    const auto spec = make_bec_spec(make_independent_bec({0.5}));
    const auto t = solve_evac_table(spec, CountVector{12});
    const RateVector r{0.4};
    std::vector<QleEstimate> est;
    for (long l : {200L, 400L, 800L}) est.push_back(estimate_qle(spec, t, r, 5, l, 0.01, 4000, 21));
    for (std::size_t i = 0; i + 1 < est.size(); ++i)
        EXPECT_LE(est[i + 1].q_hat, est[i].q_hat + est[i].ci_halfwidth + est[i + 1].ci_halfwidth);
    EXPECT_LE(est.back().q_hat, 0.05);
    EXPECT_FALSE(est[0].no_guarantee);
    EXPECT_EQ(est[0].batches, 41);
}

TEST(Qle, AboveCapacityFails) {
    const auto spec = make_bec_spec(make_independent_bec({0.5}));
    const auto t = solve_evac_table(spec, CountVector{12});
    const auto short_code = estimate_qle(spec, t, RateVector{0.6}, 5, 100, 0.01, 2000, 4);
    const auto long_code = estimate_qle(spec, t, RateVector{0.6}, 5, 1600, 0.01, 2000, 4);
    EXPECT_TRUE(long_code.no_guarantee);
    EXPECT_GT(long_code.q_hat, short_code.q_hat);
    EXPECT_GT(long_code.q_hat, 0.95);
}

TEST(Qle, JobsDoNotChangeResult) {
    const auto spec = make_bec_spec(make_independent_bec({0.5}));
    const auto t = solve_evac_table(spec, CountVector{12});
    const auto a = estimate_qle(spec, t, RateVector{0.4}, 5, 200, 0.01, 3000, 8, 1);
    const auto b = estimate_qle(spec, t, RateVector{0.4}, 5, 200, 0.01, 3000, 8, 4);
    EXPECT_EQ(a.q_hat, b.q_hat);
    const auto c = estimate_qle(spec, t, RateVector{0.4}, 5, 200, 0.01, 3000, 8, 1, BatchPolicy::obo);
    EXPECT_EQ(a.q_hat, c.q_hat);  // single user: OBO is optimal and consumes the same draws
}

TEST(Compare, NoiselessChannel) {
    const auto bec = make_independent_bec({0.0});
    const auto spec = make_bec_spec(bec);
    const auto t = solve_evac_table(spec, CountVector{64});
    CompareOptions opt;
    opt.qle_reps = 20;
    opt.horizon = 10000;
    const auto rep = capacity_stability_compare(bec, spec, t, {RateVector{1.0}}, opt);
    ASSERT_EQ(rep.directions.size(), 1u);
    const auto& d = rep.directions[0];
    EXPECT_NEAR(d.radius, 1.0, 1e-9);
    EXPECT_NEAR(d.qle_rate, 0.98, 1e-9);
    EXPECT_NEAR(d.stable_rate, 1.0, 1e-9);
    EXPECT_TRUE(d.agree);
    EXPECT_TRUE(d.buffer_ordering_holds);
}
