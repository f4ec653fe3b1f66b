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
#include "evac/limit.hpp"

using namespace evac;

namespace {

struct Solved {
    Fixture fx;
    EvacTable table;
};

Solved solve(const std::string& name) {
    Fixture f = build_fixture(name);
    EvacTable t = solve_evac_table(f.spec, f.default_kmax);
    return {std::move(f), std::move(t)};
}

// Closed-form limits, written from the oracle formulas' leading terms.
double pairing_limit(const RateVector& r, double a, double A) {
    return a * std::min(r[0], r[1]) + A * std::abs(r[0] - r[1]);
}

RateVector random_rate(RngStream& rng, std::size_t n, double scale) {
    std::vector<double> v(n);
    for (auto& x : v) x = scale * (0.05 + 0.95 * rng.uniform());
    return RateVector(std::move(v));
}

}  // namespace

TEST(Schedule, DefaultLandsOnBoxEdge) {
    const auto s = solve("two_server");
    LimitAnalyzer an(s.table);
    const auto sched = an.default_schedule(RateVector{1.0});
    ASSERT_EQ(sched.size(), 5u);
    EXPECT_DOUBLE_EQ(sched.back(), 12.0);
    EXPECT_DOUBLE_EQ(sched.front(), 4.0);
    const auto half = an.default_schedule(RateVector{0.5});
    EXPECT_DOUBLE_EQ(half.back(), 24.0);
}

TEST(Estimate, TwoServerUnitRate) {
    const auto s = solve("two_server");
    LimitAnalyzer an(s.table);
    const auto e = an.estimate(RateVector{1.0});
    EXPECT_NEAR(e.estimate, 3.0, 0.3);
    EXPECT_GE(e.error_bound, 0.0);
    ASSERT_EQ(e.samples.size(), 5u);
    for (double x : e.samples) EXPECT_TRUE(std::isfinite(x));
}

TEST(Estimate, SingleQueueIsTwiceRate) {
    const auto s = solve("single_queue");
    LimitAnalyzer an(s.table);
    for (double r : {0.1, 0.25, 0.4, 0.6, 1.0}) EXPECT_NEAR(an.estimate(RateVector{r}).estimate, 2 * r, 0.2 * r) << r;
}

TEST(Estimate, PairingMatchesClosedFormLimit) {
    const auto s = solve("pairing_aA");
    LimitAnalyzer an(s.table);
    RngStream rng(7);
    for (int i = 0; i < 20; ++i) {
        const RateVector r = random_rate(rng, 2, 1.0);
        const double want = pairing_limit(r, 1, 3);
        const auto e = an.estimate(r);
        EXPECT_LE(std::abs(e.estimate - want), std::max(0.1 * want, e.error_bound)) << r.to_string();
    }
    EXPECT_NEAR(an.estimate(RateVector{0.5, 0.5}).estimate, 0.5, 1e-9);
}

TEST(Estimate, ZeroRate) {
    const auto s = solve("pairing_aA");
    LimitAnalyzer an(s.table);
    const auto e = an.estimate(RateVector{0.0, 0.0});
    EXPECT_EQ(e.estimate, 0.0);
    EXPECT_DOUBLE_EQ(e.error_bound, e.samples.back());
}

TEST(Estimate, Errors) {
    const auto s = solve("two_server");
    LimitAnalyzer an(s.table);
    EXPECT_THROW(an.estimate(RateVector{1.0, 1.0}), PreconditionError);
    EXPECT_THROW(an.estimate(RateVector{1.0}, {4.0}), PreconditionError);
    EXPECT_THROW(an.estimate(RateVector{1.0}, {6.0, 4.0}), PreconditionError);
    try {
        an.estimate(RateVector{1.0}, {10.0, 20.0});
        FAIL() << "expected RangeError";
    } catch (const RangeError& e) {
        EXPECT_NE(std::string(e.what()).find("kmax"), std::string::npos);
    }
}

TEST(Membership, TwoServer) {
    const auto s = solve("two_server");
    LimitAnalyzer an(s.table);
    const auto out = region_membership(an, RateVector{0.5});
    EXPECT_EQ(out.verdict, Membership::outside);
    EXPECT_NEAR(out.estimate, 1.5, 0.15);
    const auto in = region_membership(an, RateVector{0.2});
    EXPECT_EQ(in.verdict, Membership::inside);
    EXPECT_NEAR(in.estimate, 0.6, 0.06);
    EXPECT_EQ(region_membership(an, RateVector{0.0}).verdict, Membership::inside);
}

TEST(Membership, BoundaryWhenBoundStraddlesOne) {
    const auto s = solve("single_queue");
    LimitAnalyzer an(s.table);
    const auto m = region_membership(an, RateVector{0.5});
    EXPECT_EQ(m.verdict, Membership::boundary);
}

class LimitProperties : public ::testing::TestWithParam<std::string> {};

TEST_P(LimitProperties, HomogeneityAndConvexity) {
    const auto s = solve(GetParam());
    LimitAnalyzer an(s.table);
    const std::size_t n = an.dims();
    RngStream rng(derive_seed(11, std::hash<std::string>{}(GetParam()) & 0xffff));
    for (int i = 0; i < 20; ++i) {
        const RateVector r = random_rate(rng, n, 1.0);
        const double rho = 0.25 + 1.75 * rng.uniform();
        const auto h = homogeneity_check(an, r, rho);
        EXPECT_TRUE(h.pass) << r.to_string() << " rho=" << rho << " gap=" << h.gap << " tol=" << h.tolerance;
    }
    for (int i = 0; i < 20; ++i) {
        const RateVector r1 = random_rate(rng, n, 1.0), r2 = random_rate(rng, n, 1.0);
        const double p = rng.uniform();
        const auto c = convexity_check(an, r1, r2, p);
        EXPECT_TRUE(c.pass) << r1.to_string() << ' ' << r2.to_string() << " slack=" << c.slack;
    }
}

INSTANTIATE_TEST_SUITE_P(OracleFixtures, LimitProperties,
                         ::testing::Values("pairing_aA", "two_server", "single_queue", "necessity_3slot"));

TEST(Homogeneity, ZeroScaling) {
    const auto s = solve("pairing_aA");
    LimitAnalyzer an(s.table);
    const auto h = homogeneity_check(an, RateVector{0.3, 0.6}, 0.0);
    EXPECT_TRUE(h.pass);
    EXPECT_EQ(h.gap, 0.0);
    EXPECT_THROW(homogeneity_check(an, RateVector{0.3, 0.6}, -1.0), PreconditionError);
    EXPECT_THROW(convexity_check(an, RateVector{0.3, 0.6}, RateVector{0.3, 0.6}, 1.5), PreconditionError);
}

TEST(Region, TwoServerRadius) {
    const auto s = solve("two_server");
    LimitAnalyzer an(s.table);
    const auto rep = sweep_region_boundary(an, {RateVector{1.0}});
    ASSERT_EQ(rep.directions.size(), 1u);
    EXPECT_NEAR(rep.directions[0].rho_star, 1.0 / 3, 0.1 / 3);
    EXPECT_FALSE(rep.directions[0].unbounded);
    EXPECT_TRUE(rep.heuristic_bounds);
}

TEST(Region, PairingDiagonalRadius) {
    const auto s = solve("pairing_aA");
    LimitAnalyzer an(s.table);
    const auto rep = sweep_region_boundary(an, {RateVector{0.5, 0.5}, RateVector{1.0, 0.0}});
    EXPECT_NEAR(rep.directions[0].rho_star, 2.0, 0.2);
    EXPECT_NEAR(rep.directions[1].rho_star, 1.0 / 3, 0.1 / 3);
}

TEST(Region, DegenerateIsUnbounded) {
    const auto s = solve("degenerate_flush");
    LimitAnalyzer an(s.table);
    const auto rep = sweep_region_boundary(an, {RateVector{1.0}});
    EXPECT_TRUE(rep.directions[0].unbounded);
    EXPECT_TRUE(std::isinf(rep.directions[0].rho_star));
}

TEST(Region, ParallelMatchesSerial) {
    const auto s = solve("pairing_aA");
    LimitAnalyzer an(s.table);
    std::vector<RateVector> dirs;
    for (int j = 0; j <= 10; ++j) dirs.push_back(RateVector{j / 10.0, 1 - j / 10.0});
    const auto a = sweep_region_boundary(an, dirs, {}, 1);
    const auto b = sweep_region_boundary(an, dirs, {}, 4);
    ASSERT_EQ(a.directions.size(), b.directions.size());
    for (std::size_t i = 0; i < dirs.size(); ++i) {
        EXPECT_EQ(a.directions[i].estimate, b.directions[i].estimate);
        EXPECT_EQ(a.directions[i].error_bound, b.directions[i].error_bound);
    }
}

TEST(Region, DirectionValidation) {
    const auto s = solve("pairing_aA");
    LimitAnalyzer an(s.table);
    EXPECT_THROW(sweep_region_boundary(an, {RateVector{0.0, 0.0}}), PreconditionError);
    EXPECT_THROW(sweep_region_boundary(an, {RateVector{0.6, 0.6}}), PreconditionError);
}
