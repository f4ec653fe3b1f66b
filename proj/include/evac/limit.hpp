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
#include <limits>
#include <string>
#include <vector>

#include "evac/parallel.hpp"
#include "evac/solver.hpp"

namespace evac {

/**
 * Finite-scale estimate of the limit function at r.
 *
 * samples[j] = critical(ceil(t_j r)) / t_j. The estimate is the last sample;
 * error_bound = D n / t_last + |last - second to last|. The bound is a
 * heuristic composite, not a certified interval.
 */
struct ThatEstimate {
    RateVector r;
    std::vector<double> schedule;
    std::vector<double> samples;
    double estimate = 0.0;
    double error_bound = 0.0;
    double D = 0.0;
};

enum class Membership { inside, boundary, outside };

inline const char* to_string(Membership m) {
    switch (m) {
        case Membership::inside: return "inside";
        case Membership::boundary: return "boundary";
        case Membership::outside: return "outside";
    }
    return "?";
}

/// Limit-function queries against one immutable table.
class LimitAnalyzer {
public:
    explicit LimitAnalyzer(const EvacTable& table) : table_(&table), lc_(check_bounded_decrease(table)) {}
    LimitAnalyzer(const EvacTable& table, LipschitzConstants lc) : table_(&table), lc_(lc) {}

    const EvacTable& table() const noexcept { return *table_; }
    const LipschitzConstants& lipschitz() const noexcept { return lc_; }
    std::size_t dims() const noexcept { return table_->inputs(); }

    /// {4, 6, 8, 10, 12} rescaled so the last point lands on the box edge.
    std::vector<double> default_schedule(const RateVector& r) const {
        check_dims(r);
        std::vector<double> base{4, 6, 8, 10, 12};
        double t_last = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < r.size(); ++i)
            if (r[i] > 0.0) t_last = std::min(t_last, table_->input_kmax()[i] / r[i]);
        if (!std::isfinite(t_last)) return base;
        if (!(t_last > 0.0)) throw RangeError("table box " + table_->input_kmax().to_string() + " is empty along r");
        for (double& t : base) t *= t_last / 12.0;
        return base;
    }

    ThatEstimate estimate(const RateVector& r, std::vector<double> schedule = {}) const {
        check_dims(r);
        if (schedule.empty()) schedule = default_schedule(r);
        if (schedule.size() < 2) throw PreconditionError("schedule needs at least two points");
        for (std::size_t j = 0; j < schedule.size(); ++j)
            if (!(schedule[j] > 0.0) || (j > 0 && !(schedule[j] > schedule[j - 1])))
                throw PreconditionError("schedule must be positive and strictly increasing");
        const CountVector need = scaled_ceil(r, schedule.back());
        if (!table_->input_box().contains(need))
            throw RangeError("ceil(t r) = " + need.to_string() + " needs kmax >= " + need.to_string() +
                             "; table box is " + table_->input_kmax().to_string());
        ThatEstimate e;
        e.r = r;
        e.schedule = schedule;
        e.D = lc_.D;
        for (double t : schedule) e.samples.push_back(table_->critical(scaled_ceil(r, t)) / t);
        if (r.is_zero()) {
            e.estimate = 0.0;
            e.error_bound = e.samples.back();
            return e;
        }
        const double t_last = schedule.back();
        const std::size_t m = e.samples.size();
        e.estimate = e.samples[m - 1];
        e.error_bound = lc_.D * static_cast<double>(r.size()) / t_last + std::abs(e.samples[m - 1] - e.samples[m - 2]);
        return e;
    }

private:
    void check_dims(const RateVector& r) const {
        if (r.size() != dims())
            throw PreconditionError("rate vector has " + std::to_string(r.size()) + " entries, expected " +
                                    std::to_string(dims()));
    }

    const EvacTable* table_;
    LipschitzConstants lc_;
};

inline ThatEstimate estimate_that(const LimitAnalyzer& an, const RateVector& r, std::vector<double> schedule = {}) {
    return an.estimate(r, std::move(schedule));
}

struct HomogeneityResult {
    double gap = 0.0;
    double tolerance = 0.0;
    bool pass = true;
};

/// |T(rho r) - rho T(r)| against the sum of both error bounds.
inline HomogeneityResult homogeneity_check(const LimitAnalyzer& an, const RateVector& r, double rho,
                                           const std::vector<double>& schedule = {}) {
    if (!(rho >= 0.0)) throw PreconditionError("rho must be nonnegative");
    const ThatEstimate base = an.estimate(r, schedule);
    const ThatEstimate scaled = an.estimate(rho * r, schedule);
    HomogeneityResult h;
    h.gap = std::abs(scaled.estimate - rho * base.estimate);
    h.tolerance = scaled.error_bound + rho * base.error_bound;
    h.pass = h.gap <= h.tolerance + 1e-12;
    return h;
}

struct ConvexityResult {
    double slack = 0.0;
    double tolerance = 0.0;
    bool pass = true;
};

/// p T(r1) + (1-p) T(r2) - T(p r1 + (1-p) r2), passing when >= -(combined bounds).
inline ConvexityResult convexity_check(const LimitAnalyzer& an, const RateVector& r1, const RateVector& r2, double p,
                                       const std::vector<double>& schedule = {}) {
    if (!(p >= 0.0 && p <= 1.0)) throw PreconditionError("p must be in [0, 1]");
    const ThatEstimate e1 = an.estimate(r1, schedule);
    const ThatEstimate e2 = an.estimate(r2, schedule);
    const ThatEstimate em = an.estimate(p * r1 + (1.0 - p) * r2, schedule);
    ConvexityResult c;
    c.slack = p * e1.estimate + (1.0 - p) * e2.estimate - em.estimate;
    c.tolerance = p * e1.error_bound + (1.0 - p) * e2.error_bound + em.error_bound;
    c.pass = c.slack >= -c.tolerance - 1e-12;
    return c;
}

struct MembershipResult {
    RateVector point;
    double estimate = 0.0;
    double bound = 0.0;
    Membership verdict = Membership::boundary;
};

inline MembershipResult region_membership(const LimitAnalyzer& an, const RateVector& r,
                                          const std::vector<double>& schedule = {}) {
    const ThatEstimate e = an.estimate(r, schedule);
    MembershipResult m{r, e.estimate, e.error_bound, Membership::boundary};
    if (e.estimate + e.error_bound < 1.0)
        m.verdict = Membership::inside;
    else if (e.estimate - e.error_bound > 1.0)
        m.verdict = Membership::outside;
    return m;
}

struct DirectionResult {
    RateVector direction;
    double estimate = 0.0;
    double error_bound = 0.0;
    bool unbounded = false;           ///< estimate indistinguishable from 0
    double rho_star = 0.0;            ///< 1 / estimate (inf when unbounded)
    double rho_error = 0.0;           ///< half-width of [1/(est+b), 1/(est-b)] about rho_star
};

struct RegionReport {
    std::vector<DirectionResult> directions;
    bool heuristic_bounds = true;
};

/// Boundary radius along each unit-sum direction u is 1 / T(u).
inline RegionReport sweep_region_boundary(const LimitAnalyzer& an, const std::vector<RateVector>& directions,
                                          const std::vector<double>& schedule = {}, unsigned jobs = 1) {
    for (const auto& u : directions) {
        if (u.is_zero()) throw PreconditionError("direction must be nonzero");
        if (std::abs(u.sum() - 1.0) > 1e-9) throw PreconditionError("direction " + u.to_string() + " must sum to 1");
    }
    RegionReport rep;
    rep.directions = parallel_map(jobs, directions.size(), [&](std::size_t i) {
        const ThatEstimate e = an.estimate(directions[i], schedule);
        DirectionResult d;
        d.direction = directions[i];
        d.estimate = e.estimate;
        d.error_bound = e.error_bound;
        d.unbounded = e.estimate - e.error_bound <= 0.0;
        if (d.unbounded) {
            d.rho_star = std::numeric_limits<double>::infinity();
            d.rho_error = std::numeric_limits<double>::infinity();
        } else {
            d.rho_star = 1.0 / e.estimate;
            const double lo = 1.0 / (e.estimate + e.error_bound), hi = 1.0 / (e.estimate - e.error_bound);
            d.rho_error = std::max(d.rho_star - lo, hi - d.rho_star);
        }
        return d;
    });
    return rep;
}

}  // namespace evac
