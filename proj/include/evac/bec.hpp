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
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "evac/limit.hpp"
#include "evac/model.hpp"
#include "evac/parallel.hpp"
#include "evac/policy.hpp"
#include "evac/sim.hpp"
#include "evac/solver.hpp"

namespace evac {

/**
 * Broadcast erasure channel with per-slot feedback. pattern_pmf[mask] is the
 * probability that exactly the receivers in `mask` (bit i = receiver i+1)
 * erase a transmitted symbol. An empty slot is never erased.
 */
struct BecSpec {
    std::size_t n = 1;
    std::vector<double> pattern_pmf{1.0, 0.0};
    int L = 1024;

    double marginal_erasure(std::size_t i) const {
        double e = 0.0;
        for (std::size_t m = 0; m < pattern_pmf.size(); ++m)
            if (m >> i & 1U) e += pattern_pmf[m];
        return e;
    }

    double max_erasure() const {
        double e = 0.0;
        for (std::size_t i = 0; i < n; ++i) e = std::max(e, marginal_erasure(i));
        return e;
    }

    void validate() const {
        if (n == 0 || n > 16) throw PreconditionError("BEC needs 1..16 receivers");
        if (pattern_pmf.size() != (std::size_t{1} << n))
            throw PreconditionError("pattern pmf needs 2^n = " + std::to_string(std::size_t{1} << n) + " entries");
        double mass = 0.0;
        for (double p : pattern_pmf) {
            if (!(p >= 0.0) || !std::isfinite(p)) throw PreconditionError("pattern pmf entries must be >= 0");
            mass += p;
        }
        if (std::abs(mass - 1.0) > kMassTolerance)
            throw PreconditionError("pattern pmf sums to " + std::to_string(mass) + ", expected 1");
        for (std::size_t i = 0; i < n; ++i)
            if (!(marginal_erasure(i) < 1.0))
                throw PreconditionError("receiver " + std::to_string(i + 1) + " erases every symbol");
        if (L < 1) throw PreconditionError("payload length must be positive");
    }
};

/// Independent erasures: the product pmf over receiver subsets.
inline BecSpec make_independent_bec(const std::vector<double>& eps, int L = 1024) {
    BecSpec b;
    b.n = eps.size();
    b.L = L;
    if (b.n == 0 || b.n > 16) throw PreconditionError("BEC needs 1..16 receivers");
    for (double e : eps)
        if (!(e >= 0.0 && e < 1.0)) throw PreconditionError("erasure probabilities must be in [0, 1)");
    b.pattern_pmf.assign(std::size_t{1} << b.n, 1.0);
    for (std::size_t m = 0; m < b.pattern_pmf.size(); ++m)
        for (std::size_t i = 0; i < b.n; ++i) b.pattern_pmf[m] *= (m >> i & 1U) ? eps[i] : 1.0 - eps[i];
    b.validate();
    return b;
}

inline std::string erasure_outcome_name(std::size_t mask) {
    if (mask == 0) return "clear";
    std::string s = "erase";
    for (std::size_t i = 0; (mask >> i) != 0; ++i)
        if (mask >> i & 1U) s += (s.size() == 5 ? "_" : "+") + std::to_string(i + 1);
    return s;
}

namespace detail {

inline std::vector<OutcomeId> erasure_outcomes(SystemBuilder& b, const BecSpec& bec) {
    std::vector<OutcomeId> w;
    for (std::size_t m = 0; m < bec.pattern_pmf.size(); ++m) w.push_back(b.outcome(erasure_outcome_name(m)));
    return w;
}

inline std::vector<KernelEntry> erasure_row(const BecSpec& bec, const std::vector<OutcomeId>& w, StateId s) {
    std::vector<KernelEntry> row;
    for (std::size_t m = 0; m < bec.pattern_pmf.size(); ++m)
        if (bec.pattern_pmf[m] > 0.0) row.push_back({bec.pattern_pmf[m], w[m], s});
    return row;
}

inline EffectRule move_rule(StateId s, ControlId g, OutcomeId w, std::vector<int> take, std::vector<int> give = {},
                            EffectGuard guard = {}) {
    EffectRule r;
    r.state = s;
    r.control = g;
    r.action = 1;
    r.outcome = w;
    r.take = std::move(take);
    r.give = std::move(give);
    r.guard = std::move(guard);
    return r;
}

}  // namespace detail

/// One state; controls idle and tx_j (action "send"); class j leaves when
/// receiver j does not erase the symbol.
inline SystemSpec make_bec_spec(const BecSpec& bec) {
    bec.validate();
    SystemBuilder b("bec", bec.n);
    const StateId s0 = b.state("s0");
    const ControlId idle = b.control("idle");
    std::vector<ControlId> tx;
    for (std::size_t j = 0; j < bec.n; ++j) tx.push_back(b.control("tx_" + std::to_string(j + 1), {"send"}));
    const auto w = detail::erasure_outcomes(b, bec);
    b.transition(s0, idle, s0, w[0]);
    for (std::size_t j = 0; j < bec.n; ++j) {
        b.transition(s0, tx[j], detail::erasure_row(bec, w, s0));
        for (std::size_t m = 0; m < w.size(); ++m) {
            if (m >> j & 1U || !(bec.pattern_pmf[m] > 0.0)) continue;
            std::vector<int> take(bec.n, 0);
            take[j] = 1;
            b.effect(detail::move_rule(s0, tx[j], w[m], take));
        }
    }
    return b.build();
}

/**
 * Two-receiver coded system. Classes: p1, p2 (not yet received by anyone),
 * o1 (for receiver 1, held by receiver 2 only), o2 (for receiver 2, held by
 * receiver 1 only). tx_xor sends o1 + o2; each receiver cancels the packet
 * it already holds.
 */
inline SystemSpec make_xor2_spec(const BecSpec& bec) {
    bec.validate();
    if (bec.n != 2) throw UnsupportedError("xor2 coding needs exactly 2 receivers, got " + std::to_string(bec.n));
    SystemBuilder b("bec_xor2", 4);
    b.inputs(2);
    const StateId s0 = b.state("s0");
    const ControlId idle = b.control("idle");
    const ControlId tp1 = b.control("tx_p1", {"send"}), tp2 = b.control("tx_p2", {"send"});
    const ControlId to1 = b.control("tx_o1", {"send"}), to2 = b.control("tx_o2", {"send"});
    const ControlId tx = b.control("tx_xor", {"send"});
    const auto w = detail::erasure_outcomes(b, bec);
    b.transition(s0, idle, s0, w[0]);
    for (ControlId g : {tp1, tp2, to1, to2, tx}) b.transition(s0, g, detail::erasure_row(bec, w, s0));
    constexpr std::size_t ok = 0, e1 = 1, e2 = 2;
    auto add = [&](ControlId g, std::size_t mask, std::vector<int> take, std::vector<int> give = {},
                   EffectGuard guard = {}) {
        if (bec.pattern_pmf[mask] > 0.0) b.effect(detail::move_rule(s0, g, w[mask], take, give, guard));
    };
    add(tp1, ok, {1, 0, 0, 0});
    add(tp1, e2, {1, 0, 0, 0});
    add(tp1, e1, {1, 0, 0, 0}, {0, 0, 1, 0});
    add(tp2, ok, {0, 1, 0, 0});
    add(tp2, e1, {0, 1, 0, 0});
    add(tp2, e2, {0, 1, 0, 0}, {0, 0, 0, 1});
    add(to1, ok, {0, 0, 1, 0});
    add(to1, e2, {0, 0, 1, 0});
    add(to2, ok, {0, 0, 0, 1});
    add(to2, e1, {0, 0, 0, 1});
    EffectGuard both;
    both.positive_classes = {2, 3};
    add(tx, ok, {0, 0, 1, 1}, {}, both);
    add(tx, e2, {0, 0, 1, 0}, {}, both);
    add(tx, e1, {0, 0, 0, 1}, {}, both);
    return b.build();
}

/// Round robin: slot t belongs to class t mod n; an empty owner idles.
class OboPolicy : public SlotPolicy {
public:
    explicit OboPolicy(const SystemSpec& spec) : spec_(&spec), idle_(spec.control_id("idle")) {
        for (std::size_t j = 0; j < spec.inputs(); ++j) tx_.push_back(spec.control_id("tx_" + std::to_string(j + 1)));
    }

    Decision decide(const SlotView& v) override {
        const std::size_t j = owner(v.t);
        if (v.counts[j] > 0) return {tx_[j], 1};
        return {idle_, kNullAction};
    }

protected:
    std::size_t owner(long t) const { return static_cast<std::size_t>(t) % tx_.size(); }

    const SystemSpec* spec_;
    ControlId idle_;
    std::vector<ControlId> tx_;
};

/// OBO plus one empty-slot end marker per class in its next owned slot
/// after the class empties. Done once every class has signalled.
class OboEndSignalPolicy final : public OboPolicy {
public:
    explicit OboEndSignalPolicy(const SystemSpec& spec) : OboPolicy(spec), signalled_(tx_.size(), false) {}

    void reset() override { std::fill(signalled_.begin(), signalled_.end(), false); }

    Decision decide(const SlotView& v) override {
        const std::size_t j = owner(v.t);
        if (v.counts[j] > 0) return {tx_[j], 1};
        signalled_[j] = true;
        return {idle_, kNullAction};
    }

    bool finished(const SlotView&) const override {
        return std::all_of(signalled_.begin(), signalled_.end(), [](bool b) { return b; });
    }

private:
    std::vector<bool> signalled_;
};

/// Uncoded packets first, then XOR pairs, then leftovers.
class Xor2Policy final : public SlotPolicy {
public:
    explicit Xor2Policy(const SystemSpec& spec)
        : idle_(spec.control_id("idle")),
          tp1_(spec.control_id("tx_p1")),
          tp2_(spec.control_id("tx_p2")),
          to1_(spec.control_id("tx_o1")),
          to2_(spec.control_id("tx_o2")),
          tx_(spec.control_id("tx_xor")) {}

    Decision decide(const SlotView& v) override {
        const auto& k = v.counts;
        if (k[0] > 0) return {tp1_, 1};
        if (k[1] > 0) return {tp2_, 1};
        if (k[2] > 0 && k[3] > 0) return {tx_, 1};
        if (k[2] > 0) return {to1_, 1};
        if (k[3] > 0) return {to2_, 1};
        return {idle_, kNullAction};
    }

private:
    ControlId idle_, tp1_, tp2_, to1_, to2_, tx_;
};

/// Expected extra slots for announcing the batch sizes k to every receiver.
inline double bootstrap_charge(const BecSpec& bec, const CountVector& k) {
    double bits = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i) bits += std::log2(static_cast<double>(k[i]) + 1.0);
    return std::ceil(bits - 1e-12) / (1.0 - bec.max_erasure());
}

struct EvacStats {
    double mean = 0.0;
    double sd = 0.0;
    long reps = 0;
    bool all_delivered = true;
};

using PolicyFactory = std::function<std::unique_ptr<SlotPolicy>()>;

/// Mean evacuation time from (k, initial state) over independent replications.
inline EvacStats evacuation_stats(const SystemSpec& spec, const PolicyFactory& make, const CountVector& k, long reps,
                                  std::uint64_t seed, unsigned jobs = 1, long max_slots = 10'000'000) {
    if (reps < 1) throw PreconditionError("reps must be >= 1");
    constexpr long chunk = 1000;
    const std::size_t chunks = static_cast<std::size_t>((reps + chunk - 1) / chunk);
    struct Part {
        double sum = 0, sq = 0;
        bool ok = true;
    };
    const auto parts = parallel_map(jobs, chunks, [&](std::size_t c) {
        auto pol = make();
        Part p;
        const long lo = static_cast<long>(c) * chunk, hi = std::min(reps, lo + chunk);
        for (long r = lo; r < hi; ++r) {
            RngStream rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
            const EvacRun run = simulate_evacuation(spec, *pol, k, spec.initial_state(), rng, max_slots);
            p.ok = p.ok && run.completed;
            const double t = static_cast<double>(run.slots);
            p.sum += t;
            p.sq += t * t;
        }
        return p;
    });
    EvacStats st;
    st.reps = reps;
    double sum = 0, sq = 0;
    for (const auto& p : parts) {
        sum += p.sum;
        sq += p.sq;
        st.all_delivered = st.all_delivered && p.ok;
    }
    st.mean = sum / static_cast<double>(reps);
    st.sd = reps > 1 ? std::sqrt(std::max(0.0, (sq - reps * st.mean * st.mean) / static_cast<double>(reps - 1))) : 0.0;
    return st;
}

struct QleEstimate {
    long l0 = 0;
    long l = 0;
    RateVector r;
    double delta = 0.0;
    long reps = 0;
    CountVector batch;
    long batches = 0;
    double that = 0.0;
    double q_hat = 0.0;
    double ci_halfwidth = 0.0;
    bool no_guarantee = false;  ///< T(r) + 3 delta >= 1
};

/// Smallest l0 >= 1 with critical(ceil(l0 r)) / l0 <= that + delta inside the table box.
inline std::optional<long> choose_l0(const EvacTable& table, const RateVector& r, double that, double delta) {
    for (long l0 = 1;; ++l0) {
        const CountVector k = scaled_ceil(r, static_cast<double>(l0));
        if (!table.input_box().contains(k)) return std::nullopt;
        if (table.critical(k) / static_cast<double>(l0) <= that + delta + 1e-12) return l0;
    }
}

enum class BatchPolicy { optimal, obo };

/**
 * Batch code of length l: alpha = floor(l / l0) + 1 batches of ceil(l0 r)
 * packets, each evacuated by the chosen policy; an error is a total batch time
 * above l.
 */
inline QleEstimate estimate_qle(const SystemSpec& spec, const EvacTable& table, const RateVector& r, long l0, long l,
                                double delta, long reps, std::uint64_t seed, unsigned jobs = 1,
                                BatchPolicy which = BatchPolicy::optimal) {
    if (l0 < 1 || l < 1) throw PreconditionError("l0 and l must be positive");
    if (reps < 1) throw PreconditionError("reps must be >= 1");
    if (!(delta > 0.0)) throw PreconditionError("delta must be positive");
    QleEstimate q;
    q.l0 = l0;
    q.l = l;
    q.r = r;
    q.delta = delta;
    q.reps = reps;
    q.batch = scaled_ceil(r, static_cast<double>(l0));
    q.batches = l / l0 + 1;
    q.that = LimitAnalyzer(table).estimate(r).estimate;
    q.no_guarantee = q.that + 3.0 * delta >= 1.0;
    if (which == BatchPolicy::optimal && !table.input_box().contains(q.batch))
        throw RangeError("batch " + q.batch.to_string() + " outside table box " + table.input_kmax().to_string());
    const CountVector k = table.embed(q.batch);
    const auto fails = parallel_map(jobs, static_cast<std::size_t>(reps), [&](std::size_t rep) {
        std::unique_ptr<SlotPolicy> pol;
        if (which == BatchPolicy::optimal)
            pol = std::make_unique<EvacPolicy>(spec, table);
        else
            pol = std::make_unique<OboPolicy>(spec);
        RngStream rng(derive_seed(seed, rep));
        long total = 0;
        for (long j = 0; j < q.batches && total <= l; ++j)
            total += simulate_evacuation(spec, *pol, k, spec.initial_state(), rng).slots;
        return static_cast<char>(total > l);
    });
    long bad = 0;
    for (char f : fails) bad += f;
    q.q_hat = static_cast<double>(bad) / static_cast<double>(reps);
    q.ci_halfwidth = 1.96 * std::sqrt(q.q_hat * (1.0 - q.q_hat) / static_cast<double>(reps));
    return q;
}

struct CompareOptions {
    double delta = 0.01;
    long qle_length = 20000;
    long qle_reps = 200;
    double qle_threshold = 0.05;
    double qle_step = 0.01;
    double stable_step = 0.02;
    long horizon = 200000;
    double tolerance = 0.05;
    std::uint64_t seed = 1;
    unsigned jobs = 1;
};

struct DirectionCapacity {
    RateVector direction;
    double radius = 0.0;        ///< 1 / T(u)
    double radius_bound = 0.0;
    double qle_rate = 0.0;      ///< largest grid rate with q_hat <= threshold
    double stable_rate = 0.0;   ///< largest rate of the leading run of stable grid points
    double spread = 0.0;        ///< max pairwise difference of the three
    bool agree = false;
    double mean_bootstrap_charge = 0.0;
    bool buffer_ordering_holds = true;  ///< Q(t) <= Q_B(t) on every simulated slot
};

struct CapacityReport {
    std::vector<DirectionCapacity> directions;
    double tolerance = 0.0;
    bool all_agree() const {
        return std::all_of(directions.begin(), directions.end(), [](const DirectionCapacity& d) { return d.agree; });
    }
};

inline CapacityReport capacity_stability_compare(const BecSpec& bec, const SystemSpec& spec, const EvacTable& table,
                                                 const std::vector<RateVector>& directions,
                                                 const CompareOptions& opt = {}) {
    const LimitAnalyzer an(table);
    const RegionReport region = sweep_region_boundary(an, directions, {}, opt.jobs);
    CapacityReport rep;
    rep.tolerance = opt.tolerance;
    for (std::size_t d = 0; d < directions.size(); ++d) {
        const RateVector& u = directions[d];
        DirectionCapacity c;
        c.direction = u;
        c.radius = region.directions[d].rho_star;
        c.radius_bound = region.directions[d].rho_error;
        double umax = 0.0;
        for (double x : u.values()) umax = std::max(umax, x);
        const double cap = std::isfinite(c.radius) ? std::min(1.2 * c.radius, 1.0 / umax) : 1.0 / umax;
        const std::uint64_t dseed = derive_seed(opt.seed, d);

        // q_hat is treated as monotone in the rate, so bisect the grid.
        auto q_ok = [&](long i) {
            const RateVector r = (static_cast<double>(i) * opt.qle_step) * u;
            const double that = an.estimate(r).estimate;
            const auto l0 = choose_l0(table, r, that, opt.delta);
            if (!l0) return false;
            const auto q = estimate_qle(spec, table, r, *l0, opt.qle_length, opt.delta, opt.qle_reps,
                                        derive_seed(dseed, static_cast<std::uint64_t>(i)), opt.jobs);
            return q.q_hat <= opt.qle_threshold;
        };
        long lo = 0, hi = static_cast<long>(std::floor(cap / opt.qle_step + 1e-9));
        if (q_ok(hi)) {
            lo = hi;
        } else {
            while (hi - lo > 1) {
                const long mid = (lo + hi) / 2;
                (q_ok(mid) ? lo : hi) = mid;
            }
        }
        c.qle_rate = static_cast<double>(lo) * opt.qle_step;

        const long steps = static_cast<long>(std::floor(cap / opt.stable_step + 1e-9));
        std::uint64_t idx = 1u << 20;
        for (long i = 1; i <= steps; ++i) {
            const RateVector r = (static_cast<double>(i) * opt.stable_step) * u;
            const auto tr = run_epoch_policy(spec, table, ArrivalProcess::bernoulli(r), opt.horizon,
                                             derive_seed(dseed, idx + static_cast<std::uint64_t>(i)));
            for (std::size_t t = 0; t < tr.Q.size(); ++t)
                if (tr.Q[t] > tr.Q_buffer[t]) c.buffer_ordering_holds = false;
            if (stability_verdict(tr).verdict != Verdict::stable) break;
            c.stable_rate = static_cast<double>(i) * opt.stable_step;
            const auto ep = tr.completed_epochs();
            double charge = 0.0;
            for (const auto& e : ep) charge += bootstrap_charge(bec, e.k);
            c.mean_bootstrap_charge = ep.empty() ? 0.0 : charge / static_cast<double>(ep.size());
        }
        const double a = c.radius, b = c.qle_rate, s = c.stable_rate;
        c.spread = std::max({std::abs(a - b), std::abs(a - s), std::abs(b - s)});
        c.agree = std::isfinite(c.spread) && c.spread <= opt.tolerance;
        rep.directions.push_back(c);
    }
    return rep;
}

}  // namespace evac
