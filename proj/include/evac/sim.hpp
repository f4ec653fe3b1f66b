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

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "evac/model.hpp"
#include "evac/policy.hpp"
#include "evac/solver.hpp"

namespace evac {

/// Arrivals to one input class: an i.i.d. pmf over {0, 1, ...} or a
/// periodic script indexed by absolute slot (A(t) = pattern[t mod len]).
struct ClassArrivals {
    std::vector<double> pmf{1.0};
    std::vector<int> pattern;

    bool scripted() const noexcept { return !pattern.empty(); }
    double rate() const {
        double m = 0.0;
        if (scripted()) {
            for (int x : pattern) m += x;
            return m / static_cast<double>(pattern.size());
        }
        for (std::size_t j = 0; j < pmf.size(); ++j) m += static_cast<double>(j) * pmf[j];
        return m;
    }
};

/**
 * Exogenous arrivals to the input classes. A(0) is drawn like any other slot
 * unless a fixed initial vector is configured.
 */
class ArrivalProcess {
public:
    ArrivalProcess() = default;
    explicit ArrivalProcess(std::vector<ClassArrivals> classes) : classes_(std::move(classes)) { validate(); }

    static ArrivalProcess none(std::size_t n) { return ArrivalProcess(std::vector<ClassArrivals>(n)); }

    static ArrivalProcess bernoulli(const RateVector& r) {
        std::vector<ClassArrivals> c(r.size());
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (r[i] > 1.0) throw PreconditionError("Bernoulli rate must be at most 1");
            c[i].pmf = {1.0 - r[i], r[i]};
        }
        return ArrivalProcess(std::move(c));
    }

    static ArrivalProcess iid(const std::vector<std::vector<double>>& pmfs) {
        std::vector<ClassArrivals> c(pmfs.size());
        for (std::size_t i = 0; i < pmfs.size(); ++i) c[i].pmf = pmfs[i];
        return ArrivalProcess(std::move(c));
    }

    ArrivalProcess& script(std::size_t cls, std::vector<int> pattern) {
        if (pattern.empty()) throw PreconditionError("scripted pattern must be nonempty");
        for (int x : pattern)
            if (x < 0) throw PreconditionError("scripted arrivals must be nonnegative");
        classes_.at(cls).pattern = std::move(pattern);
        return *this;
    }

    ArrivalProcess& with_initial(CountVector k) {
        if (k.size() != classes_.size()) throw PreconditionError("initial vector has wrong dimension");
        initial_ = std::move(k);
        return *this;
    }

    std::size_t classes() const noexcept { return classes_.size(); }
    const ClassArrivals& cls(std::size_t i) const { return classes_.at(i); }
    const std::optional<CountVector>& initial() const noexcept { return initial_; }

    bool scripted() const {
        return std::any_of(classes_.begin(), classes_.end(), [](const ClassArrivals& c) { return c.scripted(); });
    }

    RateVector rate() const {
        std::vector<double> r;
        for (const auto& c : classes_) r.push_back(c.rate());
        return RateVector(std::move(r));
    }

    /// A(t). Every i.i.d. class consumes exactly one draw per slot.
    CountVector sample(long t, RngStream& rng) const {
        CountVector a(classes_.size());
        for (std::size_t i = 0; i < classes_.size(); ++i) {
            const auto& c = classes_[i];
            if (c.scripted())
                a[i] = c.pattern[static_cast<std::size_t>(t) % c.pattern.size()];
            else
                a[i] = static_cast<int>(rng.discrete(c.pmf));
        }
        if (t == 0 && initial_) return *initial_;
        return a;
    }

private:
    void validate() const {
        for (const auto& c : classes_) {
            if (c.scripted()) continue;
            if (c.pmf.empty()) throw PreconditionError("arrival pmf must be nonempty");
            double mass = 0.0;
            for (double p : c.pmf) {
                if (!(p >= 0.0) || !std::isfinite(p)) throw PreconditionError("arrival pmf entries must be >= 0");
                mass += p;
            }
            if (std::abs(mass - 1.0) > kMassTolerance) throw PreconditionError("arrival pmf mass must be 1");
        }
    }

    std::vector<ClassArrivals> classes_;
    std::optional<CountVector> initial_;
};

struct EpochRecord {
    long m = 0;
    long start = 0;
    long T = 0;
    StateId S = 0;
    CountVector k;
    bool fallback = false;   ///< k exceeded the table box and was evacuated in pieces
    bool truncated = false;  ///< cut by the horizon
};

/**
 * Slot-level record. In slot t arrivals A(t) join first, then Q(t) is
 * recorded, then one control is applied; departures happen at the end of
 * the slot.
 */
struct SimTrace {
    long horizon = 0;
    std::uint64_t seed = 0;
    std::size_t classes = 0;
    bool epoch_policy = false;
    bool scripted_arrivals = false;
    std::vector<long> Q;
    std::vector<int> Q_flat;          ///< horizon x classes, row major
    std::vector<long> arrivals;       ///< sum of A(t)
    std::vector<long> departures;     ///< packets leaving at the end of slot t
    std::vector<long> epoch_of;       ///< epoch index of slot t (-1 for generic runs)
    std::vector<long> Q_buffer;       ///< Q(t) plus packets of the running epoch already delivered
    std::vector<long> class_arrivals;
    std::vector<long> class_outflow;  ///< net decrease of each class over the run
    std::vector<EpochRecord> epochs;

    CountVector Q_vec(long t) const {
        std::vector<int> v(Q_flat.begin() + t * static_cast<long>(classes),
                           Q_flat.begin() + (t + 1) * static_cast<long>(classes));
        return CountVector(std::move(v));
    }

    std::vector<EpochRecord> completed_epochs() const {
        std::vector<EpochRecord> out;
        for (const auto& e : epochs)
            if (!e.truncated) out.push_back(e);
        return out;
    }
};

namespace detail {

inline void reserve_trace(SimTrace& tr, const SystemSpec& spec, long horizon, std::uint64_t seed) {
    tr.horizon = horizon;
    tr.seed = seed;
    tr.classes = spec.classes();
    const auto h = static_cast<std::size_t>(horizon);
    tr.Q.reserve(h);
    tr.Q_flat.reserve(h * spec.classes());
    tr.arrivals.reserve(h);
    tr.departures.reserve(h);
    tr.epoch_of.reserve(h);
    tr.class_arrivals.assign(spec.classes(), 0);
    tr.class_outflow.assign(spec.classes(), 0);
}

inline void add_inputs(CountVector& k, const CountVector& a) {
    for (std::size_t i = 0; i < a.size(); ++i) k[i] += a[i];
}

inline void record_slot(SimTrace& tr, const CountVector& present, long arrived, long epoch) {
    tr.Q.push_back(present.total());
    for (std::size_t i = 0; i < present.size(); ++i) tr.Q_flat.push_back(present[i]);
    tr.arrivals.push_back(arrived);
    tr.epoch_of.push_back(epoch);
}

}  // namespace detail

struct EpochOptions {
    std::optional<StateId> initial_state;
};

/**
 * Epoch-based policy: each epoch evacuates exactly the packets present at its
 * first slot with the table's optimal policy; later arrivals wait for the next
 * epoch. An empty epoch lasts one idle slot. A backlog beyond the table box is
 * evacuated in box-sized pieces one after another and the epoch is flagged.
 */
inline SimTrace run_epoch_policy(const SystemSpec& spec, const EvacTable& table, const ArrivalProcess& arrivals,
                                 long horizon, std::uint64_t seed, const EpochOptions& opt = {}) {
    require_valid(spec);
    if (horizon <= 0) throw PreconditionError("horizon must be positive");
    if (arrivals.classes() != spec.inputs()) throw PreconditionError("arrival process has wrong number of classes");
    if (table.classes() != spec.classes() || table.num_states() != spec.num_states())
        throw PreconditionError("table does not match spec '" + spec.name() + "'");
    const EvacPolicy policy(spec, table);
    RngStream arr_rng(derive_seed(seed, 0)), out_rng(derive_seed(seed, 1));
    SimTrace tr;
    detail::reserve_trace(tr, spec, horizon, seed);
    tr.epoch_policy = true;
    tr.scripted_arrivals = arrivals.scripted();
    tr.Q_buffer.reserve(static_cast<std::size_t>(horizon));

    const std::size_t n = spec.classes(), m_in = spec.inputs();
    StateId s = opt.initial_state.value_or(spec.initial_state());
    CountVector waiting(n), piece(n), rest(n);
    bool in_epoch = false;
    long delivered = 0;
    EpochRecord cur;
    const CountVector cap = table.input_kmax();

    auto next_piece = [&] {
        for (std::size_t i = 0; i < n; ++i) {
            const int take = i < m_in ? std::min(rest[i], cap[i]) : rest[i];
            piece[i] = take;
            rest[i] -= take;
        }
    };

    for (long t = 0; t < horizon; ++t) {
        const CountVector a = arrivals.sample(t, arr_rng);
        detail::add_inputs(waiting, a);
        for (std::size_t i = 0; i < m_in; ++i) tr.class_arrivals[i] += a[i];
        if (!in_epoch) {
            cur = EpochRecord{};
            cur.m = static_cast<long>(tr.epochs.size());
            cur.start = t;
            cur.k = CountVector(std::vector<int>(waiting.values().begin(), waiting.values().begin() + static_cast<long>(m_in)));
            cur.fallback = !table.input_box().contains(cur.k);
            rest = waiting;
            waiting = CountVector(n);
            next_piece();
            in_epoch = true;
            delivered = 0;
        }
        CountVector present = piece + rest + waiting;
        detail::record_slot(tr, present, a.total(), cur.m);
        tr.Q_buffer.push_back(tr.Q.back() + delivered);

        const Decision d = piece.is_zero() ? idle_decision(spec, s) : policy.decide(piece, s);
        SlotResult r = simulate_slot(spec, piece, s, d.control, d.action, out_rng);
        const long left = piece.total() - r.counts.total();
        for (std::size_t i = 0; i < n; ++i) tr.class_outflow[i] += piece[i] - r.counts[i];
        tr.departures.push_back(left);
        delivered += left;
        piece = std::move(r.counts);
        s = r.state;
        ++cur.T;
        if (piece.is_zero() && !rest.is_zero()) next_piece();
        if (piece.is_zero()) {
            cur.S = s;
            tr.epochs.push_back(cur);
            in_epoch = false;
        }
    }
    if (in_epoch) {
        cur.S = s;
        cur.truncated = true;
        tr.epochs.push_back(cur);
    }
    return tr;
}

/// Runs an arbitrary slot-level rule on everything present.
inline SimTrace run_generic_policy(const SystemSpec& spec, SlotPolicy& policy, const ArrivalProcess& arrivals,
                                   long horizon, std::uint64_t seed, std::optional<StateId> initial_state = {}) {
    require_valid(spec);
    if (horizon <= 0) throw PreconditionError("horizon must be positive");
    if (arrivals.classes() != spec.inputs()) throw PreconditionError("arrival process has wrong number of classes");
    RngStream arr_rng(derive_seed(seed, 0)), out_rng(derive_seed(seed, 1));
    SimTrace tr;
    detail::reserve_trace(tr, spec, horizon, seed);
    tr.scripted_arrivals = arrivals.scripted();
    policy.reset();
    CountVector k(spec.classes());
    StateId s = initial_state.value_or(spec.initial_state());
    for (long t = 0; t < horizon; ++t) {
        const CountVector a = arrivals.sample(t, arr_rng);
        detail::add_inputs(k, a);
        for (std::size_t i = 0; i < a.size(); ++i) tr.class_arrivals[i] += a[i];
        detail::record_slot(tr, k, a.total(), -1);
        const Decision d = policy.decide(SlotView{t, k, s});
        if (!spec.allows(s, d.control) || d.action >= spec.num_actions(d.control))
            throw ContractError("policy chose an unavailable control/action at slot " + std::to_string(t) +
                                " in state '" + spec.state_name(s) + "'");
        SlotResult r = simulate_slot(spec, k, s, d.control, d.action, out_rng);
        for (std::size_t i = 0; i < k.size(); ++i) tr.class_outflow[i] += k[i] - r.counts[i];
        tr.departures.push_back(k.total() - r.counts.total());
        k = std::move(r.counts);
        s = r.state;
    }
    return tr;
}

/// Largest |Q(t+1) - Q(t) - arrivals(t+1) + departures(t)| over the trace.
inline long conservation_error(const SimTrace& tr) {
    long worst = tr.Q.empty() ? 0 : std::abs(tr.Q[0] - tr.arrivals[0]);
    for (std::size_t t = 0; t + 1 < tr.Q.size(); ++t)
        worst = std::max(worst, std::abs(tr.Q[t + 1] - tr.Q[t] - tr.arrivals[t + 1] + tr.departures[t]));
    return worst;
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    std::size_t n = 0;
};

template <class X, class Y>
LinearFit least_squares(const std::vector<X>& x, const std::vector<Y>& y) {
    LinearFit f;
    f.n = x.size();
    if (f.n == 0) return f;
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < f.n; ++i) {
        mx += static_cast<double>(x[i]);
        my += static_cast<double>(y[i]);
    }
    mx /= static_cast<double>(f.n);
    my /= static_cast<double>(f.n);
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < f.n; ++i) {
        const double dx = static_cast<double>(x[i]) - mx, dy = static_cast<double>(y[i]) - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    f.slope = sxx > 0 ? sxy / sxx : 0.0;
    f.intercept = my - f.slope * mx;
    f.r2 = (sxx > 0 && syy > 0) ? (sxy * sxy) / (sxx * syy) : 0.0;
    return f;
}

struct DriftBin {
    long lo = 0, hi = 0;  ///< T_m range, inclusive
    std::size_t count = 0;
    double mean_next = 0.0;
};

struct DriftFit {
    std::vector<DriftBin> bins;
    double slope = 0.0;
    double U_hat = 0.0;  ///< intercept
    double delta_hat = 1.0;
    std::size_t pairs = 0;
    bool conclusive = false;  ///< at least 200 completed epochs
};

/// Affine least-squares fit of T_{m+1} on T_m over completed epochs, plus
/// conditional means over (up to) `nbins` equal-count bins of T_m.
inline DriftFit estimate_drift(const SimTrace& tr, std::size_t nbins = 10) {
    const auto ep = tr.completed_epochs();
    DriftFit d;
    d.conclusive = ep.size() >= 200;
    std::vector<long> x, y;
    for (std::size_t m = 0; m + 1 < ep.size(); ++m) {
        x.push_back(ep[m].T);
        y.push_back(ep[m + 1].T);
    }
    d.pairs = x.size();
    if (x.empty()) {
        d.conclusive = false;
        return d;
    }
    const LinearFit f = least_squares(x, y);
    d.slope = f.slope;
    d.U_hat = f.intercept;
    d.delta_hat = 1.0 - f.slope;

    std::vector<std::size_t> order(x.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    const std::size_t per = std::max<std::size_t>(1, (order.size() + nbins - 1) / std::max<std::size_t>(nbins, 1));
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = std::min(order.size(), i + per);
        while (j < order.size() && x[order[j]] == x[order[j - 1]]) ++j;  // keep equal T_m together
        DriftBin b;
        b.lo = x[order[i]];
        b.hi = x[order[j - 1]];
        double sum = 0;
        for (std::size_t q = i; q < j; ++q) sum += static_cast<double>(y[order[q]]);
        b.count = j - i;
        b.mean_next = sum / static_cast<double>(b.count);
        d.bins.push_back(b);
        i = j;
    }
    return d;
}

enum class Verdict { stable, unstable, inconclusive };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::stable: return "stable";
        case Verdict::unstable: return "unstable";
        case Verdict::inconclusive: return "inconclusive";
    }
    return "?";
}

struct VerdictThresholds {
    double stable_slope = 0.01;
    double stable_tail_prob = 0.05;
    double unstable_slope = 0.05;
    double unstable_r2 = 0.8;
    long min_horizon = 10000;
};

struct StabilityVerdict {
    Verdict verdict = Verdict::inconclusive;
    double qt_slope = 0.0;  ///< least-squares slope of Q(t) over the second half of the trace
    double r2 = 0.0;
    double tail_prob = 0.0;  ///< fraction of tail slots with Q(t) > max(q_grid)
    std::vector<double> q_grid;
    std::vector<double> tail_probs;
};

inline StabilityVerdict stability_verdict(const SimTrace& tr, std::vector<double> q_grid = {10, 20, 50, 100},
                                          const VerdictThresholds& th = {}) {
    if (tr.horizon < th.min_horizon)
        throw PreconditionError("stability verdict needs a horizon of at least " + std::to_string(th.min_horizon));
    if (q_grid.empty()) throw PreconditionError("q_grid must be nonempty");
    std::sort(q_grid.begin(), q_grid.end());
    const std::size_t start = static_cast<std::size_t>(tr.horizon / 2);
    std::vector<long> t, q;
    for (std::size_t i = start; i < tr.Q.size(); ++i) {
        t.push_back(static_cast<long>(i));
        q.push_back(tr.Q[i]);
    }
    const LinearFit f = least_squares(t, q);
    StabilityVerdict v;
    v.qt_slope = f.slope;
    v.r2 = f.r2;
    v.q_grid = q_grid;
    for (double level : q_grid) {
        std::size_t above = 0;
        for (long x : q) above += static_cast<double>(x) > level;
        v.tail_probs.push_back(static_cast<double>(above) / static_cast<double>(q.size()));
    }
    v.tail_prob = v.tail_probs.back();
    if (v.qt_slope <= th.stable_slope && v.tail_prob <= th.stable_tail_prob)
        v.verdict = Verdict::stable;
    else if (v.qt_slope >= th.unstable_slope && v.r2 >= th.unstable_r2)
        v.verdict = Verdict::unstable;
    return v;
}

struct CycleReport {
    long anchor_T = 0;
    StateId anchor_S = 0;
    std::size_t visits = 0;
    std::vector<long> cycles;
    double mean = 0.0;
    double first_half_mean = 0.0, second_half_mean = 0.0;
    double combined_se = 0.0;
    bool halves_agree = false;
    bool conclusive = false;  ///< anchor visited at least min_visits times
};

/// Most frequent (T_m, S_m) among completed epochs; ties go to the smaller pair.
inline std::pair<long, StateId> most_frequent_anchor(const SimTrace& tr) {
    std::map<std::pair<long, StateId>, std::size_t> freq;
    for (const auto& e : tr.completed_epochs()) ++freq[{e.T, e.S}];
    std::pair<long, StateId> best{1, 0};
    std::size_t hits = 0;
    for (const auto& [key, c] : freq)
        if (c > hits) {
            best = key;
            hits = c;
        }
    return best;
}

/// Cycle lengths (in slots) between successive epochs ending at the anchor.
inline CycleReport regeneration_cycles(const SimTrace& tr, std::pair<long, StateId> anchor,
                                       std::size_t min_visits = 30) {
    const auto ep = tr.completed_epochs();
    CycleReport rep;
    rep.anchor_T = anchor.first;
    rep.anchor_S = anchor.second;
    std::vector<std::size_t> visits;
    for (std::size_t m = 0; m < ep.size(); ++m)
        if (ep[m].T == anchor.first && ep[m].S == anchor.second) visits.push_back(m);
    rep.visits = visits.size();
    for (std::size_t l = 0; l + 1 < visits.size(); ++l) {
        long L = 0;
        for (std::size_t j = visits[l] + 1; j <= visits[l + 1]; ++j) L += ep[j].T;
        rep.cycles.push_back(L);
    }
    rep.conclusive = rep.visits >= min_visits;
    if (rep.cycles.empty()) return rep;
    auto stats = [](const long* b, const long* e) {
        const double n = static_cast<double>(e - b);
        double s = 0, sq = 0;
        for (const long* p = b; p != e; ++p) {
            s += static_cast<double>(*p);
            sq += static_cast<double>(*p) * static_cast<double>(*p);
        }
        const double mean = s / n;
        const double var = n > 1 ? std::max(0.0, (sq - n * mean * mean) / (n - 1)) : 0.0;
        return std::pair<double, double>{mean, var / n};
    };
    const long* b = rep.cycles.data();
    const std::size_t N = rep.cycles.size(), h = N / 2;
    rep.mean = stats(b, b + N).first;
    if (h >= 1) {
        const auto [m1, v1] = stats(b, b + h);
        const auto [m2, v2] = stats(b + h, b + N);
        rep.first_half_mean = m1;
        rep.second_half_mean = m2;
        rep.combined_se = std::sqrt(v1 + v2);
        rep.halves_agree = std::abs(m1 - m2) <= 3.0 * rep.combined_se + 1e-12;
    }
    return rep;
}

}  // namespace evac
