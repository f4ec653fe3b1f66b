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
#include <limits>
#include <thread>
#include <vector>

#include "evac/model.hpp"
#include "evac/policy.hpp"

namespace evac {

struct SolveOptions {
    double tol = 1e-10;
    long max_sweeps = 1'000'000;
    std::size_t max_cells = 2'000'000;
    /// Jacobi sweeps split across `jobs` threads instead of serial Gauss-Seidel.
    bool parallel_sweep = false;
    unsigned jobs = 1;
};

/**
 * Minimal expected evacuation times over the box [0, kmax].
 *
 * values(k, s) is the optimum from counts k and state s. For k = 0 the table
 * reports 1, the convention that an empty system advances one slot.
 * critical(k) is the maximum over non-phase states and is defined on input
 * count vectors (internal classes zero).
 */
class EvacTable {
public:
    EvacTable() = default;
    EvacTable(Box box, std::size_t inputs, std::vector<bool> system_state, std::vector<double> values,
              std::vector<Decision> argmin)
        : box_(std::move(box)),
          inputs_(inputs),
          system_state_(std::move(system_state)),
          values_(std::move(values)),
          argmin_(std::move(argmin)) {
        std::vector<int> ik(box_.kmax().values().begin(), box_.kmax().values().begin() + static_cast<long>(inputs_));
        input_box_ = Box(CountVector(std::move(ik)));
        critical_.assign(input_box_.cells(), 0.0);
        const std::size_t S = num_states();
        for (std::size_t c = 0; c < input_box_.cells(); ++c) {
            if (c == 0) {
                critical_[c] = 1.0;
                continue;
            }
            const std::size_t cell = box_.index(embed(input_box_.at(c)));
            double m = -std::numeric_limits<double>::infinity();
            for (std::size_t s = 0; s < S; ++s)
                if (system_state_[s]) m = std::max(m, values_[cell * S + s]);
            critical_[c] = m;
        }
    }

    /// Table built from critical values alone (one system state, one class
    /// block). Used to exercise the property checks on hand-made data.
    static EvacTable from_critical(const CountVector& kmax, std::vector<double> critical) {
        Box box(kmax);
        if (critical.size() != box.cells()) throw PreconditionError("critical table size mismatch");
        critical[0] = 0.0;
        std::vector<Decision> arg(box.cells());
        return EvacTable(box, kmax.size(), {true}, std::move(critical), std::move(arg));
    }

    const Box& box() const noexcept { return box_; }
    const CountVector& kmax() const noexcept { return box_.kmax(); }
    const Box& input_box() const noexcept { return input_box_; }
    const CountVector& input_kmax() const noexcept { return input_box_.kmax(); }
    std::size_t inputs() const noexcept { return inputs_; }
    std::size_t classes() const noexcept { return box_.dims(); }
    std::size_t num_states() const noexcept { return system_state_.size(); }
    bool is_system_state(StateId s) const { return system_state_.at(s); }

    bool covers(const CountVector& k) const { return box_.contains(k); }

    double value(const CountVector& k, StateId s) const {
        check(k);
        if (k.is_zero()) return 1.0;
        return values_[box_.index(k) * num_states() + s];
    }
    Decision argmin(const CountVector& k, StateId s) const {
        check(k);
        return argmin_[box_.index(k) * num_states() + s];
    }

    /// Critical evacuation time for an input-class count vector.
    double critical(const CountVector& k) const {
        if (k.size() != inputs_ || !input_box_.contains(k))
            throw RangeError("critical" + k.to_string() + " outside table box " + input_kmax().to_string());
        return critical_[input_box_.index(k)];
    }
    double critical_at(std::size_t input_cell) const { return critical_[input_cell]; }

    /// Input-class vector extended with zeros for internal classes.
    CountVector embed(const CountVector& k_inputs) const {
        CountVector k(classes());
        for (std::size_t i = 0; i < inputs_; ++i) k[i] = k_inputs[i];
        return k;
    }

private:
    void check(const CountVector& k) const {
        if (!covers(k)) throw RangeError("counts " + k.to_string() + " outside table box " + kmax().to_string());
    }

    Box box_;
    Box input_box_;
    std::size_t inputs_ = 0;
    std::vector<bool> system_state_;
    std::vector<double> values_;
    std::vector<Decision> argmin_;
    std::vector<double> critical_;
};

namespace detail {

struct Option {
    Decision decision;
    std::uint32_t begin = 0, end = 0;  // range into the entry list
};
struct Entry {
    double prob;
    std::int64_t target;  // flattened (cell, state); within-level targets are read live
};

// Next cell for one effect, or -1 when it would leave the box.
inline std::int64_t next_cell(const SystemSpec& spec, const Box& box, std::size_t cell, const CountVector& k,
                              StateId s, Decision d, OutcomeId w) {
    const EffectRule* rule = spec.effect_rule(s, d.control, d.action, w);
    if (rule == nullptr || !rule->guard.admits(k)) return static_cast<std::int64_t>(cell);
    std::int64_t idx = static_cast<std::int64_t>(cell);
    const std::size_t n = k.size();
    if (rule->flush) {
        for (std::size_t i = 0; i < n; ++i)
            if (rule->take[i] > 0) idx -= static_cast<std::int64_t>(k[i]) * static_cast<std::int64_t>(box.stride(i));
        return idx;
    }
    for (std::size_t i = 0; i < n; ++i)
        if (k[i] < rule->take[i]) return static_cast<std::int64_t>(cell);
    for (std::size_t i = 0; i < n; ++i) {
        const int nk = k[i] - rule->take[i] + rule->give[i];
        if (nk > box.kmax()[i]) return -1;
        idx += static_cast<std::int64_t>(nk - k[i]) * static_cast<std::int64_t>(box.stride(i));
    }
    return idx;
}

}  // namespace detail

/**
 * Solves V(k,s) = 1 + min_{g,a} sum p * V(k',s') with V(0,.) = 0.
 *
 * Effects never raise the total count, so levels of equal total are solved in
 * increasing order; each level is a small stochastic shortest path problem
 * over its own cells (self-loops and same-level moves) iterated to residual
 * < tol. Actions that would push a class above kmax are treated as
 * unavailable. Ties go to the lowest control id, then lowest action id.
 */
inline EvacTable solve_evac_table(const SystemSpec& spec, const CountVector& kmax, const SolveOptions& opt = {}) {
    require_valid(spec);
    if (kmax.size() != spec.classes()) throw PreconditionError("kmax has wrong dimension");
    if (!(opt.tol > 0.0)) throw PreconditionError("tol must be positive");
    const Box box(kmax);
    const std::size_t S = spec.num_states();
    if (box.cells() * S > opt.max_cells)
        throw RangeError("table of " + std::to_string(box.cells() * S) + " cells exceeds the cap of " +
                         std::to_string(opt.max_cells));

    std::vector<double> V(box.cells() * S, 0.0);
    std::vector<Decision> arg(box.cells() * S);
    for (StateId s = 0; s < S; ++s) arg[s] = idle_decision(spec, s);

    // Bucket cells by total count.
    const long max_total = kmax.total();
    std::vector<std::vector<std::size_t>> levels(static_cast<std::size_t>(max_total) + 1);
    for (std::size_t c = 0; c < box.cells(); ++c) {
        long t = 0;
        std::size_t rem = c;
        for (std::size_t i = 0; i < box.dims(); ++i) {
            t += static_cast<long>(rem / box.stride(i));
            rem %= box.stride(i);
        }
        levels[static_cast<std::size_t>(t)].push_back(c);
    }

    // Per-state option skeleton sorted by (control, action).
    std::vector<std::vector<Decision>> decisions(S);
    for (StateId s = 0; s < S; ++s) {
        std::vector<ControlId> ctrls(spec.controls_of(s).begin(), spec.controls_of(s).end());
        std::sort(ctrls.begin(), ctrls.end());
        for (ControlId g : ctrls)
            for (ActionId a = 0; a < spec.num_actions(g); ++a) decisions[s].push_back({g, a});
    }

    std::vector<detail::Option> options;
    std::vector<detail::Entry> entries;
    std::vector<std::uint32_t> item_begin;  // options per (level cell, state)
    std::vector<std::int64_t> items;        // flattened (cell, state) index per item
    std::vector<char> in_level(box.cells() * S, 0);

    for (long T = 1; T <= max_total; ++T) {
        const auto& cells = levels[static_cast<std::size_t>(T)];
        options.clear();
        entries.clear();
        item_begin.clear();
        items.clear();
        for (std::size_t cell : cells) {
            const CountVector k = box.at(cell);
            for (StateId s = 0; s < S; ++s) {
                items.push_back(static_cast<std::int64_t>(cell * S + s));
                item_begin.push_back(static_cast<std::uint32_t>(options.size()));
                for (const Decision& d : decisions[s]) {
                    detail::Option opt_rec{d, static_cast<std::uint32_t>(entries.size()), 0};
                    bool valid = true;
                    for (const KernelEntry& e : spec.kernel_row(s, d.control)) {
                        if (e.prob <= 0.0) continue;
                        const std::int64_t nc = detail::next_cell(spec, box, cell, k, s, d, e.outcome);
                        if (nc < 0) {
                            valid = false;
                            break;
                        }
                        entries.push_back({e.prob, nc * static_cast<std::int64_t>(S) + e.next});
                    }
                    if (!valid) {
                        entries.resize(opt_rec.begin);
                        continue;
                    }
                    opt_rec.end = static_cast<std::uint32_t>(entries.size());
                    options.push_back(opt_rec);
                }
            }
        }
        item_begin.push_back(static_cast<std::uint32_t>(options.size()));
        for (auto it : items) in_level[static_cast<std::size_t>(it)] = 1;

        // Every (cell, state) must be able to reach a lower level.
        {
            std::vector<char> can_exit(items.size(), 0);
            auto locate = [&](std::int64_t flat) {
                return static_cast<std::size_t>(std::lower_bound(items.begin(), items.end(), flat) - items.begin());
            };
            bool changed = true;
            while (changed) {
                changed = false;
                for (std::size_t it = 0; it < items.size(); ++it) {
                    if (can_exit[it]) continue;
                    for (std::uint32_t o = item_begin[it]; o < item_begin[it + 1] && !can_exit[it]; ++o) {
                        for (std::uint32_t e = options[o].begin; e < options[o].end; ++e) {
                            const std::int64_t tgt = entries[e].target;
                            if (!in_level[static_cast<std::size_t>(tgt)] || can_exit[locate(tgt)]) {
                                can_exit[it] = 1;
                                changed = true;
                                break;
                            }
                        }
                    }
                }
            }
            for (std::size_t it = 0; it < items.size(); ++it) {
                if (can_exit[it]) continue;
                const std::size_t cell = static_cast<std::size_t>(items[it]) / S;
                const StateId s = static_cast<StateId>(static_cast<std::size_t>(items[it]) % S);
                throw ConvergenceError("evacuation impossible at level " + std::to_string(T) + ": counts " +
                                       box.at(cell).to_string() + " in state '" + spec.state_name(s) +
                                       "' cannot reach a lower total");
            }
        }

        // Q-value of one option with its self-loop solved in closed form:
        // q = (1 + sum_{other} p V) / (1 - p_self).
        auto option_value = [&](std::size_t it, std::uint32_t o, const std::vector<double>& src) {
            double q = 1.0, self = 0.0;
            for (std::uint32_t e = options[o].begin; e < options[o].end; ++e) {
                if (entries[e].target == items[it])
                    self += entries[e].prob;
                else
                    q += entries[e].prob * src[static_cast<std::size_t>(entries[e].target)];
            }
            return self >= 1.0 - 1e-15 ? std::numeric_limits<double>::infinity() : q / (1.0 - self);
        };
        auto evaluate = [&](std::size_t it, const std::vector<double>& src) {
            double best = std::numeric_limits<double>::infinity();
            for (std::uint32_t o = item_begin[it]; o < item_begin[it + 1]; ++o)
                best = std::min(best, option_value(it, o, src));
            return best;
        };

        long sweeps = 0;
        double residual = std::numeric_limits<double>::infinity();
        const bool jacobi = opt.parallel_sweep && opt.jobs > 1 && items.size() > 1;
        std::vector<double> next;
        while (residual >= opt.tol) {
            if (++sweeps > opt.max_sweeps)
                throw ConvergenceError("level " + std::to_string(T) + " did not converge within " +
                                       std::to_string(opt.max_sweeps) + " sweeps");
            residual = 0.0;
            if (!jacobi) {
                for (std::size_t it = 0; it < items.size(); ++it) {
                    const double v = evaluate(it, V);
                    double& slot = V[static_cast<std::size_t>(items[it])];
                    residual = std::max(residual, std::abs(v - slot));
                    slot = v;
                }
            } else {
                next.assign(items.size(), 0.0);
                const unsigned jobs = std::min<unsigned>(opt.jobs, static_cast<unsigned>(items.size()));
                std::vector<std::thread> pool;
                for (unsigned j = 0; j < jobs; ++j)
                    pool.emplace_back([&, j] {
                        for (std::size_t it = j; it < items.size(); it += jobs) next[it] = evaluate(it, V);
                    });
                for (auto& th : pool) th.join();
                for (std::size_t it = 0; it < items.size(); ++it) {
                    double& slot = V[static_cast<std::size_t>(items[it])];
                    residual = std::max(residual, std::abs(next[it] - slot));
                    slot = next[it];
                }
            }
        }

        // Argmin with lexicographic tie-break.
        for (std::size_t it = 0; it < items.size(); ++it) {
            const double best = V[static_cast<std::size_t>(items[it])];
            const double eps = 1e-9 * std::max(1.0, std::abs(best));
            for (std::uint32_t o = item_begin[it]; o < item_begin[it + 1]; ++o) {
                if (option_value(it, o, V) <= best + eps) {
                    arg[static_cast<std::size_t>(items[it])] = options[o].decision;
                    break;
                }
            }
        }
        for (auto it : items) in_level[static_cast<std::size_t>(it)] = 0;
    }

    std::vector<bool> system_state(S);
    for (StateId s = 0; s < S; ++s) system_state[s] = !spec.is_phase(s);
    return EvacTable(box, spec.inputs(), std::move(system_state), std::move(V), std::move(arg));
}

struct SubadditivityViolation {
    CountVector k;
    CountVector m;
    double gap = 0.0;
};

/// All (k, m) with k + m in the box and critical(k+m) > critical(k) + critical(m) + 1e-9.
inline std::vector<SubadditivityViolation> check_subadditivity(const EvacTable& table, double slack = 1e-9) {
    std::vector<SubadditivityViolation> out;
    const Box& ib = table.input_box();
    for (std::size_t a = 1; a < ib.cells(); ++a) {
        const CountVector k = ib.at(a);
        for (std::size_t b = a; b < ib.cells(); ++b) {
            const CountVector m = ib.at(b);
            const CountVector sum = k + m;
            if (!ib.contains(sum)) continue;
            const double gap = table.critical_at(ib.index(sum)) - table.critical_at(a) - table.critical_at(b);
            if (gap > slack) out.push_back({k, m, gap});
        }
    }
    return out;
}

struct LipschitzConstants {
    double D0 = 0.0;  ///< largest decrease of values(.,s) when one packet is added
    double D1 = 0.0;  ///< max_i critical(e_i)
    double D = 0.0;   ///< max(D0, D1)
    double worst_slope = 0.0;  ///< max |critical(k) - critical(m)| / |k - m|_1
    double worst_ratio = 0.0;  ///< worst_slope / D
    bool exhaustive = true;    ///< all pairs scanned (otherwise adjacent pairs only)
    bool holds() const { return worst_ratio <= 1.0 + 1e-9; }
};

/**
 * Bounded-decrease constant D0 and the Lipschitz constant D of the critical
 * function. Boxes up to 10^4 input cells are scanned over all pairs; larger
 * boxes over adjacent pairs, which bound all pairs by the triangle inequality.
 */
inline LipschitzConstants check_bounded_decrease(const EvacTable& table) {
    LipschitzConstants lc;
    const Box& ib = table.input_box();
    const std::size_t n = table.inputs();
    for (std::size_t c = 0; c < ib.cells(); ++c) {
        const CountVector k = ib.at(c);
        for (std::size_t i = 0; i < n; ++i) {
            if (k[i] + 1 > ib.kmax()[i]) continue;
            CountVector up = k;
            ++up[i];
            const CountVector kf = table.embed(k), uf = table.embed(up);
            for (StateId s = 0; s < table.num_states(); ++s) {
                if (!table.is_system_state(s)) continue;
                lc.D0 = std::max(lc.D0, table.value(kf, s) - table.value(uf, s));
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        if (ib.kmax()[i] >= 1) lc.D1 = std::max(lc.D1, table.critical(CountVector::unit(n, i)));
    lc.D = std::max(lc.D0, lc.D1);

    lc.exhaustive = ib.cells() <= 10'000;
    if (lc.exhaustive) {
        for (std::size_t a = 0; a < ib.cells(); ++a) {
            const CountVector k = ib.at(a);
            for (std::size_t b = a + 1; b < ib.cells(); ++b) {
                const CountVector m = ib.at(b);
                const double d = std::abs(table.critical_at(a) - table.critical_at(b));
                lc.worst_slope = std::max(lc.worst_slope, d / static_cast<double>(l1_distance(k, m)));
            }
        }
    } else {
        for (std::size_t a = 0; a < ib.cells(); ++a) {
            const CountVector k = ib.at(a);
            for (std::size_t i = 0; i < n; ++i) {
                if (k[i] + 1 > ib.kmax()[i]) continue;
                const double d = std::abs(table.critical_at(a) - table.critical_at(a + ib.stride(i)));
                lc.worst_slope = std::max(lc.worst_slope, d);
            }
        }
    }
    lc.worst_ratio = lc.D > 0.0 ? lc.worst_slope / lc.D : (lc.worst_slope > 0.0 ? INFINITY : 0.0);
    return lc;
}

struct LinearBoundFit {
    double C1 = 0.0;
    double C0 = 1.0;
    double max_violation = 0.0;  ///< max_k critical(k) - (C1 |k| + C0)
    double U = 0.0;              ///< max over nonzero 0/1 vectors of critical(u)
    double max_u_violation = 0.0;  ///< max_{k != 0} critical(k) - U max_i k_i
    bool certified() const { return max_violation <= 1e-9; }
    bool u_bound_holds() const { return max_u_violation <= 1e-9; }
};

inline LinearBoundFit check_linear_bound(const EvacTable& table) {
    LinearBoundFit fit;
    const Box& ib = table.input_box();
    const std::size_t n = table.inputs();
    for (std::size_t c = 0; c < ib.cells(); ++c) {
        const CountVector k = ib.at(c);
        for (std::size_t i = 0; i < n; ++i) {
            if (k[i] + 1 > ib.kmax()[i]) continue;
            fit.C1 = std::max(fit.C1, table.critical_at(c + ib.stride(i)) - table.critical_at(c));
        }
    }
    fit.C0 = 1.0;
    fit.max_violation = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < ib.cells(); ++c) {
        const CountVector k = ib.at(c);
        fit.max_violation =
            std::max(fit.max_violation, table.critical_at(c) - (fit.C1 * static_cast<double>(k.total()) + fit.C0));
        if (c > 0 && k.max_entry() <= 1) fit.U = std::max(fit.U, table.critical_at(c));
    }
    fit.max_u_violation = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 1; c < ib.cells(); ++c) {
        const CountVector k = ib.at(c);
        fit.max_u_violation = std::max(fit.max_u_violation, table.critical_at(c) - fit.U * k.max_entry());
    }
    if (ib.cells() == 1) fit.max_u_violation = 0.0;
    return fit;
}

/// Stationary policy (k, s) -> table argmin. Holds a reference: the table
/// must outlive the policy.
class EvacPolicy final : public SlotPolicy {
public:
    EvacPolicy(const SystemSpec& spec, const EvacTable& table) : spec_(&spec), table_(&table) {}

    Decision decide(const CountVector& k, StateId s) const {
        if (k.is_zero()) return idle_decision(*spec_, s);
        if (!table_->covers(k))
            throw RangeError("policy query " + k.to_string() + " outside table box " + table_->kmax().to_string());
        return table_->argmin(k, s);
    }
    Decision decide(const SlotView& v) override { return decide(v.counts, v.state); }

    const EvacTable& table() const noexcept { return *table_; }
    const SystemSpec& spec() const noexcept { return *spec_; }

private:
    const SystemSpec* spec_;
    const EvacTable* table_;
};

inline EvacPolicy extract_optimal_policy(const SystemSpec& spec, const EvacTable& table) {
    if (table.classes() != spec.classes() || table.num_states() != spec.num_states())
        throw PreconditionError("table does not match spec '" + spec.name() + "'");
    return EvacPolicy(spec, table);
}

}  // namespace evac
