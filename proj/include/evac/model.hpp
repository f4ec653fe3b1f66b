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

#include <climits>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evac/rng.hpp"
#include "evac/types.hpp"

namespace evac {

inline constexpr double kMassTolerance = 1e-12;

struct KernelEntry {
    double prob = 0.0;
    OutcomeId outcome = 0;
    StateId next = 0;
};

/// Count conditions under which an effect rule fires. A rule whose guard
/// fails leaves the counts unchanged.
struct EffectGuard {
    long min_total = 0;
    long max_total = LONG_MAX;
    std::vector<int> zero_classes;      // each listed class must be empty
    std::vector<int> positive_classes;  // each listed class must be nonempty

    bool admits(const CountVector& k) const {
        const long t = k.total();
        if (t < min_total || t > max_total) return false;
        for (int i : zero_classes)
            if (k[static_cast<std::size_t>(i)] != 0) return false;
        for (int i : positive_classes)
            if (k[static_cast<std::size_t>(i)] == 0) return false;
        return true;
    }
    bool trivial() const {
        return min_total == 0 && max_total == LONG_MAX && zero_classes.empty() && positive_classes.empty();
    }
};

/**
 * Deterministic packet movement for one (state, control, action, outcome).
 *
 * `take` packets leave their classes and `give` packets enter classes; the
 * rule fires only if k >= take and the guard admits k. With `flush` set,
 * every class with take[i] > 0 is emptied instead. An absent outcome matches
 * every outcome not covered by a more specific rule.
 */
struct EffectRule {
    StateId state = 0;
    ControlId control = 0;
    ActionId action = 0;
    std::optional<OutcomeId> outcome;
    std::vector<int> take;
    std::vector<int> give;
    bool flush = false;
    EffectGuard guard;
};

struct Violation {
    std::string location;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const noexcept { return violations.empty(); }
    std::string to_string() const {
        std::string s;
        for (const auto& v : violations) s += v.location + ": " + v.message + "\n";
        return s;
    }
};

struct Transition {
    CountVector counts;
    StateId state = 0;
    double prob = 0.0;
};

struct SlotResult {
    CountVector counts;
    StateId state = 0;
    OutcomeId outcome = 0;
};

class SystemBuilder;

/**
 * Finite-state, count-based slotted system.
 *
 * Classes [0, inputs) receive exogenous arrivals; the remaining classes hold
 * packets internally (e.g. overheard packets awaiting a coded transmission).
 * Phase states model multi-slot service: they are bookkeeping states that a
 * system passes through mid-service and are excluded from the critical
 * (worst initial state) evacuation time.
 *
 * Immutable after construction.
 */
class SystemSpec {
public:
    const std::string& name() const noexcept { return name_; }
    std::size_t classes() const noexcept { return n_; }
    std::size_t inputs() const noexcept { return inputs_; }

    std::size_t num_states() const noexcept { return state_names_.size(); }
    const std::string& state_name(StateId s) const { return state_names_.at(s); }
    bool is_phase(StateId s) const { return phase_.at(s); }
    StateId state_id(const std::string& name) const {
        for (std::size_t i = 0; i < state_names_.size(); ++i)
            if (state_names_[i] == name) return static_cast<StateId>(i);
        throw PreconditionError("unknown state '" + name + "'");
    }
    StateId initial_state() const noexcept { return initial_; }

    std::size_t num_controls() const noexcept { return control_names_.size(); }
    const std::string& control_name(ControlId g) const { return control_names_.at(g); }
    ControlId control_id(const std::string& name) const {
        for (std::size_t i = 0; i < control_names_.size(); ++i)
            if (control_names_[i] == name) return static_cast<ControlId>(i);
        throw PreconditionError("unknown control '" + name + "'");
    }
    std::span<const ControlId> controls_of(StateId s) const { return controls_of_.at(s); }
    bool allows(StateId s, ControlId g) const {
        if (s >= num_states()) return false;
        const auto& c = controls_of_[s];
        return std::find(c.begin(), c.end(), g) != c.end();
    }

    std::size_t num_actions(ControlId g) const { return action_names_.at(g).size(); }
    const std::string& action_name(ControlId g, ActionId a) const { return action_names_.at(g).at(a); }
    ActionId action_id(ControlId g, const std::string& name) const {
        const auto& names = action_names_.at(g);
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return static_cast<ActionId>(i);
        throw PreconditionError("unknown action '" + name + "' for control '" + control_name(g) + "'");
    }

    std::size_t num_outcomes() const noexcept { return outcome_names_.size(); }
    const std::string& outcome_name(OutcomeId w) const { return outcome_names_.at(w); }

    bool has_row(StateId s, ControlId g) const {
        return s < num_states() && g < num_controls() && has_row_[row_key(s, g)];
    }
    const std::vector<KernelEntry>& kernel_row(StateId s, ControlId g) const {
        if (!has_row(s, g))
            throw PreconditionError("no kernel row for (state '" + safe_state(s) + "', control " +
                                    std::to_string(g) + ")");
        return rows_[row_key(s, g)];
    }

    const std::vector<EffectRule>& effects() const noexcept { return effects_; }

    /// The rule governing (s, g, a, w), or nullptr when counts are untouched.
    const EffectRule* effect_rule(StateId s, ControlId g, ActionId a, OutcomeId w) const {
        if (a == kNullAction) return nullptr;
        const int idx = effect_index_[effect_key(s, g, a, w)];
        return idx < 0 ? nullptr : &effects_[static_cast<std::size_t>(idx)];
    }

    /// Service effect: deterministic next counts.
    CountVector apply(const CountVector& k, StateId s, ControlId g, ActionId a, OutcomeId w) const {
        const EffectRule* rule = effect_rule(s, g, a, w);
        if (rule == nullptr || !rule->guard.admits(k)) return k;
        CountVector out = k;
        if (rule->flush) {
            for (std::size_t i = 0; i < n_; ++i)
                if (rule->take[i] > 0) out[i] = 0;
            return out;
        }
        for (std::size_t i = 0; i < n_; ++i)
            if (k[i] < rule->take[i]) return k;
        for (std::size_t i = 0; i < n_; ++i) out[i] = k[i] - rule->take[i] + rule->give[i];
        return out;
    }

    void check_pair(StateId s, ControlId g, ActionId a) const {
        if (!allows(s, g))
            throw PreconditionError("control " + std::to_string(g) + " is not available in state '" +
                                    safe_state(s) + "'");
        if (a >= num_actions(g))
            throw PreconditionError("action " + std::to_string(a) + " is not available for control '" +
                                    control_name(g) + "'");
    }

private:
    friend class SystemBuilder;
    friend ValidationReport validate_spec(const SystemSpec& spec);

    std::size_t row_key(StateId s, ControlId g) const { return s * num_controls() + g; }
    std::size_t effect_key(StateId s, ControlId g, ActionId a, OutcomeId w) const {
        return ((row_key(s, g) * max_actions_) + a) * num_outcomes() + w;
    }
    std::string safe_state(StateId s) const {
        return s < num_states() ? state_names_[s] : "#" + std::to_string(s);
    }

    std::string name_;
    std::size_t n_ = 0;
    std::size_t inputs_ = 0;
    std::vector<std::string> state_names_;
    std::vector<bool> phase_;
    std::vector<std::string> control_names_;
    std::vector<std::vector<std::string>> action_names_;
    std::vector<std::string> outcome_names_;
    std::vector<std::vector<ControlId>> controls_of_;
    std::vector<std::vector<KernelEntry>> rows_;
    std::vector<bool> has_row_;
    std::vector<EffectRule> effects_;
    std::vector<int> effect_index_;
    std::size_t max_actions_ = 1;
    StateId initial_ = 0;
    std::vector<Violation> build_issues_;
};

/// Incremental construction of a SystemSpec. Names are unique per kind.
class SystemBuilder {
public:
    SystemBuilder(std::string name, std::size_t classes) {
        spec_.name_ = std::move(name);
        spec_.n_ = classes;
        spec_.inputs_ = classes;
    }

    SystemBuilder& inputs(std::size_t m) {
        spec_.inputs_ = m;
        return *this;
    }

    StateId state(const std::string& name, bool phase = false) {
        spec_.state_names_.push_back(name);
        spec_.phase_.push_back(phase);
        spec_.controls_of_.emplace_back();
        return static_cast<StateId>(spec_.state_names_.size() - 1);
    }
    StateId phase_state(const std::string& name) { return state(name, true); }

    /// Declares a control; the null action is prepended automatically.
    ControlId control(const std::string& name, const std::vector<std::string>& actions = {}) {
        spec_.control_names_.push_back(name);
        std::vector<std::string> acts{"null"};
        acts.insert(acts.end(), actions.begin(), actions.end());
        spec_.action_names_.push_back(std::move(acts));
        return static_cast<ControlId>(spec_.control_names_.size() - 1);
    }

    OutcomeId outcome(const std::string& name) {
        for (std::size_t i = 0; i < spec_.outcome_names_.size(); ++i)
            if (spec_.outcome_names_[i] == name) return static_cast<OutcomeId>(i);
        spec_.outcome_names_.push_back(name);
        return static_cast<OutcomeId>(spec_.outcome_names_.size() - 1);
    }

    /// Makes g available in s and sets its kernel row.
    SystemBuilder& transition(StateId s, ControlId g, std::vector<KernelEntry> entries) {
        allow(s, g);
        pending_rows_.push_back({s, g, std::move(entries)});
        return *this;
    }
    /// Deterministic move to `next` with a single outcome.
    SystemBuilder& transition(StateId s, ControlId g, StateId next, OutcomeId w) {
        return transition(s, g, {KernelEntry{1.0, w, next}});
    }

    SystemBuilder& allow(StateId s, ControlId g) {
        if (s < spec_.controls_of_.size()) {
            auto& c = spec_.controls_of_[s];
            if (std::find(c.begin(), c.end(), g) == c.end()) c.push_back(g);
        }
        return *this;
    }

    SystemBuilder& effect(EffectRule rule) {
        if (rule.take.empty()) rule.take.assign(spec_.n_, 0);
        if (rule.give.empty()) rule.give.assign(spec_.n_, 0);
        spec_.effects_.push_back(std::move(rule));
        return *this;
    }

    SystemBuilder& initial(StateId s) {
        spec_.initial_ = s;
        return *this;
    }

    /// Finalizes lookups. Rows within 1e-12 of unit mass are renormalized;
    /// everything else is left for validate_spec to report.
    SystemSpec build() {
        SystemSpec spec = spec_;
        const std::size_t S = spec.num_states(), G = spec.num_controls();
        spec.rows_.assign(S * G, {});
        spec.has_row_.assign(S * G, false);
        for (auto& r : pending_rows_) {
            if (r.s >= S || r.g >= G) {
                spec.build_issues_.push_back({"kernel", "row references unknown state or control"});
                continue;
            }
            const std::size_t key = spec.row_key(r.s, r.g);
            if (spec.has_row_[key])
                spec.build_issues_.push_back({row_loc(spec, r.s, r.g), "duplicate kernel row"});
            double mass = 0.0;
            for (const auto& e : r.entries) mass += e.prob;
            auto entries = r.entries;
            if (std::abs(mass - 1.0) <= kMassTolerance && mass > 0.0)
                for (auto& e : entries) e.prob /= mass;
            spec.rows_[key] = std::move(entries);
            spec.has_row_[key] = true;
        }
        spec.max_actions_ = 1;
        for (const auto& a : spec.action_names_) spec.max_actions_ = std::max(spec.max_actions_, a.size());
        const std::size_t W = std::max<std::size_t>(spec.num_outcomes(), 1);
        if (spec.outcome_names_.empty()) spec.outcome_names_.push_back("none");
        spec.effect_index_.assign(S * G * spec.max_actions_ * W, -1);
        // Outcome-specific rules win over wildcard rules regardless of order.
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t i = 0; i < spec.effects_.size(); ++i) {
                const EffectRule& e = spec.effects_[i];
                if (e.outcome.has_value() != (pass == 1)) continue;
                if (e.state >= S || e.control >= G || e.action >= spec.num_actions(e.control) ||
                    (e.outcome && *e.outcome >= W))
                    continue;  // reported by validate_spec
                const OutcomeId lo = e.outcome ? *e.outcome : 0;
                const OutcomeId hi = e.outcome ? *e.outcome + 1 : static_cast<OutcomeId>(W);
                for (OutcomeId w = lo; w < hi; ++w) {
                    int& slot = spec.effect_index_[spec.effect_key(e.state, e.control, e.action, w)];
                    if (slot >= 0 && (pass == 1) == spec.effects_[static_cast<std::size_t>(slot)].outcome.has_value())
                        spec.build_issues_.push_back(
                            {"effects[" + std::to_string(i) + "]", "duplicate effect rule for the same outcome"});
                    slot = static_cast<int>(i);
                }
            }
        }
        return spec;
    }

private:
    struct PendingRow {
        StateId s;
        ControlId g;
        std::vector<KernelEntry> entries;
    };
    static std::string row_loc(const SystemSpec& spec, StateId s, ControlId g) {
        return "kernel(" + spec.state_names_[s] + "," + spec.control_names_[g] + ")";
    }

    SystemSpec spec_;
    std::vector<PendingRow> pending_rows_;
};

/// Lists every violated structural invariant; empty iff the spec is well formed.
inline ValidationReport validate_spec(const SystemSpec& spec) {
    ValidationReport rep;
    auto add = [&](std::string loc, std::string msg) { rep.violations.push_back({std::move(loc), std::move(msg)}); };
    for (const auto& v : spec.build_issues_) rep.violations.push_back(v);

    if (spec.n_ == 0) add("spec", "number of classes must be positive");
    if (spec.inputs_ == 0 || spec.inputs_ > spec.n_) add("spec", "input classes must be in [1, n]");
    if (spec.num_states() == 0) add("spec", "no states");
    if (spec.initial_ >= spec.num_states())
        add("initial_state", "unknown initial state");
    else if (spec.phase_[spec.initial_])
        add("initial_state", "initial state must not be a phase state");
    if (std::none_of(spec.phase_.begin(), spec.phase_.end(), [](bool p) { return !p; }) && spec.num_states() > 0)
        add("spec", "at least one non-phase state is required");

    for (StateId s = 0; s < spec.num_states(); ++s) {
        const std::string loc = "state(" + spec.state_names_[s] + ")";
        if (spec.controls_of_[s].empty()) add(loc, "no controls");
        for (ControlId g : spec.controls_of_[s]) {
            if (g >= spec.num_controls()) {
                add(loc, "unknown control id " + std::to_string(g));
                continue;
            }
            const std::string rloc = "kernel(" + spec.state_names_[s] + "," + spec.control_names_[g] + ")";
            if (!spec.has_row(s, g)) {
                add(rloc, "missing kernel row");
                continue;
            }
            double mass = 0.0;
            bool bad = false;
            for (const auto& e : spec.rows_[spec.row_key(s, g)]) {
                if (!(e.prob >= 0.0) || !std::isfinite(e.prob)) bad = true;
                if (e.next >= spec.num_states()) add(rloc, "next state out of range");
                if (e.outcome >= spec.num_outcomes()) add(rloc, "outcome out of range");
                mass += e.prob;
            }
            if (bad) add(rloc, "negative or non-finite probability");
            if (std::abs(mass - 1.0) > kMassTolerance) {
                std::ostringstream os;
                os.precision(15);
                os << "row mass " << mass << " != 1";
                add(rloc, os.str());
            }
        }
    }
    for (ControlId g = 0; g < spec.num_controls(); ++g)
        if (spec.action_names_[g].empty()) add("control(" + spec.control_names_[g] + ")", "no actions");

    for (std::size_t i = 0; i < spec.effects_.size(); ++i) {
        const EffectRule& e = spec.effects_[i];
        const std::string loc = "effects[" + std::to_string(i) + "]";
        if (e.state >= spec.num_states() || e.control >= spec.num_controls()) {
            add(loc, "unknown state or control");
            continue;
        }
        if (e.action >= spec.num_actions(e.control)) add(loc, "unknown action");
        if (e.action == kNullAction) add(loc, "the null action must not move packets");
        if (e.outcome && *e.outcome >= spec.num_outcomes()) add(loc, "unknown outcome");
        if (e.take.size() != spec.n_ || e.give.size() != spec.n_) {
            add(loc, "take/give vectors must have one entry per class");
            continue;
        }
        long taken = 0, given = 0;
        for (std::size_t c = 0; c < spec.n_; ++c) {
            if (e.take[c] < 0 || e.give[c] < 0) add(loc, "negative take/give entry");
            taken += e.take[c];
            given += e.give[c];
        }
        if (given > taken) add(loc, "effect increases the total packet count");
        if (e.flush && given != 0) add(loc, "flush effects cannot add packets");
        for (int c : e.guard.zero_classes)
            if (c < 0 || static_cast<std::size_t>(c) >= spec.n_) add(loc, "guard class out of range");
        for (int c : e.guard.positive_classes)
            if (c < 0 || static_cast<std::size_t>(c) >= spec.n_) add(loc, "guard class out of range");
    }
    return rep;
}

inline void require_valid(const SystemSpec& spec) {
    const auto rep = validate_spec(spec);
    if (!rep.ok()) throw PreconditionError("invalid system spec '" + spec.name() + "':\n" + rep.to_string());
}

/// Distribution of (next counts, next state) for one slot. Entries with equal
/// support are merged; order follows the kernel row.
inline std::vector<Transition> step_distribution(const SystemSpec& spec, const CountVector& k, StateId s,
                                                 ControlId g, ActionId a) {
    spec.check_pair(s, g, a);
    if (k.size() != spec.classes()) throw PreconditionError("count vector has wrong dimension");
    std::vector<Transition> out;
    for (const auto& e : spec.kernel_row(s, g)) {
        if (e.prob <= 0.0) continue;
        CountVector next = spec.apply(k, s, g, a, e.outcome);
        auto it = std::find_if(out.begin(), out.end(),
                               [&](const Transition& t) { return t.state == e.next && t.counts == next; });
        if (it != out.end())
            it->prob += e.prob;
        else
            out.push_back({std::move(next), e.next, e.prob});
    }
    return out;
}

/// Samples one slot. Same spec, inputs, and stream state give the same result.
inline SlotResult simulate_slot(const SystemSpec& spec, const CountVector& k, StateId s, ControlId g, ActionId a,
                                RngStream& rng) {
    spec.check_pair(s, g, a);
    const auto& row = spec.kernel_row(s, g);
    std::size_t pick = 0;
    if (row.size() > 1) {
        double probs_buf[16];
        std::vector<double> probs_vec;
        std::span<const double> probs;
        if (row.size() <= 16) {
            for (std::size_t i = 0; i < row.size(); ++i) probs_buf[i] = row[i].prob;
            probs = std::span<const double>(probs_buf, row.size());
        } else {
            probs_vec.reserve(row.size());
            for (const auto& e : row) probs_vec.push_back(e.prob);
            probs = probs_vec;
        }
        pick = rng.discrete(probs);
    }
    const KernelEntry& e = row[pick];
    return {spec.apply(k, s, g, a, e.outcome), e.next, e.outcome};
}

}  // namespace evac
