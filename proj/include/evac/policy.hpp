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

#include <limits>

#include "evac/model.hpp"

namespace evac {

struct Decision {
    ControlId control = 0;
    ActionId action = kNullAction;
    friend bool operator==(const Decision&, const Decision&) = default;
};

/// What a slot-level rule sees at the start of slot t.
struct SlotView {
    long t = 0;
    const CountVector& counts;
    StateId state = 0;
};

/// Slot-level scheduling rule. Implementations may keep their own history.
class SlotPolicy {
public:
    virtual ~SlotPolicy() = default;
    virtual void reset() {}
    virtual Decision decide(const SlotView& view) = 0;
    /// Evacuation is complete. Rules that signal completion (e.g. an
    /// end-of-batch marker) override this.
    virtual bool finished(const SlotView& view) const { return view.counts.is_zero(); }
};

/// The lowest-id control available in s with its null action.
inline Decision idle_decision(const SystemSpec& spec, StateId s) {
    const auto ctrls = spec.controls_of(s);
    if (ctrls.empty()) throw PreconditionError("state '" + spec.state_name(s) + "' has no controls");
    return {*std::min_element(ctrls.begin(), ctrls.end()), kNullAction};
}

/// Always idles.
class NullPolicy final : public SlotPolicy {
public:
    explicit NullPolicy(const SystemSpec& spec) : spec_(&spec) {}
    Decision decide(const SlotView& v) override { return idle_decision(*spec_, v.state); }

private:
    const SystemSpec* spec_;
};

struct EvacRun {
    long slots = 0;
    StateId end_state = 0;
    bool completed = true;
};

/// Runs `policy` from (k, s) with no arrivals until it reports completion.
inline EvacRun simulate_evacuation(const SystemSpec& spec, SlotPolicy& policy, CountVector k, StateId s,
                                   RngStream& rng, long max_slots = std::numeric_limits<long>::max()) {
    policy.reset();
    long t = 0;
    while (t < max_slots) {
        const SlotView view{t, k, s};
        if (policy.finished(view)) return {t, s, true};
        const Decision d = policy.decide(view);
        if (!spec.allows(s, d.control) || d.action >= spec.num_actions(d.control))
            throw ContractError("policy chose an unavailable control/action in state '" + spec.state_name(s) + "'");
        SlotResult r = simulate_slot(spec, k, s, d.control, d.action, rng);
        k = std::move(r.counts);
        s = r.state;
        ++t;
    }
    return {t, s, false};
}

}  // namespace evac
