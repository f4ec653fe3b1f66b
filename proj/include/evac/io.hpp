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
#include <cstdio>
#include <ostream>
#include <string>

#include "evac/bec.hpp"
#include "evac/limit.hpp"
#include "evac/model.hpp"
#include "evac/sim.hpp"
#include "evac/solver.hpp"

namespace evac {

/// 12 significant digits, locale independent; "inf" and "nan" spelled out.
inline std::string fmt_num(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    std::string s(buf);
    return s == "-0" ? "0" : s;
}

/// One row per (k != 0, state) in row-major box order.
inline void write_table_csv(std::ostream& os, const SystemSpec& spec, const EvacTable& table) {
    for (std::size_t i = 0; i < table.classes(); ++i) os << "k_" << i + 1 << ',';
    os << "state,value,argmin_control,argmin_action\n";
    const Box& box = table.box();
    for (std::size_t c = 1; c < box.cells(); ++c) {
        const CountVector k = box.at(c);
        for (StateId s = 0; s < table.num_states(); ++s) {
            for (std::size_t i = 0; i < k.size(); ++i) os << k[i] << ',';
            const Decision d = table.argmin(k, s);
            os << spec.state_name(s) << ',' << fmt_num(table.value(k, s)) << ',' << spec.control_name(d.control)
               << ',' << spec.action_name(d.control, d.action) << '\n';
        }
    }
}

/// t, Q_total, Q_1..Q_n, epoch_index (-1 outside the epoch policy).
inline void write_trace_csv(std::ostream& os, const SimTrace& tr) {
    os << "t,Q_total";
    for (std::size_t i = 0; i < tr.classes; ++i) os << ",Q_" << i + 1;
    os << ",epoch_index\n";
    for (std::size_t t = 0; t < tr.Q.size(); ++t) {
        os << t << ',' << tr.Q[t];
        for (std::size_t i = 0; i < tr.classes; ++i) os << ',' << tr.Q_flat[t * tr.classes + i];
        os << ',' << tr.epoch_of[t] << '\n';
    }
}

inline void write_epochs_csv(std::ostream& os, const SystemSpec& spec, const SimTrace& tr) {
    os << "m,start,T_m,S_m";
    for (std::size_t i = 0; i < spec.inputs(); ++i) os << ",k_" << i + 1;
    os << ",fallback,truncated\n";
    for (const auto& e : tr.epochs) {
        os << e.m << ',' << e.start << ',' << e.T << ',' << spec.state_name(e.S);
        for (std::size_t i = 0; i < e.k.size(); ++i) os << ',' << e.k[i];
        os << ',' << int(e.fallback) << ',' << int(e.truncated) << '\n';
    }
}

inline void write_region_csv(std::ostream& os, const RegionReport& rep) {
    const std::size_t n = rep.directions.empty() ? 0 : rep.directions.front().direction.size();
    for (std::size_t i = 0; i < n; ++i) os << "u_" << i + 1 << ',';
    os << "estimate,error_bound,rho_star,rho_error,unbounded\n";
    for (const auto& d : rep.directions) {
        for (std::size_t i = 0; i < n; ++i) os << fmt_num(d.direction[i]) << ',';
        os << fmt_num(d.estimate) << ',' << fmt_num(d.error_bound) << ',' << fmt_num(d.rho_star) << ','
           << fmt_num(d.rho_error) << ',' << int(d.unbounded) << '\n';
    }
}

inline void write_qle_csv(std::ostream& os, const std::vector<QleEstimate>& rows) {
    const std::size_t n = rows.empty() ? 0 : rows.front().r.size();
    os << "l,l0";
    for (std::size_t i = 0; i < n; ++i) os << ",r_" << i + 1;
    os << ",q_hat,ci_halfwidth,reps,no_guarantee\n";
    for (const auto& q : rows) {
        os << q.l << ',' << q.l0;
        for (std::size_t i = 0; i < n; ++i) os << ',' << fmt_num(q.r[i]);
        os << ',' << fmt_num(q.q_hat) << ',' << fmt_num(q.ci_halfwidth) << ',' << q.reps << ','
           << int(q.no_guarantee) << '\n';
    }
}

}  // namespace evac
