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

// evac: command-line driver.
// Exit codes: 0 all checks pass, 2 checks ran with failures, 1 configuration or runtime error.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "evac/acceptance.hpp"
#include "evac/bec.hpp"
#include "evac/fixtures.hpp"
#include "evac/io.hpp"
#include "evac/limit.hpp"
#include "evac/report.hpp"
#include "evac/scenario_io.hpp"
#include "evac/sim.hpp"
#include "evac/solver.hpp"

namespace fs = std::filesystem;
using namespace evac;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitChecksFailed = 2;

struct Global {
    std::uint64_t seed = 1;
    unsigned jobs = 1;
    std::string out = ".";
    std::string format = "csv";
};

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep))
        if (!cur.empty()) out.push_back(cur);
    return out;
}

double parse_double(const std::string& s) {
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(s, &used);
    } catch (const std::logic_error&) {
        throw ConfigError("cannot parse number '" + s + "'");
    }
    if (used != s.size()) throw ConfigError("cannot parse number '" + s + "'");
    return v;
}

int parse_int(const std::string& s) {
    const double v = parse_double(s);
    if (v != std::floor(v)) throw ConfigError("expected an integer, got '" + s + "'");
    return static_cast<int>(v);
}

std::vector<double> parse_doubles(const std::string& s, char sep = ',') {
    std::vector<double> v;
    for (const auto& x : split(s, sep)) v.push_back(parse_double(x));
    return v;
}

CountVector parse_counts(const std::string& s) {
    std::vector<int> v;
    for (const auto& x : split(s, ',')) v.push_back(parse_int(x));
    try {
        return CountVector(std::move(v));
    } catch (const PreconditionError& e) {
        throw ConfigError(e.what());
    }
}

RateVector parse_rate(const std::string& s) {
    try {
        return RateVector(parse_doubles(s));
    } catch (const PreconditionError& e) {
        throw ConfigError(e.what());
    }
}

std::vector<RateVector> parse_rates(const std::string& s) {
    std::vector<RateVector> out;
    for (const auto& x : split(s, ';')) out.push_back(parse_rate(x));
    return out;
}

/// Per class, ';'-separated: "b0.4" Bernoulli, "p0.5/0.3/0.2" pmf, "s1,0,0,0" script, "0" none.
ArrivalProcess parse_arrivals(const std::string& s, std::size_t inputs) {
    const auto parts = split(s, ';');
    if (parts.size() != inputs)
        throw ConfigError("--arrivals needs " + std::to_string(inputs) + " ';'-separated entries");
    std::vector<ClassArrivals> c(inputs);
    std::vector<std::pair<std::size_t, std::vector<int>>> scripts;
    for (std::size_t i = 0; i < inputs; ++i) {
        const std::string& p = parts[i];
        const std::string body = p.substr(1);
        switch (p[0]) {
            case 'b': {
                const double x = parse_double(body);
                if (!(x >= 0.0 && x <= 1.0)) throw ConfigError("Bernoulli rate must be in [0, 1]");
                c[i].pmf = {1.0 - x, x};
                break;
            }
            case 'p':
                c[i].pmf = parse_doubles(body, '/');
                break;
            case 's': {
                std::vector<int> v;
                for (const auto& x : split(body, ',')) v.push_back(parse_int(x));
                scripts.emplace_back(i, std::move(v));
                break;
            }
            default:
                if (p == "0") {
                    c[i].pmf = {1.0};
                    break;
                }
                throw ConfigError("unknown arrival spec '" + p + "'");
        }
    }
    try {
        ArrivalProcess a(std::move(c));
        for (auto& [i, v] : scripts) a.script(i, std::move(v));
        return a;
    } catch (const PreconditionError& e) {
        throw ConfigError(e.what());
    }
}

std::map<std::string, double> parse_params(const std::vector<std::string>& kv) {
    std::map<std::string, double> out;
    for (const auto& s : kv) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("--param expects key=value, got '" + s + "'");
        out[s.substr(0, eq)] = parse_double(s.substr(eq + 1));
    }
    return out;
}

struct Source {
    std::string fixture;
    std::string scenario;
    std::vector<std::string> params;
    std::string kmax;
};

void add_source(CLI::App* cmd, Source& src) {
    cmd->add_option("--fixture", src.fixture, "registry fixture name");
    cmd->add_option("--scenario", src.scenario, "scenario JSON file");
    cmd->add_option("--param", src.params, "fixture parameter key=value (repeatable)");
    cmd->add_option("--kmax", src.kmax, "table box, comma-separated per class");
}

Scenario load_source(const Source& src) {
    if (src.fixture.empty() == src.scenario.empty()) throw ConfigError("give exactly one of --fixture, --scenario");
    Scenario sc;
    if (!src.scenario.empty()) {
        sc = load_scenario(src.scenario);
    } else {
        try {
            sc.fixture = build_fixture(src.fixture, parse_params(src.params));
        } catch (const PreconditionError& e) {
            throw ConfigError(e.what());
        }
        sc.name = src.fixture;
        sc.spec = sc.fixture->spec;
        sc.kmax = sc.fixture->default_kmax;
    }
    if (!src.kmax.empty()) {
        CountVector k = parse_counts(src.kmax);
        if (k.size() == sc.spec.inputs() && k.size() < sc.spec.classes()) {
            std::vector<int> v = k.values();
            v.resize(sc.spec.classes(), k.max_entry());
            k = CountVector(std::move(v));
        }
        if (k.size() != sc.spec.classes())
            throw ConfigError("--kmax needs " + std::to_string(sc.spec.classes()) + " entries");
        sc.kmax = k;
    }
    const auto rep = validate_spec(sc.spec);
    if (!rep.ok()) throw ConfigError("invalid system spec '" + sc.spec.name() + "':\n" + rep.to_string());
    if (!sc.kmax) throw ConfigError("no table box: pass --kmax");
    return sc;
}

fs::path out_file(const Global& g, const std::string& name) {
    fs::create_directories(g.out);
    return fs::path(g.out) / name;
}

void write_json(const fs::path& p, const Json& j) {
    std::ofstream out(p);
    if (!out) throw ConfigError("cannot write '" + p.string() + "'");
    out << j.dump(2) << '\n';
}

template <class F>
void write_text(const fs::path& p, F&& f) {
    std::ofstream out(p);
    if (!out) throw ConfigError("cannot write '" + p.string() + "'");
    f(out);
}

Json table_json(const SystemSpec& spec, const EvacTable& t) {
    Json rows = Json::array();
    const Box& box = t.box();
    for (std::size_t c = 1; c < box.cells(); ++c) {
        const CountVector k = box.at(c);
        for (StateId s = 0; s < t.num_states(); ++s) {
            const Decision d = t.argmin(k, s);
            rows.push_back({{"k", to_json(k)}, {"state", spec.state_name(s)}, {"value", num(t.value(k, s))},
                            {"control", spec.control_name(d.control)}, {"action", spec.action_name(d.control, d.action)}});
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------

struct SolveArgs {
    Source src;
    double tol = 1e-10;
};

int cmd_solve(const Global& g, const SolveArgs& a) {
    const Scenario sc = load_source(a.src);
    SolveOptions so;
    so.tol = a.tol;
    so.jobs = g.jobs;
    const EvacTable t = solve_evac_table(sc.spec, *sc.kmax, so);
    const bool admissible = !sc.fixture || sc.fixture->admissible;

    const auto sub = check_subadditivity(t);
    const auto lc = check_bounded_decrease(t);
    const auto lin = check_linear_bound(t);
    Json report;
    report["system"] = sc.spec.name();
    report["kmax"] = to_json(*sc.kmax);
    report["admissible"] = admissible;
    Json sv = Json::array();
    for (std::size_t i = 0; i < std::min<std::size_t>(sub.size(), 20); ++i)
        sv.push_back({{"k", to_json(sub[i].k)}, {"m", to_json(sub[i].m)}, {"gap", num(sub[i].gap)}});
    report["subadditivity"] = {{"violations", sub.size()}, {"first", sv}};
    report["bounded_decrease"] = {{"D0", num(lc.D0)}, {"D1", num(lc.D1)},       {"D", num(lc.D)},
                                  {"worst_ratio", num(lc.worst_ratio)}, {"holds", lc.holds()},
                                  {"exhaustive", lc.exhaustive}};
    report["linear_bound"] = {{"C1", num(lin.C1)},        {"C0", num(lin.C0)},
                              {"max_violation", num(lin.max_violation)}, {"certified", lin.certified()},
                              {"U", num(lin.U)},           {"u_bound_holds", lin.u_bound_holds()}};
    Json crit = Json::array();
    const Box& ib = t.input_box();
    for (std::size_t c = 0; c < ib.cells(); ++c) crit.push_back({{"k", to_json(ib.at(c))}, {"critical", num(t.critical_at(c))}});
    report["critical"] = crit;
    bool ok = true;
    if (admissible) ok = sub.empty() && lc.holds() && lin.certified() && lin.u_bound_holds();
    if (sc.fixture && sc.fixture->has_oracle()) {
        const double err = oracle_check(*sc.fixture, t);
        report["oracle_max_abs_err"] = num(err);
        ok = ok && err <= 1e-6;
    }
    report["checks_pass"] = ok;

    if (g.format == "json")
        write_json(out_file(g, "table.json"), table_json(sc.spec, t));
    else
        write_text(out_file(g, "table.csv"), [&](std::ostream& os) { write_table_csv(os, sc.spec, t); });
    write_json(out_file(g, "report.json"), report);
    std::cout << "solve " << sc.spec.name() << " kmax=" << sc.kmax->to_string()
              << " subadditivity_violations=" << sub.size() << " D=" << fmt_num(lc.D)
              << " checks=" << (ok ? "pass" : "fail") << '\n';
    return ok ? kExitOk : kExitChecksFailed;
}

// ---------------------------------------------------------------------------

struct RegionArgs {
    Source src;
    std::string directions;
    std::string points;
    std::string schedule;
    int grid = 10;
};

std::vector<RateVector> default_directions(std::size_t n, int grid) {
    std::vector<RateVector> out;
    if (n == 1) return {RateVector{1.0}};
    if (n == 2) {
        for (int j = 0; j <= grid; ++j) out.push_back(RateVector{static_cast<double>(j) / grid, 1.0 - static_cast<double>(j) / grid});
        return out;
    }
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> v(n, 0.0);
        v[i] = 1.0;
        out.emplace_back(std::move(v));
    }
    out.emplace_back(std::vector<double>(n, 1.0 / static_cast<double>(n)));
    return out;
}

int cmd_region(const Global& g, const RegionArgs& a) {
    const Scenario sc = load_source(a.src);
    SolveOptions so;
    so.jobs = g.jobs;
    const EvacTable t = solve_evac_table(sc.spec, *sc.kmax, so);
    const LimitAnalyzer an(t);
    const auto dirs = a.directions.empty() ? default_directions(an.dims(), a.grid) : parse_rates(a.directions);
    const auto sched = a.schedule.empty() ? std::vector<double>{} : parse_doubles(a.schedule);
    const RegionReport rep = sweep_region_boundary(an, dirs, sched, g.jobs);
    Json mem = Json::array();
    if (!a.points.empty())
        for (const auto& r : parse_rates(a.points)) mem.push_back(to_json(region_membership(an, r, sched)));
    if (g.format == "json")
        write_json(out_file(g, "region.json"), to_json(rep));
    else
        write_text(out_file(g, "region.csv"), [&](std::ostream& os) { write_region_csv(os, rep); });
    write_json(out_file(g, "membership.json"),
               {{"system", sc.spec.name()},
                {"admissible", !sc.fixture || sc.fixture->admissible},
                {"heuristic_bounds", true},
                {"points", mem}});
    for (const auto& d : rep.directions)
        std::cout << "direction " << d.direction.to_string() << " rho_star=" << fmt_num(d.rho_star) << " +- "
                  << fmt_num(d.rho_error) << (d.unbounded ? " (unbounded)" : "") << '\n';
    for (const auto& m : mem)
        std::cout << "point " << m["point"].dump() << " -> " << m["verdict"].get<std::string>() << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
    Source src;
    std::string arrivals;
    std::string initial;
    long horizon = 0;
    int reps = 1;
    std::string policy;
    std::string q_grid = "10,20,50,100";
};

std::unique_ptr<SlotPolicy> make_generic_policy(const std::string& name, const Scenario& sc) {
    if (name == "null") return std::make_unique<NullPolicy>(sc.spec);
    if (name == "priority_exhaustive") return std::make_unique<PriorityExhaustivePolicy>(sc.spec);
    if (name == "immediate_pairing") return std::make_unique<ImmediatePairingPolicy>(sc.spec);
    if (name == "m_batch_immediate") {
        const int M = sc.fixture ? static_cast<int>(sc.fixture->params.at("M")) : 3;
        return std::make_unique<MBatchImmediatePolicy>(sc.spec, M);
    }
    if (name == "aloha_commit") {
        const int c = sc.fixture && sc.fixture->params.count("commit_after") ? static_cast<int>(sc.fixture->params.at("commit_after")) : -1;
        return std::make_unique<AlohaCommitPolicy>(sc.spec, c);
    }
    if (name == "obo") return std::make_unique<OboPolicy>(sc.spec);
    if (name == "xor2") return std::make_unique<Xor2Policy>(sc.spec);
    throw ConfigError("unknown policy '" + name +
                      "'; valid: epoch, null, priority_exhaustive, immediate_pairing, m_batch_immediate, "
                      "aloha_commit, obo, xor2");
}

int cmd_simulate(const Global& g, const SimulateArgs& a) {
    Scenario sc = load_source(a.src);
    if (!a.arrivals.empty()) sc.arrivals = parse_arrivals(a.arrivals, sc.spec.inputs());
    if (!sc.arrivals) throw ConfigError("no arrival process: pass --arrivals or set it in the scenario");
    if (!a.initial.empty()) {
        try {
            sc.arrivals->with_initial(parse_counts(a.initial));
        } catch (const PreconditionError& e) {
            throw ConfigError(e.what());
        }
    }
    const long horizon = a.horizon > 0 ? a.horizon : sc.horizon.value_or(100000);
    const std::string policy = a.policy.empty() ? sc.policy : a.policy;
    if (a.reps < 1) throw ConfigError("--reps must be >= 1");
    const auto q_grid = parse_doubles(a.q_grid);

    std::optional<EvacTable> table;
    if (policy == "epoch") {
        SolveOptions so;
        so.jobs = g.jobs;
        table = solve_evac_table(sc.spec, *sc.kmax, so);
    } else {
        make_generic_policy(policy, sc);  // validate the name early
    }
    const auto traces = parallel_map(g.jobs, static_cast<std::size_t>(a.reps), [&](std::size_t r) {
        const std::uint64_t seed = derive_seed(g.seed, r);
        if (table) return run_epoch_policy(sc.spec, *table, *sc.arrivals, horizon, seed);
        auto pol = make_generic_policy(policy, sc);
        return run_generic_policy(sc.spec, *pol, *sc.arrivals, horizon, seed);
    });
    Json runs = Json::array();
    for (std::size_t r = 0; r < traces.size(); ++r) {
        const auto& tr = traces[r];
        Json run{{"rep", r}, {"seed", tr.seed}, {"conservation_error", conservation_error(tr)}};
        if (horizon >= 10000) run["verdict"] = to_json(stability_verdict(tr, q_grid));
        Json outflow = Json::array();
        for (long x : tr.class_outflow) outflow.push_back(num(static_cast<double>(x) / static_cast<double>(horizon)));
        run["departure_rate"] = outflow;
        if (table) {
            run["epochs"] = tr.epochs.size();
            long fb = 0;
            for (const auto& e : tr.epochs) fb += e.fallback;
            run["fallback_epochs"] = fb;
            run["drift"] = to_json(estimate_drift(tr));
            run["regeneration"] = to_json(sc.spec, regeneration_cycles(tr, most_frequent_anchor(tr)));
        }
        runs.push_back(run);
    }
    const Json verdicts{{"system", sc.spec.name()},
                        {"policy", policy},
                        {"horizon", horizon},
                        {"arrival_rate", to_json(sc.arrivals->rate())},
                        {"scripted_arrivals", sc.arrivals->scripted()},
                        {"stability_claim_applies", !sc.arrivals->scripted() && policy == "epoch"},
                        {"runs", runs}};
    write_text(out_file(g, "trace.csv"), [&](std::ostream& os) { write_trace_csv(os, traces.front()); });
    if (table) write_text(out_file(g, "epochs.csv"), [&](std::ostream& os) { write_epochs_csv(os, sc.spec, traces.front()); });
    write_json(out_file(g, "verdict.json"), verdicts);
    for (const auto& r : runs)
        std::cout << "rep " << r["rep"].get<std::size_t>() << ": "
                  << (r.contains("verdict") ? r["verdict"]["verdict"].get<std::string>() : std::string("n/a (horizon < 1e4)"))
                  << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct BecArgs {
    std::string scenario;
    int n = 1;
    std::string eps = "0.5";
    int L = 1024;
    bool coded = false;
    std::string kmax;
    bool compare = false;
    std::string directions;
    std::string r;
    double delta = 0.01;
    std::string lengths = "200,400,800";
    long l0 = 0;
    long reps = 10000;
    std::string batch_policy = "optimal";
    long horizon = 200000;
};

int cmd_bec(const Global& g, const BecArgs& a) {
    BecSpec bec;
    bool coded = a.coded;
    std::optional<CountVector> kmax;
    if (!a.scenario.empty()) {
        const Scenario sc = load_scenario(a.scenario);
        if (!sc.bec) throw ConfigError("scenario has no 'bec' section");
        bec = *sc.bec;
        coded = sc.coded;
        kmax = sc.kmax;
    } else {
        const auto eps = parse_doubles(a.eps);
        if (eps.size() != static_cast<std::size_t>(a.n)) throw ConfigError("--eps needs n entries");
        try {
            bec = make_independent_bec(eps, a.L);
        } catch (const PreconditionError& e) {
            throw ConfigError(e.what());
        }
    }
    const SystemSpec spec = coded ? make_xor2_spec(bec) : make_bec_spec(bec);
    if (!a.kmax.empty()) kmax = parse_counts(a.kmax);
    if (!kmax) kmax = CountVector(std::vector<int>(spec.classes(), spec.classes() == 1 ? 64 : 8));
    if (kmax->size() != spec.classes()) throw ConfigError("--kmax needs " + std::to_string(spec.classes()) + " entries");
    SolveOptions so;
    so.jobs = g.jobs;
    const EvacTable t = solve_evac_table(spec, *kmax, so);
    const LimitAnalyzer an(t);
    bool ok = true;
    Json report{{"system", spec.name()}, {"n", bec.n}, {"L", bec.L}, {"coded", coded}, {"kmax", to_json(*kmax)}};

    if (!a.r.empty()) {
        const RateVector r = parse_rate(a.r);
        const BatchPolicy bp = a.batch_policy == "obo" ? BatchPolicy::obo : BatchPolicy::optimal;
        if (a.batch_policy != "obo" && a.batch_policy != "optimal") throw ConfigError("--batch-policy is optimal or obo");
        long l0 = a.l0;
        if (l0 <= 0) {
            const auto c = choose_l0(t, r, an.estimate(r).estimate, a.delta);
            if (!c) throw RangeError("no l0 satisfies the near-optimality check inside the table box; raise --kmax");
            l0 = *c;
        }
        std::vector<QleEstimate> rows;
        std::size_t i = 0;
        for (double l : parse_doubles(a.lengths))
            rows.push_back(estimate_qle(spec, t, r, l0, static_cast<long>(l), a.delta, a.reps, derive_seed(g.seed, i++),
                                        g.jobs, bp));
        Json q = Json::array();
        for (const auto& e : rows) q.push_back(to_json(e));
        report["qle"] = q;
        if (g.format == "json")
            write_json(out_file(g, "qle.json"), q);
        else
            write_text(out_file(g, "qle.csv"), [&](std::ostream& os) { write_qle_csv(os, rows); });
        for (const auto& e : rows)
            std::cout << "l=" << e.l << " l0=" << e.l0 << " q_hat=" << fmt_num(e.q_hat) << " +- "
                      << fmt_num(e.ci_halfwidth) << (e.no_guarantee ? " [flag: no convergence guarantee]" : "") << '\n';
    }
    if (a.compare) {
        CompareOptions co;
        co.seed = derive_seed(g.seed, 1u << 16);
        co.jobs = g.jobs;
        co.delta = a.delta;
        co.horizon = a.horizon;
        const auto dirs = a.directions.empty() ? default_directions(spec.inputs(), 4) : parse_rates(a.directions);
        const auto cmp = capacity_stability_compare(bec, spec, t, dirs, co);
        report["compare"] = to_json(cmp);
        ok = cmp.all_agree();
        for (const auto& d : cmp.directions)
            std::cout << "direction " << d.direction.to_string() << " radius=" << fmt_num(d.radius)
                      << " qle_rate=" << fmt_num(d.qle_rate) << " stable_rate=" << fmt_num(d.stable_rate)
                      << (d.agree ? " agree" : " DISAGREE") << '\n';
    }
    write_json(out_file(g, "bec_report.json"), report);
    return ok ? kExitOk : kExitChecksFailed;
}

// ---------------------------------------------------------------------------

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    return buf;
}

int cmd_verify(const Global& g) {
    AcceptanceOptions opt;
    opt.seed = g.seed;
    opt.jobs = g.jobs;
    const auto results = run_acceptance(opt);
    bool ok = true;
    for (const auto& r : results) {
        ok = ok && r.pass;
        std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.id << ' ' << r.name << '\n';
    }
    write_text(out_file(g, "verify_results.json"), [&](std::ostream& os) {
        os << "# evac verify generated " << utc_timestamp() << '\n' << acceptance_json(results, opt).dump(2) << '\n';
    });
    return ok ? kExitOk : kExitChecksFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"evacuation-time analysis of slotted queueing systems"};
    app.require_subcommand(1);
    Global g;
    app.add_option("--seed", g.seed, "master seed")->capture_default_str();
    app.add_option("--jobs", g.jobs, "worker threads")->capture_default_str()->check(CLI::Range(1u, 1024u));
    app.add_option("--out", g.out, "output directory")->capture_default_str();
    app.add_option("--format", g.format, "table output format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();

    SolveArgs solve;
    auto* c_solve = app.add_subcommand("solve", "solve the evacuation table and check its structural properties");
    add_source(c_solve, solve.src);
    c_solve->add_option("--tol", solve.tol, "value iteration tolerance");

    RegionArgs region;
    auto* c_region = app.add_subcommand("region", "limit function, region boundary and membership");
    add_source(c_region, region.src);
    c_region->add_option("--directions", region.directions, "';'-separated unit-sum directions, e.g. 1,0;0.5,0.5");
    c_region->add_option("--points", region.points, "';'-separated rate vectors for membership");
    c_region->add_option("--schedule", region.schedule, "comma-separated scale schedule t_1 < ... < t_J");
    c_region->add_option("--grid", region.grid, "directions per unit segment in 2-D");

    SimulateArgs sim;
    auto* c_sim = app.add_subcommand("simulate", "simulate under arrivals and issue stability verdicts");
    add_source(c_sim, sim.src);
    c_sim->add_option("--arrivals", sim.arrivals, "per class, ';'-separated: b<rate> | p<p0/p1/...> | s<a0,a1,...> | 0");
    c_sim->add_option("--initial", sim.initial, "A(0), comma-separated");
    c_sim->add_option("--horizon", sim.horizon, "slots");
    c_sim->add_option("--reps", sim.reps, "independent replications");
    c_sim->add_option("--policy", sim.policy, "epoch (default) or a slot-level rule");
    c_sim->add_option("--q-grid", sim.q_grid, "tail levels for the verdict");

    BecArgs bec;
    auto* c_bec = app.add_subcommand("bec", "broadcast erasure channel experiments");
    c_bec->add_option("--scenario", bec.scenario, "scenario JSON with a 'bec' section");
    c_bec->add_option("--n", bec.n, "receivers");
    c_bec->add_option("--eps", bec.eps, "per-receiver erasure probabilities");
    c_bec->add_option("--L", bec.L, "payload bits per packet");
    c_bec->add_flag("--coded", bec.coded, "two-receiver XOR system");
    c_bec->add_option("--kmax", bec.kmax, "table box");
    c_bec->add_flag("--compare", bec.compare, "compare region radius, code rate and stable rate");
    c_bec->add_option("--directions", bec.directions, "directions for --compare");
    c_bec->add_option("--r", bec.r, "rate vector for the batch-code error estimate");
    c_bec->add_option("--delta", bec.delta, "margin");
    c_bec->add_option("--lengths", bec.lengths, "code lengths l");
    c_bec->add_option("--l0", bec.l0, "batch scale (default: smallest passing the check)");
    c_bec->add_option("--reps", bec.reps, "replications");
    c_bec->add_option("--batch-policy", bec.batch_policy, "optimal or obo");
    c_bec->add_option("--horizon", bec.horizon, "slots per stability run in --compare");

    auto* c_fix = app.add_subcommand("fixtures", "fixture registry");
    auto* c_fix_list = c_fix->add_subcommand("list", "print the registry as JSON");
    c_fix->require_subcommand(1);

    auto* c_verify = app.add_subcommand("verify", "run the acceptance suite");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitError;
    }

    try {
        if (c_solve->parsed()) return cmd_solve(g, solve);
        if (c_region->parsed()) return cmd_region(g, region);
        if (c_sim->parsed()) return cmd_simulate(g, sim);
        if (c_bec->parsed()) return cmd_bec(g, bec);
        if (c_fix_list->parsed()) {
            std::cout << fixtures_json().dump(2) << '\n';
            return kExitOk;
        }
        if (c_verify->parsed()) return cmd_verify(g);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    return kExitError;
}
