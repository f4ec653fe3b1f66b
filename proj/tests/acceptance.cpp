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

// Acceptance suite: one pass/fail line per criterion.
// Usage: acceptance [--work DIR] [--skip-determinism]

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>

#include "evac/acceptance.hpp"

#ifndef EVAC_CLI
#error "EVAC_CLI must name the evac executable"
#endif

namespace fs = std::filesystem;

namespace {

void print(int id, const std::string& name, bool pass, const std::string& detail) {
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << std::setw(2) << id << ' ' << name << "  " << detail << std::endl;
}

// Returns the file body after the first line.
std::string body_of(const fs::path& p) {
    std::ifstream in(p);
    if (!in) return {};
    std::string header;
    std::getline(in, header);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool run_verify(const fs::path& dir, unsigned jobs) {
    fs::create_directories(dir);
    const std::string cmd = std::string("\"") + EVAC_CLI + "\" --seed 1 --jobs " + std::to_string(jobs) +
                            " --out \"" + dir.string() + "\" verify > \"" + (dir / "stdout.txt").string() + "\" 2>&1";
    const int rc = std::system(cmd.c_str());
    return rc != -1;
}

}  // namespace

int main(int argc, char** argv) {
    fs::path work = fs::temp_directory_path() / "evac_acceptance";
    bool determinism = true;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--work" && i + 1 < argc)
            work = argv[++i];
        else if (a == "--skip-determinism")
            determinism = false;
        else {
            std::cerr << "usage: acceptance [--work DIR] [--skip-determinism]\n";
            return 1;
        }
    }

    evac::AcceptanceOptions opt;
    opt.seed = 1;
    opt.jobs = 1;
    bool all = true;
    for (const auto& r : evac::run_acceptance(opt)) {
        const bool in_time = r.time_limit <= 0 || r.seconds <= r.time_limit;
        const bool pass = r.pass && in_time;
        std::ostringstream d;
        d << std::fixed << std::setprecision(1) << r.seconds << "s";
        if (r.time_limit > 0) d << " (limit " << r.time_limit << "s)";
        d << ' ' << r.metrics.dump();
        print(r.id, r.name, pass, d.str());
        all = all && pass;
    }

    if (determinism) {
        const fs::path runs[] = {work / "j1a", work / "j1b", work / "j8a", work / "j8b"};
        const unsigned jobs[] = {1, 1, 8, 8};
        bool ok = true;
        for (int i = 0; i < 4; ++i) ok = run_verify(runs[i], jobs[i]) && ok;
        std::string ref = body_of(runs[0] / "verify_results.json");
        ok = ok && !ref.empty();
        for (int i = 1; i < 4; ++i) ok = ok && body_of(runs[i] / "verify_results.json") == ref;
        print(10, "determinism", ok, "verify x2 at --jobs 1 and x2 at --jobs 8, bodies identical");
        all = all && ok;
    }
    return all ? 0 : 1;
}
