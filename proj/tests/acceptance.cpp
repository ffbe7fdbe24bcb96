// Copyright 2026 The Tabletop Grounding Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// Prints one PASS/FAIL line per acceptance criterion; exit status 0 only
// when every criterion passes.
//
//   acceptance [--quick] [work_dir]

#include <iostream>
#include <string>

#include "tabletop/suite/acceptance.hpp"

int main(int argc, char** argv) {
  tabletop::AcceptanceConfig config;
  config.log = &std::cerr;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--quick") {
      config.sizes = tabletop::AcceptanceSizes::quick();
    } else if (!arg.empty() && arg[0] != '-') {
      config.work_dir = arg;
    } else {
      std::cerr << "usage: acceptance [--quick] [work_dir]\n";
      return 1;
    }
  }
  try {
    const auto report = tabletop::run_acceptance(config);
    for (const auto& c : report.criteria) std::cout << c.line() << "\n";
    std::cout << (report.all_pass() ? "ALL PASS" : "SOME CRITERIA FAILED") << std::endl;
    return report.all_pass() ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "acceptance: " << e.what() << "\n";
    return 2;
  }
}
