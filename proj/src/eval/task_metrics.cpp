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
#include "tabletop/eval/task_metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace tabletop {

namespace {

nlohmann::json ratio_json(const Ratio& r) {
  return {{"num", r.num}, {"den", r.den}, {"value", r.value()}};
}

}  // namespace

TaskMetrics& TaskMetrics::operator+=(const TaskMetrics& o) {
  target_selection += o.target_selection;
  grasping += o.grasping;
  placing_base_grounding += o.placing_base_grounding;
  placing_success += o.placing_success;
  feedback += o.feedback;
  pick_and_place += o.pick_and_place;
  actions += o.actions;
  tasks += o.tasks;
  return *this;
}

TaskMetrics metrics_from_records(std::span<const nlohmann::json> records, long* malformed) {
  TaskMetrics m;
  long bad = 0;
  for (const auto& r : records) {
    // Session-log framing lines (session header, step) carry no metrics.
    if (r.is_object() && r.contains("type") && r["type"] != "record") continue;
    try {
      const std::string kind = r.at("kind").get<std::string>();
      if (kind == "pick_attempt") {
        m.grasping.add(r.at("payload").at("success").get<bool>());
        ++m.actions;
      } else if (kind == "place") {
        ++m.actions;
      } else if (kind == "question") {
        ++m.feedback.num;
      } else if (kind == "user_turn") {
        if (!r.at("payload").at("response").get<bool>()) ++m.feedback.den;
      } else if (kind == "task_end") {
        ++m.tasks;
      } else if (kind == "assessment") {
        const std::string stage = r.at("stage").get<std::string>();
        const bool ok = r.at("success").get<bool>();
        if (stage == "selection") m.target_selection.add(ok);
        else if (stage == "reference") m.placing_base_grounding.add(ok);
        else if (stage == "placement") m.placing_success.add(ok);
        else if (stage == "pick_and_place") m.pick_and_place.add(ok);
        else ++bad;
      }
    } catch (const nlohmann::json::exception&) {
      ++bad;
    }
  }
  if (malformed) *malformed = bad;
  return m;
}

std::string format_ratio(const Ratio& r, bool as_percent, int decimals) {
  char buf[64];
  // Truncated, not rounded, as in the published table (35/47 is "74.4%").
  const double scale = std::pow(10.0, decimals);
  const double v =
      std::floor((as_percent ? 100.0 : 1.0) * r.value() * scale + 1e-9) / scale;
  std::snprintf(buf, sizeof buf, as_percent ? "%.*f%% (%ld/%ld)" : "%.*f (%ld/%ld)", decimals, v,
                r.num, r.den);
  return buf;
}

nlohmann::json TaskMetrics::to_json() const {
  return {{"target_selection", ratio_json(target_selection)},
          {"grasping", ratio_json(grasping)},
          {"placing_base_grounding", ratio_json(placing_base_grounding)},
          {"placing_success", ratio_json(placing_success)},
          {"feedback_per_command", ratio_json(feedback)},
          {"pick_and_place", ratio_json(pick_and_place)},
          {"mean_task_length", {{"actions", actions}, {"tasks", tasks}, {"value", mean_task_length()}}}};
}

std::string TaskMetrics::to_csv() const {
  std::ostringstream out;
  out << "target_selection,grasping,placing_base_grounding,placing_success,"
         "feedback_per_command,pick_and_place,mean_task_length\n";
  char len[64];
  std::snprintf(len, sizeof len, "%.2f (%ld/%ld)", mean_task_length(), actions, tasks);
  out << format_ratio(target_selection, true) << ',' << format_ratio(grasping, true) << ','
      << format_ratio(placing_base_grounding, true) << ',' << format_ratio(placing_success, true)
      << ',' << format_ratio(feedback, false, 2) << ',' << format_ratio(pick_and_place, true, 0)
      << ',' << len << '\n';
  return out.str();
}

}  // namespace tabletop
