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

// Command-line entry points. Exit status: 0 success, 1 invalid input or a
// failed verification, 2 runtime failure.

#include <atomic>
#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tabletop/dialogue/task.hpp"
#include "tabletop/eval/benchmarks.hpp"
#include "tabletop/ground/train.hpp"
#include "tabletop/service/config.hpp"
#include "tabletop/service/server.hpp"
#include "tabletop/service/session.hpp"
#include "tabletop/spatial/train.hpp"
#include "tabletop/suite/acceptance.hpp"
#include "tabletop/world/world.hpp"

// After Eigen: <resolv.h> defines a _res macro.
#include "httplib.h"

namespace fs = std::filesystem;
using namespace tabletop;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kRuntime = 2;

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

AppConfig load_config(const std::string& path) {
  return path.empty() ? AppConfig{} : AppConfig::load(path);
}

void print_scene(std::ostream& out, const Scene& scene) {
  for (TableId t : {TableId::pick, TableId::place}) {
    out << (t == TableId::pick ? "pick table" : "place table") << "\n"
        << render_ascii(scene, t);
    for (const SceneObject* o : scene.on_table(t)) {
      out << "  " << object_glyph(o->id) << "  #" << o->id << " " << describe_object(*o) << "\n";
    }
  }
  if (scene.gripper) out << "holding #" << scene.gripper->id << " " << describe_object(*scene.gripper) << "\n";
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  int n = 1000;
  std::uint64_t seed = 0;
  double ambiguity = 0.0;
  int grid = 64;
  std::string out = "dataset.jsonl";
};

int cmd_synth(const SynthArgs& a) {
  DatasetConfig dc;
  dc.n_records = a.n;
  dc.ambiguity_rate = a.ambiguity;
  dc.grid = a.grid;
  const GroundingDataset ds = build_dataset(dc, a.seed);
  auto out = open_out(a.out);
  write_jsonl(ds, out);
  std::cout << "wrote " << ds.records.size() << " records over " << ds.scenes.size()
            << " scenes to " << a.out << "\n";
  return kOk;
}

GroundingDataset read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot read dataset " + path);
  return read_jsonl(in);
}

struct TrainGroundArgs {
  std::string data;
  std::string config;
  int epochs = -1;
  std::int64_t seed = -1;
  bool joint = false;
  std::string out = "grounder.ckpt";
  std::string curves = "grounder_curves.csv";
};

int cmd_train_ground(const TrainGroundArgs& a) {
  TrainConfig tc = load_config(a.config).train;
  if (a.epochs >= 0) tc.epochs = a.epochs;
  if (a.seed >= 0) tc.seed = static_cast<std::uint64_t>(a.seed);
  if (a.joint) tc.joint = true;
  tc.validate();
  const GroundingDataset ds = read_dataset(a.data);
  const auto res = train_grounding(ds, tc, ModelDims{}, &std::cerr);
  res.model.save(a.out, {{"train", tc.to_json()}});
  if (!a.curves.empty()) {
    auto out = open_out(a.curves);
    write_curves_csv(res.curves, out);
    std::vector<Series> series(2);
    series[0].name = "L1";
    series[1].name = "val_accuracy";
    for (const auto& e : res.curves) {
      series[0].y.push_back(e.l1);
      series[1].y.push_back(e.val_accuracy);
    }
    if (!res.curves.empty()) plot_lines(fs::path(a.curves).replace_extension(".png"), series);
  }
  std::cout << "saved " << a.out << "\n";
  return kOk;
}

struct AuxArgs {
  int scenes = 2000;
  std::uint64_t scene_seed = 1;
  int epochs = 30;
  std::uint64_t seed = 5;
  std::string out = "aux.ckpt";
};

int cmd_pretrain_aux(const AuxArgs& a) {
  AuxTrainConfig ac;
  ac.epochs = a.epochs;
  ac.seed = a.seed;
  const auto train = build_placement_scenes(a.scenes, {}, a.scene_seed);
  const AuxClassifier clf = pretrain_aux(train, ac, &std::cerr);
  clf.save(a.out, {{"train", ac.to_json()}});
  const auto held_out = build_placement_scenes(std::max(1, a.scenes / 10), {}, a.scene_seed + 1);
  std::cout << "agreement " << aux_agreement(clf, held_out, 64, a.seed + 1) << "\nsaved " << a.out
            << "\n";
  return kOk;
}

struct PlaceArgs {
  std::string aux;
  int scenes = 2000;
  int val = 200;
  std::uint64_t scene_seed = 1;
  int epochs = 15;
  std::uint64_t seed = 3;
  std::string out = "placement.ckpt";
  std::string curves = "placement_curves.csv";
};

int cmd_train_place(const PlaceArgs& a) {
  const AuxClassifier clf = a.aux.empty() ? AuxClassifier::oracle() : AuxClassifier::load(a.aux);
  PlacementTrainConfig tc;
  tc.epochs = a.epochs;
  tc.seed = a.seed;
  tc.validate();
  const auto train = build_placement_scenes(a.scenes, {}, a.scene_seed);
  const auto val = build_placement_scenes(a.val, {}, a.scene_seed + 1);
  const auto res = train_placement(train, val, clf, tc, PlacementNet::create({}, a.seed + 1), &std::cerr);
  res.net.save(a.out, {{"train", tc.to_json()}, {"aux", a.aux.empty() ? "oracle" : a.aux}});
  if (!a.curves.empty()) {
    auto out = open_out(a.curves);
    write_placement_curves_csv(res.curves, out);
  }
  std::cout << "saved " << a.out << "\n";
  return kOk;
}

struct EvalArgs {
  std::string suite = "acceptance";
  std::string out;
  std::string work_dir = "acceptance";
  bool quick = false;
  std::string data;
  std::string grounder;
  std::string placement;
  int scenes = 1000;
  int samples = 10;
  std::uint64_t seed = 3;
  std::vector<std::string> logs;
};

void write_rows(std::ostream& out, const std::vector<std::pair<std::string, double>>& rows) {
  out << "metric,value\n" << std::setprecision(10);
  for (const auto& [k, v] : rows) out << k << "," << v << "\n";
}

int cmd_eval(const EvalArgs& a) {
  std::ostringstream csv;
  int status = kOk;
  if (a.suite == "acceptance") {
    AcceptanceConfig ac;
    ac.work_dir = a.work_dir;
    ac.log = &std::cerr;
    if (a.quick) ac.sizes = AcceptanceSizes::quick();
    const auto report = run_acceptance(ac);
    for (const auto& c : report.criteria) std::cout << c.line() << "\n";
    csv << report.to_csv();
  } else if (a.suite == "comprehension" || a.suite == "generation") {
    if (a.data.empty() || a.grounder.empty()) throw InvalidArgument("--data and --grounder are required");
    const GroundingDataset ds = read_dataset(a.data);
    const GroundingModel model = GroundingModel::load(a.grounder);
    const auto test = ds.records_in(Split::test);
    if (a.suite == "comprehension") {
      const auto r = eval_comprehension(ds, test, model);
      std::vector<std::pair<std::string, double>> rows = {{"exact", r.exact.value()},
                                                           {"iou_0_5", r.iou.value()}};
      for (int k = 0; k < kNumClauseKinds; ++k) {
        rows.emplace_back("exact_" + std::string(to_string(static_cast<ClauseKind>(k))),
                          r.exact_by_kind[k].value());
      }
      write_rows(csv, rows);
    } else {
      const auto r = eval_generation(ds, test, model);
      write_rows(csv, {{"reranked", r.reranked.value()}, {"beam_top", r.beam_top.value()}});
    }
  } else if (a.suite == "placement") {
    const auto test = build_placement_scenes(a.scenes, {}, a.seed);
    std::unique_ptr<PlacementNet> net;
    if (!a.placement.empty()) net = std::make_unique<PlacementNet>(PlacementNet::load(a.placement));
    const auto r = eval_placement(test, net ? net_maps(*net) : ideal_maps(), a.samples, a.seed + 1);
    csv << r.to_csv();
  } else if (a.suite == "table2") {
    if (a.logs.empty()) throw InvalidArgument("--log is required for the table2 suite");
    std::vector<std::string> lines;
    for (const auto& path : a.logs) {
      std::ifstream in(path);
      if (!in) throw InvalidArgument("cannot read log " + path);
      for (std::string line; std::getline(in, line);) lines.push_back(line);
    }
    const auto r = table2_report(lines);
    csv << r.metrics.to_csv();
    if (r.malformed > 0) {
      std::cerr << r.malformed << " malformed lines\n";
      status = kInvalid;
    }
  } else {
    throw InvalidArgument("unknown suite '" + a.suite + "'");
  }
  const fs::path out = a.out.empty() ? fs::path(a.work_dir) / (a.suite + ".csv") : fs::path(a.out);
  auto f = open_out(out);
  f << csv.str();
  std::cout << "wrote " << out.string() << "\n";
  return status;
}

struct ReplArgs {
  std::string config;
  std::uint64_t seed = 0;
  std::string log_dir;
};

int cmd_repl(const ReplArgs& a) {
  const AppConfig cfg = load_config(a.config);
  const ModelBundle models(cfg);
  Session session(new_session_id(), a.seed, cfg.scene_config(a.seed), models.models(), cfg.executor,
                  models.description(),
                  a.log_dir.empty() ? std::nullopt : std::optional<fs::path>(a.log_dir));
  if (session.log_path()) std::cout << "logging to " << session.log_path()->string() << "\n";
  print_scene(std::cout, session.scene());
  std::cout << "commands: :scene :quit\n> " << std::flush;
  for (std::string line; std::getline(std::cin, line); std::cout << "> " << std::flush) {
    if (line == ":quit") break;
    if (line == ":scene") {
      print_scene(std::cout, session.scene());
      continue;
    }
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      const SystemAction act = session.state().phase == Phase::awaiting_confirmation
                                   ? session.response(line)
                                   : session.instruction(line);
      std::cout << "robot: " << act.text << "\n";
      if (act.kind == SystemActionKind::picked || act.kind == SystemActionKind::placed) {
        print_scene(std::cout, session.scene());
      }
    } catch (const Error& e) {
      std::cout << "error: " << e.what() << "\n";
    }
  }
  std::cout << "\n";
  return kOk;
}

std::atomic<httplib::Server*> g_server{nullptr};

extern "C" void on_signal(int) {
  if (auto* s = g_server.load()) s->stop();
}

int cmd_serve(const std::string& config_path) {
  const AppConfig cfg = load_config(config_path);
  const ModelBundle models(cfg);
  Service service(cfg, models);
  const std::size_t recovered = service.sessions().recover_all(models.models());
  httplib::Server server;
  service.mount(server);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "recovered " << recovered << " sessions; listening on http://" << cfg.host << ":"
            << cfg.port << std::endl;
  service.serve(server);
  g_server = nullptr;
  return kOk;
}

struct ReplayArgs {
  std::string log;
  std::string grounder;
  std::string placement;
};

int cmd_replay(const ReplayArgs& a) {
  std::ifstream in(a.log);
  if (!in) throw InvalidArgument("cannot read " + a.log);
  std::string first;
  std::getline(in, first);
  json header;
  try {
    header = json::parse(first);
  } catch (const json::exception&) {
    throw SchemaError("log header is not JSON");
  }
  // Models come from the log header unless overridden.
  AppConfig cfg;
  const json models = header.value("models", json::object());
  const auto pick = [&](const std::string& flag, const char* key) -> std::string {
    if (!flag.empty()) return flag == "oracle" ? "" : flag;
    const std::string v = models.value(key, "oracle");
    return v == "oracle" ? "" : v;
  };
  cfg.grounder_checkpoint = pick(a.grounder, "grounder");
  cfg.placement_checkpoint = pick(a.placement, "placement");
  if (header.contains("executor")) cfg.executor = ExecutorConfig::from_json(header["executor"]);
  const ModelBundle bundle(cfg);
  const ReplayResult r = replay_log(fs::path(a.log), bundle.models());
  if (!r.verified) {
    std::cout << "replay diverged after " << r.steps << " steps: " << r.mismatch << "\n";
    return kInvalid;
  }
  std::cout << "replayed " << r.steps << " steps";
  if (r.torn_lines > 0) std::cout << " (ignored a torn final line)";
  std::cout << "\nscene verified\n";
  return kOk;
}

struct DemoArgs {
  std::string config;
  std::uint64_t seed = 0;
  std::string log;
};

int cmd_demo(const DemoArgs& a) {
  const AppConfig cfg = load_config(a.config);
  const ModelBundle models(cfg);
  auto [scene, script] = build_tidy_up(a.seed);
  print_scene(std::cout, scene);
  const TaskResult res = run_task(script, scene, models.models(), cfg.executor, a.seed);
  for (const Turn& t : res.transcript) std::cout << t.speaker << ": " << t.text << "\n";
  print_scene(std::cout, res.scene);
  std::cout << "actions " << res.metrics.actions << ", failed steps " << res.failed_steps
            << ", goal " << (res.goal_reached.value_or(false) ? "reached" : "not reached") << "\n";
  if (!a.log.empty()) {
    auto out = open_out(a.log);
    for (const json& j : res.log) out << j.dump() << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interactive tabletop pick-and-place: data, training, evaluation and service"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a referring-expression dataset as JSON lines");
  s->add_option("--n", synth.n, "Number of records")->check(CLI::PositiveNumber);
  s->add_option("--seed", synth.seed, "Dataset seed");
  s->add_option("--ambiguity", synth.ambiguity, "Fraction of ambiguous attribute records")
      ->check(CLI::Range(0.0, 1.0));
  s->add_option("--grid", synth.grid, "Table grid size")->check(CLI::Range(16, 512));
  s->add_option("--out", synth.out, "Output file");

  TrainGroundArgs tg;
  auto* g = app.add_subcommand("train-ground", "Train the grounding model on a dataset");
  g->add_option("--data", tg.data, "Dataset written by synth")->required()->check(CLI::ExistingFile);
  g->add_option("--config", tg.config, "Config file whose train section sets the defaults");
  g->add_option("--epochs", tg.epochs, "Epochs");
  g->add_option("--seed", tg.seed, "Training seed");
  g->add_flag("--joint", tg.joint, "Also train the generator losses");
  g->add_option("--out", tg.out, "Checkpoint path");
  g->add_option("--curves", tg.curves, "Training curves CSV (a PNG is written beside it)");

  AuxArgs aux;
  auto* x = app.add_subcommand("pretrain-aux", "Fit the learned spatial relation classifier");
  x->add_option("--scenes", aux.scenes, "Training scenes")->check(CLI::PositiveNumber);
  x->add_option("--scene-seed", aux.scene_seed, "Scene seed");
  x->add_option("--epochs", aux.epochs, "Epochs")->check(CLI::PositiveNumber);
  x->add_option("--seed", aux.seed, "Training seed");
  x->add_option("--out", aux.out, "Checkpoint path");

  PlaceArgs pl;
  auto* p = app.add_subcommand("train-place", "Train the placement network");
  p->add_option("--aux", pl.aux, "Relation classifier checkpoint (default: oracle)")
      ->check(CLI::ExistingFile);
  p->add_option("--scenes", pl.scenes, "Training scenes")->check(CLI::PositiveNumber);
  p->add_option("--val", pl.val, "Validation scenes")->check(CLI::NonNegativeNumber);
  p->add_option("--scene-seed", pl.scene_seed, "Scene seed");
  p->add_option("--epochs", pl.epochs, "Epochs")->check(CLI::PositiveNumber);
  p->add_option("--seed", pl.seed, "Training seed");
  p->add_option("--out", pl.out, "Checkpoint path");
  p->add_option("--curves", pl.curves, "Training curves CSV");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Run an evaluation suite and write its CSV report");
  e->add_option("--suite", ev.suite, "Suite")
      ->check(CLI::IsMember({"acceptance", "comprehension", "generation", "placement", "table2"}));
  e->add_option("--out", ev.out, "CSV path (default: <work-dir>/<suite>.csv)");
  e->add_option("--work-dir", ev.work_dir, "Artifacts directory of the acceptance suite");
  e->add_flag("--quick", ev.quick, "Tiny acceptance workload, for format checks only");
  e->add_option("--data", ev.data, "Dataset for comprehension and generation");
  e->add_option("--grounder", ev.grounder, "Grounding checkpoint");
  e->add_option("--placement", ev.placement, "Placement checkpoint (default: oracle maps)");
  e->add_option("--scenes", ev.scenes, "Placement test scenes")->check(CLI::PositiveNumber);
  e->add_option("--samples", ev.samples, "Placements per scene and relation")
      ->check(CLI::PositiveNumber);
  e->add_option("--seed", ev.seed, "Placement scene seed");
  e->add_option("--log", ev.logs, "Session logs for table2");

  ReplArgs repl;
  auto* r = app.add_subcommand("repl", "Talk to the robot on stdin/stdout");
  r->add_option("--config", repl.config, "Config file");
  r->add_option("--seed", repl.seed, "Scene seed");
  r->add_option("--log-dir", repl.log_dir, "Persist the session log in this directory");

  std::string serve_config;
  auto* v = app.add_subcommand("serve", "Run the HTTP session service");
  v->add_option("--config", serve_config, "Config file");

  ReplayArgs rp;
  auto* y = app.add_subcommand("replay", "Re-execute a session log and verify the final scene");
  y->add_option("log", rp.log, "Session log")->required();
  y->add_option("--grounder", rp.grounder, "Grounding checkpoint or 'oracle' (default: from the log)");
  y->add_option("--placement", rp.placement, "Placement checkpoint or 'oracle' (default: from the log)");

  DemoArgs demo;
  auto* d = app.add_subcommand("demo", "Run the tidy-up task end to end");
  d->add_option("--config", demo.config, "Config file");
  d->add_option("--seed", demo.seed, "Task seed");
  d->add_option("--log", demo.log, "Write the action log here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    if (*s) return cmd_synth(synth);
    if (*g) return cmd_train_ground(tg);
    if (*x) return cmd_pretrain_aux(aux);
    if (*p) return cmd_train_place(pl);
    if (*e) return cmd_eval(ev);
    if (*r) return cmd_repl(repl);
    if (*v) return cmd_serve(serve_config);
    if (*y) return cmd_replay(rp);
    if (*d) return cmd_demo(demo);
  } catch (const InvalidArgument& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kInvalid;
  } catch (const SchemaError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kInvalid;
  } catch (const CheckpointError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kInvalid;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kRuntime;
  }
  return kInvalid;
}
