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

#include "tabletop/world/world.hpp"

#include <algorithm>
#include <limits>

#include "tabletop/common/error.hpp"
#include "tabletop/common/rng.hpp"

namespace tabletop {

RelationSet relation_oracle(const BBox& s, const SceneObject& ref, const RelationParams& params) {
  RelationSet out{};
  const BBox r = ref.footprint();
  const int g = params.proximity_gap;
  const int row_overlap = std::min(s.y1, r.y1) - std::max(s.y0, r.y0);
  const int col_overlap = std::min(s.x1, r.x1) - std::max(s.x0, r.x0);

  if (row_overlap >= 1) {
    if (s.x1 <= r.x0 && r.x0 - s.x1 <= g) out[index_of(RelationLabel::left)] = true;
    if (s.x0 >= r.x1 && s.x0 - r.x1 <= g) out[index_of(RelationLabel::right)] = true;
  }
  if (col_overlap >= 1) {
    if (s.y1 <= r.y0 && r.y0 - s.y1 <= g) out[index_of(RelationLabel::behind)] = true;
    if (s.y0 >= r.y1 && s.y0 - r.y1 <= g) out[index_of(RelationLabel::in_front)] = true;
  }
  if (auto interior = ref.interior(); interior && interior->contains(s)) {
    out[index_of(RelationLabel::inside)] = true;
  }
  if (ref.is_flat_topped() && r.contains_point(s.center_x(), s.center_y()) &&
      s.area() <= r.area()) {
    out[index_of(RelationLabel::on_top)] = true;
  }
  return out;
}

// ---------------------------------------------------------------------------

json SceneConfig::to_json() const {
  json cats = json::array();
  for (auto c : place_categories) cats.push_back(std::string(tabletop::to_string(c)));
  return {{"grid_h", grid_h},       {"grid_w", grid_w},
          {"n_pick", n_pick},       {"n_place", n_place},
          {"ambiguity", ambiguity}, {"stack_rate", stack_rate},
          {"place_categories", cats}};
}

SceneConfig SceneConfig::from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("scene_config must be an object");
  SceneConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "grid_h") c.grid_h = value.get<int>();
    else if (key == "grid_w") c.grid_w = value.get<int>();
    else if (key == "n_pick") c.n_pick = value.get<int>();
    else if (key == "n_place") c.n_place = value.get<int>();
    else if (key == "ambiguity") c.ambiguity = value.get<bool>();
    else if (key == "stack_rate") c.stack_rate = value.get<double>();
    else if (key == "place_categories") {
      for (const auto& v : value) {
        auto cat = parse_category(v.get<std::string>());
        if (!cat) throw SchemaError("unknown category " + v.dump());
        c.place_categories.push_back(*cat);
      }
    } else {
      throw SchemaError("unknown scene_config key '" + key + "'");
    }
  }
  return c;
}

namespace {

bool overlaps_base_layer(const Scene& scene, TableId table, const BBox& box, int ignore_id,
                         int clearance) {
  const BBox grown{box.x0 - clearance, box.y0 - clearance, box.x1 + clearance,
                   box.y1 + clearance};
  for (const auto& o : scene.objects) {
    if (o.table != table || o.z_layer != 0 || o.id == ignore_id) continue;
    if (grown.overlaps(o.footprint())) return true;
  }
  return false;
}

bool has_something_above(const Scene& scene, const SceneObject& obj) {
  const BBox f = obj.footprint();
  for (const auto& o : scene.objects) {
    if (o.id == obj.id || o.table != obj.table) continue;
    if (o.z_layer > obj.z_layer && f.contains_cell(o.center)) return true;
  }
  return false;
}

SceneObject make_object(Scene& scene, TableId table, Category c, Color col, Size s) {
  SceneObject o;
  o.id = scene.next_id++;
  o.category = c;
  o.color = col;
  o.size = s;
  o.table = table;
  return o;
}

// Sets `obj` into or onto a free host on its table so that the oracle
// reports inside / on_top for the pair; false when no host fits.
bool try_stack(Scene& scene, SceneObject obj, Rng& rng, int max_attempts) {
  const Grid& grid = scene.grid(obj.table);
  const auto e = obj.extents();
  std::vector<const SceneObject*> hosts;
  for (const auto& h : scene.objects) {
    if (h.table != obj.table || h.z_layer != 0) continue;
    if (has_something_above(scene, h)) continue;
    if (auto in = h.interior(); in && in->width() >= 2 * e.hx + 1 && in->height() >= 2 * e.hy + 1) {
      hosts.push_back(&h);
    } else if (h.is_flat_topped() && obj.footprint().area() <= h.footprint().area()) {
      hosts.push_back(&h);
    }
  }
  if (hosts.empty()) return false;
  const SceneObject host = *hosts[rng.index(hosts.size())];
  BBox region = host.footprint();
  if (auto in = host.interior(); in && in->width() >= 2 * e.hx + 1 && in->height() >= 2 * e.hy + 1) {
    region = {in->x0 + e.hx, in->y0 + e.hy, in->x1 - e.hx, in->y1 - e.hy};
  }
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    obj.center = {static_cast<int>(rng.uniform_int(region.x0, region.x1 - 1)),
                  static_cast<int>(rng.uniform_int(region.y0, region.y1 - 1))};
    if (!grid.contains(obj.footprint())) continue;
    obj.z_layer = host.z_layer + 1;
    scene.objects.push_back(obj);
    return true;
  }
  return false;
}

void random_attributes(Rng& rng, Category& c, Color& col, Size& s) {
  c = kAllCategories[rng.index(kNumCategories)];
  col = kAllColors[rng.index(kNumColors)];
  s = kAllSizes[rng.index(kNumSizes)];
}

}  // namespace

SceneObject& add_random_object(Scene& scene, TableId table, Category category, Color color,
                               Size size, std::uint64_t seed, int max_attempts) {
  Rng rng(seed);
  SceneObject obj = make_object(scene, table, category, color, size);
  const Grid& grid = scene.grid(table);
  const auto e = obj.extents();
  if (2 * e.hx + 1 > grid.w || 2 * e.hy + 1 > grid.h) {
    throw PlacementInfeasible("object larger than table");
  }
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    obj.center = {static_cast<int>(rng.uniform_int(e.hx, grid.w - 1 - e.hx)),
                  static_cast<int>(rng.uniform_int(e.hy, grid.h - 1 - e.hy))};
    if (!overlaps_base_layer(scene, table, obj.footprint(), obj.id, 1)) {
      scene.objects.push_back(obj);
      return scene.objects.back();
    }
  }
  throw PlacementInfeasible("no free location after " + std::to_string(max_attempts) +
                            " attempts");
}

Scene generate_scene(const SceneConfig& config, std::uint64_t seed) {
  if (config.grid_h < 16 || config.grid_w < 16) throw InvalidArgument("grid must be >= 16x16");
  if (config.n_pick < 0 || config.n_pick > 12 || config.n_place < 0 || config.n_place > 12) {
    throw InvalidArgument("object counts must lie in [0, 12]");
  }
  if (!config.place_categories.empty() &&
      static_cast<int>(config.place_categories.size()) != config.n_place) {
    throw InvalidArgument("place_categories must list n_place entries");
  }
  Scene scene;
  scene.pick_table = {config.grid_h, config.grid_w};
  scene.place_table = {config.grid_h, config.grid_w};
  scene.rng_seed = seed;
  Rng rng(seed);

  auto add = [&](TableId table, Category c, Color col, Size s, bool allow_stack) {
    if (allow_stack && config.stack_rate > 0 && rng.bernoulli(config.stack_rate)) {
      Scene probe = scene;
      SceneObject obj = make_object(probe, table, c, col, s);
      if (try_stack(probe, obj, rng, config.max_attempts)) {
        scene = std::move(probe);
        return;
      }
    }
    add_random_object(scene, table, c, col, s, rng.next_u64(), config.max_attempts);
  };

  for (int i = 0; i < config.n_pick; ++i) {
    Category c;
    Color col;
    Size s;
    random_attributes(rng, c, col, s);
    if (config.ambiguity && i == 1) {
      const SceneObject& first = scene.objects.front();
      c = first.category;
      col = first.color;
      s = first.size;
    }
    // The duplicate pair stays on the base layer so both remain pickable.
    add(TableId::pick, c, col, s, !(config.ambiguity && i <= 1));
  }
  for (int i = 0; i < config.n_place; ++i) {
    Category c;
    Color col;
    Size s;
    random_attributes(rng, c, col, s);
    if (!config.place_categories.empty()) c = config.place_categories[i];
    add(TableId::place, c, col, s, config.place_categories.empty());
  }
  return scene;
}

bool check_invariants(const Scene& scene, std::string* why) {
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  for (const auto& o : scene.objects) {
    const Grid& grid = scene.grid(o.table);
    const BBox f = o.footprint();
    if (!grid.contains(f)) return fail("object " + std::to_string(o.id) + " leaves its grid");
    if (o.z_layer < 0) return fail("negative z_layer");
    if (o.z_layer == 0) {
      for (const auto& p : scene.objects) {
        if (p.id != o.id && p.table == o.table && p.z_layer == 0 && f.overlaps(p.footprint())) {
          return fail("base-layer overlap " + std::to_string(o.id) + "/" + std::to_string(p.id));
        }
      }
    } else {
      bool supported = false;
      for (const auto& p : scene.objects) {
        if (p.id != o.id && p.table == o.table && p.z_layer == o.z_layer - 1 &&
            p.footprint().contains_cell(o.center)) {
          supported = true;
        }
      }
      if (!supported) return fail("object " + std::to_string(o.id) + " unsupported");
    }
    if (auto in = o.interior(); in && !f.contains(*in)) return fail("interior outside footprint");
    if (scene.gripper && scene.gripper->id == o.id) return fail("held object on a table");
  }
  return true;
}

// ---------------------------------------------------------------------------

ImageTensor render(const Scene& scene, TableId table) {
  const Grid& grid = scene.grid(table);
  ImageTensor img(RenderChannels::kCount, grid.h, grid.w);
  auto objs = scene.on_table(table);
  std::stable_sort(objs.begin(), objs.end(),
                   [](auto* a, auto* b) { return a->z_layer < b->z_layer; });
  for (const SceneObject* o : objs) {
    const BBox f = o->footprint();
    for (int y = std::max(0, f.y0); y < std::min(grid.h, f.y1); ++y) {
      for (int x = std::max(0, f.x0); x < std::min(grid.w, f.x1); ++x) {
        for (int c = 0; c < RenderChannels::kCount; ++c) img.at(c, y, x) = 0.0;
        img.at(RenderChannels::kOccupancy, y, x) = 1.0;
        img.at(RenderChannels::kColor0 + index_of(o->color), y, x) = 1.0;
        img.at(RenderChannels::kCategory0 + index_of(o->category), y, x) = 1.0;
        img.at(RenderChannels::kZLayer, y, x) = o->z_layer + 1.0;
      }
    }
  }
  return img;
}

std::vector<std::uint8_t> footprint_mask(const SceneObject& obj, const Grid& grid) {
  std::vector<std::uint8_t> mask(std::size_t(grid.h) * grid.w, 0);
  const BBox f = obj.footprint();
  for (int y = std::max(0, f.y0); y < std::min(grid.h, f.y1); ++y) {
    for (int x = std::max(0, f.x0); x < std::min(grid.w, f.x1); ++x) {
      mask[std::size_t(y) * grid.w + x] = 1;
    }
  }
  return mask;
}

// ---------------------------------------------------------------------------

PickOutcome pick(Scene& scene, int object_id, double grasp_success_prob, std::uint64_t seed) {
  if (scene.gripper) throw GripperOccupied("already holding object " +
                                           std::to_string(scene.gripper->id));
  auto it = std::find_if(scene.objects.begin(), scene.objects.end(),
                         [&](const SceneObject& o) { return o.id == object_id; });
  if (it == scene.objects.end()) throw ObjectNotFound("no object " + std::to_string(object_id));
  if (has_something_above(scene, *it)) {
    throw ObjectBuried("object " + std::to_string(object_id) + " has something on it");
  }
  Rng rng(seed);
  const bool success = rng.uniform() < grasp_success_prob;
  scene.event_log.push_back(
      {"pick", object_id, {{"success", success}, {"table", std::string(to_string(it->table))}}});
  if (success) {
    scene.gripper = *it;
    scene.objects.erase(it);
  }
  return {success, object_id};
}

std::string_view to_string(PlaceKind k) {
  switch (k) {
    case PlaceKind::placed: return "placed";
    case PlaceKind::stacked: return "stacked";
    case PlaceKind::inside: return "inside";
    case PlaceKind::partial_overlap: return "partial_overlap";
  }
  return "placed";
}

std::optional<Cell> nearest_free_center(const Scene& scene, TableId table, HalfExtents e,
                                        Cell from) {
  const Grid& grid = scene.grid(table);
  std::optional<Cell> best;
  long best_d = std::numeric_limits<long>::max();
  for (int y = e.hy; y <= grid.h - 1 - e.hy; ++y) {
    for (int x = e.hx; x <= grid.w - 1 - e.hx; ++x) {
      const long dx = x - from.x;
      const long dy = y - from.y;
      const long d = dx * dx + dy * dy;
      if (d >= best_d) continue;
      const BBox f{x - e.hx, y - e.hy, x + e.hx + 1, y + e.hy + 1};
      if (overlaps_base_layer(scene, table, f, -1, 0)) continue;
      best_d = d;
      best = Cell{x, y};
    }
  }
  return best;
}

PlaceOutcome place(Scene& scene, Cell location, TableId table) {
  if (!scene.gripper) throw NothingHeld("gripper is empty");
  const Grid& grid = scene.grid(table);
  if (!grid.contains(location)) {
    throw OutOfBounds("(" + std::to_string(location.x) + "," + std::to_string(location.y) +
                      ") outside " + std::string(to_string(table)) + " table");
  }
  SceneObject held = *scene.gripper;
  held.table = table;
  const auto e = held.extents();
  PlaceOutcome out;
  out.object_id = held.id;
  out.requested = location;

  // Keep the footprint on the table.
  Cell c{std::clamp(location.x, e.hx, grid.w - 1 - e.hx),
         std::clamp(location.y, e.hy, grid.h - 1 - e.hy)};
  const bool clamped = !(c == location);

  // Highest supporting host under the center wins; containers before plates
  // at equal height.
  const SceneObject* host = nullptr;
  bool host_inside = false;
  for (const auto& o : scene.objects) {
    if (o.table != table) continue;
    bool in = false;
    bool on = false;
    if (auto interior = o.interior(); interior && interior->contains_cell(c)) in = true;
    if (!in && o.is_flat_topped() && o.footprint().contains_cell(c) &&
        o.footprint().area() >= held.footprint().area()) {
      on = true;
    }
    if (!in && !on) continue;
    if (!host || o.z_layer > host->z_layer ||
        (o.z_layer == host->z_layer && in && !host_inside)) {
      host = &o;
      host_inside = in;
    }
  }

  json detail = {{"table", std::string(to_string(table))},
                 {"requested", {location.x, location.y}}};
  if (host) {
    held.center = c;
    held.z_layer = host->z_layer + 1;
    out.kind = host_inside ? PlaceKind::inside : PlaceKind::stacked;
    out.host_id = host->id;
    detail["host"] = host->id;
    detail["nudged"] = clamped;
  } else {
    held.center = c;
    held.z_layer = 0;
    out.kind = PlaceKind::placed;
    bool nudged = clamped;
    if (overlaps_base_layer(scene, table, held.footprint(), held.id, 0)) {
      auto free = nearest_free_center(scene, table, e, c);
      if (!free) throw PlacementInfeasible("no free cell to nudge into");
      held.center = *free;
      out.kind = PlaceKind::partial_overlap;
      nudged = true;
    }
    detail["nudged"] = nudged;
  }
  out.final_center = held.center;
  detail["final"] = {held.center.x, held.center.y};
  detail["outcome"] = std::string(to_string(out.kind));
  scene.event_log.push_back({"place", held.id, std::move(detail)});
  scene.objects.push_back(held);
  scene.gripper.reset();
  return out;
}

// ---------------------------------------------------------------------------

json to_json(const SceneObject& o) {
  const BBox f = o.footprint();
  json j = {{"id", o.id},
            {"category", std::string(to_string(o.category))},
            {"color", std::string(to_string(o.color))},
            {"size", std::string(to_string(o.size))},
            {"x", o.center.x},
            {"y", o.center.y},
            {"z_layer", o.z_layer},
            {"table", std::string(to_string(o.table))},
            {"bbox", {f.x0, f.y0, f.x1, f.y1}},
            {"is_container", o.is_container()},
            {"flat_topped", o.is_flat_topped()}};
  if (auto in = o.interior()) {
    j["interior"] = {in->x0, in->y0, in->x1, in->y1};
  } else {
    j["interior"] = nullptr;
  }
  return j;
}

SceneObject object_from_json(const json& j) {
  try {
    SceneObject o;
    o.id = j.at("id").get<int>();
    auto cat = parse_category(j.at("category").get<std::string>());
    auto col = parse_color(j.at("color").get<std::string>());
    auto sz = parse_size(j.at("size").get<std::string>());
    auto tab = parse_table(j.at("table").get<std::string>());
    if (!cat || !col || !sz || !tab) throw SchemaError("bad enum in object " + j.dump());
    o.category = *cat;
    o.color = *col;
    o.size = *sz;
    o.table = *tab;
    o.center = {j.at("x").get<int>(), j.at("y").get<int>()};
    o.z_layer = j.at("z_layer").get<int>();
    return o;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("object: ") + e.what());
  }
}

json to_json(const Scene& scene) {
  json objects = json::array();
  for (const auto& o : scene.objects) objects.push_back(to_json(o));
  json events = json::array();
  for (const auto& e : scene.event_log) {
    events.push_back({{"kind", e.kind}, {"object_id", e.object_id}, {"detail", e.detail}});
  }
  return {{"schema", kSceneSchemaVersion},
          {"rng_seed", scene.rng_seed},
          {"next_id", scene.next_id},
          {"pick_table", {{"h", scene.pick_table.h}, {"w", scene.pick_table.w}}},
          {"place_table", {{"h", scene.place_table.h}, {"w", scene.place_table.w}}},
          {"objects", objects},
          {"gripper", scene.gripper ? to_json(*scene.gripper) : json(nullptr)},
          {"event_log", events}};
}

Scene scene_from_json(const json& j) {
  try {
    if (j.at("schema").get<int>() != kSceneSchemaVersion) {
      throw SchemaError("unsupported scene schema " + j.at("schema").dump());
    }
    Scene s;
    s.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    s.next_id = j.at("next_id").get<int>();
    s.pick_table = {j.at("pick_table").at("h").get<int>(), j.at("pick_table").at("w").get<int>()};
    s.place_table = {j.at("place_table").at("h").get<int>(),
                     j.at("place_table").at("w").get<int>()};
    for (const auto& o : j.at("objects")) s.objects.push_back(object_from_json(o));
    if (!j.at("gripper").is_null()) s.gripper = object_from_json(j.at("gripper"));
    for (const auto& e : j.at("event_log")) {
      s.event_log.push_back(
          {e.at("kind").get<std::string>(), e.at("object_id").get<int>(), e.at("detail")});
    }
    return s;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("scene: ") + e.what());
  }
}

char object_glyph(int id) {
  static constexpr std::string_view kGlyphs =
      "0123456789abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";
  return id >= 0 && id < static_cast<int>(kGlyphs.size()) ? kGlyphs[id] : '#';
}

std::string render_ascii(const Scene& scene, TableId table) {
  const Grid& g = scene.grid(table);
  const int lines = (g.h + 1) / 2;
  std::vector<char> glyph(static_cast<std::size_t>(lines) * g.w, '.');
  std::vector<int> top(glyph.size(), -1);
  for (const SceneObject* o : scene.on_table(table)) {
    const BBox b = o->footprint();
    for (int y = std::max(0, b.y0); y < std::min(g.h, b.y1); ++y) {
      for (int x = std::max(0, b.x0); x < std::min(g.w, b.x1); ++x) {
        const std::size_t k = static_cast<std::size_t>(y / 2) * g.w + x;
        if (o->z_layer >= top[k]) {
          top[k] = o->z_layer;
          glyph[k] = object_glyph(o->id);
        }
      }
    }
  }
  std::string out;
  out.reserve(glyph.size() + lines);
  for (int r = 0; r < lines; ++r) {
    out.append(glyph.begin() + static_cast<std::ptrdiff_t>(r) * g.w,
               glyph.begin() + static_cast<std::ptrdiff_t>(r + 1) * g.w);
    out += '\n';
  }
  return out;
}

std::string serialize(const Scene& scene) { return to_json(scene).dump(); }

std::uint64_t scene_hash(const Scene& scene) {
  const std::string s = serialize(scene);
  return fnv1a(s.data(), s.size());
}

}  // namespace tabletop
