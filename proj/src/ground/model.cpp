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

#include "tabletop/ground/model.hpp"

#include "tabletop/common/error.hpp"
#include "tabletop/nn/checkpoint.hpp"

namespace tabletop {

nlohmann::json ModelDims::to_json() const {
  return {{"embed", embed},     {"hidden", hidden},         {"joint", joint},
          {"vis_gen", vis_gen}, {"dec_hidden", dec_hidden}, {"appearance", kAppearanceDim},
          {"location", kLocationInputDim}, {"any_slot", kAnySlotDim}};
}

ModelDims ModelDims::from_json(const nlohmann::json& j) {
  ModelDims d;
  d.embed = j.at("embed").get<int>();
  d.hidden = j.at("hidden").get<int>();
  d.joint = j.at("joint").get<int>();
  d.vis_gen = j.at("vis_gen").get<int>();
  d.dec_hidden = j.at("dec_hidden").get<int>();
  if (j.at("appearance").get<int>() != kAppearanceDim ||
      j.at("location").get<int>() != kLocationInputDim ||
      j.at("any_slot").get<int>() != kAnySlotDim) {
    throw CheckpointError("feature dimensions differ from this build");
  }
  return d;
}

GroundingModel GroundingModel::create(const Vocabulary& vocab, const ModelDims& d,
                                      std::uint64_t seed) {
  GroundingModel m;
  m.vocab = vocab;
  m.dims = d;
  Rng rng(seed);
  auto& p = m.params;
  const int H2 = d.encoder_states();
  p.add("embedding", d.embed, vocab.size(), rng);
  nn::LstmCell::create(p, "enc.fwd", d.embed, d.hidden, rng);
  nn::LstmCell::create(p, "enc.bwd", d.embed, d.hidden, rng);
  for (const char* mod : {"subj", "loc", "rel"}) {
    nn::Linear::create(p, std::string("att.") + mod, H2, 1, rng);
    nn::Linear::create(p, std::string("phrase.") + mod, H2, d.joint, rng);
  }
  nn::Linear::create(p, "module_weights", 2 * H2, 3, rng);
  nn::Linear::create(p, "vis.shared", kAppearanceDim, d.joint, rng);
  nn::Linear::create(p, "vis.subj", d.joint, d.joint, rng);
  nn::Linear::create(p, "loc.hidden", kLocationInputDim, d.joint, rng);
  nn::Linear::create(p, "loc.out", d.joint, d.joint, rng);
  nn::Linear::create(p, "rel.hidden", kAnySlotDim, d.joint, rng);
  nn::Linear::create(p, "rel.out", d.joint, d.joint, rng);
  nn::Linear::create(p, "attr.color", d.joint, kNumColors, rng);
  nn::Linear::create(p, "attr.category", d.joint, kNumCategories, rng);
  nn::Linear::create(p, "attr.size", d.joint, kNumSizes, rng);
  // generator
  nn::Linear::create(p, "gen.vis", d.joint, d.vis_gen, rng);
  nn::Linear::create(p, "gen.init", d.visual_rep(), d.dec_hidden, rng);
  nn::LstmCell::create(p, "gen.lstm", d.embed + d.visual_rep(), d.dec_hidden, rng);
  nn::Linear::create(p, "gen.out", d.dec_hidden, vocab.size(), rng);
  return m;
}

void GroundingModel::save(const std::filesystem::path& path, const nlohmann::json& extra) const {
  nn::Checkpoint ck;
  ck.params = params;
  ck.metadata = {{"kind", "grounding"},
                 {"schema", 1},
                 {"dims", dims.to_json()},
                 {"vocab", vocab.to_json()},
                 {"vocab_hash", vocab.hash()},
                 {"embedding_hash", nn::hash_matrix(params.at("embedding").value)},
                 {"extra", extra.is_null() ? nlohmann::json::object() : extra}};
  nn::save_checkpoint(path, ck);
}

GroundingModel GroundingModel::load(const std::filesystem::path& path,
                                    const Vocabulary& expected_vocab) {
  auto ck = nn::load_checkpoint(path);
  const auto& meta = ck.metadata;
  try {
    if (meta.at("kind") != "grounding") throw CheckpointError("not a grounding checkpoint");
    if (meta.at("schema").get<int>() != 1) throw CheckpointError("unsupported grounding schema");
    GroundingModel m;
    m.vocab = Vocabulary::from_json(meta.at("vocab"));
    if (m.vocab.hash() != meta.at("vocab_hash").get<std::uint64_t>() ||
        m.vocab.hash() != expected_vocab.hash()) {
      throw CheckpointError("vocabulary hash mismatch");
    }
    m.dims = ModelDims::from_json(meta.at("dims"));
    m.params = std::move(ck.params);
    if (nn::hash_matrix(m.params.at("embedding").value) !=
        meta.at("embedding_hash").get<std::uint64_t>()) {
      throw CheckpointError("shared embedding hash mismatch");
    }
    const auto fresh = create(m.vocab, m.dims, 0);
    for (const auto& [name, p] : fresh.params.all()) {
      if (!m.params.contains(name)) throw CheckpointError("missing array " + name);
      const auto& q = m.params.at(name).value;
      if (q.rows() != p.value.rows() || q.cols() != p.value.cols()) {
        throw CheckpointError("shape mismatch for " + name);
      }
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad grounding metadata: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw CheckpointError(e.what());
  }
}

}  // namespace tabletop
