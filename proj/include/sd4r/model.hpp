// Copyright 2026 The SD4R Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "sd4r/config.hpp"
#include "sd4r/nn.hpp"

namespace sd4r {

// Every trainable head in the pipeline.
struct Sd4rModel {
  Mlp voxel_encoder;    // raw channels -> d
  Mlp point_projector;  // d + 3 -> d
  Mlp vote_head;        // d -> 4K + d
  Mlp pillar_encoder;   // D -> C
  Mlp lqe_aggregator;   // d + 1 -> C
  Mlp lqe_fusion;       // 2C -> C
  Mlp detection_head;   // C -> K + 8

  std::array<Mlp*, 7> heads();
  std::array<const Mlp*, 7> heads() const;
  static std::array<const char*, 7> head_names();
};

Sd4rModel build_model(const PipelineConfig& cfg);

struct ModelGrads {
  std::array<MlpGrads, 7> g;
  explicit ModelGrads(const Sd4rModel& m);
  void zero();
};

struct ModelMomentum {
  std::array<MlpMomentum, 7> m;
  explicit ModelMomentum(const Sd4rModel& model);
  ModelMomentum() = default;
};

void sgd_step(Sd4rModel& model, const ModelGrads& grads, ModelMomentum& mom,
              double lr, double momentum);

// Little-endian binary checkpoint: magic "SD4R", version u32, per-head layer
// widths/activations, raw f64 parameter arrays in layer order, then an
// optional optimizer section (epoch counter + momentum buffers) that makes
// resumed training bit-identical.
void save_checkpoint(const std::string& path, const Sd4rModel& model,
                     const ModelMomentum* mom = nullptr,
                     std::uint64_t epochs_done = 0);
Sd4rModel load_checkpoint(const std::string& path,
                          ModelMomentum* mom = nullptr,
                          std::uint64_t* epochs_done = nullptr);

// Shape agreement with the architecture build_model derives from cfg.
bool model_matches_config(const Sd4rModel& model, const PipelineConfig& cfg);

}  // namespace sd4r
