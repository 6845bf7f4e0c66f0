// Copyright 2026 The SD4R Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sd4r/config.hpp"
#include "sd4r/types.hpp"

namespace sd4r {

// Fully seeded synthetic radar scene with ground truth. Points are ordered
// object by object (then clutter), which is also the on-disk convention that
// lets center targets be rebuilt from the per-box point counts.
struct SyntheticScene {
  PointCloud cloud;  // labels always set
  std::vector<ObjectBox> boxes;
  std::vector<int> point_box;  // -1 for clutter
  Matrix center_targets;       // N x 3, zero rows for clutter

  std::uint64_t seed = 0;
};

// Size priors and radar signatures per class; fixed, see synth.cpp.
struct ClassPrior {
  double l, w, h;
  double rcs_mu, rcs_sigma;
  double speed_lo, speed_hi;
};
const ClassPrior& class_prior(ClassId cls);

// Rejection-samples non-overlapping boxes inside the bounds, samples
// foreground points on box surfaces with Gaussian jitter, then uniform
// clutter. Throws after 1000 failed placements.
SyntheticScene generate_scene(const PipelineConfig& cfg,
                              std::uint64_t scene_seed);

struct GtTargets {
  std::vector<ClassId> labels;
  Matrix offsets;                     // N x 3, center - position for foreground
  std::vector<std::uint8_t> fg_mask;  // label != background
};
GtTargets gt_targets(const SyntheticScene& scene);

// scene_NNNN.csv + scene_NNNN.boxes.json per scene plus manifest.json.
void write_dataset(const std::string& dir, const PipelineConfig& cfg,
                   int n_scenes, std::uint64_t master_seed);

std::vector<SyntheticScene> load_dataset(const std::string& dir);

// Deterministic split by scene index: first 4/5 train, rest test.
std::size_t train_split(std::size_t n_scenes);

void write_scene(const std::string& csv_path, const std::string& boxes_path,
                 const SyntheticScene& scene);
SyntheticScene load_scene(const std::string& csv_path,
                          const std::string& boxes_path);

}  // namespace sd4r
