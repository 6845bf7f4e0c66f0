// Copyright 2026 The SD4R Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sd4r/types.hpp"

namespace sd4r {

inline constexpr const char* kVersion = "0.1.0";

enum class KnnPool { kRaw, kForeground };

// Synthetic scene generation knobs. Class size priors are fixed in synth.cpp.
struct SceneParams {
  int objects_min = 1;
  int objects_max = 8;
  int points_min = 2;   // foreground points per object
  int points_max = 12;  // deliberately sparse
  int clutter_min = 5;
  int clutter_max = 40;
  double sigma = 0.05;  // position jitter, meters
};

struct PipelineConfig {
  Bounds bounds;

  double pillar_size = 0.16;  // meters, x and y
  double voxel_x = 0.16, voxel_y = 0.16, voxel_z = 0.24;

  int num_classes = 4;  // K; pedestrian=0, cyclist=1, car=2, background=K-1
  double tau = 0.5;     // foreground threshold
  int knn_k = 3;
  double epsilon = 1e-8;
  std::vector<double> radius_weights = {0.2, 0.3, 0.4};  // per class, K-1
  double default_radius = 0.2;  // used when a pillar has no foreground points
  double lambda = 1.0;          // weight of seg + vote losses

  int feature_dim = 8;  // d, learned point feature width
  int aux_dim = 0;      // extra raw channels beyond x,y,z,rcs,v_r

  int hidden_width = 16;
  int pillar_channels = 16;  // C
  int n_cap = 32;            // max points per pillar

  double score_threshold = 0.05;
  double nms_iou = 0.5;
  bool context_pool = true;  // 3x3 mean-pool before the detection head
  KnnPool knn_pool = KnnPool::kRaw;

  double lr = 0.01;
  double momentum = 0.9;

  std::uint64_t seed = 1;
  SceneParams synth;

  int background_class() const { return num_classes - 1; }
  int raw_channels() const { return 5 + aux_dim; }
  // Per-point pillar channels: xyz + feats + logits + offsets from pillar
  // point-mean (3) and from cell center (2).
  int pillar_point_channels() const {
    return 3 + feature_dim + num_classes + 5;
  }
  int pillars_x() const;
  int pillars_y() const;
  int voxels_x() const;
  int voxels_y() const;
  int voxels_z() const;
};

// Returns every violated invariant, or empty when the config is valid.
std::vector<std::string> validate_config(const PipelineConfig& cfg);

// Flat JSON key-value file. Unknown keys are rejected.
PipelineConfig load_config(const std::string& path);
std::string config_to_json(const PipelineConfig& cfg);

// FNV-1a over the canonical JSON serialization, as a hex string.
std::string config_hash(const PipelineConfig& cfg);

// Keeps only the points inside the half-open bounds box; labels and features
// are filtered consistently and input order is preserved.
PointCloud crop_to_bounds(const PointCloud& cloud, const PipelineConfig& cfg);

}  // namespace sd4r
