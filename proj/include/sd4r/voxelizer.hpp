// Copyright 2026 The SD4R Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "sd4r/config.hpp"
#include "sd4r/nn.hpp"
#include "sd4r/types.hpp"

namespace sd4r {

// Voxel occupancy of a cropped cloud. Voxel rows are ordered by first
// occurrence in the input so every downstream reduction is deterministic.
struct VoxelGrid {
  int nx = 0, ny = 0, nz = 0;
  double vx = 0.0, vy = 0.0, vz = 0.0;
  double ox = 0.0, oy = 0.0, oz = 0.0;  // grid origin (bounds minimum)

  std::unordered_map<std::int64_t, int> key_to_row;
  std::vector<std::int64_t> keys;              // row -> linear voxel key
  std::vector<std::vector<int>> members;       // row -> point indices, input order
  std::vector<std::array<double, 3>> centroids;  // row -> member position mean
  std::vector<int> point_voxel;                // point -> row

  std::size_t voxel_count() const { return keys.size(); }
  std::array<int, 3> voxel_coords(std::int64_t key) const {
    int ix = static_cast<int>(key % nx);
    int iy = static_cast<int>((key / nx) % ny);
    int iz = static_cast<int>(key / ((std::int64_t)nx * ny));
    return {ix, iy, iz};
  }
};

// Deterministic assignment by floor((p - origin) / voxel_size). The cloud
// must already be cropped; out-of-bounds points are an error.
VoxelGrid voxelize(const PointCloud& cloud, const PipelineConfig& cfg);

// Per-voxel arithmetic mean of the raw channels (x,y,z,rcs,v_r,aux...).
Matrix voxel_mean_channels(const VoxelGrid& grid, const PointCloud& cloud);

// Mean-pool raw channels per voxel, then one shared perceptron: V x d.
Matrix voxel_encode(const VoxelGrid& grid, const PointCloud& cloud,
                    const Mlp& enc, Matrix* mean_out = nullptr,
                    MlpCache* cache = nullptr);

// Per point: proj(concat(voxel feature, p - voxel centroid)) -> N x d.
Matrix voxel_to_point_features(const VoxelGrid& grid, const Matrix& voxel_feats,
                               const PointCloud& cloud, const Mlp& proj,
                               Matrix* proj_in_out = nullptr,
                               MlpCache* cache = nullptr);

}  // namespace sd4r
