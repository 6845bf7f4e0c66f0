// Copyright 2026 The SD4R Authors
// SPDX-License-Identifier: Apache-2.0

#include "sd4r/voxelizer.hpp"

#include <cmath>
#include <stdexcept>

namespace sd4r {

namespace {

int cell_of(double v, double origin, double size, int n) {
  int i = (int)std::floor((v - origin) / size);
  // Guards the float-division slop at the upper bound; callers already
  // guarantee half-open containment.
  if (i < 0) i = 0;
  if (i >= n) i = n - 1;
  return i;
}

}  // namespace

VoxelGrid voxelize(const PointCloud& cloud, const PipelineConfig& cfg) {
  VoxelGrid g;
  g.nx = cfg.voxels_x();
  g.ny = cfg.voxels_y();
  g.nz = cfg.voxels_z();
  g.vx = cfg.voxel_x;
  g.vy = cfg.voxel_y;
  g.vz = cfg.voxel_z;
  g.ox = cfg.bounds.x_min;
  g.oy = cfg.bounds.y_min;
  g.oz = cfg.bounds.z_min;
  g.point_voxel.resize(cloud.size());

  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const RadarPoint& p = cloud.points[i];
    if (!cfg.bounds.contains(p.x, p.y, p.z))
      throw DataError("voxelize: point out of bounds, crop first");
    int ix = cell_of(p.x, g.ox, g.vx, g.nx);
    int iy = cell_of(p.y, g.oy, g.vy, g.ny);
    int iz = cell_of(p.z, g.oz, g.vz, g.nz);
    std::int64_t key = ((std::int64_t)iz * g.ny + iy) * g.nx + ix;
    auto it = g.key_to_row.find(key);
    int row;
    if (it == g.key_to_row.end()) {
      row = (int)g.keys.size();
      g.key_to_row.emplace(key, row);
      g.keys.push_back(key);
      g.members.emplace_back();
      g.centroids.push_back({0.0, 0.0, 0.0});
    } else {
      row = it->second;
    }
    g.members[row].push_back((int)i);
    g.point_voxel[i] = row;
  }

  for (std::size_t r = 0; r < g.keys.size(); ++r) {
    double sx = 0.0, sy = 0.0, sz = 0.0;
    for (int i : g.members[r]) {
      sx += cloud.points[i].x;
      sy += cloud.points[i].y;
      sz += cloud.points[i].z;
    }
    double n = (double)g.members[r].size();
    g.centroids[r] = {sx / n, sy / n, sz / n};
  }
  return g;
}

Matrix voxel_mean_channels(const VoxelGrid& grid, const PointCloud& cloud) {
  int aux = cloud.points.empty() ? 0 : (int)cloud.points[0].aux.size();
  std::size_t ch = 5 + (std::size_t)aux;
  Matrix mean(grid.voxel_count(), ch);
  for (std::size_t r = 0; r < grid.voxel_count(); ++r) {
    double* row = mean.data() + r * ch;
    for (int i : grid.members[r]) {
      const RadarPoint& p = cloud.points[i];
      row[0] += p.x;
      row[1] += p.y;
      row[2] += p.z;
      row[3] += p.rcs;
      row[4] += p.v_r;
      for (int a = 0; a < aux; ++a) row[5 + a] += p.aux[a];
    }
    double n = (double)grid.members[r].size();
    for (std::size_t c = 0; c < ch; ++c) row[c] /= n;
  }
  return mean;
}

Matrix voxel_encode(const VoxelGrid& grid, const PointCloud& cloud,
                    const Mlp& enc, Matrix* mean_out, MlpCache* cache) {
  Matrix mean = voxel_mean_channels(grid, cloud);
  if ((int)mean.cols() != enc.in_width())
    throw std::invalid_argument("voxel_encode: encoder width mismatch");
  Matrix feats = mlp_forward(enc, mean, cache);
  if (mean_out) *mean_out = std::move(mean);
  return feats;
}

Matrix voxel_to_point_features(const VoxelGrid& grid, const Matrix& voxel_feats,
                               const PointCloud& cloud, const Mlp& proj,
                               Matrix* proj_in_out, MlpCache* cache) {
  std::size_t d = voxel_feats.cols();
  if (proj.in_width() != (int)(d + 3))
    throw std::invalid_argument(
        "voxel_to_point_features: projector width mismatch");
  Matrix in(cloud.size(), d + 3);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    int v = grid.point_voxel[i];
    double* row = in.data() + i * (d + 3);
    const double* vf = voxel_feats.data() + (std::size_t)v * d;
    for (std::size_t c = 0; c < d; ++c) row[c] = vf[c];
    row[d + 0] = cloud.points[i].x - grid.centroids[v][0];
    row[d + 1] = cloud.points[i].y - grid.centroids[v][1];
    row[d + 2] = cloud.points[i].z - grid.centroids[v][2];
  }
  Matrix out = mlp_forward(proj, in, cache);
  if (proj_in_out) *proj_in_out = std::move(in);
  return out;
}

}  // namespace sd4r
