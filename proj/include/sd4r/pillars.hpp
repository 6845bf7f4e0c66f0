// Copyright 2026 The SD4R Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "sd4r/config.hpp"
#include "sd4r/nn.hpp"
#include "sd4r/types.hpp"

namespace sd4r {

// (D, P, N) pillar tensor stored slot-major: row p*n_cap+s of `slots` holds
// the D channels of slot s in pillar p. Padded slots are zero and masked via
// `counts`. Channel layout per point:
//   [x, y, z, feat_0..d-1, logit_0..K-1, x-mx, y-my, z-mz, x-ccx, y-ccy]
// where (mx,my,mz) is the pillar's kept-point mean and (ccx,ccy) the cell
// center.
struct PillarGrid {
  int nx = 0, ny = 0;
  int n_cap = 0;
  int channels = 0;  // D

  std::vector<std::array<int, 2>> coords;  // P x (ix, iy), first-occurrence order
  std::vector<int> counts;                 // kept points per pillar
  std::vector<int> slot_point;             // P*n_cap -> dense point index, -1 pad
  Matrix slots;                            // (P*n_cap) x D
  std::vector<std::array<double, 3>> mean;  // kept-point position mean
  std::unordered_map<std::int64_t, int> cell_to_pillar;
  int dropped = 0;  // points beyond the cap

  std::size_t pillar_count() const { return coords.size(); }
  std::int64_t cell_key(int p) const {
    return (std::int64_t)coords[p][1] * nx + coords[p][0];
  }
};

// Groups the dense cloud by floor((x,y)/pillar_size); per-pillar point order
// is input order and overflow beyond n_cap drops the highest input indices.
PillarGrid pillarize(const DenseCloud& dense, const PipelineConfig& cfg);

struct PillarEncodeCache {
  MlpCache mlp;
  std::vector<int> kept_rows;   // compact row -> slot index (p*n_cap+s)
  std::vector<int> row_pillar;  // compact row -> pillar
  std::vector<int> argmax;      // P*C -> compact row winning the max-pool
};

// Per-point perceptron then masked max-pool over the slot axis: P x C.
Matrix pillar_encode(const PillarGrid& grid, const Mlp& enc,
                     PillarEncodeCache* cache = nullptr);

// Routes dF_pillar back through the max-pool and the encoder, then splits the
// slot-channel gradients into per-dense-point position/feature/logit
// gradients (including the mean-offset coupling).
void pillar_encode_backward(const PillarGrid& grid, const Mlp& enc,
                            const PillarEncodeCache& cache,
                            const Matrix& d_pillar, MlpGrads& grads,
                            Matrix* d_pos, Matrix* d_feats, Matrix* d_logits);

struct BevMap {
  int channels = 0, height = 0, width = 0;  // height=ny rows, width=nx cols
  std::vector<double> data;                 // cell-major: (h*width+w)*channels

  std::span<double> cell(int h, int w) {
    return {data.data() + ((std::size_t)h * width + w) * channels,
            (std::size_t)channels};
  }
  std::span<const double> cell(int h, int w) const {
    return {data.data() + ((std::size_t)h * width + w) * channels,
            (std::size_t)channels};
  }
};

// Occupied cells receive their pillar's C-vector; everything else is zero.
// Duplicate coordinates are an error.
BevMap scatter_bev(const Matrix& feats,
                   const std::vector<std::array<int, 2>>& coords, int nx,
                   int ny);

// Per-cell head over the BEV map (optionally after a fixed 3x3 mean pool),
// sigmoid objectness thresholding, box decode against the cell center, then
// greedy BEV NMS ordered by score with ties to the lower cell index.
std::vector<Detection> detect_head(const BevMap& bev, const Mlp& head,
                                   const PipelineConfig& cfg);

// Decode one head output row at cell (ix, iy). Sizes go through a clamped
// exp; yaw is renormalized via atan2 into [-pi, pi).
ObjectBox decode_box(std::span<const double> row, int num_classes, int ix,
                     int iy, const BevGeom& geom);

BevGeom bev_geom(const PipelineConfig& cfg);

// Greedy NMS: keep by descending (score, lower cell); suppress IoU > thresh.
std::vector<Detection> nms_bev(std::vector<Detection> dets, double iou_thresh);

}  // namespace sd4r
