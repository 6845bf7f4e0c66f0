// Copyright 2026 The SD4R Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "sd4r/config.hpp"
#include "sd4r/nn.hpp"
#include "sd4r/pillars.hpp"
#include "sd4r/types.hpp"

namespace sd4r {

// Per-pillar class composition and the adaptive absorption radius derived
// from it. With no foreground points the radius falls back to the default;
// otherwise it is the count-weighted convex combination of the per-class
// weight radii.
struct RadiusAssignment {
  std::vector<double> radius;              // P
  std::vector<int> n_fore;                 // P
  std::vector<std::vector<int>> n_class;   // P x (K-1)
};

// Counts each kept slot point under its argmax non-background logit class.
RadiusAssignment class_counts(const PillarGrid& grid, int num_classes);

// Fills `radius` from the counts: S_i = sum_c (N_ic/N_fore) * W_c, with the
// default radius when N_fore = 0.
void adaptive_radius(RadiusAssignment& assign,
                     const std::vector<double>& weights, double default_radius);

struct BallQueryResult {
  std::vector<std::vector<int>> neighbors;  // per pillar, ascending point index
  std::vector<std::uint8_t> mask;           // pillar has at least one neighbor
};

// Q_i = dense points within BEV distance <= R_i of the pillar's geometric
// center, excluding points that fall inside pillar i itself. Grid-hash
// accelerated; exactly equal to the brute-force scan.
BallQueryResult ball_query(const PillarGrid& grid, const DenseCloud& dense,
                           const std::vector<double>& radius,
                           const PipelineConfig& cfg);

struct AggregateCache {
  Matrix inputs;                // rows: every (pillar, neighbor) pair
  MlpCache mlp;
  std::vector<int> row_point;   // row -> dense point index
  std::vector<int> row_pillar;  // row -> pillar
  std::vector<int> argmax;      // P*C -> winning row, -1 when masked out
};

// Per-neighbor perceptron over (feature, pi) then max-pool per pillar; masked
// pillars yield the zero vector. P x C.
Matrix aggregate_neighbors(const BallQueryResult& bq, const Matrix& dense_feats,
                           const std::vector<double>& pi, const Mlp& agg,
                           AggregateCache* cache = nullptr);

// Routes dF_point back to the aggregation MLP and the per-neighbor feature
// and pi gradients.
void aggregate_backward(const Mlp& agg, const AggregateCache& cache,
                        const Matrix& d_point, MlpGrads& grads,
                        Matrix* d_feats, std::vector<double>* d_pi);

struct FuseCache {
  Matrix concat_in;
  MlpCache mlp;
};

// F' = F_point + F_pillar + MLP(concat(F_point, F_pillar)).
Matrix fuse(const Matrix& f_point, const Matrix& f_pillar, const Mlp& fusion,
            FuseCache* cache = nullptr);

void fuse_backward(const Mlp& fusion, const FuseCache& cache,
                   const Matrix& d_fused, MlpGrads& grads, Matrix* d_point,
                   Matrix* d_pillar);

}  // namespace sd4r
