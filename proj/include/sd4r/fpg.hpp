// Copyright 2026 The SD4R Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <span>
#include <vector>

#include "sd4r/config.hpp"
#include "sd4r/nn.hpp"
#include "sd4r/types.hpp"

namespace sd4r {

// Per-point vote head products: class logits, class-conditional offsets and
// learned point features.
struct VoteOutput {
  Matrix logits;   // N x K
  Matrix offsets;  // N x 3K, meters
  Matrix feats;    // N x d
};

// Head output width must be 4K (features passed through from the input) or
// 4K + d (head emits its own features).
VoteOutput vote_forward(const Matrix& point_feats, const Mlp& head,
                        int num_classes, MlpCache* cache = nullptr);

// Row-wise softmax with max subtraction.
Matrix softmax_rows(const Matrix& logits);

// pi_i = 1 - P_i[background].
std::vector<double> foreground_confidence(const Matrix& probs,
                                          int num_classes);

// d pi -> d logits for one row, given that row's probabilities.
void foreground_confidence_backward(std::span<const double> probs_row,
                                    double dpi, std::span<double> dlogits_row);

struct ForegroundSet {
  std::vector<int> indices;        // retained point indices, ascending
  std::vector<ClassId> cls;        // chosen non-background class per point
  std::vector<double> confidence;  // pi per retained point
};

// Retains i iff pi_i > tau (strict); chosen class is the argmax over the
// K-1 non-background entries, ties to the lowest index.
ForegroundSet filter_foreground(const Matrix& probs,
                                const std::vector<double>& pi, double tau);

struct VirtualPoints {
  std::vector<std::array<double, 3>> pos;
  std::vector<int> source;  // spawning foreground point (raw index)
  // Axes pinned by the bounds clamp; their gradients are zero.
  std::vector<std::array<bool, 3>> clamped;
};

// v_i = p_i + offset slice of the chosen class, clamped into the half-open
// scene bounds so pillarization never sees out-of-range coordinates.
VirtualPoints generate_virtual(const PointCloud& cloud, const ForegroundSet& fg,
                               const Matrix& offsets, const Bounds& bounds,
                               int num_classes);

// Exact k-nearest-neighbour result; rows sorted by (distance, base index).
struct KnnResult {
  int k = 0;
  std::vector<int> idx;      // M * k
  std::vector<double> dist;  // M * k, Euclidean
};

// Uniform-grid-hash accelerated KNN. Must return exactly the brute-force
// answer: candidate shells are expanded until their lower bound exceeds the
// current k-th distance, so ties (broken by lower base index) are never
// missed. k is truncated to the base size; an empty base is an error.
KnnResult knn(std::span<const std::array<double, 3>> queries,
              const PointCloud& base, int k);

// w = 1/(D + eps), row-normalized: every row sums to 1 and stays positive.
Matrix interp_weights(const Matrix& distances, double eps);

// F_i = sum_k w_ik * base_feats[idx_ik]; convex combination per coordinate.
Matrix interp_features(const Matrix& weights, const KnnResult& nn,
                       const Matrix& base_feats);

// Everything densify computed along the way; the trainer replays it backward.
struct DensifyDetail {
  VoteOutput vote;
  MlpCache vote_cache;
  Matrix probs;
  std::vector<double> pi;
  ForegroundSet fg;
  VirtualPoints virt;
  KnnResult nn;
  Matrix weights;
};

// Retained original foreground points followed by virtual points; background
// points are absent. KNN for interpolation runs against the raw cloud unless
// cfg.knn_pool selects the retained set. Returns an empty flagged cloud when
// nothing clears tau.
DenseCloud densify(const PointCloud& cloud, const Matrix& point_feats,
                   const Mlp& vote_head, const PipelineConfig& cfg,
                   DensifyDetail* detail = nullptr);

}  // namespace sd4r
