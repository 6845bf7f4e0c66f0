// Copyright 2026 The SD4R Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "sd4r/matrix.hpp"
#include "sd4r/rng.hpp"
#include "sd4r/types.hpp"

namespace sd4r {

enum class Activation { kIdentity, kRelu, kSigmoid };

struct Layer {
  Matrix w;               // out x in
  std::vector<double> b;  // out
  Activation act = Activation::kIdentity;
};

// Plain perceptron stack with hand-written forward/backward. The backward
// pass is the reference gradient for the whole pipeline and is held to
// finite-difference agreement by the test suite.
struct Mlp {
  std::vector<Layer> layers;

  int in_width() const {
    return layers.empty() ? 0 : (int)layers.front().w.cols();
  }
  int out_width() const {
    return layers.empty() ? 0 : (int)layers.back().w.rows();
  }
  std::size_t param_count() const;
};

// Glorot-uniform weights in +-sqrt(6/(in+out)), zero biases.
Mlp make_mlp(const std::vector<int>& widths, const std::vector<Activation>& acts,
             Rng& rng);

struct MlpCache {
  Matrix input;
  std::vector<Matrix> pre;   // pre-activations per layer
  std::vector<Matrix> post;  // activations per layer
  // Smallest |pre-activation| seen on any relu unit; finite-difference checks
  // use it to flag non-differentiable kinks.
  double min_relu_abs = std::numeric_limits<double>::infinity();
};

Matrix mlp_forward(const Mlp& mlp, const Matrix& x, MlpCache* cache = nullptr);

struct MlpGrads {
  std::vector<Matrix> w;
  std::vector<std::vector<double>> b;

  explicit MlpGrads(const Mlp& mlp);
  MlpGrads() = default;
  void zero();
};

// Reverse-mode gradients of the forward map; accumulates into `grads` and
// returns dL/dX. `cache` must come from a matching forward call.
Matrix mlp_backward(const Mlp& mlp, const MlpCache& cache, const Matrix& dy,
                    MlpGrads& grads);

std::vector<double*> param_ptrs(Mlp& mlp);
std::vector<double> flatten_grads(const MlpGrads& g);

// ---------------------------------------------------------------------------
// Losses. Each returns the scalar and the gradient w.r.t. its input.

struct SegLoss {
  double value = 0.0;
  Matrix dlogits;  // N x K
};
// Mean cross-entropy over points; gradient (softmax - onehot)/N.
SegLoss seg_loss(const Matrix& logits, const std::vector<ClassId>& labels);

struct VoteLoss {
  double value = 0.0;
  Matrix doffsets;  // N x 3K
};
// Smooth-L1 (beta = 1 m) on p + o - center, summed over axes and averaged
// over masked points; the offset slice of `chosen[i]` is supervised.
VoteLoss vote_loss(const Matrix& offsets, const std::vector<ClassId>& chosen,
                   const Matrix& positions, const Matrix& centers,
                   const std::vector<std::uint8_t>& mask, int num_classes);

// Detection head output row layout: [objectness | K-1 class scores | dx, dy,
// z, log l, log w, log h, sin yaw, cos yaw].
struct BevGeom {
  int nx = 0, ny = 0;
  double x_min = 0.0, y_min = 0.0, cell = 1.0;
  double cx(int ix) const { return x_min + (ix + 0.5) * cell; }
  double cy(int iy) const { return y_min + (iy + 0.5) * cell; }
  std::int64_t cell_index(int ix, int iy) const {
    return (std::int64_t)iy * nx + ix;
  }
};

struct DetTargets {
  std::vector<std::int64_t> cells;  // unique positive cells, ascending
  std::vector<ObjectBox> boxes;     // aligned with cells
};
// Cell containing a gt box center is positive; when two centers share a cell
// the lower box index wins.
DetTargets make_det_targets(const std::vector<ObjectBox>& boxes,
                            const BevGeom& geom);

struct DetLoss {
  double value = 0.0;
  Matrix doutputs;  // same shape as outputs
  int n_pos = 0;
};
// Focal objectness (alpha = 0.25, gamma = 2) over all cells, plus
// cross-entropy on the class scores and smooth-L1 (beta = 1) on the box
// residuals at positive cells. `outputs` holds one row per evaluated cell;
// `multiplicity[r]` > 1 lets one row stand for that many identical cells
// (used for the all-zero BEV background), and positive cells must always be
// real rows. Focal is normalized by max(1, n_pos), the positive-cell terms
// by n_pos.
DetLoss det_loss(const Matrix& outputs,
                 const std::vector<std::int64_t>& cell_of_row,
                 const std::vector<double>& multiplicity,
                 const DetTargets& targets, const BevGeom& geom,
                 int num_classes);

struct LossReport {
  double l_det = 0.0, l_seg = 0.0, l_vote = 0.0, l_total = 0.0;
};
LossReport total_loss(double l_det, double l_seg, double l_vote, double lambda);

// ---------------------------------------------------------------------------
// Optimizer: SGD with momentum. v = mu*v + g; p -= lr*v.

struct MlpMomentum {
  std::vector<Matrix> w;
  std::vector<std::vector<double>> b;

  explicit MlpMomentum(const Mlp& mlp);
  MlpMomentum() = default;
};

void sgd_step(Mlp& mlp, const MlpGrads& grads, MlpMomentum& mom, double lr,
              double momentum);

// ---------------------------------------------------------------------------
// Central finite differences per parameter against an analytic gradient.

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  std::size_t excluded = 0;  // parameters skipped at relu kinks
};

// `f` recomputes the scalar loss at the current parameter values and may call
// `kink_hit` hooks via the optional probe: after every f() evaluation,
// `at_kink()` (when provided) reports whether that evaluation crossed a relu
// kink; such parameters are excluded from the error statistic.
GradCheckResult grad_check(const std::function<double()>& f,
                           std::span<double* const> params,
                           std::span<const double> analytic, double h,
                           const std::function<bool()>& at_kink = {});

double smooth_l1(double r, double beta);
double smooth_l1_grad(double r, double beta);
double sigmoid(double x);
double softplus(double x);

}  // namespace sd4r
