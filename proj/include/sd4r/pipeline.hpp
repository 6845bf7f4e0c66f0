// Copyright 2026 The SD4R Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sd4r/eval.hpp"
#include "sd4r/fpg.hpp"
#include "sd4r/lqe.hpp"
#include "sd4r/model.hpp"
#include "sd4r/pillars.hpp"
#include "sd4r/synth.hpp"
#include "sd4r/voxelizer.hpp"

namespace sd4r {

struct LossToggles {
  bool det = true;
  bool seg = true;
  bool vote = true;
};

struct PipelineOptions {
  bool use_fpg = true;  // off: pillarize the raw cloud with zero feat/logit channels
  bool use_lqe = true;  // off: F' = F_pillar
  LossToggles loss;
};

// Full voxelize -> encode -> project -> densify pass.
DenseCloud run_densify(const PointCloud& cloud, const Sd4rModel& model,
                       const PipelineConfig& cfg,
                       DensifyDetail* detail = nullptr);

// Raw cloud recast as a dense cloud with zero feature/logit channels; the
// baseline pillar path.
DenseCloud dense_from_raw(const PointCloud& cloud, const PipelineConfig& cfg);

// pillarize -> encode -> (LQE) -> scatter -> detection head.
std::vector<Detection> run_detect(const DenseCloud& dense,
                                  const Sd4rModel& model,
                                  const PipelineConfig& cfg,
                                  bool use_lqe = true);

// Forward state retained for the hand-written backward pass. Opaque outside
// pipeline.cpp.
struct SceneForwardImpl;
struct SceneForward {
  LossReport losses;
  std::shared_ptr<SceneForwardImpl> impl;
};

// Runs the training-time forward over one scene and reports the losses.
SceneForward pipeline_forward(const Sd4rModel& model,
                              const SyntheticScene& scene,
                              const PipelineConfig& cfg,
                              const PipelineOptions& opts);

// End-to-end gradients. KNN selection and ball-query membership are treated
// as piecewise constant, and interpolation weights are straight-through on
// features; everything else is exact reverse mode.
void pipeline_backward(const Sd4rModel& model, const SceneForward& fwd,
                       const PipelineConfig& cfg, const PipelineOptions& opts,
                       ModelGrads& grads);

struct TrainLog {
  std::vector<LossReport> epochs;  // mean over scenes per epoch
};

// SGD over scenes, one step per scene, order reshuffled each epoch from the
// config seed. start_epoch keeps resumed runs on the original shuffle.
TrainLog train_model(Sd4rModel& model, ModelMomentum& mom,
                     const std::vector<SyntheticScene>& scenes,
                     const PipelineConfig& cfg, const PipelineOptions& opts,
                     int epochs, std::uint64_t start_epoch = 0);

struct SceneEvalRow {
  std::size_t n_dets = 0;
  std::size_t n_gt = 0;
  DensifyMetrics densify;
};

struct DatasetEval {
  MetricReport report;
  std::vector<SceneEvalRow> scenes;
  double foreground_accuracy = 0.0;  // pi > tau vs gt foreground, pooled
};

// Densify + detect + score every scene (parallel over scenes, deterministic
// slots) and pool the metrics.
DatasetEval evaluate_scenes(const Sd4rModel& model,
                            const std::vector<SyntheticScene>& scenes,
                            const PipelineConfig& cfg,
                            const PipelineOptions& opts, EvalRegion region);

// Pooled AP per class over per-scene detection/gt lists.
MetricReport detection_metrics(
    const std::vector<std::vector<Detection>>& dets_per_scene,
    const std::vector<std::vector<ObjectBox>>& gts_per_scene,
    const PipelineConfig& cfg, EvalRegion region);

// Finite-difference verification of every head and every loss.
struct GradSuiteEntry {
  std::string name;
  GradCheckResult result;
};
std::vector<GradSuiteEntry> run_gradient_suite(const PipelineConfig& cfg);

// Table-shaped radius ablation: one row per (R_ped, R_cyc, R_car) triple.
struct AblationRow {
  std::array<double, 3> radii;
  std::vector<std::optional<double>> ap;
  std::optional<double> map;
};
std::vector<AblationRow> ablate_radius(
    const Sd4rModel& model, const std::vector<SyntheticScene>& test_scenes,
    const PipelineConfig& cfg, const std::vector<std::array<double, 3>>& grid);

// The ten radius triples of the reference ablation, (ped, cyc, car).
std::vector<std::array<double, 3>> default_radius_grid();

}  // namespace sd4r
