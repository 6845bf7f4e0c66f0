// Copyright 2026 The SD4R Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <optional>
#include <utility>
#include <vector>

#include "sd4r/types.hpp"

namespace sd4r {

// BEV corners of a rotated box, counter-clockwise.
std::array<std::array<double, 2>, 4> box_corners_bev(const ObjectBox& box);

// Rotated-rectangle intersection over union in the ground plane, via exact
// Sutherland-Hodgman polygon clipping.
double bev_iou(const ObjectBox& a, const ObjectBox& b);

enum class EvalRegion { kEntire, kCorridor };

// Corridor: -4 < x < 4 and z < 25 on the box center, constants fixed.
bool region_contains(EvalRegion region, const ObjectBox& box);

std::vector<ObjectBox> region_filter(const std::vector<ObjectBox>& boxes,
                                     EvalRegion region);
std::vector<Detection> region_filter(const std::vector<Detection>& dets,
                                     EvalRegion region);

// 40-point interpolated AP over (scene, detection) pairs matched greedily by
// descending score (ties by insertion index) against same-scene ground truth.
// Returns nullopt when there is no ground truth of this class.
std::optional<double> average_precision(
    const std::vector<std::pair<int, Detection>>& dets,
    const std::vector<std::pair<int, ObjectBox>>& gts, double iou_thresh);

// Class-specific IoU thresholds: 0.5 for cars, 0.25 for pedestrians and
// cyclists (and for any extra class).
double iou_threshold_for_class(ClassId cls);

struct DensifyMetrics {
  std::optional<double> precision;         // retained originals vs gt labels
  std::optional<double> recall;
  std::optional<double> mean_center_dist;  // virtual point to nearest gt center
  std::optional<double> ratio;             // dense size / gt foreground size
  std::size_t dense_size = 0;
  std::size_t gt_foreground = 0;
};

// gt_labels must align with the raw-cloud indices in dense.source.
DensifyMetrics densify_metrics(const DenseCloud& dense,
                               const std::vector<ClassId>& gt_labels,
                               const std::vector<ObjectBox>& boxes,
                               int num_classes);

struct MetricReport {
  std::vector<std::optional<double>> ap;  // per non-background class
  std::optional<double> map;
  std::optional<double> fg_precision;
  std::optional<double> fg_recall;
  std::optional<double> mean_vote_dist;
  std::optional<double> densification_ratio;
};

}  // namespace sd4r
