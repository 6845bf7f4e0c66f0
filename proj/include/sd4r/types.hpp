// Copyright 2026 The SD4R Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sd4r/matrix.hpp"

namespace sd4r {

// Malformed or inconsistent input data (files, shapes, ranges).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// NaN/Inf surfaced by a pipeline stage.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Class index in [0, K-1]; index K-1 is always the background/noise class.
using ClassId = int;

struct Bounds {
  double x_min = 0.0, x_max = 51.2;
  double y_min = -25.6, y_max = 25.6;
  double z_min = -3.0, z_max = 2.0;

  // Half-open containment: [min, max) on every axis, so each point maps to
  // exactly one voxel/pillar.
  bool contains(double x, double y, double z) const {
    return x >= x_min && x < x_max && y >= y_min && y < y_max && z >= z_min &&
           z < z_max;
  }
};

// One radar return in the sensor frame (x forward, y left, z up).
struct RadarPoint {
  double x = 0.0, y = 0.0, z = 0.0;
  double rcs = 0.0;  // dBsm
  double v_r = 0.0;  // radial velocity, m/s
  std::vector<double> aux;
};

struct PointCloud {
  std::vector<RadarPoint> points;
  std::vector<ClassId> labels;  // empty when no ground truth
  Matrix features;              // N x d when present, 0 x 0 otherwise

  std::size_t size() const { return points.size(); }
  bool has_labels() const { return !labels.empty(); }
  bool has_features() const { return features.rows() > 0; }
};

struct ObjectBox {
  double cx = 0.0, cy = 0.0, cz = 0.0;
  double l = 1.0, w = 1.0, h = 1.0;
  double yaw = 0.0;  // radians in [-pi, pi)
  ClassId cls = 0;   // never background
};

struct Detection {
  ObjectBox box;
  double score = 0.0;
  std::int64_t cell = -1;  // BEV cell of origin; NMS tie-break key
};

// Densified cloud: retained original foreground points followed by virtual
// points. Virtual points carry rcs = v_r = 0; `source` is the raw-cloud index
// of the point itself (originals) or of the spawning point (virtuals).
struct DenseCloud {
  std::vector<RadarPoint> points;
  Matrix feats;   // M x d
  Matrix logits;  // M x K
  std::vector<std::uint8_t> is_virtual;
  std::vector<int> source;
  bool no_foreground = false;

  std::size_t size() const { return points.size(); }
};

}  // namespace sd4r
