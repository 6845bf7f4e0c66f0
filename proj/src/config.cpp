// Copyright 2026 The SD4R Authors
// SPDX-License-Identifier: Apache-2.0

#include "sd4r/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace sd4r {

namespace {

// Grid counts come from extents that are only approximately divisible in
// binary floating point (e.g. 51.2 / 0.16), so divisibility is checked with a
// relative tolerance and counts are rounded.
bool divides(double extent, double size) {
  if (size <= 0.0 || extent <= 0.0) return false;
  double q = extent / size;
  return std::abs(q - std::round(q)) <= 1e-9 * std::max(1.0, q);
}

int grid_count(double extent, double size) {
  return (int)std::llround(extent / size);
}

}  // namespace

int PipelineConfig::pillars_x() const {
  return grid_count(bounds.x_max - bounds.x_min, pillar_size);
}
int PipelineConfig::pillars_y() const {
  return grid_count(bounds.y_max - bounds.y_min, pillar_size);
}
int PipelineConfig::voxels_x() const {
  return grid_count(bounds.x_max - bounds.x_min, voxel_x);
}
int PipelineConfig::voxels_y() const {
  return grid_count(bounds.y_max - bounds.y_min, voxel_y);
}
int PipelineConfig::voxels_z() const {
  // The z extent need not divide exactly (the reference grid has a partial
  // top voxel); the last voxel is clipped by the bounds.
  double q = (bounds.z_max - bounds.z_min) / voxel_z;
  int n = (int)std::ceil(q - 1e-9);
  return n > 0 ? n : 1;
}

std::vector<std::string> validate_config(const PipelineConfig& cfg) {
  std::vector<std::string> errors;
  auto err = [&](const std::string& m) { errors.push_back(m); };

  const Bounds& b = cfg.bounds;
  if (!(b.x_max > b.x_min)) err("x bounds empty");
  if (!(b.y_max > b.y_min)) err("y bounds empty");
  if (!(b.z_max > b.z_min)) err("z bounds empty");

  if (!divides(b.x_max - b.x_min, cfg.pillar_size) ||
      !divides(b.y_max - b.y_min, cfg.pillar_size))
    err("pillar_size does not divide extent");
  if (!divides(b.x_max - b.x_min, cfg.voxel_x) ||
      !divides(b.y_max - b.y_min, cfg.voxel_y))
    err("voxel_size does not divide extent");
  if (!(cfg.voxel_z > 0.0)) err("voxel_z must be positive");

  if (cfg.num_classes < 2) err("num_classes must be >= 2");
  if (!(cfg.tau > 0.0 && cfg.tau < 1.0)) err("tau out of (0,1)");
  if (cfg.knn_k < 1) err("knn_k must be >= 1");
  if (!(cfg.epsilon > 0.0)) err("epsilon must be positive");

  if ((int)cfg.radius_weights.size() != cfg.num_classes - 1)
    err("radius_weights must have K-1 entries");
  for (double w : cfg.radius_weights)
    if (!(w > 0.0)) {
      err("radius_weights must be positive");
      break;
    }
  if (!(cfg.default_radius > 0.0)) err("default_radius must be positive");
  if (!(cfg.lambda >= 0.0) || !std::isfinite(cfg.lambda))
    err("lambda must be finite and non-negative");

  if (cfg.feature_dim < 1) err("feature_dim must be >= 1");
  if (cfg.aux_dim < 0) err("aux_dim must be >= 0");
  if (cfg.hidden_width < 1) err("hidden_width must be >= 1");
  if (cfg.pillar_channels < 1) err("pillar_channels must be >= 1");
  if (cfg.n_cap < 1) err("n_cap must be >= 1");
  if (!(cfg.score_threshold >= 0.0 && cfg.score_threshold < 1.0))
    err("score_threshold out of [0,1)");
  if (!(cfg.nms_iou > 0.0 && cfg.nms_iou <= 1.0)) err("nms_iou out of (0,1]");
  if (!(cfg.lr > 0.0)) err("lr must be positive");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0))
    err("momentum out of [0,1)");

  const SceneParams& s = cfg.synth;
  if (s.objects_min < 0 || s.objects_max < s.objects_min)
    err("synth object count range empty");
  if (s.points_min < 1 || s.points_max < s.points_min)
    err("synth points-per-object range empty");
  if (s.clutter_min < 0 || s.clutter_max < s.clutter_min)
    err("synth clutter range empty");
  if (!(s.sigma >= 0.0)) err("synth sigma must be >= 0");

  return errors;
}

namespace {

using nlohmann::json;

json to_json_impl(const PipelineConfig& c) {
  json j;
  j["x_min"] = c.bounds.x_min;
  j["x_max"] = c.bounds.x_max;
  j["y_min"] = c.bounds.y_min;
  j["y_max"] = c.bounds.y_max;
  j["z_min"] = c.bounds.z_min;
  j["z_max"] = c.bounds.z_max;
  j["pillar_size"] = c.pillar_size;
  j["voxel_x"] = c.voxel_x;
  j["voxel_y"] = c.voxel_y;
  j["voxel_z"] = c.voxel_z;
  j["num_classes"] = c.num_classes;
  j["tau"] = c.tau;
  j["knn_k"] = c.knn_k;
  j["epsilon"] = c.epsilon;
  j["radius_weights"] = c.radius_weights;
  j["default_radius"] = c.default_radius;
  j["lambda"] = c.lambda;
  j["feature_dim"] = c.feature_dim;
  j["aux_dim"] = c.aux_dim;
  j["hidden_width"] = c.hidden_width;
  j["pillar_channels"] = c.pillar_channels;
  j["n_cap"] = c.n_cap;
  j["score_threshold"] = c.score_threshold;
  j["nms_iou"] = c.nms_iou;
  j["context_pool"] = c.context_pool;
  j["knn_pool"] = c.knn_pool == KnnPool::kRaw ? "raw" : "foreground";
  j["lr"] = c.lr;
  j["momentum"] = c.momentum;
  j["seed"] = c.seed;
  j["synth_objects_min"] = c.synth.objects_min;
  j["synth_objects_max"] = c.synth.objects_max;
  j["synth_points_min"] = c.synth.points_min;
  j["synth_points_max"] = c.synth.points_max;
  j["synth_clutter_min"] = c.synth.clutter_min;
  j["synth_clutter_max"] = c.synth.clutter_max;
  j["synth_sigma"] = c.synth.sigma;
  return j;
}

}  // namespace

std::string config_to_json(const PipelineConfig& cfg) {
  return to_json_impl(cfg).dump(2) + "\n";
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw DataError("config parse error in " + path + ": " + e.what());
  }
  if (!j.is_object()) throw DataError("config must be a JSON object: " + path);

  PipelineConfig c;
  json known = to_json_impl(c);
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.contains(it.key()))
      throw DataError("unknown config key: " + it.key());
  }
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("x_min", c.bounds.x_min);
  get("x_max", c.bounds.x_max);
  get("y_min", c.bounds.y_min);
  get("y_max", c.bounds.y_max);
  get("z_min", c.bounds.z_min);
  get("z_max", c.bounds.z_max);
  get("pillar_size", c.pillar_size);
  get("voxel_x", c.voxel_x);
  get("voxel_y", c.voxel_y);
  get("voxel_z", c.voxel_z);
  get("num_classes", c.num_classes);
  get("tau", c.tau);
  get("knn_k", c.knn_k);
  get("epsilon", c.epsilon);
  get("radius_weights", c.radius_weights);
  get("default_radius", c.default_radius);
  get("lambda", c.lambda);
  get("feature_dim", c.feature_dim);
  get("aux_dim", c.aux_dim);
  get("hidden_width", c.hidden_width);
  get("pillar_channels", c.pillar_channels);
  get("n_cap", c.n_cap);
  get("score_threshold", c.score_threshold);
  get("nms_iou", c.nms_iou);
  get("context_pool", c.context_pool);
  get("lr", c.lr);
  get("momentum", c.momentum);
  get("seed", c.seed);
  get("synth_objects_min", c.synth.objects_min);
  get("synth_objects_max", c.synth.objects_max);
  get("synth_points_min", c.synth.points_min);
  get("synth_points_max", c.synth.points_max);
  get("synth_clutter_min", c.synth.clutter_min);
  get("synth_clutter_max", c.synth.clutter_max);
  get("synth_sigma", c.synth.sigma);
  if (j.contains("knn_pool")) {
    std::string p = j.at("knn_pool").get<std::string>();
    if (p == "raw")
      c.knn_pool = KnnPool::kRaw;
    else if (p == "foreground")
      c.knn_pool = KnnPool::kForeground;
    else
      throw DataError("knn_pool must be 'raw' or 'foreground'");
  }
  return c;
}

std::string config_hash(const PipelineConfig& cfg) {
  std::string s = to_json_impl(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a 64
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
  return buf;
}

PointCloud crop_to_bounds(const PointCloud& cloud, const PipelineConfig& cfg) {
  PointCloud out;
  bool feats = cloud.has_features();
  std::size_t d = feats ? cloud.features.cols() : 0;
  std::vector<std::size_t> keep;
  keep.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const RadarPoint& p = cloud.points[i];
    if (cfg.bounds.contains(p.x, p.y, p.z)) keep.push_back(i);
  }
  out.points.reserve(keep.size());
  if (feats) out.features = Matrix(keep.size(), d);
  for (std::size_t r = 0; r < keep.size(); ++r) {
    std::size_t i = keep[r];
    out.points.push_back(cloud.points[i]);
    if (cloud.has_labels()) out.labels.push_back(cloud.labels[i]);
    if (feats)
      for (std::size_t c = 0; c < d; ++c)
        out.features(r, c) = cloud.features(i, c);
  }
  return out;
}

}  // namespace sd4r
