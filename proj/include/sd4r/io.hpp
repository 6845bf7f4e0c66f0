// Copyright 2026 The SD4R Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sd4r/config.hpp"
#include "sd4r/eval.hpp"
#include "sd4r/types.hpp"

namespace sd4r {

// Values cross the file boundary as float32 (printed with %.9g, which
// round-trips binary32 exactly); in-memory math stays 64-bit.
std::string fmt_float(double v);

// Cloud CSV: header `x,y,z,rcs,v_r[,aux_0..][,label]`, `#` comments.
PointCloud read_cloud_csv(const std::string& path);
void write_cloud_csv(const std::string& path, const PointCloud& cloud);

// Dense CSV appends feat_0..d-1, logit_0..K-1, is_virtual. Source indices are
// not serialized; readers get source = -1.
DenseCloud read_dense_csv(const std::string& path);
void write_dense_csv(const std::string& path, const DenseCloud& dense);

void write_boxes_json(const std::string& path,
                      const std::vector<ObjectBox>& boxes,
                      const std::vector<int>& num_points);
std::vector<ObjectBox> read_boxes_json(const std::string& path,
                                       std::vector<int>* num_points = nullptr);

void write_detections_json(const std::string& path,
                           const std::vector<Detection>& dets);
std::vector<Detection> read_detections_json(const std::string& path);

void write_report_json(const std::string& path, const MetricReport& report,
                       const std::vector<std::string>& per_scene_lines);

// Run manifest written beside every CLI output.
void write_manifest(const std::string& path, const PipelineConfig& cfg,
                    std::uint64_t seed, const std::string& command,
                    double elapsed_ms);

}  // namespace sd4r
