// Copyright 2026 The SD4R Authors
// SPDX-License-Identifier: Apache-2.0

#include "sd4r/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace sd4r {

using nlohmann::json;

std::string fmt_float(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", (double)(float)v);
  return buf;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const std::string& path) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    throw DataError("bad numeric field '" + s + "' in " + path);
  return v;
}

struct CsvHeader {
  int aux = 0;
  bool label = false;
  int feat = 0;   // dense only
  int logit = 0;  // dense only
  bool is_virtual = false;
};

CsvHeader parse_header(const std::vector<std::string>& cols,
                       const std::string& path) {
  static const char* base[] = {"x", "y", "z", "rcs", "v_r"};
  if (cols.size() < 5) throw DataError("missing columns in " + path);
  for (int i = 0; i < 5; ++i)
    if (cols[i] != base[i])
      throw DataError("unexpected column '" + cols[i] + "' in " + path);
  CsvHeader h;
  std::size_t i = 5;
  auto prefixed = [&](const char* prefix, int n) {
    return cols[i] == std::string(prefix) + "_" + std::to_string(n);
  };
  while (i < cols.size() && prefixed("aux", h.aux)) ++i, ++h.aux;
  while (i < cols.size() && prefixed("feat", h.feat)) ++i, ++h.feat;
  while (i < cols.size() && prefixed("logit", h.logit)) ++i, ++h.logit;
  if (i < cols.size() && cols[i] == "is_virtual") ++i, h.is_virtual = true;
  if (i < cols.size() && cols[i] == "label") ++i, h.label = true;
  if (i != cols.size())
    throw DataError("unexpected column '" + cols[i] + "' in " + path);
  return h;
}

}  // namespace

PointCloud read_cloud_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  PointCloud cloud;
  std::string line;
  bool have_header = false;
  CsvHeader h;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto cols = split_csv(line);
    if (!have_header) {
      h = parse_header(cols, path);
      if (h.feat || h.logit || h.is_virtual)
        throw DataError("dense columns in plain cloud file " + path);
      have_header = true;
      continue;
    }
    if ((int)cols.size() != 5 + h.aux + (h.label ? 1 : 0))
      throw DataError("column count mismatch in " + path);
    RadarPoint p;
    p.x = parse_double(cols[0], path);
    p.y = parse_double(cols[1], path);
    p.z = parse_double(cols[2], path);
    p.rcs = parse_double(cols[3], path);
    p.v_r = parse_double(cols[4], path);
    for (int a = 0; a < h.aux; ++a)
      p.aux.push_back(parse_double(cols[5 + a], path));
    if (h.label)
      cloud.labels.push_back((int)parse_double(cols[5 + h.aux], path));
    cloud.points.push_back(std::move(p));
  }
  if (!have_header) throw DataError("no header in " + path);
  return cloud;
}

void write_cloud_csv(const std::string& path, const PointCloud& cloud) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  int aux = cloud.points.empty() ? 0 : (int)cloud.points[0].aux.size();
  out << "x,y,z,rcs,v_r";
  for (int a = 0; a < aux; ++a) out << ",aux_" << a;
  if (cloud.has_labels()) out << ",label";
  out << "\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const RadarPoint& p = cloud.points[i];
    out << fmt_float(p.x) << ',' << fmt_float(p.y) << ',' << fmt_float(p.z)
        << ',' << fmt_float(p.rcs) << ',' << fmt_float(p.v_r);
    for (int a = 0; a < aux; ++a) out << ',' << fmt_float(p.aux[a]);
    if (cloud.has_labels()) out << ',' << cloud.labels[i];
    out << "\n";
  }
}

DenseCloud read_dense_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  DenseCloud dense;
  std::string line;
  bool have_header = false;
  CsvHeader h;
  std::vector<double> feat_buf, logit_buf;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto cols = split_csv(line);
    if (!have_header) {
      h = parse_header(cols, path);
      if (!h.is_virtual || h.feat == 0 || h.logit == 0 || h.label)
        throw DataError("not a dense cloud file: " + path);
      have_header = true;
      continue;
    }
    if ((int)cols.size() != 5 + h.aux + h.feat + h.logit + 1)
      throw DataError("column count mismatch in " + path);
    RadarPoint p;
    p.x = parse_double(cols[0], path);
    p.y = parse_double(cols[1], path);
    p.z = parse_double(cols[2], path);
    p.rcs = parse_double(cols[3], path);
    p.v_r = parse_double(cols[4], path);
    std::size_t i = 5;
    for (int a = 0; a < h.aux; ++a) p.aux.push_back(parse_double(cols[i++], path));
    for (int f = 0; f < h.feat; ++f) feat_buf.push_back(parse_double(cols[i++], path));
    for (int l = 0; l < h.logit; ++l) logit_buf.push_back(parse_double(cols[i++], path));
    dense.is_virtual.push_back(parse_double(cols[i++], path) != 0.0);
    dense.source.push_back(-1);
    dense.points.push_back(std::move(p));
  }
  if (!have_header) throw DataError("no header in " + path);
  std::size_t n = dense.points.size();
  dense.feats = Matrix(n, h.feat);
  dense.logits = Matrix(n, h.logit);
  for (std::size_t r = 0; r < n; ++r) {
    for (int c = 0; c < h.feat; ++c) dense.feats(r, c) = feat_buf[r * h.feat + c];
    for (int c = 0; c < h.logit; ++c)
      dense.logits(r, c) = logit_buf[r * h.logit + c];
  }
  dense.no_foreground = n == 0;
  return dense;
}

void write_dense_csv(const std::string& path, const DenseCloud& dense) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  int aux = dense.points.empty() ? 0 : (int)dense.points[0].aux.size();
  int d = (int)dense.feats.cols();
  int k = (int)dense.logits.cols();
  out << "x,y,z,rcs,v_r";
  for (int a = 0; a < aux; ++a) out << ",aux_" << a;
  for (int f = 0; f < d; ++f) out << ",feat_" << f;
  for (int l = 0; l < k; ++l) out << ",logit_" << l;
  out << ",is_virtual\n";
  for (std::size_t i = 0; i < dense.size(); ++i) {
    const RadarPoint& p = dense.points[i];
    out << fmt_float(p.x) << ',' << fmt_float(p.y) << ',' << fmt_float(p.z)
        << ',' << fmt_float(p.rcs) << ',' << fmt_float(p.v_r);
    for (int a = 0; a < aux; ++a) out << ',' << fmt_float(p.aux[a]);
    for (int f = 0; f < d; ++f) out << ',' << fmt_float(dense.feats(i, f));
    for (int l = 0; l < k; ++l) out << ',' << fmt_float(dense.logits(i, l));
    out << ',' << (dense.is_virtual[i] ? 1 : 0) << "\n";
  }
}

void write_boxes_json(const std::string& path,
                      const std::vector<ObjectBox>& boxes,
                      const std::vector<int>& num_points) {
  json arr = json::array();
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const ObjectBox& b = boxes[i];
    json jb;
    jb["center"] = {b.cx, b.cy, b.cz};
    jb["size"] = {b.l, b.w, b.h};
    jb["yaw"] = b.yaw;
    jb["class"] = b.cls;
    if (i < num_points.size()) jb["num_points"] = num_points[i];
    arr.push_back(jb);
  }
  json j;
  j["boxes"] = arr;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(2) << "\n";
}

std::vector<ObjectBox> read_boxes_json(const std::string& path,
                                       std::vector<int>* num_points) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw DataError("json parse error in " + path + ": " + e.what());
  }
  std::vector<ObjectBox> boxes;
  for (const json& jb : j.at("boxes")) {
    ObjectBox b;
    b.cx = jb.at("center")[0];
    b.cy = jb.at("center")[1];
    b.cz = jb.at("center")[2];
    b.l = jb.at("size")[0];
    b.w = jb.at("size")[1];
    b.h = jb.at("size")[2];
    b.yaw = jb.at("yaw");
    b.cls = jb.at("class");
    boxes.push_back(b);
    if (num_points)
      num_points->push_back(jb.contains("num_points") ? (int)jb["num_points"] : 0);
  }
  return boxes;
}

void write_detections_json(const std::string& path,
                           const std::vector<Detection>& dets) {
  json arr = json::array();
  for (const Detection& d : dets) {
    json jd;
    jd["center"] = {d.box.cx, d.box.cy, d.box.cz};
    jd["size"] = {d.box.l, d.box.w, d.box.h};
    jd["yaw"] = d.box.yaw;
    jd["class"] = d.box.cls;
    jd["score"] = d.score;
    arr.push_back(jd);
  }
  json j;
  j["detections"] = arr;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(2) << "\n";
}

std::vector<Detection> read_detections_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw DataError("json parse error in " + path + ": " + e.what());
  }
  std::vector<Detection> dets;
  for (const json& jd : j.at("detections")) {
    Detection d;
    d.box.cx = jd.at("center")[0];
    d.box.cy = jd.at("center")[1];
    d.box.cz = jd.at("center")[2];
    d.box.l = jd.at("size")[0];
    d.box.w = jd.at("size")[1];
    d.box.h = jd.at("size")[2];
    d.box.yaw = jd.at("yaw");
    d.box.cls = jd.at("class");
    d.score = jd.at("score");
    dets.push_back(d);
  }
  return dets;
}

namespace {
json opt(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}
}  // namespace

void write_report_json(const std::string& path, const MetricReport& report,
                       const std::vector<std::string>& per_scene_lines) {
  json j;
  json aps = json::array();
  for (const auto& a : report.ap) aps.push_back(opt(a));
  j["ap"] = aps;
  j["map"] = opt(report.map);
  j["fg_precision"] = opt(report.fg_precision);
  j["fg_recall"] = opt(report.fg_recall);
  j["mean_vote_dist"] = opt(report.mean_vote_dist);
  j["densification_ratio"] = opt(report.densification_ratio);
  j["scenes"] = per_scene_lines;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(2) << "\n";
}

void write_manifest(const std::string& path, const PipelineConfig& cfg,
                    std::uint64_t seed, const std::string& command,
                    double elapsed_ms) {
  json j;
  j["config_hash"] = config_hash(cfg);
  j["seed"] = seed;
  j["command"] = command;
  j["version"] = kVersion;
  j["elapsed_ms"] = elapsed_ms;
  j["config"] = json::parse(config_to_json(cfg));
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace sd4r
