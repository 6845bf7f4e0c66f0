// Copyright 2026 The SD4R Authors
// SPDX-License-Identifier: Apache-2.0

#include "sd4r/pillars.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sd4r/eval.hpp"

namespace sd4r {

BevGeom bev_geom(const PipelineConfig& cfg) {
  BevGeom g;
  g.nx = cfg.pillars_x();
  g.ny = cfg.pillars_y();
  g.x_min = cfg.bounds.x_min;
  g.y_min = cfg.bounds.y_min;
  g.cell = cfg.pillar_size;
  return g;
}

PillarGrid pillarize(const DenseCloud& dense, const PipelineConfig& cfg) {
  PillarGrid grid;
  grid.nx = cfg.pillars_x();
  grid.ny = cfg.pillars_y();
  grid.n_cap = cfg.n_cap;
  grid.channels = cfg.pillar_point_channels();
  int d = cfg.feature_dim, k = cfg.num_classes;
  if ((int)dense.feats.cols() != d || (int)dense.logits.cols() != k)
    throw std::invalid_argument("pillarize: dense channel width mismatch");

  // First pass: membership in input order, overflow drops the highest
  // input indices.
  std::vector<std::vector<int>> members;
  for (std::size_t m = 0; m < dense.size(); ++m) {
    const RadarPoint& p = dense.points[m];
    if (!cfg.bounds.contains(p.x, p.y, p.z))
      throw DataError("pillarize: point out of bounds");
    int ix = (int)std::floor((p.x - cfg.bounds.x_min) / cfg.pillar_size);
    int iy = (int)std::floor((p.y - cfg.bounds.y_min) / cfg.pillar_size);
    ix = std::clamp(ix, 0, grid.nx - 1);
    iy = std::clamp(iy, 0, grid.ny - 1);
    std::int64_t key = (std::int64_t)iy * grid.nx + ix;
    auto it = grid.cell_to_pillar.find(key);
    int p_idx;
    if (it == grid.cell_to_pillar.end()) {
      p_idx = (int)grid.coords.size();
      grid.cell_to_pillar.emplace(key, p_idx);
      grid.coords.push_back({ix, iy});
      members.emplace_back();
    } else {
      p_idx = it->second;
    }
    if ((int)members[p_idx].size() < grid.n_cap)
      members[p_idx].push_back((int)m);
    else
      ++grid.dropped;
  }

  std::size_t np = grid.coords.size();
  grid.counts.resize(np);
  grid.mean.resize(np);
  grid.slot_point.assign(np * (std::size_t)grid.n_cap, -1);
  grid.slots = Matrix(np * (std::size_t)grid.n_cap, grid.channels);

  for (std::size_t p = 0; p < np; ++p) {
    const auto& mem = members[p];
    grid.counts[p] = (int)mem.size();
    double mx = 0.0, my = 0.0, mz = 0.0;
    for (int m : mem) {
      mx += dense.points[m].x;
      my += dense.points[m].y;
      mz += dense.points[m].z;
    }
    double n = (double)mem.size();
    grid.mean[p] = {mx / n, my / n, mz / n};
    double ccx = cfg.bounds.x_min + (grid.coords[p][0] + 0.5) * cfg.pillar_size;
    double ccy = cfg.bounds.y_min + (grid.coords[p][1] + 0.5) * cfg.pillar_size;
    for (std::size_t s = 0; s < mem.size(); ++s) {
      int m = mem[s];
      std::size_t slot = p * (std::size_t)grid.n_cap + s;
      grid.slot_point[slot] = m;
      double* ch = grid.slots.data() + slot * (std::size_t)grid.channels;
      const RadarPoint& pt = dense.points[m];
      ch[0] = pt.x;
      ch[1] = pt.y;
      ch[2] = pt.z;
      for (int c = 0; c < d; ++c) ch[3 + c] = dense.feats(m, c);
      for (int c = 0; c < k; ++c) ch[3 + d + c] = dense.logits(m, c);
      ch[3 + d + k + 0] = pt.x - grid.mean[p][0];
      ch[3 + d + k + 1] = pt.y - grid.mean[p][1];
      ch[3 + d + k + 2] = pt.z - grid.mean[p][2];
      ch[3 + d + k + 3] = pt.x - ccx;
      ch[3 + d + k + 4] = pt.y - ccy;
    }
  }
  return grid;
}

Matrix pillar_encode(const PillarGrid& grid, const Mlp& enc,
                     PillarEncodeCache* cache) {
  if (enc.in_width() != grid.channels)
    throw std::invalid_argument("pillar_encode: encoder width mismatch");
  int c_out = enc.out_width();
  std::size_t np = grid.pillar_count();

  // Compact kept slots; padded slots never reach the encoder.
  std::vector<int> kept_rows, row_pillar;
  for (std::size_t p = 0; p < np; ++p)
    for (int s = 0; s < grid.counts[p]; ++s) {
      kept_rows.push_back((int)(p * grid.n_cap + s));
      row_pillar.push_back((int)p);
    }
  Matrix in(kept_rows.size(), grid.channels);
  for (std::size_t r = 0; r < kept_rows.size(); ++r)
    for (int c = 0; c < grid.channels; ++c)
      in(r, c) = grid.slots((std::size_t)kept_rows[r], c);

  MlpCache local;
  MlpCache& mc = cache ? cache->mlp : local;
  Matrix enc_out = mlp_forward(enc, in, &mc);

  Matrix pooled(np, c_out);
  std::vector<int> argmax(np * (std::size_t)c_out, -1);
  for (std::size_t r = 0; r < kept_rows.size(); ++r) {
    int p = row_pillar[r];
    for (int c = 0; c < c_out; ++c) {
      double v = enc_out(r, c);
      int& win = argmax[(std::size_t)p * c_out + c];
      if (win < 0 || v > pooled(p, c)) {
        pooled(p, c) = v;
        win = (int)r;
      }
    }
  }
  if (cache) {
    cache->kept_rows = std::move(kept_rows);
    cache->row_pillar = std::move(row_pillar);
    cache->argmax = std::move(argmax);
  }
  return pooled;
}

void pillar_encode_backward(const PillarGrid& grid, const Mlp& enc,
                            const PillarEncodeCache& cache,
                            const Matrix& d_pillar, MlpGrads& grads,
                            Matrix* d_pos, Matrix* d_feats, Matrix* d_logits) {
  int c_out = enc.out_width();
  std::size_t rows = cache.kept_rows.size();
  Matrix d_enc_out(rows, c_out);
  for (std::size_t p = 0; p < grid.pillar_count(); ++p)
    for (int c = 0; c < c_out; ++c) {
      int r = cache.argmax[p * (std::size_t)c_out + c];
      if (r >= 0) d_enc_out((std::size_t)r, c) += d_pillar(p, c);
    }

  Matrix d_in = mlp_backward(enc, cache.mlp, d_enc_out, grads);

  if (!d_pos) return;
  int d = (int)d_feats->cols();
  int k = (int)d_logits->cols();

  // Mean-offset channels couple every kept member of a pillar: the offset is
  // p - mean(pillar), so each member also receives -1/n of the pillar's
  // summed offset gradient.
  std::vector<std::array<double, 3>> mean_grad(grid.pillar_count(),
                                               {0.0, 0.0, 0.0});
  for (std::size_t r = 0; r < rows; ++r) {
    int p = cache.row_pillar[r];
    for (int a = 0; a < 3; ++a)
      mean_grad[p][a] += d_in(r, 3 + d + k + a);
  }

  for (std::size_t r = 0; r < rows; ++r) {
    int m = grid.slot_point[(std::size_t)cache.kept_rows[r]];
    int p = cache.row_pillar[r];
    double inv_n = 1.0 / grid.counts[p];
    for (int a = 0; a < 3; ++a) {
      double g = d_in(r, a);                 // raw coordinate channel
      g += d_in(r, 3 + d + k + a);           // offset from pillar mean
      if (a < 2) g += d_in(r, 3 + d + k + 3 + a);  // offset from cell center
      g -= inv_n * mean_grad[p][a];
      (*d_pos)((std::size_t)m, a) += g;
    }
    for (int c = 0; c < d; ++c) (*d_feats)((std::size_t)m, c) += d_in(r, 3 + c);
    for (int c = 0; c < k; ++c)
      (*d_logits)((std::size_t)m, c) += d_in(r, 3 + d + c);
  }
}

BevMap scatter_bev(const Matrix& feats,
                   const std::vector<std::array<int, 2>>& coords, int nx,
                   int ny) {
  if (feats.rows() != coords.size())
    throw std::invalid_argument("scatter_bev: feature/coordinate mismatch");
  BevMap bev;
  bev.channels = (int)feats.cols();
  bev.width = nx;
  bev.height = ny;
  bev.data.assign((std::size_t)nx * ny * bev.channels, 0.0);
  std::vector<std::uint8_t> seen((std::size_t)nx * ny, 0);
  for (std::size_t p = 0; p < coords.size(); ++p) {
    int ix = coords[p][0], iy = coords[p][1];
    if (ix < 0 || ix >= nx || iy < 0 || iy >= ny)
      throw DataError("scatter_bev: coordinate out of range");
    std::size_t cell = (std::size_t)iy * nx + ix;
    if (seen[cell]) throw DataError("scatter_bev: duplicate pillar coordinate");
    seen[cell] = 1;
    double* dst = bev.data.data() + cell * bev.channels;
    for (int c = 0; c < bev.channels; ++c) dst[c] = feats(p, c);
  }
  return bev;
}

ObjectBox decode_box(std::span<const double> row, int num_classes, int ix,
                     int iy, const BevGeom& geom) {
  std::size_t kBox = (std::size_t)num_classes;
  ObjectBox box;
  box.cx = geom.cx(ix) + row[kBox + 0];
  box.cy = geom.cy(iy) + row[kBox + 1];
  box.cz = row[kBox + 2];
  // Clamped exp keeps early-training sizes sane and the >0 invariant intact.
  auto size_of = [](double v) { return std::exp(std::clamp(v, -10.0, 10.0)); };
  box.l = size_of(row[kBox + 3]);
  box.w = size_of(row[kBox + 4]);
  box.h = size_of(row[kBox + 5]);
  double yaw = std::atan2(row[kBox + 6], row[kBox + 7]);
  if (yaw >= 3.141592653589793) yaw = -3.141592653589793;
  box.yaw = yaw;
  int best = 0;
  for (int c = 1; c + 1 < num_classes; ++c)
    if (row[1 + c] > row[1 + best]) best = c;
  box.cls = best;
  return box;
}

std::vector<Detection> nms_bev(std::vector<Detection> dets, double iou_thresh) {
  std::sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.cell < b.cell;
  });
  std::vector<Detection> kept;
  for (const Detection& d : dets) {
    bool suppressed = false;
    for (const Detection& kd : kept) {
      // Circumradius pre-check: disjoint boxes skip the polygon clip.
      double ra = 0.5 * std::hypot(d.box.l, d.box.w);
      double rb = 0.5 * std::hypot(kd.box.l, kd.box.w);
      double dx = d.box.cx - kd.box.cx, dy = d.box.cy - kd.box.cy;
      if (dx * dx + dy * dy > (ra + rb) * (ra + rb)) continue;
      if (bev_iou(d.box, kd.box) > iou_thresh) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

std::vector<Detection> detect_head(const BevMap& bev, const Mlp& head,
                                   const PipelineConfig& cfg) {
  int expected = cfg.num_classes + 8;
  if (head.out_width() != expected || head.in_width() != bev.channels)
    throw std::invalid_argument("detect_head: head width mismatch");
  BevGeom geom = bev_geom(cfg);
  if (geom.nx != bev.width || geom.ny != bev.height)
    throw std::invalid_argument("detect_head: BEV size mismatch");

  std::vector<double> input(bev.channels);
  std::vector<Detection> cands;
  Matrix in_row(1, bev.channels);
  for (int h = 0; h < bev.height; ++h) {
    for (int w = 0; w < bev.width; ++w) {
      if (cfg.context_pool) {
        std::fill(input.begin(), input.end(), 0.0);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            int hh = h + dy, ww = w + dx;
            if (hh < 0 || hh >= bev.height || ww < 0 || ww >= bev.width)
              continue;
            auto cell = bev.cell(hh, ww);
            for (int c = 0; c < bev.channels; ++c) input[c] += cell[c];
          }
        for (int c = 0; c < bev.channels; ++c)
          in_row(0, c) = input[c] / 9.0;
      } else {
        auto cell = bev.cell(h, w);
        for (int c = 0; c < bev.channels; ++c) in_row(0, c) = cell[c];
      }
      Matrix out = mlp_forward(head, in_row);
      double score = sigmoid(out(0, 0));
      if (!(score > cfg.score_threshold)) continue;  // strict
      Detection det;
      det.box = decode_box(out.row(0), cfg.num_classes, w, h, geom);
      det.score = score;
      det.cell = (std::int64_t)h * bev.width + w;
      cands.push_back(det);
    }
  }
  return nms_bev(std::move(cands), cfg.nms_iou);
}

}  // namespace sd4r
