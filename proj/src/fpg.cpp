// Copyright 2026 The SD4R Authors
// SPDX-License-Identifier: Apache-2.0

#include "sd4r/fpg.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <unordered_map>

namespace sd4r {

VoteOutput vote_forward(const Matrix& point_feats, const Mlp& head,
                        int num_classes, MlpCache* cache) {
  int k = num_classes;
  int d = (int)point_feats.cols();
  int out_w = head.out_width();
  bool passthrough;
  if (out_w == 4 * k)
    passthrough = true;
  else if (out_w == 4 * k + d)
    passthrough = false;
  else
    throw std::invalid_argument("vote_forward: head output width mismatch");
  if (head.in_width() != d)
    throw std::invalid_argument("vote_forward: head input width mismatch");

  Matrix y = mlp_forward(head, point_feats, cache);
  std::size_t n = point_feats.rows();
  VoteOutput out;
  out.logits = Matrix(n, k);
  out.offsets = Matrix(n, 3 * (std::size_t)k);
  out.feats = passthrough ? point_feats : Matrix(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = y.data() + i * (std::size_t)out_w;
    for (int c = 0; c < k; ++c) out.logits(i, c) = row[c];
    for (int c = 0; c < 3 * k; ++c) out.offsets(i, c) = row[k + c];
    if (!passthrough)
      for (int c = 0; c < d; ++c) out.feats(i, c) = row[4 * k + c];
  }
  return out;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix probs(logits.rows(), logits.cols());
  std::size_t k = logits.cols();
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const double* z = logits.data() + i * k;
    double* p = probs.data() + i * k;
    double m = z[0];
    for (std::size_t c = 1; c < k; ++c) m = std::max(m, z[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      p[c] = std::exp(z[c] - m);
      sum += p[c];
    }
    for (std::size_t c = 0; c < k; ++c) p[c] /= sum;
  }
  return probs;
}

std::vector<double> foreground_confidence(const Matrix& probs,
                                          int num_classes) {
  if ((int)probs.cols() != num_classes)
    throw std::invalid_argument("foreground_confidence: width mismatch");
  std::vector<double> pi(probs.rows());
  for (std::size_t i = 0; i < probs.rows(); ++i)
    pi[i] = 1.0 - probs(i, num_classes - 1);
  return pi;
}

void foreground_confidence_backward(std::span<const double> probs_row,
                                    double dpi, std::span<double> dlogits_row) {
  // pi = 1 - softmax(z)[bg]; d pi / d z_j = p_bg * (p_j - [j == bg])
  std::size_t k = probs_row.size();
  double p_bg = probs_row[k - 1];
  for (std::size_t j = 0; j < k; ++j) {
    double d = p_bg * (probs_row[j] - (j == k - 1 ? 1.0 : 0.0));
    dlogits_row[j] += dpi * d;
  }
}

ForegroundSet filter_foreground(const Matrix& probs,
                                const std::vector<double>& pi, double tau) {
  if (pi.size() != probs.rows())
    throw std::invalid_argument("filter_foreground: size mismatch");
  ForegroundSet fg;
  std::size_t k = probs.cols();
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    if (!(pi[i] > tau)) continue;  // strict
    const double* p = probs.data() + i * k;
    int best = 0;
    for (std::size_t c = 1; c + 1 < k; ++c)
      if (p[c] > p[best]) best = (int)c;  // ties keep the lower index
    fg.indices.push_back((int)i);
    fg.cls.push_back(best);
    fg.confidence.push_back(pi[i]);
  }
  return fg;
}

VirtualPoints generate_virtual(const PointCloud& cloud, const ForegroundSet& fg,
                               const Matrix& offsets, const Bounds& bounds,
                               int num_classes) {
  if ((int)offsets.cols() != 3 * num_classes)
    throw std::invalid_argument("generate_virtual: offsets width mismatch");
  VirtualPoints out;
  out.pos.reserve(fg.indices.size());
  // Upper clamp stays strictly inside the half-open box.
  double hi[3] = {std::nextafter(bounds.x_max, bounds.x_min),
                  std::nextafter(bounds.y_max, bounds.y_min),
                  std::nextafter(bounds.z_max, bounds.z_min)};
  double lo[3] = {bounds.x_min, bounds.y_min, bounds.z_min};
  for (std::size_t r = 0; r < fg.indices.size(); ++r) {
    int i = fg.indices[r];
    std::size_t s = 3 * (std::size_t)fg.cls[r];
    const RadarPoint& p = cloud.points[i];
    double v[3] = {p.x + offsets(i, s + 0), p.y + offsets(i, s + 1),
                   p.z + offsets(i, s + 2)};
    std::array<bool, 3> clamped = {false, false, false};
    for (int a = 0; a < 3; ++a) {
      if (v[a] < lo[a]) {
        v[a] = lo[a];
        clamped[a] = true;
      } else if (v[a] > hi[a]) {
        v[a] = hi[a];
        clamped[a] = true;
      }
    }
    out.pos.push_back({v[0], v[1], v[2]});
    out.source.push_back(i);
    out.clamped.push_back(clamped);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Exact KNN on a uniform grid hash.

namespace {

struct GridHash3 {
  double cell = 1.0;
  double ox = 0.0, oy = 0.0, oz = 0.0;
  int min_c[3] = {0, 0, 0}, max_c[3] = {0, 0, 0};
  std::unordered_map<std::int64_t, std::vector<int>> buckets;

  std::int64_t key(int ix, int iy, int iz) const {
    // 21-bit fields; coordinates stay far below the field range for any
    // bounded scene.
    return (((std::int64_t)(iz + (1 << 20))) << 42) |
           (((std::int64_t)(iy + (1 << 20))) << 21) |
           (std::int64_t)(ix + (1 << 20));
  }
  int coord(double v, double o) const { return (int)std::floor((v - o) / cell); }
};

GridHash3 build_grid(const PointCloud& base) {
  GridHash3 g;
  double lo[3] = {base.points[0].x, base.points[0].y, base.points[0].z};
  double hi[3] = {lo[0], lo[1], lo[2]};
  for (const RadarPoint& p : base.points) {
    lo[0] = std::min(lo[0], p.x);
    lo[1] = std::min(lo[1], p.y);
    lo[2] = std::min(lo[2], p.z);
    hi[0] = std::max(hi[0], p.x);
    hi[1] = std::max(hi[1], p.y);
    hi[2] = std::max(hi[2], p.z);
  }
  double ex = hi[0] - lo[0], ey = hi[1] - lo[1], ez = hi[2] - lo[2];
  double vol = std::max(ex, 1e-6) * std::max(ey, 1e-6) * std::max(ez, 1e-6);
  // Aim for roughly one point per cell; exactness never depends on this.
  g.cell = std::max(std::cbrt(vol / (double)base.size()), 1e-3);
  g.ox = lo[0];
  g.oy = lo[1];
  g.oz = lo[2];
  for (std::size_t i = 0; i < base.size(); ++i) {
    const RadarPoint& p = base.points[i];
    int ix = g.coord(p.x, g.ox), iy = g.coord(p.y, g.oy),
        iz = g.coord(p.z, g.oz);
    g.buckets[g.key(ix, iy, iz)].push_back((int)i);
  }
  g.min_c[0] = g.coord(lo[0], g.ox);
  g.min_c[1] = g.coord(lo[1], g.oy);
  g.min_c[2] = g.coord(lo[2], g.oz);
  g.max_c[0] = g.coord(hi[0], g.ox);
  g.max_c[1] = g.coord(hi[1], g.oy);
  g.max_c[2] = g.coord(hi[2], g.oz);
  return g;
}

struct Cand {
  double d2;
  int idx;
  bool operator<(const Cand& o) const {  // max-heap: worst candidate on top
    if (d2 != o.d2) return d2 < o.d2;
    return idx < o.idx;
  }
};

}  // namespace

KnnResult knn(std::span<const std::array<double, 3>> queries,
              const PointCloud& base, int k) {
  if (base.size() == 0) throw DataError("knn: empty base cloud");
  if (k < 1) throw std::invalid_argument("knn: k must be >= 1");
  int keff = std::min<int>(k, (int)base.size());

  GridHash3 g = build_grid(base);
  KnnResult res;
  res.k = keff;
  res.idx.assign(queries.size() * (std::size_t)keff, -1);
  res.dist.assign(queries.size() * (std::size_t)keff, 0.0);

  for (std::size_t q = 0; q < queries.size(); ++q) {
    const auto& qp = queries[q];
    int cx = g.coord(qp[0], g.ox), cy = g.coord(qp[1], g.oy),
        cz = g.coord(qp[2], g.oz);
    // Largest shell that can still contain base cells.
    int ring_max = 0;
    ring_max = std::max(ring_max, std::abs(cx - g.min_c[0]));
    ring_max = std::max(ring_max, std::abs(cx - g.max_c[0]));
    ring_max = std::max(ring_max, std::abs(cy - g.min_c[1]));
    ring_max = std::max(ring_max, std::abs(cy - g.max_c[1]));
    ring_max = std::max(ring_max, std::abs(cz - g.min_c[2]));
    ring_max = std::max(ring_max, std::abs(cz - g.max_c[2]));

    std::priority_queue<Cand> best;
    auto consider = [&](int idx) {
      const RadarPoint& p = base.points[idx];
      double dx = qp[0] - p.x, dy = qp[1] - p.y, dz = qp[2] - p.z;
      Cand c{dx * dx + dy * dy + dz * dz, idx};
      if ((int)best.size() < keff) {
        best.push(c);
      } else if (c < best.top()) {
        best.pop();
        best.push(c);
      }
    };
    auto visit_cell = [&](int ix, int iy, int iz) {
      auto it = g.buckets.find(g.key(ix, iy, iz));
      if (it == g.buckets.end()) return;
      for (int idx : it->second) consider(idx);
    };

    for (int ring = 0; ring <= ring_max; ++ring) {
      // A point in a shell at Chebyshev cell distance `ring` is at least
      // (ring - 1) * cell away; once that exceeds the current k-th distance
      // no farther shell can improve or tie the answer.
      if ((int)best.size() == keff && ring > 0) {
        double lower = (ring - 1) * g.cell;
        if (lower * lower > best.top().d2) break;
      }
      if (ring == 0) {
        visit_cell(cx, cy, cz);
        continue;
      }
      for (int iz = cz - ring; iz <= cz + ring; ++iz) {
        bool z_face = std::abs(iz - cz) == ring;
        for (int iy = cy - ring; iy <= cy + ring; ++iy) {
          bool y_face = std::abs(iy - cy) == ring;
          if (z_face || y_face) {
            for (int ix = cx - ring; ix <= cx + ring; ++ix)
              visit_cell(ix, iy, iz);
          } else {
            visit_cell(cx - ring, iy, iz);
            visit_cell(cx + ring, iy, iz);
          }
        }
      }
    }

    // Heap pops worst-first; fill rows back to front.
    for (int r = (int)best.size() - 1; r >= 0; --r) {
      res.idx[q * keff + r] = best.top().idx;
      res.dist[q * keff + r] = std::sqrt(best.top().d2);
      best.pop();
    }
  }
  return res;
}

Matrix interp_weights(const Matrix& distances, double eps) {
  Matrix w(distances.rows(), distances.cols());
  std::size_t k = distances.cols();
  for (std::size_t i = 0; i < distances.rows(); ++i) {
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      double v = 1.0 / (distances(i, c) + eps);
      w(i, c) = v;
      sum += v;
    }
    for (std::size_t c = 0; c < k; ++c) w(i, c) /= sum;
  }
  return w;
}

Matrix interp_features(const Matrix& weights, const KnnResult& nn,
                       const Matrix& base_feats) {
  if (weights.cols() != (std::size_t)nn.k ||
      weights.rows() * (std::size_t)nn.k != nn.idx.size())
    throw std::invalid_argument("interp_features: shape mismatch");
  std::size_t d = base_feats.cols();
  Matrix out(weights.rows(), d);
  for (std::size_t i = 0; i < weights.rows(); ++i) {
    double* row = out.data() + i * d;
    for (int c = 0; c < nn.k; ++c) {
      double w = weights(i, c);
      const double* f =
          base_feats.data() + (std::size_t)nn.idx[i * nn.k + c] * d;
      for (std::size_t j = 0; j < d; ++j) row[j] += w * f[j];
    }
  }
  return out;
}

DenseCloud densify(const PointCloud& cloud, const Matrix& point_feats,
                   const Mlp& vote_head, const PipelineConfig& cfg,
                   DensifyDetail* detail) {
  DensifyDetail local;
  DensifyDetail& d = detail ? *detail : local;

  d.vote = vote_forward(point_feats, vote_head, cfg.num_classes,
                        detail ? &d.vote_cache : nullptr);
  if (!d.vote.logits.all_finite() || !d.vote.offsets.all_finite() ||
      !d.vote.feats.all_finite())
    throw NumericError("densify: non-finite vote head output");
  d.probs = softmax_rows(d.vote.logits);
  d.pi = foreground_confidence(d.probs, cfg.num_classes);
  d.fg = filter_foreground(d.probs, d.pi, cfg.tau);

  DenseCloud dense;
  int dim = (int)d.vote.feats.cols();
  if (d.fg.indices.empty()) {
    dense.no_foreground = true;
    dense.feats = Matrix(0, dim);
    dense.logits = Matrix(0, cfg.num_classes);
    return dense;
  }

  d.virt = generate_virtual(cloud, d.fg, d.vote.offsets, cfg.bounds,
                            cfg.num_classes);

  // Interpolation pool per the config: the raw cloud by default.
  PointCloud pool_cloud;
  std::vector<int> pool_to_raw;
  const PointCloud* pool = &cloud;
  if (cfg.knn_pool == KnnPool::kForeground) {
    for (int i : d.fg.indices) {
      pool_cloud.points.push_back(cloud.points[i]);
      pool_to_raw.push_back(i);
    }
    pool = &pool_cloud;
  }
  d.nn = knn(d.virt.pos, *pool, cfg.knn_k);
  if (!pool_to_raw.empty())
    for (int& idx : d.nn.idx) idx = pool_to_raw[idx];

  Matrix dist(d.virt.pos.size(), d.nn.k);
  for (std::size_t i = 0; i < dist.size(); ++i) dist.data()[i] = d.nn.dist[i];
  d.weights = interp_weights(dist, cfg.epsilon);
  Matrix virt_feats = interp_features(d.weights, d.nn, d.vote.feats);

  std::size_t n_fg = d.fg.indices.size();
  std::size_t total = n_fg + d.virt.pos.size();
  dense.points.reserve(total);
  dense.feats = Matrix(total, dim);
  dense.logits = Matrix(total, cfg.num_classes);
  dense.is_virtual.reserve(total);
  dense.source.reserve(total);

  for (std::size_t r = 0; r < n_fg; ++r) {
    int i = d.fg.indices[r];
    dense.points.push_back(cloud.points[i]);
    for (int c = 0; c < dim; ++c) dense.feats(r, c) = d.vote.feats(i, c);
    for (int c = 0; c < cfg.num_classes; ++c)
      dense.logits(r, c) = d.vote.logits(i, c);
    dense.is_virtual.push_back(0);
    dense.source.push_back(i);
  }
  for (std::size_t v = 0; v < d.virt.pos.size(); ++v) {
    std::size_t r = n_fg + v;
    RadarPoint p;
    p.x = d.virt.pos[v][0];
    p.y = d.virt.pos[v][1];
    p.z = d.virt.pos[v][2];
    dense.points.push_back(p);
    int src = d.virt.source[v];
    for (int c = 0; c < dim; ++c) dense.feats(r, c) = virt_feats(v, c);
    // Virtual logits are copied from the spawning point.
    for (int c = 0; c < cfg.num_classes; ++c)
      dense.logits(r, c) = d.vote.logits(src, c);
    dense.is_virtual.push_back(1);
    dense.source.push_back(src);
  }
  return dense;
}

}  // namespace sd4r
