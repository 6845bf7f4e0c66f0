// Copyright 2026 The SD4R Authors
// SPDX-License-Identifier: Apache-2.0

#include "sd4r/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace sd4r {

double sigmoid(double x) {
  if (x >= 0.0) {
    double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  // log(1 + e^x), overflow-safe.
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double smooth_l1(double r, double beta) {
  double a = std::abs(r);
  return a < beta ? 0.5 * r * r / beta : a - 0.5 * beta;
}

double smooth_l1_grad(double r, double beta) {
  if (std::abs(r) < beta) return r / beta;
  return r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
}

std::size_t Mlp::param_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers) n += l.w.size() + l.b.size();
  return n;
}

Mlp make_mlp(const std::vector<int>& widths,
             const std::vector<Activation>& acts, Rng& rng) {
  if (widths.size() < 2 || acts.size() != widths.size() - 1)
    throw std::invalid_argument("make_mlp: widths/activations mismatch");
  Mlp mlp;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    Layer layer;
    int in = widths[l], out = widths[l + 1];
    layer.w = Matrix(out, in);
    double bound = std::sqrt(6.0 / (in + out));
    for (std::size_t i = 0; i < layer.w.size(); ++i)
      layer.w.data()[i] = rng.uniform(-bound, bound);
    layer.b.assign(out, 0.0);
    layer.act = acts[l];
    mlp.layers.push_back(std::move(layer));
  }
  return mlp;
}

namespace {

double apply_act(Activation a, double z) {
  switch (a) {
    case Activation::kIdentity:
      return z;
    case Activation::kRelu:
      return z > 0.0 ? z : 0.0;
    case Activation::kSigmoid:
      return sigmoid(z);
  }
  return z;
}

// Derivative expressed through pre-activation z and activation value a.
double act_grad(Activation act, double z, double a) {
  switch (act) {
    case Activation::kIdentity:
      return 1.0;
    case Activation::kRelu:
      return z > 0.0 ? 1.0 : 0.0;
    case Activation::kSigmoid:
      return a * (1.0 - a);
  }
  return 1.0;
}

}  // namespace

Matrix mlp_forward(const Mlp& mlp, const Matrix& x, MlpCache* cache) {
  if (mlp.layers.empty()) throw std::invalid_argument("mlp_forward: empty net");
  if ((int)x.cols() != mlp.in_width())
    throw std::invalid_argument("mlp_forward: input width mismatch");
  if (cache) {
    cache->input = x;
    cache->pre.clear();
    cache->post.clear();
    cache->min_relu_abs = std::numeric_limits<double>::infinity();
  }
  Matrix a = x;
  for (const Layer& layer : mlp.layers) {
    std::size_t rows = a.rows(), in = layer.w.cols(), out = layer.w.rows();
    Matrix z(rows, out);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* ar = a.data() + r * in;
      double* zr = z.data() + r * out;
      for (std::size_t o = 0; o < out; ++o) {
        const double* wr = layer.w.data() + o * in;
        double acc = layer.b[o];
        for (std::size_t i = 0; i < in; ++i) acc += wr[i] * ar[i];
        zr[o] = acc;
      }
    }
    Matrix act(rows, out);
    for (std::size_t i = 0; i < z.size(); ++i)
      act.data()[i] = apply_act(layer.act, z.data()[i]);
    if (cache) {
      if (layer.act == Activation::kRelu)
        for (std::size_t i = 0; i < z.size(); ++i)
          cache->min_relu_abs =
              std::min(cache->min_relu_abs, std::abs(z.data()[i]));
      cache->pre.push_back(std::move(z));
      cache->post.push_back(act);
    }
    a = std::move(act);
  }
  return a;
}

MlpGrads::MlpGrads(const Mlp& mlp) {
  for (const Layer& l : mlp.layers) {
    w.emplace_back(l.w.rows(), l.w.cols());
    b.emplace_back(l.b.size(), 0.0);
  }
}

void MlpGrads::zero() {
  for (Matrix& m : w) m.fill(0.0);
  for (auto& v : b) std::fill(v.begin(), v.end(), 0.0);
}

Matrix mlp_backward(const Mlp& mlp, const MlpCache& cache, const Matrix& dy,
                    MlpGrads& grads) {
  if (cache.pre.size() != mlp.layers.size())
    throw std::invalid_argument("mlp_backward: cache mismatch");
  if (dy.rows() != cache.input.rows() ||
      (int)dy.cols() != mlp.out_width())
    throw std::invalid_argument("mlp_backward: upstream gradient shape");

  Matrix delta = dy;
  for (int l = (int)mlp.layers.size() - 1; l >= 0; --l) {
    const Layer& layer = mlp.layers[l];
    const Matrix& z = cache.pre[l];
    const Matrix& a = cache.post[l];
    std::size_t rows = delta.rows(), out = layer.w.rows(),
                in = layer.w.cols();

    // delta <- dy (.) act'(z)
    for (std::size_t i = 0; i < delta.size(); ++i)
      delta.data()[i] *= act_grad(layer.act, z.data()[i], a.data()[i]);

    const Matrix& prev = (l == 0) ? cache.input : cache.post[l - 1];
    Matrix& gw = grads.w[l];
    for (std::size_t o = 0; o < out; ++o) {
      for (std::size_t r = 0; r < rows; ++r) {
        double d = delta(r, o);
        if (d == 0.0) continue;
        const double* pr = prev.data() + r * in;
        double* gwr = gw.data() + o * in;
        for (std::size_t i = 0; i < in; ++i) gwr[i] += d * pr[i];
      }
      double acc = 0.0;
      for (std::size_t r = 0; r < rows; ++r) acc += delta(r, o);
      grads.b[l][o] += acc;
    }

    Matrix dx(rows, in);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* dr = delta.data() + r * out;
      double* xr = dx.data() + r * in;
      for (std::size_t o = 0; o < out; ++o) {
        double d = dr[o];
        if (d == 0.0) continue;
        const double* wr = layer.w.data() + o * in;
        for (std::size_t i = 0; i < in; ++i) xr[i] += d * wr[i];
      }
    }
    delta = std::move(dx);
  }
  return delta;
}

std::vector<double*> param_ptrs(Mlp& mlp) {
  std::vector<double*> out;
  for (Layer& l : mlp.layers) {
    for (std::size_t i = 0; i < l.w.size(); ++i) out.push_back(l.w.data() + i);
    for (double& b : l.b) out.push_back(&b);
  }
  return out;
}

std::vector<double> flatten_grads(const MlpGrads& g) {
  std::vector<double> out;
  for (std::size_t l = 0; l < g.w.size(); ++l) {
    out.insert(out.end(), g.w[l].data(), g.w[l].data() + g.w[l].size());
    out.insert(out.end(), g.b[l].begin(), g.b[l].end());
  }
  return out;
}

// ---------------------------------------------------------------------------

SegLoss seg_loss(const Matrix& logits, const std::vector<ClassId>& labels) {
  std::size_t n = logits.rows(), k = logits.cols();
  if (n == 0) throw std::invalid_argument("seg_loss: empty batch");
  if (labels.size() != n)
    throw std::invalid_argument("seg_loss: label count mismatch");

  SegLoss out;
  out.dlogits = Matrix(n, k);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ClassId y = labels[i];
    if (y < 0 || (std::size_t)y >= k)
      throw std::invalid_argument("seg_loss: label out of range");
    const double* z = logits.data() + i * k;
    double m = z[0];
    for (std::size_t c = 1; c < k; ++c) m = std::max(m, z[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) sum += std::exp(z[c] - m);
    double lse = m + std::log(sum);
    total += lse - z[y];
    double* g = out.dlogits.data() + i * k;
    for (std::size_t c = 0; c < k; ++c) {
      double p = std::exp(z[c] - m) / sum;
      g[c] = (p - (c == (std::size_t)y ? 1.0 : 0.0)) / (double)n;
    }
  }
  out.value = total / (double)n;
  return out;
}

VoteLoss vote_loss(const Matrix& offsets, const std::vector<ClassId>& chosen,
                   const Matrix& positions, const Matrix& centers,
                   const std::vector<std::uint8_t>& mask, int num_classes) {
  std::size_t n = offsets.rows();
  if ((int)offsets.cols() != 3 * num_classes)
    throw std::invalid_argument("vote_loss: offsets width mismatch");
  if (chosen.size() != n || positions.rows() != n || centers.rows() != n ||
      mask.size() != n)
    throw std::invalid_argument("vote_loss: row count mismatch");

  constexpr double kBeta = 1.0;
  VoteLoss out;
  out.doffsets = Matrix(n, 3 * (std::size_t)num_classes);
  std::size_t n_fg = 0;
  for (std::size_t i = 0; i < n; ++i) n_fg += mask[i] ? 1 : 0;
  if (n_fg == 0) return out;

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    ClassId c = chosen[i];
    if (c < 0 || c >= num_classes)
      throw std::invalid_argument("vote_loss: chosen class out of range");
    std::size_t s = 3 * (std::size_t)c;
    for (int a = 0; a < 3; ++a) {
      double r = positions(i, a) + offsets(i, s + a) - centers(i, a);
      total += smooth_l1(r, kBeta);
      out.doffsets(i, s + a) = smooth_l1_grad(r, kBeta) / (double)n_fg;
    }
  }
  out.value = total / (double)n_fg;
  return out;
}

DetTargets make_det_targets(const std::vector<ObjectBox>& boxes,
                            const BevGeom& geom) {
  DetTargets t;
  std::unordered_map<std::int64_t, int> taken;
  for (std::size_t b = 0; b < boxes.size(); ++b) {
    int ix = (int)std::floor((boxes[b].cx - geom.x_min) / geom.cell);
    int iy = (int)std::floor((boxes[b].cy - geom.y_min) / geom.cell);
    ix = std::clamp(ix, 0, geom.nx - 1);
    iy = std::clamp(iy, 0, geom.ny - 1);
    std::int64_t cell = geom.cell_index(ix, iy);
    if (taken.count(cell)) continue;  // lower box index wins
    taken[cell] = (int)b;
    t.cells.push_back(cell);
    t.boxes.push_back(boxes[b]);
  }
  // ascending cell order for determinism
  std::vector<std::size_t> order(t.cells.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return t.cells[a] < t.cells[b];
  });
  DetTargets sorted;
  for (std::size_t i : order) {
    sorted.cells.push_back(t.cells[i]);
    sorted.boxes.push_back(t.boxes[i]);
  }
  return sorted;
}

namespace {

constexpr double kFocalAlpha = 0.25;
constexpr double kFocalGamma = 2.0;
constexpr double kBoxBeta = 1.0;

// Binary focal term and its gradient w.r.t. the logit.
void focal(double x, bool positive, double& loss, double& grad) {
  double p = sigmoid(x);
  double log_p = -softplus(-x);
  double log_1p = -softplus(x);
  if (positive) {
    double q = 1.0 - p;
    double qg = std::pow(q, kFocalGamma);
    loss = -kFocalAlpha * qg * log_p;
    // d/dx[-a (1-p)^g log p] with dp/dx = p(1-p):
    grad = kFocalAlpha * (kFocalGamma * p * qg * log_p - qg * q);
  } else {
    double pg = std::pow(p, kFocalGamma);
    loss = -(1.0 - kFocalAlpha) * pg * log_1p;
    grad = -(1.0 - kFocalAlpha) *
           (kFocalGamma * pg * (1.0 - p) * log_1p - pg * p);
  }
}

}  // namespace

DetLoss det_loss(const Matrix& outputs,
                 const std::vector<std::int64_t>& cell_of_row,
                 const std::vector<double>& multiplicity,
                 const DetTargets& targets, const BevGeom& geom,
                 int num_classes) {
  std::size_t rows = outputs.rows();
  std::size_t width = (std::size_t)num_classes + 8;
  if (outputs.cols() != width)
    throw std::invalid_argument("det_loss: output width mismatch");
  if (cell_of_row.size() != rows || multiplicity.size() != rows)
    throw std::invalid_argument("det_loss: row metadata mismatch");

  std::unordered_map<std::int64_t, int> positive;  // cell -> target index
  for (std::size_t i = 0; i < targets.cells.size(); ++i)
    positive[targets.cells[i]] = (int)i;

  DetLoss out;
  out.n_pos = (int)targets.cells.size();
  out.doutputs = Matrix(rows, width);
  double pos_norm = std::max(1, out.n_pos);

  double focal_total = 0.0, cls_total = 0.0, box_total = 0.0;
  std::size_t pos_seen = 0;
  const std::size_t kCls = 1;
  const std::size_t kBox = (std::size_t)num_classes;

  for (std::size_t r = 0; r < rows; ++r) {
    const double* o = outputs.data() + r * width;
    double* g = out.doutputs.data() + r * width;
    auto it = positive.find(cell_of_row[r]);
    bool is_pos = it != positive.end();
    if (is_pos && multiplicity[r] != 1.0)
      throw std::invalid_argument("det_loss: positive cell must be a real row");

    double l, dl;
    focal(o[0], is_pos, l, dl);
    focal_total += multiplicity[r] * l;
    g[0] += multiplicity[r] * dl / pos_norm;

    if (!is_pos) continue;
    ++pos_seen;
    const ObjectBox& box = targets.boxes[it->second];

    // class cross-entropy over the K-1 foreground scores
    int kc = num_classes - 1;
    double m = o[kCls];
    for (int c = 1; c < kc; ++c) m = std::max(m, o[kCls + c]);
    double sum = 0.0;
    for (int c = 0; c < kc; ++c) sum += std::exp(o[kCls + c] - m);
    double lse = m + std::log(sum);
    cls_total += lse - o[kCls + box.cls];
    for (int c = 0; c < kc; ++c) {
      double p = std::exp(o[kCls + c] - m) / sum;
      g[kCls + c] += (p - (c == box.cls ? 1.0 : 0.0)) / (double)out.n_pos;
    }

    // box residuals against the cell center
    int ix = (int)(cell_of_row[r] % geom.nx);
    int iy = (int)(cell_of_row[r] / geom.nx);
    double tgt[8] = {box.cx - geom.cx(ix), box.cy - geom.cy(iy), box.cz,
                     std::log(box.l),      std::log(box.w),      std::log(box.h),
                     std::sin(box.yaw),    std::cos(box.yaw)};
    for (int a = 0; a < 8; ++a) {
      double rsd = o[kBox + a] - tgt[a];
      box_total += smooth_l1(rsd, kBoxBeta);
      g[kBox + a] += smooth_l1_grad(rsd, kBoxBeta) / (double)out.n_pos;
    }
  }
  if (pos_seen != targets.cells.size())
    throw std::invalid_argument("det_loss: positive cell missing from rows");

  out.value = focal_total / pos_norm;
  if (out.n_pos > 0)
    out.value += (cls_total + box_total) / (double)out.n_pos;
  return out;
}

LossReport total_loss(double l_det, double l_seg, double l_vote,
                      double lambda) {
  LossReport r;
  r.l_det = l_det;
  r.l_seg = l_seg;
  r.l_vote = l_vote;
  r.l_total = l_det + lambda * (l_seg + l_vote);
  return r;
}

// ---------------------------------------------------------------------------

MlpMomentum::MlpMomentum(const Mlp& mlp) {
  for (const Layer& l : mlp.layers) {
    w.emplace_back(l.w.rows(), l.w.cols());
    b.emplace_back(l.b.size(), 0.0);
  }
}

void sgd_step(Mlp& mlp, const MlpGrads& grads, MlpMomentum& mom, double lr,
              double momentum) {
  if (grads.w.size() != mlp.layers.size() || mom.w.size() != mlp.layers.size())
    throw std::invalid_argument("sgd_step: shape mismatch");
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    Layer& layer = mlp.layers[l];
    if (grads.w[l].rows() != layer.w.rows() ||
        grads.w[l].cols() != layer.w.cols())
      throw std::invalid_argument("sgd_step: shape mismatch");
    for (std::size_t i = 0; i < layer.w.size(); ++i) {
      double& v = mom.w[l].data()[i];
      v = momentum * v + grads.w[l].data()[i];
      layer.w.data()[i] -= lr * v;
    }
    for (std::size_t i = 0; i < layer.b.size(); ++i) {
      double& v = mom.b[l][i];
      v = momentum * v + grads.b[l][i];
      layer.b[i] -= lr * v;
    }
  }
}

GradCheckResult grad_check(const std::function<double()>& f,
                           std::span<double* const> params,
                           std::span<const double> analytic, double h,
                           const std::function<bool()>& at_kink) {
  if (params.size() != analytic.size())
    throw std::invalid_argument("grad_check: analytic size mismatch");
  GradCheckResult res;
  for (std::size_t i = 0; i < params.size(); ++i) {
    double* p = params[i];
    double x0 = *p;
    *p = x0 + h;
    double f1 = f();
    bool kink = at_kink && at_kink();
    *p = x0 - h;
    double f2 = f();
    kink = kink || (at_kink && at_kink());
    *p = x0;
    if (kink) {
      ++res.excluded;
      continue;
    }
    double fd = (f1 - f2) / (2.0 * h);
    double a = analytic[i];
    double rel = std::abs(fd - a) / std::max({1.0, std::abs(fd), std::abs(a)});
    res.max_rel_err = std::max(res.max_rel_err, rel);
    ++res.checked;
  }
  return res;
}

}  // namespace sd4r
