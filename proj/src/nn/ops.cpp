#include "nn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "common.hpp"

namespace planformer::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<RowMat>;
using CMapM = Eigen::Map<const RowMat>;
using MapV = Eigen::Map<Eigen::VectorXd>;
using CMapV = Eigen::Map<const Eigen::VectorXd>;

CMapM as_matrix(const Buffer& v, int rows, int cols) { return CMapM(v.data(), rows, cols); }
MapM as_matrix(Buffer& v, int rows, int cols) { return MapM(v.data(), rows, cols); }

void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorCode::kDimensionMismatch, what);
}

void require_2d(const Tensor& t, const char* op) {
  require(t.shape().size() == 2, std::string(op) + ": expected a 2-D tensor, got " + shape_string(t.shape()));
}

bool tracked(const Node& n, std::size_t i) { return n.parents[i]->requires_grad; }
Buffer& grad_of(Node& n, std::size_t i) { return n.parents[i]->grad_buffer(); }
const Buffer& value_of(const Node& n, std::size_t i) { return n.parents[i]->value; }

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  const int n = a.dim(0), k = a.dim(1), m = b.dim(1);
  require(b.dim(0) == k, "matmul: inner dimensions differ: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  Buffer out(static_cast<std::size_t>(n) * m);
  as_matrix(out, n, m).noalias() = CMapM(a.data().data(), n, k) * CMapM(b.data().data(), k, m);
  return make_result({n, m}, std::move(out), {a, b}, [n, k, m](Node& self) {
    const auto g = as_matrix(self.grad, n, m);
    if (tracked(self, 0)) as_matrix(grad_of(self, 0), n, k).noalias() += g * as_matrix(value_of(self, 1), k, m).transpose();
    if (tracked(self, 1)) as_matrix(grad_of(self, 1), k, m).noalias() += as_matrix(value_of(self, 0), n, k).transpose() * g;
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_2d(x, "linear");
  require_2d(weight, "linear");
  const int n = x.dim(0), in = x.dim(1), out = weight.dim(1);
  require(weight.dim(0) == in, "linear: input width " + std::to_string(in) + " does not match weight " +
                                   shape_string(weight.shape()));
  require(bias.size() == static_cast<std::size_t>(out), "linear: bias size does not match output width");
  Buffer y(static_cast<std::size_t>(n) * out);
  auto ym = as_matrix(y, n, out);
  ym.noalias() = CMapM(x.data().data(), n, in) * CMapM(weight.data().data(), in, out);
  ym.rowwise() += CMapV(bias.data().data(), out).transpose();
  return make_result({n, out}, std::move(y), {x, weight, bias}, [n, in, out](Node& self) {
    const auto g = as_matrix(self.grad, n, out);
    if (tracked(self, 0)) {
      as_matrix(grad_of(self, 0), n, in).noalias() += g * as_matrix(value_of(self, 1), in, out).transpose();
    }
    if (tracked(self, 1)) {
      as_matrix(grad_of(self, 1), in, out).noalias() += as_matrix(value_of(self, 0), n, in).transpose() * g;
    }
    if (tracked(self, 2)) MapV(grad_of(self, 2).data(), out) += g.colwise().sum().transpose();
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "add: shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  Buffer out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (!tracked(self, p)) continue;
      auto& g = grad_of(self, p);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "mul: shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  Buffer out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (!tracked(self, p)) continue;
      auto& g = grad_of(self, p);
      const auto& other = value_of(self, 1 - p);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * other[i];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  Buffer out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * s;
  return make_result(a.shape(), std::move(out), {a}, [s](Node& self) {
    auto& g = grad_of(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * s;
  });
}

Tensor relu(const Tensor& x) {
  Buffer out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] > 0.0 ? x.data()[i] : 0.0;
  return make_result(x.shape(), std::move(out), {x}, [](Node& self) {
    auto& g = grad_of(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (self.value[i] > 0.0) g[i] += self.grad[i];
    }
  });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (const double v : x.data()) s += v;
  return make_result({1}, {s}, {x}, [](Node& self) {
    auto& g = grad_of(self, 0);
    for (double& v : g) v += self.grad[0];
  });
}

Tensor reshape(const Tensor& x, const Shape& shape) {
  require(numel(shape) == x.size(), "reshape: " + shape_string(x.shape()) + " to " + shape_string(shape));
  Buffer out(x.data().begin(), x.data().end());
  return make_result(shape, std::move(out), {x}, [](Node& self) {
    auto& g = grad_of(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor gather_rows(const Tensor& x, const std::vector<int>& rows) {
  require_2d(x, "gather_rows");
  const int n = x.dim(0), d = x.dim(1);
  const int m = static_cast<int>(rows.size());
  Buffer out(static_cast<std::size_t>(m) * d);
  for (int r = 0; r < m; ++r) {
    require(rows[static_cast<std::size_t>(r)] >= 0 && rows[static_cast<std::size_t>(r)] < n, "gather_rows: index out of range");
    std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(rows[static_cast<std::size_t>(r)]) * d, d,
                out.begin() + static_cast<std::ptrdiff_t>(r) * d);
  }
  return make_result({m, d}, std::move(out), {x}, [rows, d](Node& self) {
    auto& g = grad_of(self, 0);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const std::size_t src = r * static_cast<std::size_t>(d);
      const std::size_t dst = static_cast<std::size_t>(rows[r]) * static_cast<std::size_t>(d);
      for (int j = 0; j < d; ++j) g[dst + static_cast<std::size_t>(j)] += self.grad[src + static_cast<std::size_t>(j)];
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require_2d(x, "layer_norm");
  const int n = x.dim(0), d = x.dim(1);
  require(gamma.size() == static_cast<std::size_t>(d) && beta.size() == static_cast<std::size_t>(d),
          "layer_norm: gamma/beta must have the row width");
  auto xhat = std::make_shared<Buffer>(x.size());
  auto inv_std = std::make_shared<Buffer>(static_cast<std::size_t>(n));
  Buffer out(x.size());
  const auto xv = x.data();
  for (int r = 0; r < n; ++r) {
    const std::size_t o = static_cast<std::size_t>(r) * d;
    double mean = 0.0;
    for (int j = 0; j < d; ++j) mean += xv[o + j];
    mean /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) var += (xv[o + j] - mean) * (xv[o + j] - mean);
    var /= d;
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[static_cast<std::size_t>(r)] = is;
    for (int j = 0; j < d; ++j) {
      const double h = (xv[o + j] - mean) * is;
      (*xhat)[o + j] = h;
      out[o + j] = gamma.data()[static_cast<std::size_t>(j)] * h + beta.data()[static_cast<std::size_t>(j)];
    }
  }
  return make_result({n, d}, std::move(out), {x, gamma, beta}, [n, d, xhat, inv_std](Node& self) {
    const auto& gam = value_of(self, 1);
    if (tracked(self, 1) || tracked(self, 2)) {
      auto* gg = tracked(self, 1) ? &grad_of(self, 1) : nullptr;
      auto* gb = tracked(self, 2) ? &grad_of(self, 2) : nullptr;
      for (int r = 0; r < n; ++r) {
        for (int j = 0; j < d; ++j) {
          const std::size_t i = static_cast<std::size_t>(r) * d + j;
          if (gg) (*gg)[static_cast<std::size_t>(j)] += self.grad[i] * (*xhat)[i];
          if (gb) (*gb)[static_cast<std::size_t>(j)] += self.grad[i];
        }
      }
    }
    if (!tracked(self, 0)) return;
    auto& gx = grad_of(self, 0);
    for (int r = 0; r < n; ++r) {
      const std::size_t o = static_cast<std::size_t>(r) * d;
      double mean_g = 0.0, mean_gh = 0.0;
      for (int j = 0; j < d; ++j) {
        const double gh = self.grad[o + j] * gam[static_cast<std::size_t>(j)];
        mean_g += gh;
        mean_gh += gh * (*xhat)[o + j];
      }
      mean_g /= d;
      mean_gh /= d;
      const double is = (*inv_std)[static_cast<std::size_t>(r)];
      for (int j = 0; j < d; ++j) {
        const double gh = self.grad[o + j] * gam[static_cast<std::size_t>(j)];
        gx[o + j] += is * (gh - mean_g - (*xhat)[o + j] * mean_gh);
      }
    }
  });
}

Tensor softmax(const Tensor& x) {
  require(!x.shape().empty(), "softmax: scalar input");
  const int d = x.shape().back();
  const std::size_t rows = x.size() / static_cast<std::size_t>(d);
  Buffer out(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t o = r * d;
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < d; ++j) mx = std::max(mx, x.data()[o + j]);
    double s = 0.0;
    for (int j = 0; j < d; ++j) s += out[o + j] = std::exp(x.data()[o + j] - mx);
    for (int j = 0; j < d; ++j) out[o + j] /= s;
  }
  return make_result(x.shape(), std::move(out), {x}, [rows, d](Node& self) {
    auto& g = grad_of(self, 0);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t o = r * d;
      double dot = 0.0;
      for (int j = 0; j < d; ++j) dot += self.grad[o + j] * self.value[o + j];
      for (int j = 0; j < d; ++j) g[o + j] += self.value[o + j] * (self.grad[o + j] - dot);
    }
  });
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  require(pred.shape() == target.shape(),
          "mse_loss: shape mismatch " + shape_string(pred.shape()) + " vs " + shape_string(target.shape()));
  require(pred.size() > 0, "mse_loss: empty input");
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred.data()[i] - target.data()[i];
    s += e * e;
  }
  return make_result({1}, {s * inv_n}, {pred, target}, [inv_n](Node& self) {
    const auto& p = value_of(self, 0);
    const auto& t = value_of(self, 1);
    const double g = self.grad[0] * 2.0 * inv_n;
    if (tracked(self, 0)) {
      auto& gp = grad_of(self, 0);
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g * (p[i] - t[i]);
    }
    if (tracked(self, 1)) {
      auto& gt = grad_of(self, 1);
      for (std::size_t i = 0; i < gt.size(); ++i) gt[i] -= g * (p[i] - t[i]);
    }
  });
}

// ---------------------------------------------------------------------------
// Attention

AttentionLayout AttentionLayout::single(int n_query, int n_key) {
  AttentionLayout l;
  l.query.push_back({0, n_query});
  l.key.push_back({0, n_key});
  return l;
}

AttentionLayout AttentionLayout::self(const std::vector<SeqSpan>& spans, std::vector<std::uint8_t> key_masked) {
  AttentionLayout l;
  l.query = spans;
  l.key = spans;
  l.key_masked = std::move(key_masked);
  return l;
}

namespace {

struct AttnGeometry {
  int tq, tk, dk, dv, n_head;
  std::vector<std::size_t> prob_offset;  // per (sequence, head)
  std::size_t prob_total = 0;
};

AttnGeometry attention_geometry(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionLayout& layout,
                                int n_head) {
  require_2d(q, "attention");
  require_2d(k, "attention");
  require_2d(v, "attention");
  require(n_head >= 1, "attention: n_head must be >= 1");
  require(q.dim(1) == k.dim(1), "attention: Q and K must share the key width");
  require(k.dim(0) == v.dim(0), "attention: K and V must have the same number of rows");
  require(q.dim(1) % n_head == 0 && v.dim(1) % n_head == 0, "attention: widths must divide by n_head");
  require(layout.query.size() == layout.key.size(), "attention: query/key span counts differ");
  require(layout.key_masked.empty() || layout.key_masked.size() == static_cast<std::size_t>(k.dim(0)),
          "attention: key mask must have one entry per key row");
  AttnGeometry g{q.dim(0), k.dim(0), q.dim(1) / n_head, v.dim(1) / n_head, n_head, {}, 0};
  for (std::size_t s = 0; s < layout.query.size(); ++s) {
    const auto& qs = layout.query[s];
    const auto& ks = layout.key[s];
    require(qs.offset >= 0 && qs.length >= 0 && qs.offset + qs.length <= g.tq, "attention: query span out of range");
    require(ks.offset >= 0 && ks.length >= 0 && ks.offset + ks.length <= g.tk, "attention: key span out of range");
    for (int h = 0; h < n_head; ++h) {
      g.prob_offset.push_back(g.prob_total);
      g.prob_total += static_cast<std::size_t>(qs.length) * static_cast<std::size_t>(ks.length);
    }
  }
  return g;
}

// Row-wise masked softmax of scaled scores; writes probabilities for one (sequence, head).
void attention_probs(const double* q, const double* k, int q_stride, int k_stride, int lq, int lk, int dk,
                     const std::uint8_t* masked, double* probs) {
  const double inv = 1.0 / std::sqrt(static_cast<double>(dk));
  for (int i = 0; i < lq; ++i) {
    double* row = probs + static_cast<std::ptrdiff_t>(i) * lk;
    const double* qi = q + static_cast<std::ptrdiff_t>(i) * q_stride;
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < lk; ++j) {
      if (masked && masked[j]) continue;
      const double* kj = k + static_cast<std::ptrdiff_t>(j) * k_stride;
      double s = 0.0;
      for (int c = 0; c < dk; ++c) s += qi[c] * kj[c];
      row[j] = s * inv;
      mx = std::max(mx, row[j]);
    }
    if (mx == -std::numeric_limits<double>::infinity()) {
      std::fill(row, row + lk, 0.0);
      continue;
    }
    double total = 0.0;
    for (int j = 0; j < lk; ++j) {
      if (masked && masked[j]) {
        row[j] = 0.0;
      } else {
        row[j] = std::exp(row[j] - mx);
        total += row[j];
      }
    }
    for (int j = 0; j < lk; ++j) row[j] /= total;
  }
}

}  // namespace

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionLayout& layout, int n_head) {
  auto geo = attention_geometry(q, k, v, layout, n_head);
  auto probs = std::make_shared<Buffer>(geo.prob_total);
  const int qw = q.dim(1), vw = v.dim(1);
  Buffer out(static_cast<std::size_t>(geo.tq) * vw, 0.0);
  const std::uint8_t* mask = layout.key_masked.empty() ? nullptr : layout.key_masked.data();

  for (std::size_t s = 0; s < layout.query.size(); ++s) {
    const auto qs = layout.query[s];
    const auto ks = layout.key[s];
    for (int h = 0; h < n_head; ++h) {
      double* p = probs->data() + geo.prob_offset[s * n_head + h];
      attention_probs(q.data().data() + static_cast<std::ptrdiff_t>(qs.offset) * qw + h * geo.dk,
                      k.data().data() + static_cast<std::ptrdiff_t>(ks.offset) * qw + h * geo.dk, qw, qw, qs.length,
                      ks.length, geo.dk, mask ? mask + ks.offset : nullptr, p);
      for (int i = 0; i < qs.length; ++i) {
        double* oi = out.data() + static_cast<std::ptrdiff_t>(qs.offset + i) * vw + h * geo.dv;
        for (int j = 0; j < ks.length; ++j) {
          const double w = p[static_cast<std::ptrdiff_t>(i) * ks.length + j];
          if (w == 0.0) continue;
          const double* vj = v.data().data() + static_cast<std::ptrdiff_t>(ks.offset + j) * vw + h * geo.dv;
          for (int c = 0; c < geo.dv; ++c) oi[c] += w * vj[c];
        }
      }
    }
  }

  return make_result({geo.tq, vw}, std::move(out), {q, k, v}, [layout, geo, probs, qw, vw](Node& self) {
    const auto& qv = value_of(self, 0);
    const auto& kv = value_of(self, 1);
    const auto& vv = value_of(self, 2);
    Buffer* gq = tracked(self, 0) ? &grad_of(self, 0) : nullptr;
    Buffer* gk = tracked(self, 1) ? &grad_of(self, 1) : nullptr;
    Buffer* gv = tracked(self, 2) ? &grad_of(self, 2) : nullptr;
    const double inv = 1.0 / std::sqrt(static_cast<double>(geo.dk));
    Buffer dp;
    for (std::size_t s = 0; s < layout.query.size(); ++s) {
      const auto qs = layout.query[s];
      const auto ks = layout.key[s];
      for (int h = 0; h < geo.n_head; ++h) {
        const double* p = probs->data() + geo.prob_offset[s * geo.n_head + h];
        dp.assign(static_cast<std::size_t>(ks.length), 0.0);
        for (int i = 0; i < qs.length; ++i) {
          const double* go = self.grad.data() + static_cast<std::ptrdiff_t>(qs.offset + i) * vw + h * geo.dv;
          const double* pi = p + static_cast<std::ptrdiff_t>(i) * ks.length;
          double row_dot = 0.0;
          for (int j = 0; j < ks.length; ++j) {
            const std::ptrdiff_t vrow = static_cast<std::ptrdiff_t>(ks.offset + j) * vw + h * geo.dv;
            double d = 0.0;
            for (int c = 0; c < geo.dv; ++c) d += go[c] * vv[static_cast<std::size_t>(vrow + c)];
            dp[static_cast<std::size_t>(j)] = d;
            row_dot += pi[j] * d;
            if (gv && pi[j] != 0.0) {
              for (int c = 0; c < geo.dv; ++c) (*gv)[static_cast<std::size_t>(vrow + c)] += pi[j] * go[c];
            }
          }
          if (!gq && !gk) continue;
          const std::ptrdiff_t qrow = static_cast<std::ptrdiff_t>(qs.offset + i) * qw + h * geo.dk;
          for (int j = 0; j < ks.length; ++j) {
            if (pi[j] == 0.0) continue;
            const double ds = pi[j] * (dp[static_cast<std::size_t>(j)] - row_dot) * inv;
            const std::ptrdiff_t krow = static_cast<std::ptrdiff_t>(ks.offset + j) * qw + h * geo.dk;
            for (int c = 0; c < geo.dk; ++c) {
              if (gq) (*gq)[static_cast<std::size_t>(qrow + c)] += ds * kv[static_cast<std::size_t>(krow + c)];
              if (gk) (*gk)[static_cast<std::size_t>(krow + c)] += ds * qv[static_cast<std::size_t>(qrow + c)];
            }
          }
        }
      }
    }
  });
}

std::vector<double> attention_weights(const Tensor& q, const Tensor& k, const AttentionLayout& layout, int n_head,
                                      int head, int sequence) {
  require(sequence >= 0 && static_cast<std::size_t>(sequence) < layout.query.size(), "attention_weights: bad sequence");
  require(head >= 0 && head < n_head, "attention_weights: bad head");
  const int qw = q.dim(1);
  const int dk = qw / n_head;
  const auto qs = layout.query[static_cast<std::size_t>(sequence)];
  const auto ks = layout.key[static_cast<std::size_t>(sequence)];
  std::vector<double> p(static_cast<std::size_t>(qs.length) * ks.length);
  attention_probs(q.data().data() + static_cast<std::ptrdiff_t>(qs.offset) * qw + head * dk,
                  k.data().data() + static_cast<std::ptrdiff_t>(ks.offset) * qw + head * dk, qw, qw, qs.length,
                  ks.length, dk, layout.key_masked.empty() ? nullptr : layout.key_masked.data() + ks.offset,
                  p.data());
  return p;
}

Tensor multi_head_attention(const Tensor& x_q, const Tensor& x_kv, const MultiHeadParams& p, int n_head,
                            int head_dim, const AttentionLayout& layout) {
  require(p.wq.dim(1) == n_head * head_dim && p.wk.dim(1) == n_head * head_dim && p.wv.dim(1) == n_head * head_dim,
          "multi_head_attention: projections must be n_head * head_dim wide");
  require(p.wo.dim(0) == n_head * head_dim, "multi_head_attention: output projection input width mismatch");
  const Tensor q = linear(x_q, p.wq, p.bq);
  const Tensor k = linear(x_kv, p.wk, p.bk);
  const Tensor v = linear(x_kv, p.wv, p.bv);
  return linear(attention(q, k, v, layout, n_head), p.wo, p.bo);
}

// ---------------------------------------------------------------------------
// Convolution (im2col over chunks of output positions, GEMM per chunk)

namespace {

struct ConvGeometry {
  int n, c, d, h, w;       // input
  int co, kd, kh, kw;      // kernel
  int pd, ph, pw;          // padding
  int od, oh, ow;          // output
  int k_rows() const { return c * kd * kh * kw; }
  std::size_t out_spatial() const { return static_cast<std::size_t>(od) * oh * ow; }
  std::size_t in_spatial() const { return static_cast<std::size_t>(d) * h * w; }
};

ConvGeometry conv_geometry(const Tensor& input, const Tensor& kernel, const Tensor& bias, int padding) {
  const auto& is = input.shape();
  const auto& ks = kernel.shape();
  require(is.size() == 4 || is.size() == 5, "conv: input must be [N,C,H,W] or [N,C,D,H,W], got " + shape_string(is));
  require(ks.size() == is.size(), "conv: kernel rank " + shape_string(ks) + " does not match input " + shape_string(is));
  require(ks[1] == is[1], "conv: kernel input channels " + std::to_string(ks[1]) + " != input channels " +
                              std::to_string(is[1]));
  require(bias.size() == static_cast<std::size_t>(ks[0]), "conv: bias size must equal output channels");
  require(padding >= 0, "conv: negative padding");
  ConvGeometry g{};
  const bool three = is.size() == 5;
  g.n = is[0];
  g.c = is[1];
  g.d = three ? is[2] : 1;
  g.h = is[three ? 3 : 2];
  g.w = is[three ? 4 : 3];
  g.co = ks[0];
  g.kd = three ? ks[2] : 1;
  g.kh = ks[three ? 3 : 2];
  g.kw = ks[three ? 4 : 3];
  g.pd = three ? padding : 0;
  g.ph = g.pw = padding;
  g.od = g.d + 2 * g.pd - g.kd + 1;
  g.oh = g.h + 2 * g.ph - g.kh + 1;
  g.ow = g.w + 2 * g.pw - g.kw + 1;
  require(g.od > 0 && g.oh > 0 && g.ow > 0, "conv: kernel larger than padded input");
  return g;
}

constexpr std::size_t kConvChunk = 4096;

// Fills col[K, p1 - p0] for flat output positions [p0, p1) over (n, od, oh, ow).
void im2col(const ConvGeometry& g, const double* in, std::size_t p0, std::size_t p1, Buffer& col) {
  const std::size_t cols = p1 - p0;
  const std::size_t sp = g.out_spatial();
  col.assign(static_cast<std::size_t>(g.k_rows()) * cols, 0.0);
  for (std::size_t p = p0; p < p1; ++p) {
    const std::size_t n = p / sp;
    std::size_t rem = p % sp;
    const int x = static_cast<int>(rem % static_cast<std::size_t>(g.ow));
    rem /= static_cast<std::size_t>(g.ow);
    const int y = static_cast<int>(rem % static_cast<std::size_t>(g.oh));
    const int z = static_cast<int>(rem / static_cast<std::size_t>(g.oh));
    std::size_t row = 0;
    for (int c = 0; c < g.c; ++c) {
      const double* plane = in + (n * g.c + c) * g.in_spatial();
      for (int a = 0; a < g.kd; ++a) {
        const int iz = z + a - g.pd;
        for (int b = 0; b < g.kh; ++b) {
          const int iy = y + b - g.ph;
          for (int e = 0; e < g.kw; ++e, ++row) {
            const int ix = x + e - g.pw;
            if (iz < 0 || iz >= g.d || iy < 0 || iy >= g.h || ix < 0 || ix >= g.w) continue;
            col[row * cols + (p - p0)] = plane[(static_cast<std::size_t>(iz) * g.h + iy) * g.w + ix];
          }
        }
      }
    }
  }
}

void col2im_add(const ConvGeometry& g, const Buffer& col, std::size_t p0, std::size_t p1, double* in_grad) {
  const std::size_t cols = p1 - p0;
  const std::size_t sp = g.out_spatial();
  for (std::size_t p = p0; p < p1; ++p) {
    const std::size_t n = p / sp;
    std::size_t rem = p % sp;
    const int x = static_cast<int>(rem % static_cast<std::size_t>(g.ow));
    rem /= static_cast<std::size_t>(g.ow);
    const int y = static_cast<int>(rem % static_cast<std::size_t>(g.oh));
    const int z = static_cast<int>(rem / static_cast<std::size_t>(g.oh));
    std::size_t row = 0;
    for (int c = 0; c < g.c; ++c) {
      double* plane = in_grad + (n * g.c + c) * g.in_spatial();
      for (int a = 0; a < g.kd; ++a) {
        const int iz = z + a - g.pd;
        for (int b = 0; b < g.kh; ++b) {
          const int iy = y + b - g.ph;
          for (int e = 0; e < g.kw; ++e, ++row) {
            const int ix = x + e - g.pw;
            if (iz < 0 || iz >= g.d || iy < 0 || iy >= g.h || ix < 0 || ix >= g.w) continue;
            plane[(static_cast<std::size_t>(iz) * g.h + iy) * g.w + ix] += col[row * cols + (p - p0)];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv(const Tensor& input, const Tensor& kernel, const Tensor& bias, int padding) {
  const ConvGeometry g = conv_geometry(input, kernel, bias, padding);
  const std::size_t sp = g.out_spatial();
  const std::size_t total = static_cast<std::size_t>(g.n) * sp;
  const int kr = g.k_rows();
  Buffer out(static_cast<std::size_t>(g.n) * g.co * sp);
  Buffer col, chunk;
  const CMapM wm(kernel.data().data(), g.co, kr);
  for (std::size_t p0 = 0; p0 < total; p0 += kConvChunk) {
    const std::size_t p1 = std::min(total, p0 + kConvChunk);
    const auto cols = static_cast<Eigen::Index>(p1 - p0);
    im2col(g, input.data().data(), p0, p1, col);
    chunk.resize(static_cast<std::size_t>(g.co) * (p1 - p0));
    MapM(chunk.data(), g.co, cols).noalias() = wm * CMapM(col.data(), kr, cols);
    for (int o = 0; o < g.co; ++o) {
      const double b = bias.data()[static_cast<std::size_t>(o)];
      for (std::size_t p = p0; p < p1; ++p) {
        out[((p / sp) * g.co + o) * sp + p % sp] = chunk[static_cast<std::size_t>(o) * (p1 - p0) + (p - p0)] + b;
      }
    }
  }
  Shape shape = input.shape();
  shape[1] = g.co;
  if (shape.size() == 5) {
    shape[2] = g.od;
    shape[3] = g.oh;
    shape[4] = g.ow;
  } else {
    shape[2] = g.oh;
    shape[3] = g.ow;
  }
  return make_result(shape, std::move(out), {input, kernel, bias}, [g](Node& self) {
    const std::size_t sp = g.out_spatial();
    const std::size_t total = static_cast<std::size_t>(g.n) * sp;
    const int kr = g.k_rows();
    const auto& in = value_of(self, 0);
    const auto& kv = value_of(self, 1);
    double* gin = tracked(self, 0) ? grad_of(self, 0).data() : nullptr;
    double* gw = tracked(self, 1) ? grad_of(self, 1).data() : nullptr;
    double* gb = tracked(self, 2) ? grad_of(self, 2).data() : nullptr;
    Buffer col, chunk, dcol;
    for (std::size_t p0 = 0; p0 < total; p0 += kConvChunk) {
      const std::size_t p1 = std::min(total, p0 + kConvChunk);
      const auto cols = static_cast<Eigen::Index>(p1 - p0);
      chunk.resize(static_cast<std::size_t>(g.co) * (p1 - p0));
      for (int o = 0; o < g.co; ++o) {
        double bsum = 0.0;
        for (std::size_t p = p0; p < p1; ++p) {
          const double v = self.grad[((p / sp) * g.co + o) * sp + p % sp];
          chunk[static_cast<std::size_t>(o) * (p1 - p0) + (p - p0)] = v;
          bsum += v;
        }
        if (gb) gb[o] += bsum;
      }
      const CMapM gout(chunk.data(), g.co, cols);
      if (gw) {
        im2col(g, in.data(), p0, p1, col);
        MapM(gw, g.co, kr).noalias() += gout * CMapM(col.data(), kr, cols).transpose();
      }
      if (gin) {
        dcol.resize(static_cast<std::size_t>(kr) * (p1 - p0));
        MapM(dcol.data(), kr, cols).noalias() = CMapM(kv.data(), g.co, kr).transpose() * gout;
        col2im_add(g, dcol, p0, p1, gin);
      }
    }
  });
}

Tensor mask_channels(const Tensor& x, const std::vector<double>& mask) {
  require(x.shape().size() >= 3, "mask_channels: expected [N,C,...]");
  const std::size_t n = static_cast<std::size_t>(x.dim(0));
  const std::size_t c = static_cast<std::size_t>(x.dim(1));
  const std::size_t sp = x.size() / (n * c);
  require(mask.size() == n * sp, "mask_channels: mask must be [N,1,...]");
  Buffer out(x.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t s = 0; s < sp; ++s) out[(i * c + ch) * sp + s] = x.data()[(i * c + ch) * sp + s] * mask[i * sp + s];
    }
  }
  return make_result(x.shape(), std::move(out), {x}, [mask, n, c, sp](Node& self) {
    auto& g = grad_of(self, 0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t s = 0; s < sp; ++s) g[(i * c + ch) * sp + s] += self.grad[(i * c + ch) * sp + s] * mask[i * sp + s];
      }
    }
  });
}

}  // namespace planformer::nn
