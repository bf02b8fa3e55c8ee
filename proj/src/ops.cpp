#include "humor/ops.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <utility>

#include "humor/kernels.hpp"

namespace humor::numcore {

namespace {

using detail::Node;

constexpr double kMaskBias = -1e9;

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

void require_rank2(const Tensor& t, const char* what) {
  require(t.rank() == 2, std::string(what) + " must be rank 2, got shape " +
                             shape_string(t.shape()));
}

// Wires requires_grad propagation: the output records parents and a
// backprop step only when tracking is on and some input is tracked.
Tensor make_op(std::vector<int> shape, std::vector<double> values,
               std::vector<std::shared_ptr<Node>> parents,
               std::function<void(Node&)> backprop) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  bool any_tracked = false;
  for (const auto& p : parents) any_tracked = any_tracked || p->requires_grad;
  if (autograd_enabled() && any_tracked) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backprop = std::move(backprop);
  }
  return Tensor::wrap(std::move(node));
}

double* grad_of(Node& parent) {
  if (!parent.requires_grad) return nullptr;
  parent.ensure_grad();
  return parent.grad.data();
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul lhs");
  require_rank2(b, "matmul rhs");
  require(a.cols() == b.rows(),
          "matmul shape mismatch: " + shape_string(a.shape()) + " x " +
              shape_string(b.shape()));
  const int m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(static_cast<std::size_t>(m) * n);
  kernels::matmul(a.data(), b.data(), out.data(), m, k, n);
  return make_op(
      {m, n}, std::move(out), {a.node_ptr(), b.node_ptr()},
      [m, k, n](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (double* ga = grad_of(pa)) {
          kernels::matmul_bt(self.grad.data(), pb.values.data(), ga, m, n, k,
                             /*accumulate=*/true);
        }
        if (double* gb = grad_of(pb)) {
          kernels::matmul_at(pa.values.data(), self.grad.data(), gb, k, m, n,
                             /*accumulate=*/true);
        }
      });
}

namespace {

Tensor elementwise_binary(const Tensor& a, const Tensor& b, const char* name,
                          double (*fwd)(double, double),
                          void (*bwd)(Node& self)) {
  require(a.shape() == b.shape(),
          std::string(name) + " shape mismatch: " + shape_string(a.shape()) +
              " vs " + shape_string(b.shape()));
  std::vector<double> out(a.values().begin(), a.values().end());
  const double* bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(out[i], bv[i]);
  return make_op(a.shape(), std::move(out), {a.node_ptr(), b.node_ptr()}, bwd);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return elementwise_binary(
      a, b, "add", [](double x, double y) { return x + y; },
      [](Node& self) {
        for (int side = 0; side < 2; ++side) {
          if (double* g = grad_of(*self.parents[static_cast<std::size_t>(side)])) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
          }
        }
      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return elementwise_binary(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](Node& self) {
        if (double* g = grad_of(*self.parents[0])) {
          for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
        }
        if (double* g = grad_of(*self.parents[1])) {
          for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
        }
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return elementwise_binary(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (double* g = grad_of(pa)) {
          for (std::size_t i = 0; i < self.grad.size(); ++i)
            g[i] += self.grad[i] * pb.values[i];
        }
        if (double* g = grad_of(pb)) {
          for (std::size_t i = 0; i < self.grad.size(); ++i)
            g[i] += self.grad[i] * pa.values[i];
        }
      });
}

Tensor add_broadcast_row(const Tensor& a, const Tensor& row) {
  require_rank2(a, "add_broadcast_row lhs");
  const std::int64_t n = row.size();
  require(row.rank() == 1 || (row.rank() == 2 && row.rows() == 1),
          "add_broadcast_row rhs must be a row vector, got shape " +
              shape_string(row.shape()));
  require(a.cols() == n,
          "add_broadcast_row shape mismatch: " + shape_string(a.shape()) +
              " + " + shape_string(row.shape()));
  const int m = a.rows(), cols = a.cols();
  std::vector<double> out(a.values().begin(), a.values().end());
  const double* rv = row.data();
  for (int i = 0; i < m; ++i) {
    double* oi = out.data() + static_cast<std::size_t>(i) * cols;
    for (int j = 0; j < cols; ++j) oi[j] += rv[j];
  }
  return make_op({m, cols}, std::move(out), {a.node_ptr(), row.node_ptr()},
                 [m, cols](Node& self) {
                   if (double* g = grad_of(*self.parents[0])) {
                     for (std::size_t i = 0; i < self.grad.size(); ++i)
                       g[i] += self.grad[i];
                   }
                   if (double* g = grad_of(*self.parents[1])) {
                     for (int i = 0; i < m; ++i) {
                       const double* gr =
                           self.grad.data() + static_cast<std::size_t>(i) * cols;
                       for (int j = 0; j < cols; ++j) g[j] += gr[j];
                     }
                   }
                 });
}

Tensor scalar_affine(const Tensor& x, double scale, double shift) {
  std::vector<double> out(x.values().begin(), x.values().end());
  for (double& v : out) v = scale * v + shift;
  return make_op(x.shape(), std::move(out), {x.node_ptr()},
                 [scale](Node& self) {
                   if (double* g = grad_of(*self.parents[0])) {
                     for (std::size_t i = 0; i < self.grad.size(); ++i)
                       g[i] += scale * self.grad[i];
                   }
                 });
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.values().begin(), x.values().end());
  for (double& v : out) v = v > 0.0 ? v : 0.0;
  return make_op(x.shape(), std::move(out), {x.node_ptr()}, [](Node& self) {
    Node& p = *self.parents[0];
    if (double* g = grad_of(p)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        if (p.values[i] > 0.0) g[i] += self.grad[i];
      }
    }
  });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.values().begin(), x.values().end());
  for (double& v : out) v = 1.0 / (1.0 + std::exp(-v));
  return make_op(x.shape(), std::move(out), {x.node_ptr()}, [](Node& self) {
    if (double* g = grad_of(*self.parents[0])) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        const double y = self.values[i];
        g[i] += self.grad[i] * y * (1.0 - y);
      }
    }
  });
}

namespace {

std::pair<int, int> rows_cols_of(const Tensor& x, const char* what) {
  if (x.rank() == 1) return {1, x.dim(0)};
  if (x.rank() == 2) return {x.rows(), x.cols()};
  throw std::invalid_argument(std::string(what) +
                              " expects a rank-1 or rank-2 tensor, got shape " +
                              shape_string(x.shape()));
}

}  // namespace

Tensor softmax(const Tensor& x) {
  const auto [rows, cols] = rows_cols_of(x, "softmax");
  std::vector<double> out(static_cast<std::size_t>(rows) * cols);
  kernels::softmax_rows(x.data(), out.data(), rows, cols);
  return make_op(x.shape(), std::move(out), {x.node_ptr()},
                 [rows = rows, cols = cols](Node& self) {
                   if (double* g = grad_of(*self.parents[0])) {
                     for (int r = 0; r < rows; ++r) {
                       const std::size_t off = static_cast<std::size_t>(r) * cols;
                       const double* y = self.values.data() + off;
                       const double* dy = self.grad.data() + off;
                       double dot = 0.0;
                       for (int j = 0; j < cols; ++j) dot += dy[j] * y[j];
                       for (int j = 0; j < cols; ++j)
                         g[off + j] += (dy[j] - dot) * y[j];
                     }
                   }
                 });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double epsilon) {
  const auto [rows, cols] = rows_cols_of(x, "layer_norm");
  require(gain.size() == cols && bias.size() == cols,
          "layer_norm affine shape mismatch: x " + shape_string(x.shape()) +
              ", gain " + shape_string(gain.shape()) + ", bias " +
              shape_string(bias.shape()));
  std::vector<double> out(static_cast<std::size_t>(rows) * cols);
  std::vector<double> xhat(out.size());
  std::vector<double> inv_std(static_cast<std::size_t>(rows));
  kernels::layer_norm_rows(x.data(), gain.data(), bias.data(), epsilon,
                           out.data(), xhat.data(), inv_std.data(), rows, cols);
  return make_op(
      x.shape(), std::move(out),
      {x.node_ptr(), gain.node_ptr(), bias.node_ptr()},
      [rows = rows, cols = cols, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](Node& self) {
        Node& px = *self.parents[0];
        Node& pg = *self.parents[1];
        Node& pb = *self.parents[2];
        double* ggain = grad_of(pg);
        double* gbias = grad_of(pb);
        double* gx = grad_of(px);
        const double* gain = pg.values.data();
        for (int r = 0; r < rows; ++r) {
          const std::size_t off = static_cast<std::size_t>(r) * cols;
          const double* dy = self.grad.data() + off;
          const double* xh = xhat.data() + off;
          if (ggain) {
            for (int j = 0; j < cols; ++j) ggain[j] += dy[j] * xh[j];
          }
          if (gbias) {
            for (int j = 0; j < cols; ++j) gbias[j] += dy[j];
          }
          if (gx) {
            double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
            for (int j = 0; j < cols; ++j) {
              const double dxh = dy[j] * gain[j];
              sum_dxhat += dxh;
              sum_dxhat_xhat += dxh * xh[j];
            }
            const double mean_dxhat = sum_dxhat / cols;
            const double mean_dxhat_xhat = sum_dxhat_xhat / cols;
            for (int j = 0; j < cols; ++j) {
              const double dxh = dy[j] * gain[j];
              gx[off + j] +=
                  inv_std[static_cast<std::size_t>(r)] *
                  (dxh - mean_dxhat - xh[j] * mean_dxhat_xhat);
            }
          }
        }
      });
}

namespace {

// Masked, scaled attention scores -> softmax weights. Shared by the op and
// by attention_weights().
std::vector<double> compute_attention_weights(
    const Tensor& q, const Tensor& k, std::span<const std::uint8_t> key_masked) {
  const int lq = q.rows(), dk = q.cols(), lk = k.rows();
  std::vector<double> scores(static_cast<std::size_t>(lq) * lk);
  kernels::matmul_bt(q.data(), k.data(), scores.data(), lq, dk, lk);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  for (int i = 0; i < lq; ++i) {
    double* row = scores.data() + static_cast<std::size_t>(i) * lk;
    for (int j = 0; j < lk; ++j) {
      row[j] *= scale;
      if (key_masked[static_cast<std::size_t>(j)]) row[j] += kMaskBias;
    }
  }
  std::vector<double> weights(scores.size());
  kernels::softmax_rows(scores.data(), weights.data(), lq, lk);
  return weights;
}

}  // namespace

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            std::span<const std::uint8_t> key_masked) {
  require_rank2(q, "attention Q");
  require_rank2(k, "attention K");
  require_rank2(v, "attention V");
  require(q.cols() == k.cols(),
          "attention Q/K head dim mismatch: " + shape_string(q.shape()) +
              " vs " + shape_string(k.shape()));
  require(k.rows() == v.rows(),
          "attention K/V length mismatch: " + shape_string(k.shape()) +
              " vs " + shape_string(v.shape()));
  require(static_cast<int>(key_masked.size()) == k.rows(),
          "attention mask length " + std::to_string(key_masked.size()) +
              " does not match key count " + std::to_string(k.rows()));
  const int lq = q.rows(), dk = q.cols(), lk = k.rows(), dv = v.cols();

  std::vector<double> weights = compute_attention_weights(q, k, key_masked);
  std::vector<double> out(static_cast<std::size_t>(lq) * dv);
  kernels::matmul(weights.data(), v.data(), out.data(), lq, lk, dv);

  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  return make_op(
      {lq, dv}, std::move(out), {q.node_ptr(), k.node_ptr(), v.node_ptr()},
      [lq, dk, lk, dv, scale, weights = std::move(weights)](Node& self) {
        Node& pq = *self.parents[0];
        Node& pk = *self.parents[1];
        Node& pv = *self.parents[2];
        if (double* gv = grad_of(pv)) {
          kernels::matmul_at(weights.data(), self.grad.data(), gv, lk, lq, dv,
                             /*accumulate=*/true);
        }
        if (pq.requires_grad || pk.requires_grad) {
          // dW = dO V^T, then softmax backward rows, then fold in the scale.
          std::vector<double> dscores(static_cast<std::size_t>(lq) * lk);
          kernels::matmul_bt(self.grad.data(), pv.values.data(), dscores.data(),
                             lq, dv, lk);
          for (int i = 0; i < lq; ++i) {
            const std::size_t off = static_cast<std::size_t>(i) * lk;
            const double* w = weights.data() + off;
            double* ds = dscores.data() + off;
            double dot = 0.0;
            for (int j = 0; j < lk; ++j) dot += ds[j] * w[j];
            for (int j = 0; j < lk; ++j) ds[j] = (ds[j] - dot) * w[j] * scale;
          }
          if (double* gq = grad_of(pq)) {
            kernels::matmul(dscores.data(), pk.values.data(), gq, lq, lk, dk,
                            /*accumulate=*/true);
          }
          if (double* gk = grad_of(pk)) {
            kernels::matmul_at(dscores.data(), pq.values.data(), gk, lk, lq, dk,
                               /*accumulate=*/true);
          }
        }
      });
}

std::vector<double> attention_weights(const Tensor& q, const Tensor& k,
                                      std::span<const std::uint8_t> key_masked) {
  require_rank2(q, "attention Q");
  require_rank2(k, "attention K");
  require(q.cols() == k.cols(),
          "attention Q/K head dim mismatch: " + shape_string(q.shape()) +
              " vs " + shape_string(k.shape()));
  require(static_cast<int>(key_masked.size()) == k.rows(),
          "attention mask length mismatch");
  return compute_attention_weights(q, k, key_masked);
}

Tensor cross_entropy_loss(const Tensor& logits, std::span<const int> labels) {
  require_rank2(logits, "cross_entropy logits");
  const int batch = logits.rows(), classes = logits.cols();
  require(static_cast<int>(labels.size()) == batch,
          "cross_entropy batch mismatch: logits " +
              shape_string(logits.shape()) + " vs " +
              std::to_string(labels.size()) + " labels");
  for (int i = 0; i < batch; ++i) {
    if (labels[static_cast<std::size_t>(i)] < 0 ||
        labels[static_cast<std::size_t>(i)] >= classes) {
      throw std::invalid_argument(
          "cross_entropy label out of range at index " + std::to_string(i) +
          ": " + std::to_string(labels[static_cast<std::size_t>(i)]) +
          " not in [0, " + std::to_string(classes) + ")");
    }
  }
  std::vector<double> probs(static_cast<std::size_t>(batch) * classes);
  kernels::softmax_rows(logits.data(), probs.data(), batch, classes);
  double total = 0.0;
  const double* lv = logits.data();
  for (int i = 0; i < batch; ++i) {
    const double* row = lv + static_cast<std::size_t>(i) * classes;
    double mx = row[0];
    for (int j = 1; j < classes; ++j) mx = row[j] > mx ? row[j] : mx;
    double sum = 0.0;
    for (int j = 0; j < classes; ++j) sum += std::exp(row[j] - mx);
    const double lse = mx + std::log(sum);
    total += lse - row[labels[static_cast<std::size_t>(i)]];
  }
  std::vector<int> labels_copy(labels.begin(), labels.end());
  return make_op(
      {1}, {total / batch}, {logits.node_ptr()},
      [batch, classes, probs = std::move(probs),
       labels = std::move(labels_copy)](Node& self) {
        if (double* g = grad_of(*self.parents[0])) {
          const double dl = self.grad[0] / batch;
          for (int i = 0; i < batch; ++i) {
            const std::size_t off = static_cast<std::size_t>(i) * classes;
            for (int j = 0; j < classes; ++j) {
              const double onehot =
                  j == labels[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
              g[off + j] += dl * (probs[off + j] - onehot);
            }
          }
        }
      });
}

Tensor embedding_lookup(const Tensor& table, std::span<const int> ids) {
  require_rank2(table, "embedding table");
  const int vocab = table.rows(), dim = table.cols();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= vocab) {
      throw std::invalid_argument("embedding id out of range at position " +
                                  std::to_string(i) + ": " +
                                  std::to_string(ids[i]) + " not in [0, " +
                                  std::to_string(vocab) + ")");
    }
  }
  const int n = static_cast<int>(ids.size());
  std::vector<double> out(static_cast<std::size_t>(n) * dim);
  for (int r = 0; r < n; ++r) {
    std::memcpy(out.data() + static_cast<std::size_t>(r) * dim,
                table.data() + static_cast<std::size_t>(ids[static_cast<std::size_t>(r)]) * dim,
                sizeof(double) * static_cast<std::size_t>(dim));
  }
  std::vector<int> ids_copy(ids.begin(), ids.end());
  return make_op({n, dim}, std::move(out), {table.node_ptr()},
                 [dim, ids = std::move(ids_copy)](Node& self) {
                   if (double* g = grad_of(*self.parents[0])) {
                     for (std::size_t r = 0; r < ids.size(); ++r) {
                       const double* src = self.grad.data() + r * dim;
                       double* dst =
                           g + static_cast<std::size_t>(ids[r]) * dim;
                       for (int j = 0; j < dim; ++j) dst[j] += src[j];
                     }
                   }
                 });
}

Tensor gather_rows(const Tensor& x, std::span<const int> rows) {
  require_rank2(x, "gather_rows input");
  const int m = x.rows(), n = x.cols();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= m) {
      throw std::invalid_argument("gather_rows index out of range: " +
                                  std::to_string(rows[i]) + " not in [0, " +
                                  std::to_string(m) + ")");
    }
  }
  const int r = static_cast<int>(rows.size());
  std::vector<double> out(static_cast<std::size_t>(r) * n);
  for (int i = 0; i < r; ++i) {
    std::memcpy(out.data() + static_cast<std::size_t>(i) * n,
                x.data() + static_cast<std::size_t>(rows[static_cast<std::size_t>(i)]) * n,
                sizeof(double) * static_cast<std::size_t>(n));
  }
  std::vector<int> rows_copy(rows.begin(), rows.end());
  return make_op({r, n}, std::move(out), {x.node_ptr()},
                 [n, rows = std::move(rows_copy)](Node& self) {
                   if (double* g = grad_of(*self.parents[0])) {
                     for (std::size_t i = 0; i < rows.size(); ++i) {
                       const double* src = self.grad.data() + i * n;
                       double* dst = g + static_cast<std::size_t>(rows[i]) * n;
                       for (int j = 0; j < n; ++j) dst[j] += src[j];
                     }
                   }
                 });
}

Tensor slice_cols(const Tensor& x, int start, int count) {
  require_rank2(x, "slice_cols input");
  require(start >= 0 && count > 0 && start + count <= x.cols(),
          "slice_cols range [" + std::to_string(start) + ", " +
              std::to_string(start + count) + ") outside shape " +
              shape_string(x.shape()));
  const int m = x.rows(), n = x.cols();
  std::vector<double> out(static_cast<std::size_t>(m) * count);
  for (int i = 0; i < m; ++i) {
    std::memcpy(out.data() + static_cast<std::size_t>(i) * count,
                x.data() + static_cast<std::size_t>(i) * n + start,
                sizeof(double) * static_cast<std::size_t>(count));
  }
  return make_op({m, count}, std::move(out), {x.node_ptr()},
                 [m, n, start, count](Node& self) {
                   if (double* g = grad_of(*self.parents[0])) {
                     for (int i = 0; i < m; ++i) {
                       const double* src =
                           self.grad.data() + static_cast<std::size_t>(i) * count;
                       double* dst = g + static_cast<std::size_t>(i) * n + start;
                       for (int j = 0; j < count; ++j) dst[j] += src[j];
                     }
                   }
                 });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  require(!parts.empty(), "concat_rows needs at least one part");
  const int n = parts[0].cols();
  int total_rows = 0;
  std::vector<std::shared_ptr<Node>> parents;
  parents.reserve(parts.size());
  for (const Tensor& p : parts) {
    require_rank2(p, "concat_rows part");
    require(p.cols() == n, "concat_rows column mismatch: " +
                               shape_string(parts[0].shape()) + " vs " +
                               shape_string(p.shape()));
    total_rows += p.rows();
    parents.push_back(p.node_ptr());
  }
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(total_rows) * n);
  for (const Tensor& p : parts)
    out.insert(out.end(), p.values().begin(), p.values().end());
  return make_op({total_rows, n}, std::move(out), std::move(parents),
                 [](Node& self) {
                   std::size_t offset = 0;
                   for (const auto& parent : self.parents) {
                     const std::size_t count = parent->values.size();
                     if (double* g = grad_of(*parent)) {
                       for (std::size_t i = 0; i < count; ++i)
                         g[i] += self.grad[offset + i];
                     }
                     offset += count;
                   }
                 });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  require(!parts.empty(), "concat_cols needs at least one part");
  const int m = parts[0].rows();
  int total_cols = 0;
  std::vector<std::shared_ptr<Node>> parents;
  std::vector<int> widths;
  parents.reserve(parts.size());
  for (const Tensor& p : parts) {
    require_rank2(p, "concat_cols part");
    require(p.rows() == m, "concat_cols row mismatch: " +
                               shape_string(parts[0].shape()) + " vs " +
                               shape_string(p.shape()));
    total_cols += p.cols();
    widths.push_back(p.cols());
    parents.push_back(p.node_ptr());
  }
  std::vector<double> out(static_cast<std::size_t>(m) * total_cols);
  int col = 0;
  for (const Tensor& p : parts) {
    const int w = p.cols();
    for (int i = 0; i < m; ++i) {
      std::memcpy(out.data() + static_cast<std::size_t>(i) * total_cols + col,
                  p.data() + static_cast<std::size_t>(i) * w,
                  sizeof(double) * static_cast<std::size_t>(w));
    }
    col += w;
  }
  return make_op({m, total_cols}, std::move(out), std::move(parents),
                 [m, total_cols, widths = std::move(widths)](Node& self) {
                   int col = 0;
                   for (std::size_t p = 0; p < self.parents.size(); ++p) {
                     const int w = widths[p];
                     if (double* g = grad_of(*self.parents[p])) {
                       for (int i = 0; i < m; ++i) {
                         const double* src = self.grad.data() +
                                             static_cast<std::size_t>(i) * total_cols +
                                             col;
                         double* dst = g + static_cast<std::size_t>(i) * w;
                         for (int j = 0; j < w; ++j) dst[j] += src[j];
                       }
                     }
                     col += w;
                   }
                 });
}

Tensor dropout(const Tensor& x, double rate, Rng& rng, bool active) {
  require(rate >= 0.0 && rate < 1.0,
          "dropout rate must be in [0, 1), got " + std::to_string(rate));
  if (!active || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.values().size());
  for (double& m : mask) m = rng.uniform01() >= rate ? keep_scale : 0.0;
  std::vector<double> out(x.values().begin(), x.values().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return make_op(x.shape(), std::move(out), {x.node_ptr()},
                 [mask = std::move(mask)](Node& self) {
                   if (double* g = grad_of(*self.parents[0])) {
                     for (std::size_t i = 0; i < self.grad.size(); ++i)
                       g[i] += self.grad[i] * mask[i];
                   }
                 });
}

Tensor conv1d_valid(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
  require_rank2(x, "conv1d input");
  require(kernel.rank() == 3, "conv1d kernel must be rank 3, got shape " +
                                  shape_string(kernel.shape()));
  const int len = x.rows(), d = x.cols();
  const int filters = kernel.dim(0), width = kernel.dim(1);
  require(kernel.dim(2) == d,
          "conv1d channel mismatch: x " + shape_string(x.shape()) +
              " vs kernel " + shape_string(kernel.shape()));
  require(bias.size() == filters,
          "conv1d bias shape mismatch: " + shape_string(bias.shape()) +
              " for " + std::to_string(filters) + " filters");
  require(len >= width, "conv1d input length " + std::to_string(len) +
                            " shorter than filter width " +
                            std::to_string(width));
  const int t_out = len - width + 1;
  std::vector<double> out(static_cast<std::size_t>(t_out) * filters);
  const double* xv = x.data();
  const double* kv = kernel.data();
  const double* bv = bias.data();
  for (int t = 0; t < t_out; ++t) {
    double* orow = out.data() + static_cast<std::size_t>(t) * filters;
    for (int f = 0; f < filters; ++f) {
      const double* kf = kv + static_cast<std::size_t>(f) * width * d;
      double acc = bv[f];
      for (int w = 0; w < width; ++w) {
        const double* xr = xv + static_cast<std::size_t>(t + w) * d;
        const double* kr = kf + static_cast<std::size_t>(w) * d;
        for (int c = 0; c < d; ++c) acc += xr[c] * kr[c];
      }
      orow[f] = acc;
    }
  }
  return make_op(
      {t_out, filters}, std::move(out),
      {x.node_ptr(), kernel.node_ptr(), bias.node_ptr()},
      [t_out, filters, width, d](Node& self) {
        Node& px = *self.parents[0];
        Node& pk = *self.parents[1];
        Node& pb = *self.parents[2];
        double* gx = grad_of(px);
        double* gk = grad_of(pk);
        double* gb = grad_of(pb);
        const double* xv = px.values.data();
        const double* kv = pk.values.data();
        for (int t = 0; t < t_out; ++t) {
          const double* grow =
              self.grad.data() + static_cast<std::size_t>(t) * filters;
          for (int f = 0; f < filters; ++f) {
            const double go = grow[f];
            if (go == 0.0) continue;
            if (gb) gb[f] += go;
            const double* kf = kv + static_cast<std::size_t>(f) * width * d;
            double* gkf = gk ? gk + static_cast<std::size_t>(f) * width * d : nullptr;
            for (int w = 0; w < width; ++w) {
              const double* xr = xv + static_cast<std::size_t>(t + w) * d;
              const double* kr = kf + static_cast<std::size_t>(w) * d;
              double* gxr = gx ? gx + static_cast<std::size_t>(t + w) * d : nullptr;
              double* gkr = gkf ? gkf + static_cast<std::size_t>(w) * d : nullptr;
              for (int c = 0; c < d; ++c) {
                if (gxr) gxr[c] += go * kr[c];
                if (gkr) gkr[c] += go * xr[c];
              }
            }
          }
        }
      });
}

Tensor max_over_time(const Tensor& x) {
  require_rank2(x, "max_over_time input");
  const int t = x.rows(), f = x.cols();
  std::vector<double> out(static_cast<std::size_t>(f));
  std::vector<int> argmax(static_cast<std::size_t>(f), 0);
  const double* xv = x.data();
  for (int j = 0; j < f; ++j) out[static_cast<std::size_t>(j)] = xv[j];
  for (int r = 1; r < t; ++r) {
    const double* row = xv + static_cast<std::size_t>(r) * f;
    for (int j = 0; j < f; ++j) {
      if (row[j] > out[static_cast<std::size_t>(j)]) {
        out[static_cast<std::size_t>(j)] = row[j];
        argmax[static_cast<std::size_t>(j)] = r;
      }
    }
  }
  return make_op({1, f}, std::move(out), {x.node_ptr()},
                 [f, argmax = std::move(argmax)](Node& self) {
                   if (double* g = grad_of(*self.parents[0])) {
                     for (int j = 0; j < f; ++j) {
                       g[static_cast<std::size_t>(argmax[static_cast<std::size_t>(j)]) * f + j] +=
                           self.grad[static_cast<std::size_t>(j)];
                     }
                   }
                 });
}

}  // namespace humor::numcore
