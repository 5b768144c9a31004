#include "gccn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gccn/error.hpp"

namespace gccn {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_string(t.shape()));
  }
}

// Rows/cols view of a rank-1 (single row) or rank-2 tensor.
struct RowView {
  std::size_t rows;
  std::size_t cols;
};

RowView row_view(const Tensor& t, const char* op) {
  if (t.rank() == 1) return {1, t.dim(0)};
  if (t.rank() == 2) return {t.dim(0), t.dim(1)};
  throw DimensionError(std::string(op) + ": expected rank 1 or 2, got " + shape_string(t.shape()));
}

// [h,w,c] or [n,h,w,c] viewed as a batch.
struct MapView {
  std::size_t n, h, w, c;
};

MapView map_view(const Tensor& t, const char* op) {
  if (t.rank() == 3) return {1, t.dim(0), t.dim(1), t.dim(2)};
  if (t.rank() == 4) return {t.dim(0), t.dim(1), t.dim(2), t.dim(3)};
  throw DimensionError(std::string(op) + ": expected [h,w,c] or [n,h,w,c], got " +
                       shape_string(t.shape()));
}

Shape map_shape(bool batched, std::size_t n, std::size_t h, std::size_t w, std::size_t c) {
  return batched ? Shape{n, h, w, c} : Shape{h, w, c};
}

void check_labels(std::span<const int> labels, std::size_t rows, std::size_t classes, const char* op) {
  if (labels.size() != rows) {
    throw DataError(std::string(op) + ": " + std::to_string(labels.size()) + " labels for " +
                    std::to_string(rows) + " rows");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw DataError(std::string(op) + ": label " + std::to_string(y) + " outside [0, " +
                      std::to_string(classes) + ")");
    }
  }
}

}  // namespace

// ---- plain helpers ---------------------------------------------------------

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double top = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    z += out[i];
  }
  for (double& v : out) v /= z;
  return out;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

// ---- elementwise -----------------------------------------------------------

Var add(Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_same_shape(x, y, "add");
  Tensor out = x;
  out += y;
  return a.graph().record(std::move(out), {a, b}, [a, b](Graph& g, const Tensor& go) {
    g.accumulate(a, go);
    g.accumulate(b, go);
  });
}

Var sub(Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_same_shape(x, y, "sub");
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= y[i];
  return a.graph().record(std::move(out), {a, b}, [a, b](Graph& g, const Tensor& go) {
    g.accumulate(a, go);
    if (g.requires_grad(b)) {
      Tensor& gb = g.grad_buffer(b);
      for (std::size_t i = 0; i < go.size(); ++i) gb[i] -= go[i];
    }
  });
}

Var mul(Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_same_shape(x, y, "mul");
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= y[i];
  return a.graph().record(std::move(out), {a, b}, [a, b](Graph& g, const Tensor& go) {
    const Tensor& x = g.value(a);
    const Tensor& y = g.value(b);
    if (g.requires_grad(a)) {
      Tensor& ga = g.grad_buffer(a);
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * y[i];
    }
    if (g.requires_grad(b)) {
      Tensor& gb = g.grad_buffer(b);
      for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * x[i];
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= factor;
  return a.graph().record(std::move(out), {a}, [a, factor](Graph& g, const Tensor& go) {
    Tensor& ga = g.grad_buffer(a);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * factor;
  });
}

Var sum(Var a) {
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  return a.graph().record(Tensor::scalar(total), {a}, [a](Graph& g, const Tensor& go) {
    Tensor& ga = g.grad_buffer(a);
    const double s = go[0];
    for (double& v : ga.data()) v += s;
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  return a.graph().record(Tensor::scalar(total / n), {a}, [a, n](Graph& g, const Tensor& go) {
    Tensor& ga = g.grad_buffer(a);
    const double s = go[0] / n;
    for (double& v : ga.data()) v += s;
  });
}

Var relu(Var a) {
  Tensor out = a.value();
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return a.graph().record(std::move(out), {a}, [a](Graph& g, const Tensor& go) {
    const Tensor& x = g.value(a);
    Tensor& ga = g.grad_buffer(a);
    for (std::size_t i = 0; i < go.size(); ++i) {
      if (x[i] > 0.0) ga[i] += go[i];
    }
  });
}

Var log(Var a) {
  Tensor out = a.value();
  for (double& v : out.data()) v = std::log(v);
  return a.graph().record(std::move(out), {a}, [a](Graph& g, const Tensor& go) {
    const Tensor& x = g.value(a);
    Tensor& ga = g.grad_buffer(a);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] / x[i];
  });
}

Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return a.graph().record(std::move(out), {a}, [a](Graph& g, const Tensor& go) {
    Tensor& ga = g.grad_buffer(a);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
  });
}

Var flatten(Var a) {
  const Tensor& x = a.value();
  if (x.rank() < 1) throw DimensionError("flatten: scalar input");
  const std::size_t n = x.dim(0);
  return reshape(a, Shape{n, x.size() / n});
}

// ---- matrices --------------------------------------------------------------

Var matmul(Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_rank(x, 2, "matmul");
  require_rank(y, 2, "matmul");
  const std::size_t n = x.dim(0), k = x.dim(1), m = y.dim(1);
  if (y.dim(0) != k) {
    throw DimensionError("matmul: " + shape_string(x.shape()) + " * " + shape_string(y.shape()));
  }
  Tensor out(Shape{n, m}, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double xv = x[i * k + p];
      for (std::size_t j = 0; j < m; ++j) out[i * m + j] += xv * y[p * m + j];
    }
  }
  return a.graph().record(std::move(out), {a, b}, [a, b, n, k, m](Graph& g, const Tensor& go) {
    const Tensor& x = g.value(a);
    const Tensor& y = g.value(b);
    if (g.requires_grad(a)) {
      Tensor& ga = g.grad_buffer(a);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < m; ++j) s += go[i * m + j] * y[p * m + j];
          ga[i * k + p] += s;
        }
      }
    }
    if (g.requires_grad(b)) {
      Tensor& gb = g.grad_buffer(b);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double xv = x[i * k + p];
          for (std::size_t j = 0; j < m; ++j) gb[p * m + j] += xv * go[i * m + j];
        }
      }
    }
  });
}

Var linear(Var x, Var w, Var b) {
  const Tensor& bias = b.value();
  require_rank(bias, 1, "linear bias");
  Var xw = matmul(x, w);
  const Tensor& base = xw.value();
  const std::size_t n = base.dim(0), m = base.dim(1);
  if (bias.dim(0) != m) throw DimensionError("linear: bias " + shape_string(bias.shape()));
  Tensor out = base;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] += bias[j];
  }
  return x.graph().record(std::move(out), {xw, b}, [xw, b, n, m](Graph& g, const Tensor& go) {
    g.accumulate(xw, go);
    if (g.requires_grad(b)) {
      Tensor& gb = g.grad_buffer(b);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) gb[j] += go[i * m + j];
      }
    }
  });
}

Var concat_cols(Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_rank(x, 2, "concat_cols");
  require_rank(y, 2, "concat_cols");
  const std::size_t n = x.dim(0), da = x.dim(1), db = y.dim(1);
  if (y.dim(0) != n) throw DimensionError("concat_cols: row counts differ");
  Tensor out(Shape{n, da + db});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(&x[i * da], da, &out[i * (da + db)]);
    std::copy_n(&y[i * db], db, &out[i * (da + db) + da]);
  }
  return a.graph().record(std::move(out), {a, b}, [a, b, n, da, db](Graph& g, const Tensor& go) {
    if (g.requires_grad(a)) {
      Tensor& ga = g.grad_buffer(a);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < da; ++j) ga[i * da + j] += go[i * (da + db) + j];
      }
    }
    if (g.requires_grad(b)) {
      Tensor& gb = g.grad_buffer(b);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < db; ++j) gb[i * db + j] += go[i * (da + db) + da + j];
      }
    }
  });
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
  const Tensor& x = a.value();
  require_rank(x, 2, "slice_rows");
  if (begin >= end || end > x.dim(0)) {
    throw DimensionError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") of " + shape_string(x.shape()));
  }
  const std::size_t d = x.dim(1);
  Tensor out(Shape{end - begin, d});
  std::copy_n(&x[begin * d], (end - begin) * d, &out[0]);
  return a.graph().record(std::move(out), {a}, [a, begin, d](Graph& g, const Tensor& go) {
    Tensor& ga = g.grad_buffer(a);
    for (std::size_t i = 0; i < go.size(); ++i) ga[begin * d + i] += go[i];
  });
}

Var row_norm(Var a) {
  const Tensor& x = a.value();
  const auto [n, d] = row_view(x, "row_norm");
  Tensor out(Shape{n, 1});
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += x[i * d + j] * x[i * d + j];
    out[i] = std::sqrt(s);
  }
  return a.graph().record(std::move(out), {a}, [a, n, d](Graph& g, const Tensor& go) {
    const Tensor& x = g.value(a);
    Tensor& ga = g.grad_buffer(a);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += x[i * d + j] * x[i * d + j];
      const double norm = std::sqrt(s);
      if (norm == 0.0) continue;
      for (std::size_t j = 0; j < d; ++j) ga[i * d + j] += go[i] * x[i * d + j] / norm;
    }
  });
}

Var clamp_min(Var a, double floor) {
  Tensor out = a.value();
  for (double& v : out.data()) v = v < floor ? floor : v;
  return a.graph().record(std::move(out), {a}, [a, floor](Graph& g, const Tensor& go) {
    const Tensor& x = g.value(a);
    Tensor& ga = g.grad_buffer(a);
    for (std::size_t i = 0; i < go.size(); ++i) {
      if (!(x[i] < floor)) ga[i] += go[i];
    }
  });
}

Var div_rows(Var a, Var s) {
  const Tensor& x = a.value();
  const Tensor& den = s.value();
  require_rank(x, 2, "div_rows");
  const std::size_t n = x.dim(0), d = x.dim(1);
  if (den.shape() != Shape{n, 1}) {
    throw DimensionError("div_rows: divisor " + shape_string(den.shape()) + " for " + shape_string(x.shape()));
  }
  Tensor out = x;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] /= den[i];
  }
  return a.graph().record(std::move(out), {a, s}, [a, s, n, d](Graph& g, const Tensor& go) {
    const Tensor& x = g.value(a);
    const Tensor& den = g.value(s);
    if (g.requires_grad(a)) {
      Tensor& ga = g.grad_buffer(a);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) ga[i * d + j] += go[i * d + j] / den[i];
      }
    }
    if (g.requires_grad(s)) {
      Tensor& gs = g.grad_buffer(s);
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) acc += go[i * d + j] * x[i * d + j];
        gs[i] -= acc / (den[i] * den[i]);
      }
    }
  });
}

Var softmax(Var logits) {
  const Tensor& x = logits.value();
  const auto [n, k] = row_view(x, "softmax");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < n; ++i) {
    auto row = softmax(std::span<const double>(&x[i * k], k));
    std::copy(row.begin(), row.end(), &out[i * k]);
  }
  return logits.graph().record(std::move(out), {logits}, [logits, n, k](Graph& g, const Tensor& go) {
    const Tensor& x = g.value(logits);
    Tensor& gx = g.grad_buffer(logits);
    for (std::size_t i = 0; i < n; ++i) {
      auto y = softmax(std::span<const double>(&x[i * k], k));
      double dot = 0.0;
      for (std::size_t j = 0; j < k; ++j) dot += go[i * k + j] * y[j];
      for (std::size_t j = 0; j < k; ++j) gx[i * k + j] += y[j] * (go[i * k + j] - dot);
    }
  });
}

namespace {

// log-softmax of one row written into out.
void log_softmax_row(const double* x, std::size_t k, double* out) {
  const double top = *std::max_element(x, x + k);
  double z = 0.0;
  for (std::size_t j = 0; j < k; ++j) z += std::exp(x[j] - top);
  const double lz = std::log(z);
  for (std::size_t j = 0; j < k; ++j) out[j] = x[j] - top - lz;
}

}  // namespace

Var log_softmax(Var logits) {
  const Tensor& x = logits.value();
  const auto [n, k] = row_view(x, "log_softmax");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < n; ++i) log_softmax_row(&x[i * k], k, &out[i * k]);
  return logits.graph().record(std::move(out), {logits}, [logits, n, k](Graph& g, const Tensor& go) {
    const Tensor& x = g.value(logits);
    Tensor& gx = g.grad_buffer(logits);
    for (std::size_t i = 0; i < n; ++i) {
      auto p = softmax(std::span<const double>(&x[i * k], k));
      double total = 0.0;
      for (std::size_t j = 0; j < k; ++j) total += go[i * k + j];
      for (std::size_t j = 0; j < k; ++j) gx[i * k + j] += go[i * k + j] - p[j] * total;
    }
  });
}

Var nll(Var log_probs, std::span<const int> labels) {
  const Tensor& lp = log_probs.value();
  const auto [n, k] = row_view(lp, "nll");
  check_labels(labels, n, k, "nll");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total -= lp[i * k + static_cast<std::size_t>(labels[i])];
  std::vector<int> ys(labels.begin(), labels.end());
  return log_probs.graph().record(
      Tensor::scalar(total / static_cast<double>(n)), {log_probs},
      [log_probs, ys = std::move(ys), n, k](Graph& g, const Tensor& go) {
        Tensor& gl = g.grad_buffer(log_probs);
        const double s = go[0] / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) gl[i * k + static_cast<std::size_t>(ys[i])] -= s;
      });
}

Var cross_entropy(Var logits, std::span<const int> labels) {
  const Tensor& x = logits.value();
  const auto [n, k] = row_view(x, "cross_entropy");
  check_labels(labels, n, k, "cross_entropy");
  std::vector<double> row(k);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    log_softmax_row(&x[i * k], k, row.data());
    total -= row[static_cast<std::size_t>(labels[i])];
  }
  std::vector<int> ys(labels.begin(), labels.end());
  return logits.graph().record(
      Tensor::scalar(total / static_cast<double>(n)), {logits},
      [logits, ys = std::move(ys), n, k](Graph& g, const Tensor& go) {
        const Tensor& x = g.value(logits);
        Tensor& gx = g.grad_buffer(logits);
        const double s = go[0] / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
          auto p = softmax(std::span<const double>(&x[i * k], k));
          p[static_cast<std::size_t>(ys[i])] -= 1.0;
          for (std::size_t j = 0; j < k; ++j) gx[i * k + j] += s * p[j];
        }
      });
}

// ---- convolutional blocks --------------------------------------------------

namespace {

// Output channels (or input channels, for the input gradient) are processed in
// register-sized blocks. Every output element still sums kernel rows, then
// columns, then input channels, starting from zero.
constexpr std::size_t kConvBlock = 16;

struct ConvDims {
  std::size_t n, h, w, cin, kh, kw, cout, oh, ow, stride;
};

template <std::size_t L>
void conv_forward_block(const ConvDims& d, const double* __restrict x, const double* __restrict k,
                        double* __restrict out, std::size_t co0, std::size_t len) {
  for (std::size_t b = 0; b < d.n; ++b) {
    for (std::size_t ox = 0; ox < d.oh; ++ox) {
      for (std::size_t oy = 0; oy < d.ow; ++oy) {
        double acc[L] = {};
        for (std::size_t i = 0; i < d.kh; ++i) {
          for (std::size_t j = 0; j < d.kw; ++j) {
            const double* px = x + ((b * d.h + ox * d.stride + i) * d.w + oy * d.stride + j) * d.cin;
            const double* kij = k + (i * d.kw + j) * d.cin * d.cout + co0;
            for (std::size_t c = 0; c < d.cin; ++c) {
              const double a = px[c];
              const double* kr = kij + c * d.cout;
              if constexpr (L == kConvBlock) {
                for (std::size_t l = 0; l < L; ++l) acc[l] += kr[l] * a;
              } else {
                for (std::size_t l = 0; l < len; ++l) acc[l] += kr[l] * a;
              }
            }
          }
        }
        double* o = out + ((b * d.oh + ox) * d.ow + oy) * d.cout + co0;
        for (std::size_t l = 0; l < len; ++l) o[l] = acc[l];
      }
    }
  }
}

void conv_forward(const ConvDims& d, const double* x, const double* k, double* out) {
  for (std::size_t co0 = 0; co0 < d.cout; co0 += kConvBlock) {
    const std::size_t len = std::min(kConvBlock, d.cout - co0);
    if (len == kConvBlock) {
      conv_forward_block<kConvBlock>(d, x, k, out, co0, len);
    } else {
      conv_forward_block<kConvBlock + 1>(d, x, k, out, co0, len);
    }
  }
}

template <std::size_t L>
void input_tile(const double* __restrict kt, const double* __restrict gr, std::size_t cout, std::size_t stride,
                std::size_t len, double* __restrict dpx) {
  double acc[L] = {};
  for (std::size_t co = 0; co < cout; ++co) {
    const double g = gr[co];
    const double* kr = kt + co * stride;
    if constexpr (L == kConvBlock) {
      for (std::size_t l = 0; l < L; ++l) acc[l] += kr[l] * g;
    } else {
      for (std::size_t l = 0; l < len; ++l) acc[l] += kr[l] * g;
    }
  }
  for (std::size_t l = 0; l < len; ++l) dpx[l] += acc[l];
}

// kt is the kernel laid out as [kh, kw, cout, cin].
void conv_backward_input(const ConvDims& d, const double* __restrict kt, const double* __restrict go,
                         double* __restrict dx) {
  for (std::size_t b = 0; b < d.n; ++b) {
    for (std::size_t ox = 0; ox < d.oh; ++ox) {
      for (std::size_t oy = 0; oy < d.ow; ++oy) {
        const double* gr = go + ((b * d.oh + ox) * d.ow + oy) * d.cout;
        for (std::size_t i = 0; i < d.kh; ++i) {
          for (std::size_t j = 0; j < d.kw; ++j) {
            double* dpx = dx + ((b * d.h + ox * d.stride + i) * d.w + oy * d.stride + j) * d.cin;
            const double* kij = kt + (i * d.kw + j) * d.cout * d.cin;
            for (std::size_t c0 = 0; c0 < d.cin; c0 += kConvBlock) {
              const std::size_t len = std::min(kConvBlock, d.cin - c0);
              if (len == kConvBlock) {
                input_tile<kConvBlock>(kij + c0, gr, d.cout, d.cin, len, dpx + c0);
              } else {
                input_tile<kConvBlock + 1>(kij + c0, gr, d.cout, d.cin, len, dpx + c0);
              }
            }
          }
        }
      }
    }
  }
}

// Output positions are visited in tiles so the upstream gradient of a tile
// stays in cache while every kernel row consumes it.
constexpr std::size_t kPositionTile = 64;

template <std::size_t L>
void kernel_tile(const double* __restrict xc, const double* __restrict go, const std::size_t* __restrict origin,
                 std::size_t p0, std::size_t p1, std::size_t stride, std::size_t len, double* __restrict dkr) {
  double acc[L] = {};
  for (std::size_t p = p0; p < p1; ++p) {
    const double a = xc[origin[p]];
    const double* gr = go + p * stride;
    if constexpr (L == kConvBlock) {
      for (std::size_t l = 0; l < L; ++l) acc[l] += a * gr[l];
    } else {
      for (std::size_t l = 0; l < len; ++l) acc[l] += a * gr[l];
    }
  }
  for (std::size_t l = 0; l < len; ++l) dkr[l] += acc[l];
}

void conv_backward_kernel(const ConvDims& d, const double* __restrict x, const double* __restrict go,
                          double* __restrict dk) {
  const std::size_t positions = d.n * d.oh * d.ow;
  std::vector<std::size_t> origin(positions);
  for (std::size_t b = 0, p = 0; b < d.n; ++b) {
    for (std::size_t ox = 0; ox < d.oh; ++ox) {
      for (std::size_t oy = 0; oy < d.ow; ++oy, ++p) origin[p] = ((b * d.h + ox * d.stride) * d.w + oy * d.stride) * d.cin;
    }
  }
  for (std::size_t p0 = 0; p0 < positions; p0 += kPositionTile) {
    const std::size_t p1 = std::min(positions, p0 + kPositionTile);
    for (std::size_t i = 0; i < d.kh; ++i) {
      for (std::size_t j = 0; j < d.kw; ++j) {
        const std::size_t shift = (i * d.w + j) * d.cin;
        for (std::size_t c = 0; c < d.cin; ++c) {
          double* dkr = dk + ((i * d.kw + j) * d.cin + c) * d.cout;
          for (std::size_t co0 = 0; co0 < d.cout; co0 += kConvBlock) {
            const std::size_t len = std::min(kConvBlock, d.cout - co0);
            const double* xc = x + shift + c;
            if (len == kConvBlock) {
              kernel_tile<kConvBlock>(xc, go + co0, origin.data(), p0, p1, d.cout, kConvBlock, dkr + co0);
            } else {
              kernel_tile<kConvBlock + 1>(xc, go + co0, origin.data(), p0, p1, d.cout, len, dkr + co0);
            }
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(Var input, Var kernel, std::size_t stride) {
  if (stride == 0) throw ConfigError("conv2d: stride must be positive");
  const Tensor& x = input.value();
  const Tensor& k = kernel.value();
  const bool batched = x.rank() == 4;
  const auto [n, h, w, cin] = map_view(x, "conv2d");
  require_rank(k, 4, "conv2d kernel");
  const std::size_t kh = k.dim(0), kw = k.dim(1), cout = k.dim(3);
  if (k.dim(2) != cin) {
    throw DimensionError("conv2d: kernel " + shape_string(k.shape()) + " expects " +
                         std::to_string(k.dim(2)) + " input channels, input has " + std::to_string(cin));
  }
  if (kh > h || kw > w) {
    throw DimensionError("conv2d: kernel " + shape_string(k.shape()) + " larger than input " +
                         shape_string(x.shape()));
  }
  const ConvDims d{n, h, w, cin, kh, kw, cout, (h - kh) / stride + 1, (w - kw) / stride + 1, stride};

  Tensor out(map_shape(batched, n, d.oh, d.ow, cout));
  conv_forward(d, x.data().data(), k.data().data(), out.data().data());

  return input.graph().record(std::move(out), {input, kernel}, [input, kernel, d](Graph& g, const Tensor& go) {
    if (g.requires_grad(input)) {
      const Tensor& kv = g.value(kernel);
      std::vector<double> kt(kv.size());
      for (std::size_t ij = 0; ij < d.kh * d.kw; ++ij) {
        for (std::size_t c = 0; c < d.cin; ++c) {
          for (std::size_t co = 0; co < d.cout; ++co) {
            kt[(ij * d.cout + co) * d.cin + c] = kv[(ij * d.cin + c) * d.cout + co];
          }
        }
      }
      conv_backward_input(d, kt.data(), go.data().data(), g.grad_buffer(input).data().data());
    }
    if (g.requires_grad(kernel)) {
      conv_backward_kernel(d, g.value(input).data().data(), go.data().data(),
                           g.grad_buffer(kernel).data().data());
    }
  });
}

Var maxpool2d(Var input) {
  const Tensor& x = input.value();
  const bool batched = x.rank() == 4;
  const auto [n, h, w, c] = map_view(x, "maxpool2d");
  if (h % 2 != 0 || w % 2 != 0) {
    throw DimensionError("maxpool2d: spatial dims must be even, got " + shape_string(x.shape()));
  }
  const std::size_t oh = h / 2, ow = w / 2;
  Tensor out(map_shape(batched, n, oh, ow, c));
  std::vector<std::size_t> winner(out.size());
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          std::size_t best = ((b * h + 2 * i) * w + 2 * j) * c + ch;
          for (std::size_t di = 0; di < 2; ++di) {
            for (std::size_t dj = 0; dj < 2; ++dj) {
              const std::size_t idx = ((b * h + 2 * i + di) * w + 2 * j + dj) * c + ch;
              if (x[idx] > x[best]) best = idx;
            }
          }
          const std::size_t o = ((b * oh + i) * ow + j) * c + ch;
          out[o] = x[best];
          winner[o] = best;
        }
      }
    }
  }
  return input.graph().record(std::move(out), {input},
                              [input, winner = std::move(winner)](Graph& g, const Tensor& go) {
                                Tensor& gx = g.grad_buffer(input);
                                for (std::size_t o = 0; o < winner.size(); ++o) gx[winner[o]] += go[o];
                              });
}

Var crop_to_even(Var input) {
  const Tensor& x = input.value();
  require_rank(x, 4, "crop_to_even");
  const std::size_t n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  const std::size_t h2 = h - h % 2, w2 = w - w % 2;
  if (h2 == h && w2 == w) return input;
  if (h2 == 0 || w2 == 0) throw DimensionError("crop_to_even: nothing left of " + shape_string(x.shape()));
  Tensor out(Shape{n, h2, w2, c});
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t i = 0; i < h2; ++i) {
      std::copy_n(&x[((b * h + i) * w) * c], w2 * c, &out[((b * h2 + i) * w2) * c]);
    }
  }
  return input.graph().record(std::move(out), {input}, [=](Graph& g, const Tensor& go) {
    Tensor& gx = g.grad_buffer(input);
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t i = 0; i < h2; ++i) {
        for (std::size_t q = 0; q < w2 * c; ++q) gx[((b * h + i) * w) * c + q] += go[((b * h2 + i) * w2) * c + q];
      }
    }
  });
}

void reset_running_stats(const BatchNormBuffers& buffers) {
  if (!buffers.running_mean || !buffers.running_var || !buffers.ready) {
    throw UsageError("batchnorm buffers are not bound");
  }
  buffers.running_mean->value.fill(0.0);
  buffers.running_var->value.fill(1.0);
  buffers.ready->value.fill(1.0);
}

Var batchnorm(Var x, Var gamma, Var beta, const BatchNormBuffers& buffers, Mode mode,
              const BatchNormOptions& options) {
  const Tensor& in = x.value();
  if (in.rank() < 1) throw DimensionError("batchnorm: scalar input");
  const std::size_t c = in.dim(in.rank() - 1);
  const std::size_t m = in.size() / c;
  if (gamma.value().shape() != Shape{c} || beta.value().shape() != Shape{c}) {
    throw DimensionError("batchnorm: affine parameters must have shape (" + std::to_string(c) + ")");
  }
  if (!buffers.running_mean || !buffers.running_var || !buffers.ready) {
    throw UsageError("batchnorm buffers are not bound");
  }
  if (buffers.running_mean->value.shape() != Shape{c} || buffers.running_var->value.shape() != Shape{c}) {
    throw DimensionError("batchnorm: running statistics must have shape (" + std::to_string(c) + ")");
  }

  std::vector<double> mu(c, 0.0), var(c, 0.0);
  if (mode == Mode::train) {
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t ch = 0; ch < c; ++ch) mu[ch] += in[r * c + ch];
    }
    for (auto& v : mu) v /= static_cast<double>(m);
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double d = in[r * c + ch] - mu[ch];
        var[ch] += d * d;
      }
    }
    for (auto& v : var) v /= static_cast<double>(m);

    Tensor& rm = buffers.running_mean->value;
    Tensor& rv = buffers.running_var->value;
    const double unbias = m > 1 ? static_cast<double>(m) / static_cast<double>(m - 1) : 1.0;
    for (std::size_t ch = 0; ch < c; ++ch) {
      rm[ch] = (1.0 - options.momentum) * rm[ch] + options.momentum * mu[ch];
      rv[ch] = (1.0 - options.momentum) * rv[ch] + options.momentum * var[ch] * unbias;
    }
    buffers.ready->value.fill(1.0);
  } else {
    if (buffers.ready->value.item() == 0.0) {
      throw StateError("batchnorm: eval mode before running statistics were initialised");
    }
    for (std::size_t ch = 0; ch < c; ++ch) {
      mu[ch] = buffers.running_mean->value[ch];
      var[ch] = buffers.running_var->value[ch];
    }
  }

  std::vector<double> inv_std(c);
  for (std::size_t ch = 0; ch < c; ++ch) inv_std[ch] = 1.0 / std::sqrt(var[ch] + options.eps);

  const Tensor& gm = gamma.value();
  const Tensor& bt = beta.value();
  Tensor xhat(in.shape());
  Tensor out(in.shape());
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double v = (in[r * c + ch] - mu[ch]) * inv_std[ch];
      xhat[r * c + ch] = v;
      out[r * c + ch] = gm[ch] * v + bt[ch];
    }
  }

  const bool train = mode == Mode::train;
  return x.graph().record(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std), m, c, train](Graph& g,
                                                                                           const Tensor& go) {
        const Tensor& gm = g.value(gamma);
        if (g.requires_grad(beta) || g.requires_grad(gamma)) {
          std::vector<double> db(c, 0.0), dg(c, 0.0);
          for (std::size_t r = 0; r < m; ++r) {
            for (std::size_t ch = 0; ch < c; ++ch) {
              db[ch] += go[r * c + ch];
              dg[ch] += go[r * c + ch] * xhat[r * c + ch];
            }
          }
          if (g.requires_grad(beta)) {
            Tensor& gb = g.grad_buffer(beta);
            for (std::size_t ch = 0; ch < c; ++ch) gb[ch] += db[ch];
          }
          if (g.requires_grad(gamma)) {
            Tensor& gg = g.grad_buffer(gamma);
            for (std::size_t ch = 0; ch < c; ++ch) gg[ch] += dg[ch];
          }
        }
        if (!g.requires_grad(x)) return;
        Tensor& gx = g.grad_buffer(x);
        if (!train) {
          for (std::size_t r = 0; r < m; ++r) {
            for (std::size_t ch = 0; ch < c; ++ch) gx[r * c + ch] += go[r * c + ch] * gm[ch] * inv_std[ch];
          }
          return;
        }
        std::vector<double> sum_d(c, 0.0), sum_dx(c, 0.0);
        for (std::size_t r = 0; r < m; ++r) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            const double d = go[r * c + ch] * gm[ch];
            sum_d[ch] += d;
            sum_dx[ch] += d * xhat[r * c + ch];
          }
        }
        const double md = static_cast<double>(m);
        for (std::size_t r = 0; r < m; ++r) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            const double d = go[r * c + ch] * gm[ch];
            gx[r * c + ch] += inv_std[ch] / md * (md * d - sum_d[ch] - xhat[r * c + ch] * sum_dx[ch]);
          }
        }
      });
}

}  // namespace gccn
