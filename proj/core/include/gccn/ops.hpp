#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gccn/autodiff.hpp"

namespace gccn {

enum class Mode { train, eval };

// ---- elementwise and reductions -------------------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var sum(Var a);
Var mean(Var a);
Var relu(Var a);
Var log(Var a);
Var reshape(Var a, Shape shape);

// [n, d...] -> [n, prod(d...)], row-major over the trailing axes.
Var flatten(Var a);

// ---- matrices (rank 2, rows are samples) ----------------------------------

Var matmul(Var a, Var b);
// x[n,in] * w[in,out] + b[out]
Var linear(Var x, Var w, Var b);
Var concat_cols(Var a, Var b);
Var slice_rows(Var a, std::size_t begin, std::size_t end);
// Per-row Euclidean (Frobenius) norm, [n,d] -> [n,1].
Var row_norm(Var a);
// max(a, floor) with gradient only where a >= floor.
Var clamp_min(Var a, double floor);
// a[n,d] / s[n,1]
Var div_rows(Var a, Var s);

// Row-wise softmax / log-softmax of a rank-1 or rank-2 tensor.
Var softmax(Var logits);
Var log_softmax(Var logits);
// Mean negative log-likelihood of labels under row log-probabilities.
Var nll(Var log_probs, std::span<const int> labels);
// nll(log_softmax(logits)); gradient per row is (p - onehot(y)) / n.
Var cross_entropy(Var logits, std::span<const int> labels);

// ---- convolutional blocks -------------------------------------------------

// Valid (no padding) convolution. input is [h,w,cin] or [n,h,w,cin]; kernel is
// [kh,kw,cin,cout]. Each output cell sums over kernel rows, then columns, then
// channels, in that order.
Var conv2d(Var input, Var kernel, std::size_t stride = 1);

// 2x2 max pooling with stride 2 over [h,w,c] or [n,h,w,c]. Odd spatial dims are
// rejected. Ties resolve to the first cell in row-major window order.
Var maxpool2d(Var input);

// Drops the last row and/or column of [n,h,w,c] so both spatial dims are even.
Var crop_to_even(Var input);

struct BatchNormOptions {
  double eps = 1e-5;
  double momentum = 0.1;
};

// Running statistics of one batch-norm layer, kept as non-trainable buffers.
// `ready` is a scalar flag set once the statistics hold usable values.
struct BatchNormBuffers {
  Parameter* running_mean = nullptr;
  Parameter* running_var = nullptr;
  Parameter* ready = nullptr;
};

// Normalises every channel (last axis) over all other axes. In train mode the
// batch statistics are used and the running buffers updated; eval mode uses
// the running buffers and throws StateError if they were never initialised.
Var batchnorm(Var x, Var gamma, Var beta, const BatchNormBuffers& buffers, Mode mode,
              const BatchNormOptions& options = {});

// Sets running mean 0, variance 1, and marks the buffers ready.
void reset_running_stats(const BatchNormBuffers& buffers);

// ---- plain helpers --------------------------------------------------------

std::vector<double> softmax(std::span<const double> logits);
// Index of the largest value; the lowest index wins ties.
std::size_t argmax(std::span<const double> values);

}  // namespace gccn
