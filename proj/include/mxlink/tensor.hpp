// Minimal dense numeric engine with reverse-mode automatic differentiation.
//
// Tensors are row-major double matrices (vectors are 1xN, scalars 1x1) with
// an optional same-shape gradient buffer. Ops run eagerly and record a node
// on an explicit Tape; Tape::backward replays the records in reverse creation
// order, which is a reverse topological order by construction. A tape and its
// tensors belong to one worker; independent workers never share state.
//
// Every committed op output is checked for NaN/Inf and raises NumericError
// naming the producing operation.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "mxlink/debug.hpp"
#include "mxlink/error.hpp"
#include "mxlink/rng.hpp"

namespace mxlink {

enum class Mode { train, eval };

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(int rows, int cols, bool requires_grad = false) {
    Tensor t;
    t.p_ = std::make_shared<Impl>();
    t.p_->rows = rows;
    t.p_->cols = cols;
    t.p_->data.assign(static_cast<size_t>(rows) * cols, 0.0);
    t.p_->requires_grad = requires_grad;
    return t;
  }

  static Tensor from(int rows, int cols, std::vector<double> data,
                     bool requires_grad = false) {
    if (data.size() != static_cast<size_t>(rows) * cols)
      throw UsageError("tensor data length does not match shape");
    Tensor t = zeros(rows, cols, requires_grad);
    t.p_->data = std::move(data);
    t.check_finite("from");
    return t;
  }

  static Tensor scalar(double v, bool requires_grad = false) {
    return from(1, 1, {v}, requires_grad);
  }

  static Tensor row(std::vector<double> data, bool requires_grad = false) {
    const int n = static_cast<int>(data.size());
    return from(1, n, std::move(data), requires_grad);
  }

  bool defined() const { return static_cast<bool>(p_); }
  int rows() const { return p_->rows; }
  int cols() const { return p_->cols; }
  size_t numel() const { return p_->data.size(); }
  std::vector<int> shape() const { return {p_->rows, p_->cols}; }

  std::vector<double>& data() { return p_->data; }
  const std::vector<double>& data() const { return p_->data; }
  double& at(int r, int c) { return p_->data[static_cast<size_t>(r) * p_->cols + c]; }
  double at(int r, int c) const {
    return p_->data[static_cast<size_t>(r) * p_->cols + c];
  }

  /// Scalar value accessor.
  double value() const {
    if (numel() != 1) throw UsageError("value() on non-scalar tensor");
    return p_->data[0];
  }

  bool requires_grad() const { return p_->requires_grad; }
  void set_requires_grad(bool v) { p_->requires_grad = v; }

  /// Gradient buffer, allocated as zeros on first touch.
  std::vector<double>& grad() {
    if (p_->grad.empty()) p_->grad.assign(p_->data.size(), 0.0);
    return p_->grad;
  }
  const std::vector<double>& grad() const {
    return const_cast<Tensor*>(this)->grad();
  }
  bool grad_allocated() const { return !p_->grad.empty(); }
  void zero_grad() {
    if (!p_->grad.empty()) p_->grad.assign(p_->data.size(), 0.0);
  }

  /// Deep copy of values only (fresh identity, no grad, no tape history).
  Tensor clone() const {
    Tensor t = zeros(rows(), cols(), p_->requires_grad);
    t.p_->data = p_->data;
    return t;
  }

  /// Identity used by the tape for reachability bookkeeping.
  const void* id() const { return p_.get(); }

  void check_finite(const char* op) const {
    for (double v : p_->data)
      if (!std::isfinite(v))
        throw NumericError(std::string("non-finite value produced by op '") +
                           op + "'");
  }

 private:
  struct Impl {
    int rows = 0, cols = 0;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Impl> p_;
};

/// Ordered record of committed operations with the state their backward
/// functions need. Creation order is a topological order, so backward is a
/// single reverse sweep that visits each reachable node exactly once.
class Tape {
 public:
  void record(const char* op, const std::vector<Tensor>& inputs,
              const Tensor& output, std::function<void()> backward_fn) {
    output.check_finite(op);
    Node n;
    n.op = op;
    for (const auto& t : inputs) n.inputs.push_back(t.id());
    n.output = output.id();
    n.backward = std::move(backward_fn);
    nodes_.push_back(std::move(n));
  }

  void record(const char* op, std::initializer_list<Tensor> inputs,
              const Tensor& output, std::function<void()> backward_fn) {
    record(op, std::vector<Tensor>(inputs), output, std::move(backward_fn));
  }

  /// Populates gradients of everything the scalar `loss` depends on.
  void backward(const Tensor& loss) {
    if (loss.numel() != 1) throw UsageError("backward on non-scalar loss");
    std::unordered_set<const void*> active;
    active.insert(loss.id());
    const_cast<Tensor&>(loss).grad()[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      if (!active.count(it->output)) continue;
      it->backward();
      for (const void* in : it->inputs) active.insert(in);
    }
  }

  void clear() { nodes_.clear(); }
  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    const char* op;
    std::vector<const void*> inputs;
    const void* output;
    std::function<void()> backward;
  };
  std::vector<Node> nodes_;
};

namespace detail {

inline bool track(const Tensor& t) { return t.requires_grad(); }

inline void require_same_shape(const Tensor& a, const Tensor& b,
                               const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw UsageError(std::string(op) + ": shape mismatch (" +
                     std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()) + ")");
}

// C += A^(ta) * B^(tb), with A interpreted through the transpose flags.
inline void gemm_acc(bool ta, bool tb, const Tensor& A, const Tensor& B,
                     std::vector<double>& C, int n, int m, int k) {
  const auto& a = A.data();
  const auto& b = B.data();
  const int lda = A.cols(), ldb = B.cols();
  if (!ta && !tb) {
    for (int i = 0; i < n; ++i) {
      double* c = &C[static_cast<size_t>(i) * m];
      for (int kk = 0; kk < k; ++kk) {
        const double av = a[static_cast<size_t>(i) * lda + kk];
        const double* bp = &b[static_cast<size_t>(kk) * ldb];
        for (int j = 0; j < m; ++j) c[j] += av * bp[j];
      }
    }
  } else if (!ta && tb) {
    for (int i = 0; i < n; ++i) {
      const double* ap = &a[static_cast<size_t>(i) * lda];
      double* c = &C[static_cast<size_t>(i) * m];
      for (int j = 0; j < m; ++j) {
        const double* bp = &b[static_cast<size_t>(j) * ldb];
        double acc = 0.0;
        for (int kk = 0; kk < k; ++kk) acc += ap[kk] * bp[kk];
        c[j] += acc;
      }
    }
  } else if (ta && !tb) {
    for (int kk = 0; kk < k; ++kk) {
      const double* bp = &b[static_cast<size_t>(kk) * ldb];
      for (int i = 0; i < n; ++i) {
        const double av = a[static_cast<size_t>(kk) * lda + i];
        double* c = &C[static_cast<size_t>(i) * m];
        for (int j = 0; j < m; ++j) c[j] += av * bp[j];
      }
    }
  } else {
    for (int i = 0; i < n; ++i) {
      double* c = &C[static_cast<size_t>(i) * m];
      for (int j = 0; j < m; ++j) {
        double acc = 0.0;
        for (int kk = 0; kk < k; ++kk)
          acc += a[static_cast<size_t>(kk) * lda + i] *
                 b[static_cast<size_t>(j) * ldb + kk];
        c[j] += acc;
      }
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// C = A^(ta) . B^(tb). Gradients: dA = dC.B^T routed through the flags.
inline Tensor matmul(Tape& tape, const Tensor& A, const Tensor& B,
                     bool trans_a = false, bool trans_b = false) {
  const int n = trans_a ? A.cols() : A.rows();
  const int ka = trans_a ? A.rows() : A.cols();
  const int kb = trans_b ? B.cols() : B.rows();
  const int m = trans_b ? B.rows() : B.cols();
  if (ka != kb)
    throw UsageError("matmul: inner dimensions disagree (" +
                     std::to_string(ka) + " vs " + std::to_string(kb) + ")");
  Tensor C = Tensor::zeros(n, m, detail::track(A) || detail::track(B));
  detail::gemm_acc(trans_a, trans_b, A, B, C.data(), n, m, ka);
  tape.record("matmul", {A, B}, C, [A, B, C, trans_a, trans_b, n, m, ka]() {
    Tensor Am = A, Bm = B, Cm = C;  // non-const views of the shared buffers
    if (Am.requires_grad()) {
      Tensor dC = Tensor::from(n, m, Cm.grad());
      // dA (or dA^T when trans_a) from dC and B.
      if (!trans_a) {
        detail::gemm_acc(false, !trans_b, dC, Bm, Am.grad(), n, ka, m);
      } else {
        // dA^T has shape (ka x n): accumulate into A's grad via B . dC^T.
        detail::gemm_acc(trans_b, true, Bm, dC, Am.grad(), ka, n, m);
      }
    }
    if (Bm.requires_grad()) {
      Tensor dC = Tensor::from(n, m, Cm.grad());
      if (!trans_b) {
        detail::gemm_acc(!trans_a, false, Am, dC, Bm.grad(), ka, m, n);
      } else {
        detail::gemm_acc(true, trans_a, dC, Am, Bm.grad(), m, ka, n);
      }
    }
  });
  return C;
}

inline Tensor add(Tape& tape, const Tensor& A, const Tensor& B) {
  detail::require_same_shape(A, B, "add");
  Tensor C = Tensor::zeros(A.rows(), A.cols(),
                           detail::track(A) || detail::track(B));
  for (size_t i = 0; i < C.numel(); ++i) C.data()[i] = A.data()[i] + B.data()[i];
  tape.record("add", {A, B}, C, [A, B, C]() {
    Tensor Am = A, Bm = B, Cm = C;
    if (Am.requires_grad())
      for (size_t i = 0; i < Cm.numel(); ++i) Am.grad()[i] += Cm.grad()[i];
    if (Bm.requires_grad())
      for (size_t i = 0; i < Cm.numel(); ++i) Bm.grad()[i] += Cm.grad()[i];
  });
  return C;
}

/// A (n x m) + broadcast row vector b (1 x m).
inline Tensor add_rowvec(Tape& tape, const Tensor& A, const Tensor& b) {
  if (b.rows() != 1 || b.cols() != A.cols())
    throw UsageError("add_rowvec: vector shape mismatch");
  Tensor C = Tensor::zeros(A.rows(), A.cols(),
                           detail::track(A) || detail::track(b));
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < A.cols(); ++j)
      C.at(i, j) = A.at(i, j) + b.at(0, j);
  tape.record("add_rowvec", {A, b}, C, [A, b, C]() {
    Tensor Am = A, bm = b, Cm = C;
    if (Am.requires_grad())
      for (size_t i = 0; i < Cm.numel(); ++i) Am.grad()[i] += Cm.grad()[i];
    if (bm.requires_grad())
      for (int i = 0; i < Cm.rows(); ++i)
        for (int j = 0; j < Cm.cols(); ++j)
          bm.grad()[static_cast<size_t>(j)] +=
              Cm.grad()[static_cast<size_t>(i) * Cm.cols() + j];
  });
  return C;
}

inline Tensor scale(Tape& tape, const Tensor& A, double c) {
  Tensor C = Tensor::zeros(A.rows(), A.cols(), detail::track(A));
  for (size_t i = 0; i < C.numel(); ++i) C.data()[i] = c * A.data()[i];
  tape.record("scale", {A}, C, [A, C, c]() {
    Tensor Am = A, Cm = C;
    if (Am.requires_grad())
      for (size_t i = 0; i < Cm.numel(); ++i) Am.grad()[i] += c * Cm.grad()[i];
  });
  return C;
}

/// Elementwise (Hadamard) product.
inline Tensor mul(Tape& tape, const Tensor& A, const Tensor& B) {
  detail::require_same_shape(A, B, "mul");
  Tensor C = Tensor::zeros(A.rows(), A.cols(),
                           detail::track(A) || detail::track(B));
  for (size_t i = 0; i < C.numel(); ++i) C.data()[i] = A.data()[i] * B.data()[i];
  tape.record("mul", {A, B}, C, [A, B, C]() {
    Tensor Am = A, Bm = B, Cm = C;
    if (Am.requires_grad())
      for (size_t i = 0; i < Cm.numel(); ++i)
        Am.grad()[i] += Bm.data()[i] * Cm.grad()[i];
    if (Bm.requires_grad())
      for (size_t i = 0; i < Cm.numel(); ++i)
        Bm.grad()[i] += Am.data()[i] * Cm.grad()[i];
  });
  return C;
}

/// Concatenation along the last axis: (n x c1) ++ (n x c2) -> (n x (c1+c2)).
inline Tensor concat_cols(Tape& tape, const Tensor& A, const Tensor& B) {
  if (A.rows() != B.rows()) throw UsageError("concat: row count mismatch");
  const int c1 = A.cols(), c2 = B.cols();
  Tensor C = Tensor::zeros(A.rows(), c1 + c2,
                           detail::track(A) || detail::track(B));
  for (int i = 0; i < A.rows(); ++i) {
    for (int j = 0; j < c1; ++j) C.at(i, j) = A.at(i, j);
    for (int j = 0; j < c2; ++j) C.at(i, c1 + j) = B.at(i, j);
  }
  tape.record("concat", {A, B}, C, [A, B, C, c1, c2]() {
    Tensor Am = A, Bm = B, Cm = C;
    for (int i = 0; i < Cm.rows(); ++i) {
      if (Am.requires_grad())
        for (int j = 0; j < c1; ++j)
          Am.grad()[static_cast<size_t>(i) * c1 + j] +=
              Cm.grad()[static_cast<size_t>(i) * (c1 + c2) + j];
      if (Bm.requires_grad())
        for (int j = 0; j < c2; ++j)
          Bm.grad()[static_cast<size_t>(i) * c2 + j] +=
              Cm.grad()[static_cast<size_t>(i) * (c1 + c2) + c1 + j];
    }
  });
  return C;
}

/// Vertical stack of equal-width blocks.
inline Tensor stack_rows(Tape& tape, const std::vector<Tensor>& parts) {
  if (parts.empty()) throw UsageError("stack_rows: empty input");
  const int cols = parts.front().cols();
  int rows = 0;
  bool track = false;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw UsageError("stack_rows: column mismatch");
    rows += p.rows();
    track = track || detail::track(p);
  }
  Tensor C = Tensor::zeros(rows, cols, track);
  int r = 0;
  for (const auto& p : parts) {
    std::copy(p.data().begin(), p.data().end(),
              C.data().begin() + static_cast<size_t>(r) * cols);
    r += p.rows();
  }
  Tensor Cc = C;
  std::vector<Tensor> held = parts;
  tape.record("stack_rows", held, C, [held, Cc, cols]() {
    Tensor Cm = Cc;
    int r = 0;
    for (const auto& p : held) {
      Tensor pm = p;
      if (pm.requires_grad())
        for (size_t i = 0; i < pm.numel(); ++i)
          pm.grad()[i] += Cm.grad()[static_cast<size_t>(r) * cols + i];
      r += p.rows();
    }
  });
  return C;
}

inline Tensor slice_rows(Tape& tape, const Tensor& A, int begin, int count) {
  if (begin < 0 || count < 0 || begin + count > A.rows())
    throw UsageError("slice_rows: range out of bounds");
  const int cols = A.cols();
  Tensor C = Tensor::zeros(count, cols, detail::track(A));
  std::copy(A.data().begin() + static_cast<size_t>(begin) * cols,
            A.data().begin() + static_cast<size_t>(begin + count) * cols,
            C.data().begin());
  tape.record("slice_rows", {A}, C, [A, C, begin, cols]() {
    Tensor Am = A, Cm = C;
    if (Am.requires_grad())
      for (size_t i = 0; i < Cm.numel(); ++i)
        Am.grad()[static_cast<size_t>(begin) * cols + i] += Cm.grad()[i];
  });
  return C;
}

/// Row gather with scatter-add backward (embedding-style lookup).
inline Tensor gather_rows(Tape& tape, const Tensor& A,
                          const std::vector<int>& idx) {
  const int cols = A.cols();
  Tensor C = Tensor::zeros(static_cast<int>(idx.size()), cols,
                           detail::track(A));
  for (size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] < 0 || idx[r] >= A.rows())
      throw UsageError("gather_rows: index out of range");
    std::copy(A.data().begin() + static_cast<size_t>(idx[r]) * cols,
              A.data().begin() + static_cast<size_t>(idx[r] + 1) * cols,
              C.data().begin() + r * cols);
  }
  tape.record("gather_rows", {A}, C, [A, C, idx, cols]() {
    Tensor Am = A, Cm = C;
    if (Am.requires_grad())
      for (size_t r = 0; r < idx.size(); ++r)
        for (int j = 0; j < cols; ++j)
          Am.grad()[static_cast<size_t>(idx[r]) * cols + j] +=
              Cm.grad()[r * static_cast<size_t>(cols) + j];
  });
  return C;
}

/// Numerically stable row softmax. Every normalized row is reported to the
/// debug recorder when one is installed.
inline Tensor softmax_rows(Tape& tape, const Tensor& A) {
  Tensor P = Tensor::zeros(A.rows(), A.cols(), detail::track(A));
  for (int i = 0; i < A.rows(); ++i) {
    double mx = A.at(i, 0);
    for (int j = 1; j < A.cols(); ++j) mx = std::max(mx, A.at(i, j));
    double z = 0.0;
    for (int j = 0; j < A.cols(); ++j) z += std::exp(A.at(i, j) - mx);
    double sum = 0.0;
    for (int j = 0; j < A.cols(); ++j) {
      P.at(i, j) = std::exp(A.at(i, j) - mx) / z;
      sum += P.at(i, j);
    }
    if (auto* rec = row_sum_recorder()) rec->note(sum);
  }
  tape.record("softmax", {A}, P, [A, P]() {
    Tensor Am = A, Pm = P;
    if (!Am.requires_grad()) return;
    for (int i = 0; i < Pm.rows(); ++i) {
      double dot = 0.0;
      for (int j = 0; j < Pm.cols(); ++j)
        dot += Pm.grad()[static_cast<size_t>(i) * Pm.cols() + j] * Pm.at(i, j);
      for (int j = 0; j < Pm.cols(); ++j)
        Am.grad()[static_cast<size_t>(i) * Pm.cols() + j] +=
            Pm.at(i, j) *
            (Pm.grad()[static_cast<size_t>(i) * Pm.cols() + j] - dot);
    }
  });
  return P;
}

inline Tensor sigmoid(Tape& tape, const Tensor& A) {
  Tensor C = Tensor::zeros(A.rows(), A.cols(), detail::track(A));
  for (size_t i = 0; i < C.numel(); ++i) {
    const double x = A.data()[i];
    C.data()[i] = x >= 0 ? 1.0 / (1.0 + std::exp(-x))
                         : std::exp(x) / (1.0 + std::exp(x));
  }
  tape.record("sigmoid", {A}, C, [A, C]() {
    Tensor Am = A, Cm = C;
    if (Am.requires_grad())
      for (size_t i = 0; i < Cm.numel(); ++i) {
        const double y = Cm.data()[i];
        Am.grad()[i] += y * (1.0 - y) * Cm.grad()[i];
      }
  });
  return C;
}

inline Tensor leaky_relu(Tape& tape, const Tensor& A, double slope = 0.2) {
  Tensor C = Tensor::zeros(A.rows(), A.cols(), detail::track(A));
  for (size_t i = 0; i < C.numel(); ++i) {
    const double x = A.data()[i];
    C.data()[i] = x > 0 ? x : slope * x;
  }
  tape.record("leaky_relu", {A}, C, [A, C, slope]() {
    Tensor Am = A, Cm = C;
    if (Am.requires_grad())
      for (size_t i = 0; i < Cm.numel(); ++i)
        Am.grad()[i] += (Am.data()[i] > 0 ? 1.0 : slope) * Cm.grad()[i];
  });
  return C;
}

inline Tensor elu(Tape& tape, const Tensor& A, double alpha = 1.0) {
  Tensor C = Tensor::zeros(A.rows(), A.cols(), detail::track(A));
  for (size_t i = 0; i < C.numel(); ++i) {
    const double x = A.data()[i];
    C.data()[i] = x > 0 ? x : alpha * std::expm1(x);
  }
  tape.record("elu", {A}, C, [A, C, alpha]() {
    Tensor Am = A, Cm = C;
    if (Am.requires_grad())
      for (size_t i = 0; i < Cm.numel(); ++i) {
        const double x = Am.data()[i];
        Am.grad()[i] += (x > 0 ? 1.0 : alpha * std::exp(x)) * Cm.grad()[i];
      }
  });
  return C;
}

/// Inverted dropout: train mode zeroes entries with probability `rate` and
/// scales survivors by 1/(1-rate); eval mode is the identity.
inline Tensor dropout(Tape& tape, const Tensor& A, double rate, Mode mode,
                      Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw UsageError("dropout rate must lie in [0, 1)");
  if (mode == Mode::eval || rate == 0.0) return A;
  const double keep = 1.0 - rate;
  std::vector<double> mask(A.numel());
  for (auto& m : mask) m = rng.uniform() < rate ? 0.0 : 1.0 / keep;
  Tensor C = Tensor::zeros(A.rows(), A.cols(), detail::track(A));
  for (size_t i = 0; i < C.numel(); ++i) C.data()[i] = A.data()[i] * mask[i];
  tape.record("dropout", {A}, C, [A, C, mask]() {
    Tensor Am = A, Cm = C;
    if (Am.requires_grad())
      for (size_t i = 0; i < Cm.numel(); ++i)
        Am.grad()[i] += mask[i] * Cm.grad()[i];
  });
  return C;
}

inline Tensor sum_all(Tape& tape, const Tensor& A) {
  double s = 0.0;
  for (double v : A.data()) s += v;
  Tensor C = Tensor::zeros(1, 1, detail::track(A));
  C.data()[0] = s;
  tape.record("sum_all", {A}, C, [A, C]() {
    Tensor Am = A, Cm = C;
    if (Am.requires_grad())
      for (size_t i = 0; i < Am.numel(); ++i) Am.grad()[i] += Cm.grad()[0];
  });
  return C;
}

/// Mean over the batch of -w_y [y ln p + (1-y) ln(1-p)], with probabilities
/// clamped to [1e-7, 1-1e-7]. Gradient is zero where the clamp is active.
inline Tensor weighted_bce(Tape& tape, const Tensor& probs,
                           const std::vector<int>& labels,
                           const std::vector<double>& weights) {
  const size_t n = probs.numel();
  if (labels.size() != n || weights.size() != n)
    throw UsageError("weighted_bce: probs/labels/weights length mismatch");
  if (n == 0) throw UsageError("weighted_bce: empty batch");
  constexpr double kEps = 1e-7;
  double loss = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double p = std::min(1.0 - kEps, std::max(kEps, probs.data()[i]));
    loss -= weights[i] * (labels[i] == 1 ? std::log(p) : std::log(1.0 - p));
  }
  loss /= static_cast<double>(n);
  Tensor C = Tensor::zeros(1, 1, detail::track(probs));
  C.data()[0] = loss;
  tape.record("weighted_bce", {probs}, C, [probs, C, labels, weights, n]() {
    Tensor Pm = probs, Cm = C;
    if (!Pm.requires_grad()) return;
    const double g = Cm.grad()[0] / static_cast<double>(n);
    for (size_t i = 0; i < n; ++i) {
      const double p = Pm.data()[i];
      if (p <= kEps || p >= 1.0 - kEps) continue;  // clamped: flat
      const double y = labels[i];
      Pm.grad()[i] += g * weights[i] * (p - y) / (p * (1.0 - p));
    }
  });
  return C;
}

}  // namespace mxlink
