#include "relic/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "relic/errors.hpp"

namespace relic {

namespace {

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

[[noreturn]] void dim_fail(const char* op, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) +
                       " and " + shape_str(b.shape()));
}

[[noreturn]] void dim_fail(const char* op, const Tensor& a, const char* why) {
  throw DimensionError(std::string(op) + ": " + why + " (got " + shape_str(a.shape()) + ")");
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->value.assign(shape_numel(impl->shape), 0.0);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::full(Shape shape, double v) {
  Tensor t = zeros(std::move(shape));
  std::fill(t.impl_->value.begin(), t.impl_->value.end(), v);
  return t;
}

Tensor Tensor::from(Shape shape, std::vector<double> value, bool requires_grad) {
  if (shape_numel(shape) != value.size())
    throw DimensionError("Tensor::from: value size " + std::to_string(value.size()) +
                         " does not match shape " + shape_str(shape));
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->value = std::move(value);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double v) { return from({1}, {v}); }

std::size_t Tensor::rows() const {
  const Shape& s = impl_->shape;
  if (s.size() == 1) return 1;
  if (s.size() == 2) return s[0];
  throw DimensionError("Tensor::rows: tensor is not 1-d or 2-d");
}

std::size_t Tensor::cols() const {
  const Shape& s = impl_->shape;
  if (s.size() == 1) return s[0];
  if (s.size() == 2) return s[1];
  throw DimensionError("Tensor::cols: tensor is not 1-d or 2-d");
}

double& Tensor::at(std::size_t r, std::size_t c) { return impl_->value[r * cols() + c]; }
double Tensor::at(std::size_t r, std::size_t c) const { return impl_->value[r * cols() + c]; }

std::span<double> Tensor::grad() {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->value.size(), 0.0);
  return impl_->grad;
}

void Tensor::zero_grad() {
  std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

double Tensor::item() const {
  if (size() != 1) throw DimensionError("Tensor::item: tensor has " + std::to_string(size()) + " elements");
  return impl_->value[0];
}

Tensor Tape::record(Tensor out, std::function<void()> back, bool any_input_grad) {
  if (any_input_grad) {
    out.set_requires_grad(true);
    nodes_.push_back(Node{std::move(back)});
  }
  return out;
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().size() > 2 || b.shape().size() > 2) dim_fail("matmul", a, b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) dim_fail("matmul", a, b);
  Tensor out = Tensor::zeros({m, n});
  const double* av = a.value().data();
  const double* bv = b.value().data();
  double* ov = out.value().data();
#pragma omp parallel for schedule(static) if (m > 8)
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double aik = av[i * k + kk];
      for (std::size_t j = 0; j < n; ++j) ov[i * n + j] += aik * bv[kk * n + j];
    }
  Tensor ac = a, bc = b;
  return record(
      out,
      [ac, bc, out]() mutable {
        if (!out.has_grad()) return;
        const std::size_t m = ac.rows(), k = ac.cols(), n = bc.cols();
        const double* og = out.grad().data();
        if (ac.requires_grad()) {
          double* ag = ac.grad().data();
          const double* bv = bc.value().data();
#pragma omp parallel for schedule(static) if (m > 8)
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
              const double gij = og[i * n + j];
              for (std::size_t kk = 0; kk < k; ++kk) ag[i * k + kk] += gij * bv[kk * n + j];
            }
        }
        if (bc.requires_grad()) {
          double* bg = bc.grad().data();
          const double* av = ac.value().data();
#pragma omp parallel for schedule(static) if (k > 8)
          for (std::size_t kk = 0; kk < k; ++kk)
            for (std::size_t i = 0; i < m; ++i) {
              const double aik = av[i * k + kk];
              for (std::size_t j = 0; j < n; ++j) bg[kk * n + j] += aik * og[i * n + j];
            }
        }
      },
      a.requires_grad() || b.requires_grad());
}

Tensor Tape::matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.shape().size() > 2 || b.shape().size() > 2) dim_fail("matmul_nt", a, b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) dim_fail("matmul_nt", a, b);
  Tensor out = Tensor::zeros({m, n});
  const double* av = a.value().data();
  const double* bv = b.value().data();
  double* ov = out.value().data();
#pragma omp parallel for schedule(static) if (m > 8)
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t kk = 0; kk < k; ++kk) acc += av[i * k + kk] * bv[j * k + kk];
      ov[i * n + j] = acc;
    }
  Tensor ac = a, bc = b;
  return record(
      out,
      [ac, bc, out]() mutable {
        if (!out.has_grad()) return;
        const std::size_t m = ac.rows(), k = ac.cols(), n = bc.rows();
        const double* og = out.grad().data();
        if (ac.requires_grad()) {
          double* ag = ac.grad().data();
          const double* bv = bc.value().data();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
              const double gij = og[i * n + j];
              for (std::size_t kk = 0; kk < k; ++kk) ag[i * k + kk] += gij * bv[j * k + kk];
            }
        }
        if (bc.requires_grad()) {
          double* bg = bc.grad().data();
          const double* av = ac.value().data();
          for (std::size_t j = 0; j < n; ++j)
            for (std::size_t i = 0; i < m; ++i) {
              const double gij = og[i * n + j];
              for (std::size_t kk = 0; kk < k; ++kk) bg[j * k + kk] += gij * av[i * k + kk];
            }
        }
      },
      a.requires_grad() || b.requires_grad());
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
  const bool same = a.shape() == b.shape();
  const bool rowcast = !same && b.rows() == 1 && a.shape().size() == 2 && b.cols() == a.cols();
  if (!same && !rowcast) dim_fail("add", a, b);
  Tensor out = Tensor::zeros(a.shape());
  const std::size_t n = a.size(), bc_n = b.size();
  const double* av = a.value().data();
  const double* bv = b.value().data();
  double* ov = out.value().data();
  for (std::size_t i = 0; i < n; ++i) ov[i] = av[i] + bv[i % bc_n];
  Tensor ac = a, bcpy = b;
  return record(
      out,
      [ac, bcpy, out, same]() mutable {
        if (!out.has_grad()) return;
        const double* og = out.grad().data();
        const std::size_t n = ac.size();
        if (ac.requires_grad()) {
          double* ag = ac.grad().data();
          for (std::size_t i = 0; i < n; ++i) ag[i] += og[i];
        }
        if (bcpy.requires_grad()) {
          double* bg = bcpy.grad().data();
          if (same) {
            for (std::size_t i = 0; i < n; ++i) bg[i] += og[i];
          } else {
            const std::size_t bn = bcpy.size();
            for (std::size_t i = 0; i < n; ++i) bg[i % bn] += og[i];
          }
        }
      },
      a.requires_grad() || b.requires_grad());
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) dim_fail("mul", a, b);
  Tensor out = Tensor::zeros(a.shape());
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) out.value()[i] = a.value()[i] * b.value()[i];
  Tensor ac = a, bc = b;
  return record(
      out,
      [ac, bc, out]() mutable {
        if (!out.has_grad()) return;
        const double* og = out.grad().data();
        const std::size_t n = ac.size();
        if (ac.requires_grad()) {
          double* ag = ac.grad().data();
          const double* bv = bc.value().data();
          for (std::size_t i = 0; i < n; ++i) ag[i] += og[i] * bv[i];
        }
        if (bc.requires_grad()) {
          double* bg = bc.grad().data();
          const double* av = ac.value().data();
          for (std::size_t i = 0; i < n; ++i) bg[i] += og[i] * av[i];
        }
      },
      a.requires_grad() || b.requires_grad());
}

Tensor Tape::scale(const Tensor& a, double c) {
  Tensor out = Tensor::zeros(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out.value()[i] = a.value()[i] * c;
  Tensor ac = a;
  return record(
      out,
      [ac, out, c]() mutable {
        if (!out.has_grad() || !ac.requires_grad()) return;
        const double* og = out.grad().data();
        double* ag = ac.grad().data();
        for (std::size_t i = 0; i < ac.size(); ++i) ag[i] += c * og[i];
      },
      a.requires_grad());
}

Tensor Tape::add_scalar(const Tensor& a, double c) {
  Tensor out = Tensor::zeros(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out.value()[i] = a.value()[i] + c;
  Tensor ac = a;
  return record(
      out,
      [ac, out]() mutable {
        if (!out.has_grad() || !ac.requires_grad()) return;
        const double* og = out.grad().data();
        double* ag = ac.grad().data();
        for (std::size_t i = 0; i < ac.size(); ++i) ag[i] += og[i];
      },
      a.requires_grad());
}

Tensor Tape::relu(const Tensor& a) {
  Tensor out = Tensor::zeros(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out.value()[i] = a.value()[i] > 0.0 ? a.value()[i] : 0.0;
  Tensor ac = a;
  return record(
      out,
      [ac, out]() mutable {
        if (!out.has_grad() || !ac.requires_grad()) return;
        const double* og = out.grad().data();
        const double* av = ac.value().data();
        double* ag = ac.grad().data();
        for (std::size_t i = 0; i < ac.size(); ++i)
          if (av[i] > 0.0) ag[i] += og[i];
      },
      a.requires_grad());
}

Tensor Tape::l2_normalize(const Tensor& a) {
  if (a.shape().size() > 2) dim_fail("l2_normalize", a, "expected 1-d or 2-d input");
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out = Tensor::zeros(a.shape());
  // tiny epsilon under the root keeps the zero row finite; for any row with
  // norm above ~1e-10 the unit-norm error it introduces is < 1e-10
  constexpr double kEps = 1e-30;
  for (std::size_t i = 0; i < m; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < n; ++j) sq += a.at(i, j) * a.at(i, j);
    const double norm = std::sqrt(sq + kEps);
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) = a.at(i, j) / norm;
  }
  Tensor ac = a;
  return record(
      out,
      [ac, out]() mutable {
        if (!out.has_grad() || !ac.requires_grad()) return;
        const std::size_t m = ac.rows(), n = ac.cols();
        double* ag = ac.grad().data();
        const double* og = out.grad().data();
        const double* av = ac.value().data();
        for (std::size_t i = 0; i < m; ++i) {
          double sq = 0.0, xg = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            sq += av[i * n + j] * av[i * n + j];
            xg += av[i * n + j] * og[i * n + j];
          }
          const double norm = std::sqrt(sq + kEps);
          const double n3 = norm * norm * norm;
          for (std::size_t j = 0; j < n; ++j)
            ag[i * n + j] += og[i * n + j] / norm - av[i * n + j] * xg / n3;
        }
      },
      a.requires_grad());
}

Tensor Tape::log_softmax(const Tensor& a) {
  if (a.shape().size() > 2) dim_fail("log_softmax", a, "expected 1-d or 2-d input");
  const std::size_t m = a.rows(), n = a.cols();
  if (n == 0) dim_fail("log_softmax", a, "empty rows");
  Tensor out = Tensor::zeros(a.shape());
  for (std::size_t i = 0; i < m; ++i) {
    double mx = a.at(i, 0);
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, a.at(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += std::exp(a.at(i, j) - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) = a.at(i, j) - lse;
  }
  Tensor ac = a;
  return record(
      out,
      [ac, out]() mutable {
        if (!out.has_grad() || !ac.requires_grad()) return;
        const std::size_t m = ac.rows(), n = ac.cols();
        double* ag = ac.grad().data();
        const double* og = out.grad().data();
        const double* ov = out.value().data();
        for (std::size_t i = 0; i < m; ++i) {
          double gsum = 0.0;
          for (std::size_t j = 0; j < n; ++j) gsum += og[i * n + j];
          for (std::size_t j = 0; j < n; ++j)
            ag[i * n + j] += og[i * n + j] - std::exp(ov[i * n + j]) * gsum;
        }
      },
      a.requires_grad());
}

Tensor Tape::gather_rows(const Tensor& a, std::vector<std::size_t> rows) {
  if (a.shape().size() != 2) dim_fail("gather_rows", a, "expected 2-d input");
  const std::size_t n = a.cols();
  for (auto r : rows)
    if (r >= a.rows())
      throw ContractError("gather_rows: row index " + std::to_string(r) + " out of range");
  Tensor out = Tensor::zeros({rows.size(), n});
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) = a.at(rows[i], j);
  Tensor ac = a;
  auto idx = std::make_shared<std::vector<std::size_t>>(std::move(rows));
  return record(
      out,
      [ac, out, idx]() mutable {
        if (!out.has_grad() || !ac.requires_grad()) return;
        const std::size_t n = ac.cols();
        double* ag = ac.grad().data();
        const double* og = out.grad().data();
        for (std::size_t i = 0; i < idx->size(); ++i)
          for (std::size_t j = 0; j < n; ++j) ag[(*idx)[i] * n + j] += og[i * n + j];
      },
      a.requires_grad());
}

Tensor Tape::gather_cols(const Tensor& a, std::vector<std::size_t> cols) {
  if (a.shape().size() > 2) dim_fail("gather_cols", a, "expected 1-d or 2-d input");
  const std::size_t m = a.rows(), n = a.cols();
  for (auto c : cols)
    if (c >= n) throw ContractError("gather_cols: column index " + std::to_string(c) + " out of range");
  Tensor out = Tensor::zeros({m, cols.size()});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) out.at(i, j) = a.value()[i * n + cols[j]];
  Tensor ac = a;
  auto idx = std::make_shared<std::vector<std::size_t>>(std::move(cols));
  return record(
      out,
      [ac, out, idx]() mutable {
        if (!out.has_grad() || !ac.requires_grad()) return;
        const std::size_t m = ac.rows(), n = ac.cols();
        double* ag = ac.grad().data();
        const double* og = out.grad().data();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < idx->size(); ++j)
            ag[i * n + (*idx)[j]] += og[i * idx->size() + j];
      },
      a.requires_grad());
}

Tensor Tape::sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.value()) acc += v;
  Tensor out = Tensor::scalar(acc);
  Tensor ac = a;
  return record(
      out,
      [ac, out]() mutable {
        if (!out.has_grad() || !ac.requires_grad()) return;
        const double g = out.grad()[0];
        double* ag = ac.grad().data();
        for (std::size_t i = 0; i < ac.size(); ++i) ag[i] += g;
      },
      a.requires_grad());
}

Tensor Tape::mean(const Tensor& a) {
  if (a.size() == 0) dim_fail("mean", a, "empty tensor");
  double acc = 0.0;
  for (double v : a.value()) acc += v;
  Tensor out = Tensor::scalar(acc / static_cast<double>(a.size()));
  Tensor ac = a;
  return record(
      out,
      [ac, out]() mutable {
        if (!out.has_grad() || !ac.requires_grad()) return;
        const double g = out.grad()[0] / static_cast<double>(ac.size());
        double* ag = ac.grad().data();
        for (std::size_t i = 0; i < ac.size(); ++i) ag[i] += g;
      },
      a.requires_grad());
}

Tensor Tape::stop_gradient(const Tensor& a) {
  Tensor out = Tensor::zeros(a.shape());
  std::copy(a.value().begin(), a.value().end(), out.value().begin());
  return out;  // requires_grad stays false; no node recorded
}

void Tape::backward(const Tensor& loss) {
  if (loss.size() != 1) throw DimensionError("backward: loss must be a single element tensor");
  if (backward_done_) throw ContractError("backward: tape already replayed");
  if (!std::isfinite(loss.item())) throw NumericError("backward: loss is not finite");
  backward_done_ = true;
  Tensor l = loss;
  l.grad()[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->back();
}

}  // namespace relic
