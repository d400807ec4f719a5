// SPDX-License-Identifier: Apache-2.0
#include "ctkd/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ctkd/errors.hpp"

namespace ctkd::ad {

namespace {

enum class Bcast { same, scalar, column };

struct BinaryLayout {
  Shape out;
  Bcast a = Bcast::same;
  Bcast b = Bcast::same;
  std::size_t cols = 1;

  static std::size_t index(Bcast mode, std::size_t flat, std::size_t cols) {
    switch (mode) {
      case Bcast::same: return flat;
      case Bcast::scalar: return 0;
      case Bcast::column: return flat / cols;
    }
    return flat;
  }
  std::size_t ia(std::size_t flat) const { return index(a, flat, cols); }
  std::size_t ib(std::size_t flat) const { return index(b, flat, cols); }
};

bool is_column_of(const Tensor& col, const Tensor& mat) {
  return col.rank() == 2 && mat.rank() == 2 && col.shape()[1] == 1 &&
         col.shape()[0] == mat.shape()[0];
}

BinaryLayout layout(const Tensor& a, const Tensor& b, const char* op) {
  BinaryLayout l;
  if (a.shape() == b.shape()) {
    l.out = a.shape();
  } else if (a.numel() == 1) {
    l.out = b.shape();
    l.a = Bcast::scalar;
  } else if (b.numel() == 1) {
    l.out = a.shape();
    l.b = Bcast::scalar;
  } else if (is_column_of(a, b)) {
    l.out = b.shape();
    l.a = Bcast::column;
  } else if (is_column_of(b, a)) {
    l.out = a.shape();
    l.b = Bcast::column;
  } else {
    throw ShapeError(std::string(op) + ": incompatible shapes " + to_string(a.shape()) + " and " +
                     to_string(b.shape()));
  }
  l.cols = l.out.size() >= 2 ? numel(l.out) / l.out[0] : numel(l.out);
  return l;
}

Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }

template <typename Fwd, typename Bwd>
Tensor unary(const Tensor& x, const char* op, Fwd fwd, Bwd dydx) {
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
  return Tensor::make_result(x.shape(), std::move(out), op, {x}, [dydx](Node& self) {
    Node& px = parent(self, 0);
    auto& g = px.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] += self.grad[i] * dydx(px.values[i], self.values[i]);
    }
  });
}

void check_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a 2-d tensor, got " + to_string(t.shape()));
  }
}

// Per-row temperature accessor for scalar or B x 1 temperatures.
struct RowTemperature {
  std::span<const double> values;
  bool per_row = false;
  double operator()(std::size_t r) const { return per_row ? values[r] : values[0]; }
};

RowTemperature row_temperature(const Tensor& x, const Tensor& t, const char* op) {
  RowTemperature rt{t.values(), false};
  if (t.numel() == 1) {
    rt.per_row = false;
  } else if (is_column_of(t, x)) {
    rt.per_row = true;
  } else {
    throw ShapeError(std::string(op) + ": temperature must be a scalar or " +
                     std::to_string(x.rows()) + "x1, got " + to_string(t.shape()));
  }
  for (double v : rt.values) {
    if (!(v > 0.0)) throw DomainError(std::string(op) + ": temperature must be positive");
  }
  return rt;
}

// dz holds the gradient wrt z = x / t for one row; spreads it to x and t.
void scaled_logit_backward(Node& px, Node& pt, bool per_row, std::size_t r, std::size_t cols,
                           std::span<const double> dz) {
  const double t = per_row ? pt.values[r] : pt.values[0];
  const double* xr = px.values.data() + r * cols;
  if (px.requires_grad) {
    auto& gx = px.grad_buffer();
    for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += dz[c] / t;
  }
  if (pt.requires_grad) {
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += dz[c] * xr[c];
    pt.grad_buffer()[per_row ? r : 0] += -acc / (t * t);
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  const auto l = layout(a, b, "add");
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(numel(l.out));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[l.ia(i)] + bv[l.ib(i)];
  return Tensor::make_result(l.out, std::move(out), "add", {a, b}, [l](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (pa.requires_grad) pa.grad_buffer()[l.ia(i)] += self.grad[i];
      if (pb.requires_grad) pb.grad_buffer()[l.ib(i)] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  const auto l = layout(a, b, "sub");
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(numel(l.out));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[l.ia(i)] - bv[l.ib(i)];
  return Tensor::make_result(l.out, std::move(out), "sub", {a, b}, [l](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (pa.requires_grad) pa.grad_buffer()[l.ia(i)] += self.grad[i];
      if (pb.requires_grad) pb.grad_buffer()[l.ib(i)] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const auto l = layout(a, b, "mul");
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(numel(l.out));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[l.ia(i)] * bv[l.ib(i)];
  return Tensor::make_result(l.out, std::move(out), "mul", {a, b}, [l](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double g = self.grad[i];
      if (pa.requires_grad) pa.grad_buffer()[l.ia(i)] += g * pb.values[l.ib(i)];
      if (pb.requires_grad) pb.grad_buffer()[l.ib(i)] += g * pa.values[l.ia(i)];
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      x, "scale", [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Tensor add_constant(const Tensor& x, double c) {
  return unary(
      x, "add_constant", [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, "sigmoid",
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& x) {
  return unary(
      x, "exp", [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  for (double v : x.values()) {
    if (!(v > 0.0)) throw DomainError("log: argument must be positive");
  }
  return unary(
      x, "log", [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor square(const Tensor& x) {
  return unary(
      x, "square", [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  return Tensor::make_result({1}, {acc}, "sum", {x}, [](Node& self) {
    auto& g = parent(self, 0).grad_buffer();
    for (auto& gi : g) gi += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  const double n = static_cast<double>(x.numel());
  return Tensor::make_result({1}, {acc / n}, "mean", {x}, [n](Node& self) {
    auto& g = parent(self, 0).grad_buffer();
    for (auto& gi : g) gi += self.grad[0] / n;
  });
}

Tensor sum_rows(const Tensor& x) {
  const std::size_t rows = x.rows();
  const std::size_t cols = x.cols();
  const auto xv = x.values();
  std::vector<double> out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r] += xv[r * cols + c];
  }
  return Tensor::make_result({rows, 1}, std::move(out), "sum_rows", {x}, [cols](Node& self) {
    auto& g = parent(self, 0).grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i / cols];
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_matrix(a, "matmul");
  check_matrix(b, "matmul");
  const std::size_t m = a.shape()[0];
  const std::size_t k = a.shape()[1];
  const std::size_t n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw ShapeError("matmul: inner dimensions disagree, " + to_string(a.shape()) + " . " +
                     to_string(b.shape()));
  }
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = bv.data() + p * n;
      double* orow = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  return Tensor::make_result({m, n}, std::move(out), "matmul", {a, b}, [m, k, n](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    const auto& g = self.grad;
    if (pa.requires_grad) {
      // dA = G . B^T
      auto& ga = pa.grad_buffer();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * pb.values[p * n + j];
          ga[i * k + p] += acc;
        }
      }
    }
    if (pb.requires_grad) {
      // dB = A^T . G
      auto& gb = pb.grad_buffer();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = pa.values[i * k + p];
          if (aip == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
        }
      }
    }
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  check_matrix(x, "add_bias");
  const std::size_t rows = x.shape()[0];
  const std::size_t cols = x.shape()[1];
  if (bias.numel() != cols) {
    throw ShapeError("add_bias: bias of " + std::to_string(bias.numel()) + " entries for " +
                     std::to_string(cols) + " columns");
  }
  const auto xv = x.values();
  const auto bv = bias.values();
  std::vector<double> out(xv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = xv[r * cols + c] + bv[c];
  }
  return Tensor::make_result(x.shape(), std::move(out), "add_bias", {x, bias}, [cols](Node& self) {
    Node& px = parent(self, 0);
    Node& pb = parent(self, 1);
    if (px.requires_grad) {
      auto& gx = px.grad_buffer();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      auto& gb = pb.grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) gb[i % cols] += self.grad[i];
    }
  });
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  check_matrix(a, "concat_rows");
  if (a.shape() != b.shape()) {
    throw ShapeError("concat_rows: shapes differ, " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
  const std::size_t rows = a.shape()[0];
  const std::size_t cols = a.shape()[1];
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(rows * 2 * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(av.data() + r * cols, cols, out.data() + r * 2 * cols);
    std::copy_n(bv.data() + r * cols, cols, out.data() + r * 2 * cols + cols);
  }
  return Tensor::make_result({rows, 2 * cols}, std::move(out), "concat_rows", {a, b},
                             [rows, cols](Node& self) {
                               Node& pa = parent(self, 0);
                               Node& pb = parent(self, 1);
                               for (std::size_t r = 0; r < rows; ++r) {
                                 for (std::size_t c = 0; c < cols; ++c) {
                                   if (pa.requires_grad) {
                                     pa.grad_buffer()[r * cols + c] += self.grad[r * 2 * cols + c];
                                   }
                                   if (pb.requires_grad) {
                                     pb.grad_buffer()[r * cols + c] +=
                                         self.grad[r * 2 * cols + cols + c];
                                   }
                                 }
                               }
                             });
}

Tensor softmax(const Tensor& x, const Tensor& temperature) {
  check_matrix(x, "softmax");
  const auto rt = row_temperature(x, temperature, "softmax");
  const std::size_t rows = x.shape()[0];
  const std::size_t cols = x.shape()[1];
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double t = rt(r);
    const double* xr = xv.data() + r * cols;
    double* yr = out.data() + r * cols;
    const double mx = *std::max_element(xr, xr + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      yr[c] = std::exp((xr[c] - mx) / t);
      z += yr[c];
    }
    for (std::size_t c = 0; c < cols; ++c) yr[c] /= z;
  }
  const bool per_row = rt.per_row;
  return Tensor::make_result(
      x.shape(), std::move(out), "softmax", {x, temperature},
      [rows, cols, per_row](Node& self) {
        Node& px = parent(self, 0);
        Node& pt = parent(self, 1);
        std::vector<double> dz(cols);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* y = self.values.data() + r * cols;
          const double* g = self.grad.data() + r * cols;
          double dot = 0.0;
          for (std::size_t c = 0; c < cols; ++c) dot += g[c] * y[c];
          for (std::size_t c = 0; c < cols; ++c) dz[c] = y[c] * (g[c] - dot);
          scaled_logit_backward(px, pt, per_row, r, cols, dz);
        }
      });
}

Tensor softmax(const Tensor& x, double temperature) {
  return softmax(x, Tensor::scalar(temperature));
}

Tensor log_softmax(const Tensor& x, const Tensor& temperature) {
  check_matrix(x, "log_softmax");
  const auto rt = row_temperature(x, temperature, "log_softmax");
  const std::size_t rows = x.shape()[0];
  const std::size_t cols = x.shape()[1];
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double t = rt(r);
    const double* xr = xv.data() + r * cols;
    double* yr = out.data() + r * cols;
    const double mx = *std::max_element(xr, xr + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      yr[c] = (xr[c] - mx) / t;
      z += std::exp(yr[c]);
    }
    const double lz = std::log(z);
    for (std::size_t c = 0; c < cols; ++c) yr[c] -= lz;
  }
  const bool per_row = rt.per_row;
  return Tensor::make_result(
      x.shape(), std::move(out), "log_softmax", {x, temperature},
      [rows, cols, per_row](Node& self) {
        Node& px = parent(self, 0);
        Node& pt = parent(self, 1);
        std::vector<double> dz(cols);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* ly = self.values.data() + r * cols;
          const double* g = self.grad.data() + r * cols;
          double gsum = 0.0;
          for (std::size_t c = 0; c < cols; ++c) gsum += g[c];
          for (std::size_t c = 0; c < cols; ++c) dz[c] = g[c] - std::exp(ly[c]) * gsum;
          scaled_logit_backward(px, pt, per_row, r, cols, dz);
        }
      });
}

Tensor log_softmax(const Tensor& x, double temperature) {
  return log_softmax(x, Tensor::scalar(temperature));
}

namespace {

// e^-v - 1 + v. Taylor series near zero, where expm1(-v) + v cancels.
double exp_gap(double v) {
  if (std::abs(v) >= 0.5) return std::expm1(-v) + v;
  double term = v * v / 2.0;
  double acc = term;
  for (int k = 3; k <= 18; ++k) {
    term *= -v / k;
    acc += term;
  }
  return acc;
}

}  // namespace

Tensor kl_div_rows(const Tensor& p, const Tensor& q, const Tensor& temperature) {
  check_matrix(p, "kl_div_rows");
  if (p.shape() != q.shape()) {
    throw ShapeError("kl_div_rows: shapes " + to_string(p.shape()) + " and " +
                     to_string(q.shape()));
  }
  const auto rt = row_temperature(p, temperature, "kl_div_rows");
  const std::size_t rows = p.shape()[0];
  const std::size_t cols = p.shape()[1];
  const auto pv = p.values();
  const auto qv = q.values();

  // Saved for backward: p-probabilities, centred gaps d', and S per row.
  std::vector<double> prob(rows * cols), gap(rows * cols), big_s(rows), out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double t = rt(r);
    const double* x = pv.data() + r * cols;
    const double* y = qv.data() + r * cols;
    double* pr = prob.data() + r * cols;
    double* dr = gap.data() + r * cols;
    const double mx = *std::max_element(x, x + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      pr[c] = std::exp((x[c] - mx) / t);
      z += pr[c];
    }
    double m = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      pr[c] /= z;
      dr[c] = (x[c] - y[c]) / t;
      m += pr[c] * dr[c];
    }
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      dr[c] -= m;
      s += pr[c] * exp_gap(dr[c]);
    }
    big_s[r] = s;
    out[r] = std::log1p(s);
  }
  const bool per_row = rt.per_row;
  return Tensor::make_result(
      {rows, 1}, std::move(out), "kl_div_rows", {p, q, temperature},
      [rows, cols, per_row, prob = std::move(prob), gap = std::move(gap),
       big_s = std::move(big_s)](Node& self) {
        Node& pp = parent(self, 0);
        Node& pq = parent(self, 1);
        Node& pt = parent(self, 2);
        std::vector<double> dz(cols);
        for (std::size_t r = 0; r < rows; ++r) {
          const double g = self.grad[r];
          const double* pr = prob.data() + r * cols;
          const double* dr = gap.data() + r * cols;
          if (pp.requires_grad || pt.requires_grad) {
            for (std::size_t c = 0; c < cols; ++c) dz[c] = g * pr[c] * dr[c];
            scaled_logit_backward(pp, pt, per_row, r, cols, dz);
          }
          if (pq.requires_grad || pt.requires_grad) {
            // q_c - p_c = p_c (e^-d'_c - 1 - S) / (1 + S)
            const double s = big_s[r];
            for (std::size_t c = 0; c < cols; ++c) {
              dz[c] = g * pr[c] * (std::expm1(-dr[c]) - s) / (1.0 + s);
            }
            scaled_logit_backward(pq, pt, per_row, r, cols, dz);
          }
        }
      });
}

Tensor scale_gradient(const Tensor& x, double factor) {
  const auto xv = x.values();
  return Tensor::make_result(x.shape(), std::vector<double>(xv.begin(), xv.end()),
                             "scale_gradient", {x}, [factor](Node& self) {
                               auto& g = parent(self, 0).grad_buffer();
                               for (std::size_t i = 0; i < g.size(); ++i) {
                                 g[i] += factor * self.grad[i];
                               }
                             });
}

Tensor bounded_sigmoid(const Tensor& x, double init, double range) {
  if (!(range > 0.0)) throw DomainError("bounded_sigmoid: range must be positive");
  const double lo = std::nextafter(init, std::numeric_limits<double>::infinity());
  const double hi = std::nextafter(init + range, -std::numeric_limits<double>::infinity());
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  std::vector<double> slope(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double v = xv[i];
    const double s = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    out[i] = std::clamp(init + range * s, lo, hi);
    slope[i] = range * s * (1.0 - s);
  }
  return Tensor::make_result(x.shape(), std::move(out), "bounded_sigmoid", {x},
                             [slope = std::move(slope)](Node& self) {
                               auto& g = parent(self, 0).grad_buffer();
                               for (std::size_t i = 0; i < g.size(); ++i) {
                                 g[i] += self.grad[i] * slope[i];
                               }
                             });
}

Tensor conv3x3(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t side) {
  check_matrix(input, "conv3x3");
  const std::size_t batch = input.shape()[0];
  const std::size_t area = side * side;
  if (input.shape()[1] != area) {
    throw ShapeError("conv3x3: input width " + std::to_string(input.shape()[1]) +
                     " is not side^2 = " + std::to_string(area));
  }
  check_matrix(kernel, "conv3x3");
  if (kernel.shape()[1] != 9) throw ShapeError("conv3x3: kernel must be K x 9");
  const std::size_t channels = kernel.shape()[0];
  if (bias.numel() != channels) throw ShapeError("conv3x3: bias length must equal K");

  const auto iv = input.values();
  const auto kv = kernel.values();
  const auto bv = bias.values();
  const auto s = static_cast<std::ptrdiff_t>(side);
  std::vector<double> out(batch * channels * area);
  for (std::size_t b = 0; b < batch; ++b) {
    const double* img = iv.data() + b * area;
    for (std::size_t k = 0; k < channels; ++k) {
      double* o = out.data() + (b * channels + k) * area;
      const double* w = kv.data() + k * 9;
      for (std::ptrdiff_t i = 0; i < s; ++i) {
        for (std::ptrdiff_t j = 0; j < s; ++j) {
          double acc = bv[k];
          for (std::ptrdiff_t di = -1; di <= 1; ++di) {
            for (std::ptrdiff_t dj = -1; dj <= 1; ++dj) {
              const auto ii = i + di;
              const auto jj = j + dj;
              if (ii < 0 || jj < 0 || ii >= s || jj >= s) continue;
              acc += w[(di + 1) * 3 + (dj + 1)] * img[ii * s + jj];
            }
          }
          o[i * s + j] = acc;
        }
      }
    }
  }
  return Tensor::make_result(
      {batch, channels * area}, std::move(out), "conv3x3", {input, kernel, bias},
      [batch, channels, area, s](Node& self) {
        Node& pi = parent(self, 0);
        Node& pk = parent(self, 1);
        Node& pb = parent(self, 2);
        for (std::size_t b = 0; b < batch; ++b) {
          const double* img = pi.values.data() + b * area;
          for (std::size_t k = 0; k < channels; ++k) {
            const double* g = self.grad.data() + (b * channels + k) * area;
            const double* w = pk.values.data() + k * 9;
            for (std::ptrdiff_t i = 0; i < s; ++i) {
              for (std::ptrdiff_t j = 0; j < s; ++j) {
                const double go = g[i * s + j];
                if (pb.requires_grad) pb.grad_buffer()[k] += go;
                for (std::ptrdiff_t di = -1; di <= 1; ++di) {
                  for (std::ptrdiff_t dj = -1; dj <= 1; ++dj) {
                    const auto ii = i + di;
                    const auto jj = j + dj;
                    if (ii < 0 || jj < 0 || ii >= s || jj >= s) continue;
                    const auto widx = static_cast<std::size_t>((di + 1) * 3 + (dj + 1));
                    const auto pidx = static_cast<std::size_t>(ii * s + jj);
                    if (pk.requires_grad) pk.grad_buffer()[k * 9 + widx] += go * img[pidx];
                    if (pi.requires_grad) pi.grad_buffer()[b * area + pidx] += go * w[widx];
                  }
                }
              }
            }
          }
        }
      });
}

Tensor avg_pool2x2(const Tensor& input, std::size_t channels, std::size_t side) {
  check_matrix(input, "avg_pool2x2");
  const std::size_t batch = input.shape()[0];
  const std::size_t area = side * side;
  if (input.shape()[1] != channels * area) {
    throw ShapeError("avg_pool2x2: input width does not match channels*side^2");
  }
  const std::size_t half = side / 2;
  if (half == 0) throw ShapeError("avg_pool2x2: side must be at least 2");
  const std::size_t out_area = half * half;
  const auto iv = input.values();
  std::vector<double> out(batch * channels * out_area);
  for (std::size_t bk = 0; bk < batch * channels; ++bk) {
    const double* src = iv.data() + bk * area;
    double* dst = out.data() + bk * out_area;
    for (std::size_t i = 0; i < half; ++i) {
      for (std::size_t j = 0; j < half; ++j) {
        const std::size_t r = 2 * i;
        const std::size_t c = 2 * j;
        dst[i * half + j] = 0.25 * (src[r * side + c] + src[r * side + c + 1] +
                                    src[(r + 1) * side + c] + src[(r + 1) * side + c + 1]);
      }
    }
  }
  return Tensor::make_result(
      {batch, channels * out_area}, std::move(out), "avg_pool2x2", {input},
      [batch, channels, area, out_area, half, side](Node& self) {
        auto& gi = parent(self, 0).grad_buffer();
        for (std::size_t bk = 0; bk < batch * channels; ++bk) {
          const double* g = self.grad.data() + bk * out_area;
          double* dst = gi.data() + bk * area;
          for (std::size_t i = 0; i < half; ++i) {
            for (std::size_t j = 0; j < half; ++j) {
              const double q = 0.25 * g[i * half + j];
              const std::size_t r = 2 * i;
              const std::size_t c = 2 * j;
              dst[r * side + c] += q;
              dst[r * side + c + 1] += q;
              dst[(r + 1) * side + c] += q;
              dst[(r + 1) * side + c + 1] += q;
            }
          }
        }
      });
}

}  // namespace ctkd::ad
