#include "forcecast/nn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "forcecast/errors.hpp"

namespace forcecast::nn {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;

template <typename T>
Node<T>& parent(Node<T>& n, std::size_t i) {
  return *n.parents[i];
}

// Number of times `b` repeats inside `a` under trailing-dim broadcasting, or 0 if incompatible.
std::size_t broadcast_outer(const Shape& a, const Shape& b) {
  if (b.size() > a.size()) return 0;
  if (!std::equal(b.begin(), b.end(), a.end() - static_cast<std::ptrdiff_t>(b.size()))) return 0;
  const std::size_t inner = numel(b);
  return inner == 0 ? 0 : numel(a) / inner;
}

template <typename T>
Tensor<T> binary(const Tensor<T>& a_in, const Tensor<T>& b_in, int op, const char* name) {
  // op: 0 add, 1 sub, 2 mul
  Tensor<T> a = a_in, b = b_in;
  bool swapped = false;
  if (broadcast_outer(a.shape(), b.shape()) == 0) {
    if (op != 1 && broadcast_outer(b.shape(), a.shape()) != 0) {
      std::swap(a, b);
      swapped = true;
    } else {
      throw ShapeError(std::string(name) + ": incompatible shapes " + shape_string(a_in.shape()) + " and " +
                       shape_string(b_in.shape()));
    }
  }
  (void)swapped;
  const std::size_t inner = b.numel();
  const std::size_t outer = a.numel() / std::max<std::size_t>(inner, 1);
  const auto& av = a.data();
  const auto& bv = b.data();
  std::vector<T> out(av.size());
  for (std::size_t o = 0; o < outer; ++o) {
    const std::size_t base = o * inner;
    for (std::size_t i = 0; i < inner; ++i) {
      const T x = av[base + i], y = bv[i];
      out[base + i] = op == 0 ? x + y : op == 1 ? x - y : x * y;
    }
  }
  return make_result<T>(a.shape(), std::move(out), {a, b}, [outer, inner, op](Node<T>& n) {
    Node<T>& pa = parent(n, 0);
    Node<T>& pb = parent(n, 1);
    const auto& g = n.grad;
    if (pa.requires_grad) {
      auto& ga = pa.ensure_grad();
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < inner; ++i) {
          const std::size_t k = o * inner + i;
          ga[k] += op == 2 ? g[k] * pb.value[i] : g[k];
        }
      }
    }
    if (pb.requires_grad) {
      auto& gb = pb.ensure_grad();
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < inner; ++i) {
          const std::size_t k = o * inner + i;
          gb[i] += op == 0 ? g[k] : op == 1 ? -g[k] : g[k] * pa.value[k];
        }
      }
    }
  });
}

template <typename T, typename F, typename D>
Tensor<T> unary(const Tensor<T>& x, F f, D df) {
  const auto& xv = x.data();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return make_result<T>(x.shape(), std::move(out), {x}, [df](Node<T>& n) {
    Node<T>& p = parent(n, 0);
    auto& gp = p.ensure_grad();
    for (std::size_t i = 0; i < n.value.size(); ++i) gp[i] += n.grad[i] * df(p.value[i], n.value[i]);
  });
}

int normalize_axis(int axis, int rank) {
  const int a = axis < 0 ? axis + rank : axis;
  if (a < 0 || a >= rank) throw ShapeError("axis " + std::to_string(axis) + " out of range for rank " + std::to_string(rank));
  return a;
}

std::vector<std::size_t> strides_of(const Shape& s) {
  std::vector<std::size_t> st(s.size(), 1);
  for (int i = static_cast<int>(s.size()) - 2; i >= 0; --i) st[i] = st[i + 1] * static_cast<std::size_t>(s[i + 1]);
  return st;
}

// Splits a shape around `axis` into (outer, axis length, inner).
std::tuple<std::size_t, std::size_t, std::size_t> around(const Shape& s, int axis) {
  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= static_cast<std::size_t>(s[i]);
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < s.size(); ++i) inner *= static_cast<std::size_t>(s[i]);
  return {outer, static_cast<std::size_t>(s[axis]), inner};
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, 0, "add");
}
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, 1, "sub");
}
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, 2, "mul");
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  return unary(a, [factor](T x) { return x * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (b.rank() != 2 || a.rank() < 1 || a.dim(-1) != b.dim(0)) {
    throw ShapeError("matmul: cannot multiply " + shape_string(a.shape()) + " by " + shape_string(b.shape()));
  }
  const int k = b.dim(0), nc = b.dim(1);
  const int m = static_cast<int>(a.numel() / static_cast<std::size_t>(std::max(k, 1)));
  Shape out_shape = a.shape();
  out_shape.back() = nc;
  std::vector<T> out(static_cast<std::size_t>(m) * nc);
  MapMat<T>(out.data(), m, nc).noalias() = CMapMat<T>(a.data().data(), m, k) * CMapMat<T>(b.data().data(), k, nc);
  return make_result<T>(std::move(out_shape), std::move(out), {a, b}, [m, k, nc](Node<T>& n) {
    Node<T>& pa = parent(n, 0);
    Node<T>& pb = parent(n, 1);
    CMapMat<T> g(n.grad.data(), m, nc);
    if (pa.requires_grad) {
      MapMat<T>(pa.ensure_grad().data(), m, k).noalias() += g * CMapMat<T>(pb.value.data(), k, nc).transpose();
    }
    if (pb.requires_grad) {
      MapMat<T>(pb.ensure_grad().data(), k, nc).noalias() += CMapMat<T>(pa.value.data(), m, k).transpose() * g;
    }
  });
}

template <typename T>
Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b, bool transpose_b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != (transpose_b ? b.dim(2) : b.dim(1))) {
    throw ShapeError("bmm: cannot multiply " + shape_string(a.shape()) + " by " + shape_string(b.shape()) +
                     (transpose_b ? " (transposed)" : ""));
  }
  const int batch = a.dim(0), m = a.dim(1), k = a.dim(2);
  const int nc = transpose_b ? b.dim(1) : b.dim(2);
  std::vector<T> out(static_cast<std::size_t>(batch) * m * nc);
  const std::size_t sa = static_cast<std::size_t>(m) * k, sb = static_cast<std::size_t>(k) * nc,
                    so = static_cast<std::size_t>(m) * nc;
  for (int i = 0; i < batch; ++i) {
    CMapMat<T> am(a.data().data() + i * sa, m, k);
    MapMat<T> om(out.data() + i * so, m, nc);
    if (transpose_b) {
      om.noalias() = am * CMapMat<T>(b.data().data() + i * sb, nc, k).transpose();
    } else {
      om.noalias() = am * CMapMat<T>(b.data().data() + i * sb, k, nc);
    }
  }
  return make_result<T>({batch, m, nc}, std::move(out), {a, b}, [=](Node<T>& n) {
    Node<T>& pa = parent(n, 0);
    Node<T>& pb = parent(n, 1);
    for (int i = 0; i < batch; ++i) {
      CMapMat<T> g(n.grad.data() + i * so, m, nc);
      if (pa.requires_grad) {
        MapMat<T> ga(pa.ensure_grad().data() + i * sa, m, k);
        if (transpose_b) {
          ga.noalias() += g * CMapMat<T>(pb.value.data() + i * sb, nc, k);
        } else {
          ga.noalias() += g * CMapMat<T>(pb.value.data() + i * sb, k, nc).transpose();
        }
      }
      if (pb.requires_grad) {
        CMapMat<T> av(pa.value.data() + i * sa, m, k);
        if (transpose_b) {
          MapMat<T>(pb.ensure_grad().data() + i * sb, nc, k).noalias() += g.transpose() * av;
        } else {
          MapMat<T>(pb.ensure_grad().data() + i * sb, k, nc).noalias() += av.transpose() * g;
        }
      }
    }
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary(x, [](T v) { return v > T(0) ? v : T(0); }, [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary(x, [](T v) { return T(1) / (T(1) + std::exp(-v)); }, [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  return unary(x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  return unary(
      x, [](T v) { return static_cast<T>(0.5 * v * (1.0 + std::erf(v * kInvSqrt2))); },
      [](T v, T) {
        const double d = static_cast<double>(v);
        return static_cast<T>(0.5 * (1.0 + std::erf(d * kInvSqrt2)) + d * kInvSqrt2Pi * std::exp(-0.5 * d * d));
      });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& x) {
  return unary(x, [](T v) { return std::abs(v); },
               [](T v, T) { return v > T(0) ? T(1) : v < T(0) ? T(-1) : T(0); });
}

template <typename T>
Tensor<T> square(const Tensor<T>& x) {
  return unary(x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x) {
  if (x.rank() < 1) throw ShapeError("softmax of a scalar");
  const std::size_t d = static_cast<std::size_t>(x.dim(-1));
  const std::size_t rows = d == 0 ? 0 : x.numel() / d;
  std::vector<T> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = x.data().data() + r * d;
    T* o = out.data() + r * d;
    const T mx = *std::max_element(in, in + d);
    T total = 0;
    for (std::size_t i = 0; i < d; ++i) total += (o[i] = std::exp(in[i] - mx));
    for (std::size_t i = 0; i < d; ++i) o[i] /= total;
  }
  return make_result<T>(x.shape(), std::move(out), {x}, [rows, d](Node<T>& n) {
    auto& gp = parent(n, 0).ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      const T* y = n.value.data() + r * d;
      const T* g = n.grad.data() + r * d;
      T dot = 0;
      for (std::size_t i = 0; i < d; ++i) dot += g[i] * y[i];
      for (std::size_t i = 0; i < d; ++i) gp[r * d + i] += y[i] * (g[i] - dot);
    }
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  const T total = std::accumulate(x.data().begin(), x.data().end(), T(0));
  return make_result<T>({}, {total}, {x}, [](Node<T>& n) {
    auto& gp = parent(n, 0).ensure_grad();
    for (auto& g : gp) g += n.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  if (x.numel() == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(x), T(1) / static_cast<T>(x.numel()));
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  int infer = -1;
  std::size_t known = 1;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (shape[i] == -1) {
      if (infer >= 0) throw ShapeError("reshape: more than one -1 in " + shape_string(shape));
      infer = static_cast<int>(i);
    } else {
      known *= static_cast<std::size_t>(shape[i]);
    }
  }
  if (infer >= 0 && known > 0) shape[infer] = static_cast<int>(x.numel() / known);
  if (numel(shape) != x.numel()) {
    throw ShapeError("reshape: " + shape_string(x.shape()) + " cannot become " + shape_string(shape));
  }
  return make_result<T>(std::move(shape), x.data(), {x}, [](Node<T>& n) {
    auto& gp = parent(n, 0).ensure_grad();
    for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += n.grad[i];
  });
}

template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<int>& order) {
  const int r = x.rank();
  if (static_cast<int>(order.size()) != r) throw ShapeError("permute: order length does not match rank");
  std::vector<bool> used(static_cast<std::size_t>(r), false);
  Shape out_shape(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) {
    const int o = order[static_cast<std::size_t>(i)];
    if (o < 0 || o >= r || used[static_cast<std::size_t>(o)]) throw ShapeError("permute: invalid order");
    used[static_cast<std::size_t>(o)] = true;
    out_shape[static_cast<std::size_t>(i)] = x.shape()[static_cast<std::size_t>(o)];
  }
  // src_index[k] = flat source index of output element k
  const auto in_strides = strides_of(x.shape());
  const std::size_t n = x.numel();
  auto index = std::make_shared<std::vector<std::size_t>>(n);
  std::vector<int> counter(static_cast<std::size_t>(r), 0);
  std::size_t src = 0;
  for (std::size_t k = 0; k < n; ++k) {
    (*index)[k] = src;
    for (int d = r - 1; d >= 0; --d) {
      const auto du = static_cast<std::size_t>(d);
      const std::size_t stride = in_strides[static_cast<std::size_t>(order[du])];
      if (++counter[du] < out_shape[du]) {
        src += stride;
        break;
      }
      src -= stride * static_cast<std::size_t>(out_shape[du] - 1);
      counter[du] = 0;
    }
  }
  std::vector<T> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = x.data()[(*index)[k]];
  return make_result<T>(std::move(out_shape), std::move(out), {x}, [index](Node<T>& nd) {
    auto& gp = parent(nd, 0).ensure_grad();
    for (std::size_t k = 0; k < index->size(); ++k) gp[(*index)[k]] += nd.grad[k];
  });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat of nothing");
  const int ax = normalize_axis(axis, parts[0].rank());
  Shape out_shape = parts[0].shape();
  out_shape[ax] = 0;
  for (const auto& p : parts) {
    Shape s = p.shape();
    if (s.size() != out_shape.size()) throw ShapeError("concat: rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (static_cast<int>(i) != ax && s[i] != parts[0].shape()[i]) {
        throw ShapeError("concat: " + shape_string(s) + " does not match " + shape_string(parts[0].shape()));
      }
    }
    out_shape[ax] += s[ax];
  }
  const auto [outer, total, inner] = around(out_shape, ax);
  std::vector<T> out(numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const std::size_t len = static_cast<std::size_t>(p.shape()[ax]);
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(p.data().data() + o * len * inner, len * inner, out.data() + (o * total + off) * inner);
    }
    off += len;
  }
  std::vector<std::size_t> lens;
  for (const auto& p : parts) lens.push_back(static_cast<std::size_t>(p.shape()[ax]));
  return make_result<T>(std::move(out_shape), std::move(out), parts,
                        [outer = outer, total = total, inner = inner, offsets, lens](Node<T>& n) {
                          for (std::size_t i = 0; i < n.parents.size(); ++i) {
                            Node<T>& p = parent(n, i);
                            if (!p.requires_grad) continue;
                            auto& gp = p.ensure_grad();
                            for (std::size_t o = 0; o < outer; ++o) {
                              const T* g = n.grad.data() + (o * total + offsets[i]) * inner;
                              T* d = gp.data() + o * lens[i] * inner;
                              for (std::size_t k = 0; k < lens[i] * inner; ++k) d[k] += g[k];
                            }
                          }
                        });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, int axis, int begin, int end) {
  const int ax = normalize_axis(axis, x.rank());
  const int len = x.shape()[ax];
  if (begin < 0 || end > len || begin > end) {
    throw ShapeError("slice [" + std::to_string(begin) + ", " + std::to_string(end) + ") out of range for " +
                     shape_string(x.shape()));
  }
  Shape out_shape = x.shape();
  out_shape[ax] = end - begin;
  const auto [outer, total, inner] = around(x.shape(), ax);
  const std::size_t count = static_cast<std::size_t>(end - begin) * inner;
  const std::size_t start = static_cast<std::size_t>(begin) * inner;
  std::vector<T> out(numel(out_shape));
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(x.data().data() + o * total * inner + start, count, out.data() + o * count);
  }
  return make_result<T>(std::move(out_shape), std::move(out), {x},
                        [outer = outer, total = total, inner = inner, start, count](Node<T>& n) {
                          auto& gp = parent(n, 0).ensure_grad();
                          for (std::size_t o = 0; o < outer; ++o) {
                            for (std::size_t k = 0; k < count; ++k) gp[o * total * inner + start + k] += n.grad[o * count + k];
                          }
                        });
}

namespace {

struct ConvGeometry {
  int c, h, w, k, stride, pad, ho, wo;
};

template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* col) {
  const int plane = g.ho * g.wo;
  for (int c = 0; c < g.c; ++c) {
    for (int ki = 0; ki < g.k; ++ki) {
      for (int kj = 0; kj < g.k; ++kj) {
        T* row = col + static_cast<std::size_t>((c * g.k + ki) * g.k + kj) * plane;
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ki;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kj;
            row[oy * g.wo + ox] = (iy >= 0 && iy < g.h && ix >= 0 && ix < g.w)
                                      ? x[(static_cast<std::size_t>(c) * g.h + iy) * g.w + ix]
                                      : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, const ConvGeometry& g, T* dx) {
  const int plane = g.ho * g.wo;
  for (int c = 0; c < g.c; ++c) {
    for (int ki = 0; ki < g.k; ++ki) {
      for (int kj = 0; kj < g.k; ++kj) {
        const T* row = col + static_cast<std::size_t>((c * g.k + ki) * g.k + kj) * plane;
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ki;
          if (iy < 0 || iy >= g.h) continue;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kj;
            if (ix >= 0 && ix < g.w) dx[(static_cast<std::size_t>(c) * g.h + iy) * g.w + ix] += row[oy * g.wo + ox];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, int stride, int padding) {
  if (x.rank() != 4 || weight.rank() != 4 || weight.dim(1) != x.dim(1) || weight.dim(2) != weight.dim(3)) {
    throw ShapeError("conv2d: input " + shape_string(x.shape()) + " does not fit weight " +
                     shape_string(weight.shape()));
  }
  if (stride < 1 || padding < 0) throw ShapeError("conv2d: invalid stride or padding");
  const int batch = x.dim(0), out_c = weight.dim(0);
  ConvGeometry g{x.dim(1), x.dim(2), x.dim(3), weight.dim(2), stride, padding, 0, 0};
  g.ho = (g.h + 2 * padding - g.k) / stride + 1;
  g.wo = (g.w + 2 * padding - g.k) / stride + 1;
  if (g.ho <= 0 || g.wo <= 0) throw ShapeError("conv2d: kernel larger than padded input");
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != out_c)) throw ShapeError("conv2d: bias shape mismatch");

  const int rows = g.c * g.k * g.k, plane = g.ho * g.wo;
  const std::size_t in_size = static_cast<std::size_t>(g.c) * g.h * g.w;
  const std::size_t out_size = static_cast<std::size_t>(out_c) * plane;
  std::vector<T> out(static_cast<std::size_t>(batch) * out_size);
  std::vector<T> col(static_cast<std::size_t>(rows) * plane);
  CMapMat<T> wm(weight.data().data(), out_c, rows);
  for (int b = 0; b < batch; ++b) {
    im2col(x.data().data() + b * in_size, g, col.data());
    MapMat<T> om(out.data() + b * out_size, out_c, plane);
    om.noalias() = wm * CMapMat<T>(col.data(), rows, plane);
    if (bias.defined()) {
      for (int o = 0; o < out_c; ++o) om.row(o).array() += bias.data()[static_cast<std::size_t>(o)];
    }
  }
  std::vector<Tensor<T>> parents{x, weight};
  if (bias.defined()) parents.push_back(bias);
  return make_result<T>({batch, out_c, g.ho, g.wo}, std::move(out), parents, [=](Node<T>& n) {
    Node<T>& px = parent(n, 0);
    Node<T>& pw = parent(n, 1);
    std::vector<T> cbuf(static_cast<std::size_t>(rows) * plane);
    CMapMat<T> wmat(pw.value.data(), out_c, rows);
    for (int b = 0; b < batch; ++b) {
      CMapMat<T> gm(n.grad.data() + b * out_size, out_c, plane);
      if (pw.requires_grad) {
        im2col(px.value.data() + b * in_size, g, cbuf.data());
        MapMat<T>(pw.ensure_grad().data(), out_c, rows).noalias() +=
            gm * CMapMat<T>(cbuf.data(), rows, plane).transpose();
      }
      if (px.requires_grad) {
        MapMat<T>(cbuf.data(), rows, plane).noalias() = wmat.transpose() * gm;
        col2im(cbuf.data(), g, px.ensure_grad().data() + b * in_size);
      }
      if (n.parents.size() > 2 && parent(n, 2).requires_grad) {
        auto& gb = parent(n, 2).ensure_grad();
        for (int o = 0; o < out_c; ++o) gb[static_cast<std::size_t>(o)] += gm.row(o).sum();
      }
    }
  });
}

template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& x, int k) {
  if (x.rank() != 4) throw ShapeError("avg_pool2d expects [B, C, H, W], got " + shape_string(x.shape()));
  if (k < 1 || x.dim(2) % k != 0 || x.dim(3) % k != 0) {
    throw ShapeError("avg_pool2d: " + shape_string(x.shape()) + " is not divisible by " + std::to_string(k));
  }
  const int planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3), ho = h / k, wo = w / k;
  const T inv = T(1) / static_cast<T>(k * k);
  std::vector<T> out(static_cast<std::size_t>(planes) * ho * wo, T(0));
  for (int p = 0; p < planes; ++p) {
    const T* in = x.data().data() + static_cast<std::size_t>(p) * h * w;
    T* o = out.data() + static_cast<std::size_t>(p) * ho * wo;
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) o[(y / k) * wo + xx / k] += in[y * w + xx];
    }
    for (int i = 0; i < ho * wo; ++i) o[i] *= inv;
  }
  return make_result<T>({x.dim(0), x.dim(1), ho, wo}, std::move(out), {x}, [=](Node<T>& n) {
    auto& gp = parent(n, 0).ensure_grad();
    for (int p = 0; p < planes; ++p) {
      T* d = gp.data() + static_cast<std::size_t>(p) * h * w;
      const T* g = n.grad.data() + static_cast<std::size_t>(p) * ho * wo;
      for (int y = 0; y < h; ++y) {
        for (int xx = 0; xx < w; ++xx) d[y * w + xx] += g[(y / k) * wo + xx / k] * inv;
      }
    }
  });
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  if (x.rank() != 4) throw ShapeError("global_avg_pool expects [B, C, H, W], got " + shape_string(x.shape()));
  const int planes = x.dim(0) * x.dim(1);
  const std::size_t area = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  std::vector<T> out(static_cast<std::size_t>(planes));
  for (int p = 0; p < planes; ++p) {
    const T* in = x.data().data() + p * area;
    out[static_cast<std::size_t>(p)] = std::accumulate(in, in + area, T(0)) / static_cast<T>(area);
  }
  return make_result<T>({x.dim(0), x.dim(1)}, std::move(out), {x}, [planes, area](Node<T>& n) {
    auto& gp = parent(n, 0).ensure_grad();
    for (int p = 0; p < planes; ++p) {
      const T g = n.grad[static_cast<std::size_t>(p)] / static_cast<T>(area);
      for (std::size_t i = 0; i < area; ++i) gp[p * area + i] += g;
    }
  });
}

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, Tensor<T>& running_mean,
                     Tensor<T>& running_var, bool training, T momentum, T eps) {
  if (x.rank() < 2) throw ShapeError("batch_norm expects [N, C, ...], got " + shape_string(x.shape()));
  const int channels = x.dim(1);
  for (const Tensor<T>* t : std::initializer_list<const Tensor<T>*>{&gamma, &beta, &running_mean, &running_var}) {
    if (t->numel() != static_cast<std::size_t>(channels)) throw ShapeError("batch_norm: parameter size mismatch");
  }
  const std::size_t n = static_cast<std::size_t>(x.dim(0));
  const std::size_t spatial = x.numel() / (n * static_cast<std::size_t>(channels));
  const std::size_t count = n * spatial;
  const auto& xv = x.data();
  auto at = [&](std::size_t b, int c, std::size_t s) { return (b * channels + c) * spatial + s; };

  std::vector<T> mu(channels), invstd(channels);
  if (training) {
    if (count < 1) throw ShapeError("batch_norm on an empty batch");
    for (int c = 0; c < channels; ++c) {
      double s = 0;
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t k = 0; k < spatial; ++k) s += xv[at(b, c, k)];
      const double m = s / static_cast<double>(count);
      double v = 0;
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t k = 0; k < spatial; ++k) v += (xv[at(b, c, k)] - m) * (xv[at(b, c, k)] - m);
      const double var = v / static_cast<double>(count);
      mu[c] = static_cast<T>(m);
      invstd[c] = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
      const double unbiased = count > 1 ? v / static_cast<double>(count - 1) : var;
      auto& rm = running_mean.data()[static_cast<std::size_t>(c)];
      auto& rv = running_var.data()[static_cast<std::size_t>(c)];
      rm = static_cast<T>((1.0 - momentum) * rm + momentum * m);
      rv = static_cast<T>((1.0 - momentum) * rv + momentum * unbiased);
    }
  } else {
    for (int c = 0; c < channels; ++c) {
      mu[c] = running_mean.data()[static_cast<std::size_t>(c)];
      invstd[c] = T(1) / std::sqrt(running_var.data()[static_cast<std::size_t>(c)] + eps);
    }
  }
  std::vector<T> out(xv.size());
  auto xhat = std::make_shared<std::vector<T>>(xv.size());
  for (std::size_t b = 0; b < n; ++b) {
    for (int c = 0; c < channels; ++c) {
      const T gmul = gamma.data()[static_cast<std::size_t>(c)], gadd = beta.data()[static_cast<std::size_t>(c)];
      for (std::size_t k = 0; k < spatial; ++k) {
        const std::size_t i = at(b, c, k);
        (*xhat)[i] = (xv[i] - mu[c]) * invstd[c];
        out[i] = gmul * (*xhat)[i] + gadd;
      }
    }
  }
  return make_result<T>(x.shape(), std::move(out), {x, gamma, beta},
                        [=](Node<T>& nd) {
                          Node<T>& px = parent(nd, 0);
                          Node<T>& pg = parent(nd, 1);
                          Node<T>& pb = parent(nd, 2);
                          const auto& g = nd.grad;
                          for (int c = 0; c < channels; ++c) {
                            T sum_g = 0, sum_gx = 0;
                            for (std::size_t b = 0; b < n; ++b) {
                              for (std::size_t k = 0; k < spatial; ++k) {
                                const std::size_t i = (b * channels + c) * spatial + k;
                                sum_g += g[i];
                                sum_gx += g[i] * (*xhat)[i];
                              }
                            }
                            if (pg.requires_grad) pg.ensure_grad()[static_cast<std::size_t>(c)] += sum_gx;
                            if (pb.requires_grad) pb.ensure_grad()[static_cast<std::size_t>(c)] += sum_g;
                            if (!px.requires_grad) continue;
                            auto& gx = px.ensure_grad();
                            const T gm = pg.value[static_cast<std::size_t>(c)];
                            const T m = static_cast<T>(count);
                            for (std::size_t b = 0; b < n; ++b) {
                              for (std::size_t k = 0; k < spatial; ++k) {
                                const std::size_t i = (b * channels + c) * spatial + k;
                                if (training) {
                                  gx[i] += gm * invstd[c] / m * (m * g[i] - sum_g - (*xhat)[i] * sum_gx);
                                } else {
                                  gx[i] += gm * invstd[c] * g[i];
                                }
                              }
                            }
                          }
                        });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  const std::size_t d = static_cast<std::size_t>(x.dim(-1));
  if (gamma.numel() != d || beta.numel() != d) throw ShapeError("layer_norm: parameter size mismatch");
  const std::size_t rows = x.numel() / d;
  const auto& xv = x.data();
  auto xhat = std::make_shared<std::vector<T>>(xv.size());
  auto invstd = std::make_shared<std::vector<T>>(rows);
  std::vector<T> out(xv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = xv.data() + r * d;
    double s = 0;
    for (std::size_t i = 0; i < d; ++i) s += in[i];
    const double m = s / static_cast<double>(d);
    double v = 0;
    for (std::size_t i = 0; i < d; ++i) v += (in[i] - m) * (in[i] - m);
    const T is = static_cast<T>(1.0 / std::sqrt(v / static_cast<double>(d) + static_cast<double>(eps)));
    (*invstd)[r] = is;
    for (std::size_t i = 0; i < d; ++i) {
      const T h = static_cast<T>(in[i] - m) * is;
      (*xhat)[r * d + i] = h;
      out[r * d + i] = gamma.data()[i] * h + beta.data()[i];
    }
  }
  return make_result<T>(x.shape(), std::move(out), {x, gamma, beta}, [=](Node<T>& nd) {
    Node<T>& px = parent(nd, 0);
    Node<T>& pg = parent(nd, 1);
    Node<T>& pb = parent(nd, 2);
    const auto& g = nd.grad;
    for (std::size_t r = 0; r < rows; ++r) {
      T sum_d = 0, sum_dx = 0;
      for (std::size_t i = 0; i < d; ++i) {
        const std::size_t k = r * d + i;
        if (pg.requires_grad) pg.ensure_grad()[i] += g[k] * (*xhat)[k];
        if (pb.requires_grad) pb.ensure_grad()[i] += g[k];
        const T dh = g[k] * pg.value[i];
        sum_d += dh;
        sum_dx += dh * (*xhat)[k];
      }
      if (!px.requires_grad) continue;
      auto& gx = px.ensure_grad();
      const T dd = static_cast<T>(d);
      for (std::size_t i = 0; i < d; ++i) {
        const std::size_t k = r * d + i;
        const T dh = g[k] * pg.value[i];
        gx[k] += (*invstd)[r] / dd * (dd * dh - sum_d - (*xhat)[k] * sum_dx);
      }
    }
  });
}

#define FORCECAST_INSTANTIATE_OPS(T)                                                                           \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                                  \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                                  \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                                  \
  template Tensor<T> scale(const Tensor<T>&, T);                                                               \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                               \
  template Tensor<T> bmm(const Tensor<T>&, const Tensor<T>&, bool);                                            \
  template Tensor<T> relu(const Tensor<T>&);                                                                   \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                                \
  template Tensor<T> tanh(const Tensor<T>&);                                                                   \
  template Tensor<T> gelu(const Tensor<T>&);                                                                   \
  template Tensor<T> abs(const Tensor<T>&);                                                                    \
  template Tensor<T> square(const Tensor<T>&);                                                                 \
  template Tensor<T> softmax(const Tensor<T>&);                                                                \
  template Tensor<T> sum(const Tensor<T>&);                                                                    \
  template Tensor<T> mean(const Tensor<T>&);                                                                   \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                                         \
  template Tensor<T> permute(const Tensor<T>&, const std::vector<int>&);                                       \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, int);                                               \
  template Tensor<T> slice(const Tensor<T>&, int, int, int);                                                   \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, int);                   \
  template Tensor<T> avg_pool2d(const Tensor<T>&, int);                                                        \
  template Tensor<T> global_avg_pool(const Tensor<T>&);                                                        \
  template Tensor<T> batch_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Tensor<T>&, Tensor<T>&, \
                                bool, T, T);                                                                   \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);

FORCECAST_INSTANTIATE_OPS(float)
FORCECAST_INSTANTIATE_OPS(double)

}  // namespace forcecast::nn
