#include "motiongait/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <mutex>

#include <cblas.h>

namespace motiongait {

namespace {

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    const auto& sa = a.shape();
    const auto& sb = b.shape();
    std::string where = "rank";
    if (sa.size() == sb.size()) {
      for (std::size_t i = 0; i < sa.size(); ++i) {
        if (sa[i] != sb[i]) {
          where = "axis " + std::to_string(i);
          break;
        }
      }
    }
    throw DimensionError(std::string(op) + ": shape mismatch on " + where + ": " + shape_str(sa) +
                         " vs " + shape_str(sb));
  }
}

struct AxisSplit {
  std::int64_t outer = 1;
  std::int64_t extent = 1;
  std::int64_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for shape " + shape_str(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

Shape drop_axis(const Shape& shape, std::size_t axis) {
  Shape out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != axis) out.push_back(shape[i]);
  }
  if (out.empty()) out.push_back(1);
  return out;
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return -floor_div(-a, b); }

void validate_segments(const Segments& segments, std::int64_t extent, const char* op) {
  if (segments.empty()) throw DomainError(std::string(op) + ": no segments");
  std::int64_t cursor = 0;
  for (const auto& [b, e] : segments) {
    if (b != cursor || e <= b) {
      throw DomainError(std::string(op) + ": segments must tile the axis contiguously");
    }
    cursor = e;
  }
  if (cursor != extent) {
    throw DimensionError(std::string(op) + ": segments cover " + std::to_string(cursor) +
                         " of " + std::to_string(extent) + " positions");
  }
}

}  // namespace

// ---------------------------------------------------------------- elementwise

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "add");
  Tensor<T> out = a.value();
  const auto bv = b.value().data();
  auto ov = out.data();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] += bv[i];
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      auto g = p->grad_buffer().data();
      const auto go = self.grad.data();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i];
    }
  }, "add");
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "sub");
  Tensor<T> out = a.value();
  const auto bv = b.value().data();
  auto ov = out.data();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] -= bv[i];
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
    const auto go = self.grad.data();
    if (self.parents[0]->requires_grad) {
      auto g = self.parents[0]->grad_buffer().data();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i];
    }
    if (self.parents[1]->requires_grad) {
      auto g = self.parents[1]->grad_buffer().data();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= go[i];
    }
  }, "sub");
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "mul");
  Tensor<T> out = a.value();
  const auto bv = b.value().data();
  auto ov = out.data();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] *= bv[i];
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    const auto go = self.grad.data();
    if (pa.requires_grad) {
      auto g = pa.grad_buffer().data();
      const auto bv = pb.value.data();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i] * bv[i];
    }
    if (pb.requires_grad) {
      auto g = pb.grad_buffer().data();
      const auto av = pa.value.data();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i] * av[i];
    }
  }, "mul");
}

template <typename T>
Var<T> abs(const Var<T>& a) {
  Tensor<T> out = a.value();
  for (T& v : out.data()) v = std::abs(v);
  return make_result<T>(std::move(out), {a}, [](Node<T>& self) {
    auto& p = *self.parents[0];
    auto g = p.grad_buffer().data();
    const auto x = p.value.data();
    const auto go = self.grad.data();
    // Subgradient 0 at the kink.
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x[i] > T(0)) g[i] += go[i];
      else if (x[i] < T(0)) g[i] -= go[i];
    }
  }, "abs");
}

template <typename T>
Var<T> sigmoid(const Var<T>& a) {
  Tensor<T> out = a.value();
  for (T& v : out.data()) v = stable_sigmoid(v);
  return make_result<T>(std::move(out), {a}, [](Node<T>& self) {
    auto g = self.parents[0]->grad_buffer().data();
    const auto y = self.value.data();
    const auto go = self.grad.data();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i] * y[i] * (T(1) - y[i]);
  }, "sigmoid");
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, T s) {
  Tensor<T> out = a.value();
  for (T& v : out.data()) v += s;
  return make_result<T>(std::move(out), {a}, [](Node<T>& self) {
    auto g = self.parents[0]->grad_buffer().data();
    const auto go = self.grad.data();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i];
  }, "add_scalar");
}

template <typename T>
Var<T> mul_scalar(const Var<T>& a, T s) {
  Tensor<T> out = a.value();
  for (T& v : out.data()) v *= s;
  return make_result<T>(std::move(out), {a}, [s](Node<T>& self) {
    auto g = self.parents[0]->grad_buffer().data();
    const auto go = self.grad.data();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i] * s;
  }, "mul_scalar");
}

template <typename T>
Var<T> sum(const Var<T>& a) {
  T acc = T(0);
  for (T v : a.value().data()) acc += v;
  return make_result<T>(Tensor<T>::scalar(acc), {a}, [](Node<T>& self) {
    auto g = self.parents[0]->grad_buffer().data();
    const T go = self.grad[0];
    for (T& v : g) v += go;
  }, "sum");
}

// ----------------------------------------------------------------- reductions

template <typename T>
Var<T> reduce_mean(const Var<T>& x, std::size_t axis) {
  const AxisSplit s = split_axis(x.shape(), axis, "reduce_mean");
  Tensor<T> out(drop_axis(x.shape(), axis));
  const T* in = x.value().ptr();
  T* o = out.ptr();
  const T scale = T(1) / static_cast<T>(s.extent);
  for (std::int64_t a = 0; a < s.outer; ++a) {
    for (std::int64_t i = 0; i < s.inner; ++i) {
      T acc = T(0);
      for (std::int64_t k = 0; k < s.extent; ++k) acc += in[(a * s.extent + k) * s.inner + i];
      o[a * s.inner + i] = acc * scale;
    }
  }
  return make_result<T>(std::move(out), {x}, [s, scale](Node<T>& self) {
    T* g = self.parents[0]->grad_buffer().ptr();
    const T* go = self.grad.ptr();
    for (std::int64_t a = 0; a < s.outer; ++a)
      for (std::int64_t k = 0; k < s.extent; ++k)
        for (std::int64_t i = 0; i < s.inner; ++i)
          g[(a * s.extent + k) * s.inner + i] += go[a * s.inner + i] * scale;
  }, "reduce_mean");
}

template <typename T>
Var<T> reduce_max(const Var<T>& x, std::size_t axis) {
  const AxisSplit s = split_axis(x.shape(), axis, "reduce_max");
  Tensor<T> out(drop_axis(x.shape(), axis));
  std::vector<std::int64_t> argmax(static_cast<std::size_t>(s.outer * s.inner));
  const T* in = x.value().ptr();
  T* o = out.ptr();
  for (std::int64_t a = 0; a < s.outer; ++a) {
    for (std::int64_t i = 0; i < s.inner; ++i) {
      std::int64_t best = a * s.extent * s.inner + i;
      for (std::int64_t k = 1; k < s.extent; ++k) {
        const std::int64_t idx = (a * s.extent + k) * s.inner + i;
        if (in[idx] > in[best]) best = idx;
      }
      o[a * s.inner + i] = in[best];
      argmax[static_cast<std::size_t>(a * s.inner + i)] = best;
    }
  }
  return make_result<T>(std::move(out), {x}, [argmax = std::move(argmax)](Node<T>& self) {
    T* g = self.parents[0]->grad_buffer().ptr();
    const T* go = self.grad.ptr();
    for (std::size_t j = 0; j < argmax.size(); ++j) g[argmax[j]] += go[j];
  }, "reduce_max");
}

template <typename T>
Var<T> segment_mean(const Var<T>& x, std::size_t axis, const Segments& segments) {
  const AxisSplit s = split_axis(x.shape(), axis, "segment_mean");
  validate_segments(segments, s.extent, "segment_mean");
  const auto nseg = static_cast<std::int64_t>(segments.size());
  Shape shape = x.shape();
  shape[axis] = nseg;
  Tensor<T> out(shape);
  const T* in = x.value().ptr();
  T* o = out.ptr();
  for (std::int64_t a = 0; a < s.outer; ++a) {
    for (std::int64_t j = 0; j < nseg; ++j) {
      const auto [b, e] = segments[static_cast<std::size_t>(j)];
      const T scale = T(1) / static_cast<T>(e - b);
      for (std::int64_t i = 0; i < s.inner; ++i) {
        T acc = T(0);
        for (std::int64_t k = b; k < e; ++k) acc += in[(a * s.extent + k) * s.inner + i];
        o[(a * nseg + j) * s.inner + i] = acc * scale;
      }
    }
  }
  return make_result<T>(std::move(out), {x}, [s, segments, nseg](Node<T>& self) {
    T* g = self.parents[0]->grad_buffer().ptr();
    const T* go = self.grad.ptr();
    for (std::int64_t a = 0; a < s.outer; ++a)
      for (std::int64_t j = 0; j < nseg; ++j) {
        const auto [b, e] = segments[static_cast<std::size_t>(j)];
        const T scale = T(1) / static_cast<T>(e - b);
        for (std::int64_t k = b; k < e; ++k)
          for (std::int64_t i = 0; i < s.inner; ++i)
            g[(a * s.extent + k) * s.inner + i] += go[(a * nseg + j) * s.inner + i] * scale;
      }
  }, "segment_mean");
}

template <typename T>
Var<T> segment_repeat(const Var<T>& x, std::size_t axis, const Segments& segments) {
  const AxisSplit s = split_axis(x.shape(), axis, "segment_repeat");
  const auto nseg = static_cast<std::int64_t>(segments.size());
  if (s.extent != nseg) {
    throw DimensionError("segment_repeat: axis " + std::to_string(axis) + " has extent " +
                         std::to_string(s.extent) + " but " + std::to_string(nseg) +
                         " segments were given");
  }
  const std::int64_t full = segments.empty() ? 0 : segments.back().second;
  validate_segments(segments, full, "segment_repeat");
  Shape shape = x.shape();
  shape[axis] = full;
  Tensor<T> out(shape);
  const T* in = x.value().ptr();
  T* o = out.ptr();
  for (std::int64_t a = 0; a < s.outer; ++a)
    for (std::int64_t j = 0; j < nseg; ++j) {
      const auto [b, e] = segments[static_cast<std::size_t>(j)];
      for (std::int64_t k = b; k < e; ++k)
        std::copy_n(in + (a * nseg + j) * s.inner, s.inner, o + (a * full + k) * s.inner);
    }
  return make_result<T>(std::move(out), {x}, [s, segments, nseg, full](Node<T>& self) {
    T* g = self.parents[0]->grad_buffer().ptr();
    const T* go = self.grad.ptr();
    for (std::int64_t a = 0; a < s.outer; ++a)
      for (std::int64_t j = 0; j < nseg; ++j) {
        const auto [b, e] = segments[static_cast<std::size_t>(j)];
        for (std::int64_t k = b; k < e; ++k)
          for (std::int64_t i = 0; i < s.inner; ++i)
            g[(a * nseg + j) * s.inner + i] += go[(a * full + k) * s.inner + i];
      }
  }, "segment_repeat");
}

// ------------------------------------------------------------ split / concat

template <typename T>
std::vector<Var<T>> split(const Var<T>& x, std::size_t axis, const std::vector<std::int64_t>& sizes) {
  const AxisSplit s = split_axis(x.shape(), axis, "split");
  const std::int64_t total = std::accumulate(sizes.begin(), sizes.end(), std::int64_t{0});
  if (total != s.extent) {
    throw DimensionError("split: sizes sum to " + std::to_string(total) + " but axis " +
                         std::to_string(axis) + " has extent " + std::to_string(s.extent));
  }
  std::vector<Var<T>> parts;
  std::int64_t offset = 0;
  for (const std::int64_t len : sizes) {
    Shape shape = x.shape();
    shape[axis] = len;
    Tensor<T> out(shape);
    const T* in = x.value().ptr();
    for (std::int64_t a = 0; a < s.outer; ++a)
      std::copy_n(in + (a * s.extent + offset) * s.inner, len * s.inner,
                  out.ptr() + a * len * s.inner);
    parts.push_back(make_result<T>(std::move(out), {x}, [s, offset, len](Node<T>& self) {
      T* g = self.parents[0]->grad_buffer().ptr();
      const T* go = self.grad.ptr();
      for (std::int64_t a = 0; a < s.outer; ++a) {
        T* dst = g + (a * s.extent + offset) * s.inner;
        const T* src = go + a * len * s.inner;
        for (std::int64_t i = 0; i < len * s.inner; ++i) dst[i] += src[i];
      }
    }, "split"));
    offset += len;
  }
  return parts;
}

template <typename T>
Var<T> concat(const std::vector<Var<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const Shape& first = parts.front().shape();
  std::int64_t total = 0;
  std::vector<std::int64_t> lens;
  for (const auto& p : parts) {
    const Shape& sh = p.shape();
    if (sh.size() != first.size()) throw DimensionError("concat: rank mismatch");
    for (std::size_t i = 0; i < sh.size(); ++i) {
      if (i != axis && sh[i] != first[i]) {
        throw DimensionError("concat: extent mismatch on axis " + std::to_string(i) + ": " +
                             shape_str(sh) + " vs " + shape_str(first));
      }
    }
    lens.push_back(sh.at(axis));
    total += sh[axis];
  }
  Shape shape = first;
  shape[axis] = total;
  const AxisSplit s = split_axis(shape, axis, "concat");
  Tensor<T> out(shape);
  std::int64_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const T* in = parts[k].value().ptr();
    for (std::int64_t a = 0; a < s.outer; ++a)
      std::copy_n(in + a * lens[k] * s.inner, lens[k] * s.inner,
                  out.ptr() + (a * total + offset) * s.inner);
    offset += lens[k];
  }
  return make_result<T>(std::move(out), parts, [s, lens, total](Node<T>& self) {
    const T* go = self.grad.ptr();
    std::int64_t offset = 0;
    for (std::size_t k = 0; k < lens.size(); ++k) {
      auto& p = *self.parents[k];
      if (p.requires_grad) {
        T* g = p.grad_buffer().ptr();
        for (std::int64_t a = 0; a < s.outer; ++a) {
          const T* src = go + (a * total + offset) * s.inner;
          T* dst = g + a * lens[k] * s.inner;
          for (std::int64_t i = 0; i < lens[k] * s.inner; ++i) dst[i] += src[i];
        }
      }
      offset += lens[k];
    }
  }, "concat");
}

template <typename T>
std::vector<Var<T>> split_h(const Var<T>& x, std::int64_t n) {
  if (x.shape().size() != 4) throw DimensionError("split_h: expected a (c, s, h, w) tensor");
  const std::int64_t h = x.dim(2);
  if (n < 1 || h % n != 0) {
    throw ConfigError("split_h: part count " + std::to_string(n) + " does not divide height " +
                      std::to_string(h));
  }
  return split(x, 2, std::vector<std::int64_t>(static_cast<std::size_t>(n), h / n));
}

template <typename T>
Var<T> concat_h(const std::vector<Var<T>>& parts) {
  for (const auto& p : parts) {
    if (p.shape().size() != 4) throw DimensionError("concat_h: expected (c, s, h, w) tensors");
  }
  return concat(parts, 2);
}

// --------------------------------------------------------------------- conv3d

namespace {

struct ConvGeom {
  std::int64_t ci, s, h, w;
  std::int64_t co, kt, kh, kw;
  std::int64_t st, sh, sw;
  std::int64_t pt, ph, pw;
  std::int64_t so, ho, wo;
};

ConvGeom conv_geometry(const Shape& in, const Shape& k, const Conv3dOptions& opt) {
  if (in.size() != 4) throw DimensionError("conv3d: input must be (c_in, s, h, w), got " + shape_str(in));
  if (k.size() != 5) {
    throw DimensionError("conv3d: kernel must be (c_out, c_in, kt, kh, kw), got " + shape_str(k));
  }
  if (k[1] != in[0]) {
    throw DimensionError("conv3d: channel axis mismatch: kernel c_in " + std::to_string(k[1]) +
                         " vs input c " + std::to_string(in[0]));
  }
  static const char* axis_names[3] = {"time", "height", "width"};
  for (int a = 0; a < 3; ++a) {
    if (opt.stride[a] < 1) throw ConfigError(std::string("conv3d: stride < 1 on ") + axis_names[a]);
    if (opt.padding[a] < 0) throw ConfigError(std::string("conv3d: negative padding on ") + axis_names[a]);
    if (k[2 + a] > in[1 + a] + 2 * opt.padding[a]) {
      throw DimensionError(std::string("conv3d: kernel exceeds padded input on ") + axis_names[a] +
                           " axis: " + std::to_string(k[2 + a]) + " > " +
                           std::to_string(in[1 + a] + 2 * opt.padding[a]));
    }
  }
  ConvGeom g{};
  g.ci = in[0]; g.s = in[1]; g.h = in[2]; g.w = in[3];
  g.co = k[0]; g.kt = k[2]; g.kh = k[3]; g.kw = k[4];
  g.st = opt.stride[0]; g.sh = opt.stride[1]; g.sw = opt.stride[2];
  g.pt = opt.padding[0]; g.ph = opt.padding[1]; g.pw = opt.padding[2];
  g.so = (g.s + 2 * g.pt - g.kt) / g.st + 1;
  g.ho = (g.h + 2 * g.ph - g.kh) / g.sh + 1;
  g.wo = (g.w + 2 * g.pw - g.kw) / g.sw + 1;
  return g;
}

// Output columns [lo, hi] whose input column ow*sw + kw - pw lies inside [0, w).
inline std::pair<std::int64_t, std::int64_t> valid_cols(const ConvGeom& g, std::int64_t kw) {
  const std::int64_t lo = std::max<std::int64_t>(0, ceil_div(g.pw - kw, g.sw));
  const std::int64_t hi = std::min<std::int64_t>(g.wo - 1, floor_div(g.w - 1 + g.pw - kw, g.sw));
  return {lo, hi};
}

void gemm(bool trans_a, bool trans_b, std::int64_t m, std::int64_t n, std::int64_t k, float alpha,
          const float* a, const float* b, float beta, float* c) {
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans, trans_b ? CblasTrans : CblasNoTrans,
              static_cast<blasint>(m), static_cast<blasint>(n), static_cast<blasint>(k), alpha, a,
              static_cast<blasint>(trans_a ? m : k), b, static_cast<blasint>(trans_b ? k : n), beta, c,
              static_cast<blasint>(n));
}

void gemm(bool trans_a, bool trans_b, std::int64_t m, std::int64_t n, std::int64_t k, double alpha,
          const double* a, const double* b, double beta, double* c) {
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans, trans_b ? CblasTrans : CblasNoTrans,
              static_cast<blasint>(m), static_cast<blasint>(n), static_cast<blasint>(k), alpha, a,
              static_cast<blasint>(trans_a ? m : k), b, static_cast<blasint>(trans_b ? k : n), beta, c,
              static_cast<blasint>(n));
}

// Unfolds the input into a (c_in*kt*kh*kw, so*ho*wo) matrix whose row order
// matches the kernel layout, so the conv becomes one GEMM.
template <typename T>
std::vector<T> im2col(const ConvGeom& g, const T* in) {
  const std::int64_t cols = g.so * g.ho * g.wo;
  std::vector<T> col(static_cast<std::size_t>(g.ci * g.kt * g.kh * g.kw * cols), T(0));
  T* dst = col.data();
  for (std::int64_t ci = 0; ci < g.ci; ++ci)
    for (std::int64_t kt = 0; kt < g.kt; ++kt)
      for (std::int64_t kh = 0; kh < g.kh; ++kh)
        for (std::int64_t kw = 0; kw < g.kw; ++kw, dst += cols) {
          const auto [lo, hi] = valid_cols(g, kw);
          for (std::int64_t ot = 0; ot < g.so; ++ot) {
            const std::int64_t it = ot * g.st + kt - g.pt;
            if (it < 0 || it >= g.s) continue;
            for (std::int64_t oh = 0; oh < g.ho; ++oh) {
              const std::int64_t ih = oh * g.sh + kh - g.ph;
              if (ih < 0 || ih >= g.h) continue;
              const T* irow = in + ((ci * g.s + it) * g.h + ih) * g.w;
              T* orow = dst + (ot * g.ho + oh) * g.wo;
              for (std::int64_t ow = lo; ow <= hi; ++ow) orow[ow] = irow[ow * g.sw + kw - g.pw];
            }
          }
        }
  return col;
}

template <typename T>
void col2im_add(const ConvGeom& g, const T* col, T* gin) {
  const std::int64_t cols = g.so * g.ho * g.wo;
  const T* src = col;
  for (std::int64_t ci = 0; ci < g.ci; ++ci)
    for (std::int64_t kt = 0; kt < g.kt; ++kt)
      for (std::int64_t kh = 0; kh < g.kh; ++kh)
        for (std::int64_t kw = 0; kw < g.kw; ++kw, src += cols) {
          const auto [lo, hi] = valid_cols(g, kw);
          for (std::int64_t ot = 0; ot < g.so; ++ot) {
            const std::int64_t it = ot * g.st + kt - g.pt;
            if (it < 0 || it >= g.s) continue;
            for (std::int64_t oh = 0; oh < g.ho; ++oh) {
              const std::int64_t ih = oh * g.sh + kh - g.ph;
              if (ih < 0 || ih >= g.h) continue;
              T* grow = gin + ((ci * g.s + it) * g.h + ih) * g.w;
              const T* crow = src + (ot * g.ho + oh) * g.wo;
              for (std::int64_t ow = lo; ow <= hi; ++ow) grow[ow * g.sw + kw - g.pw] += crow[ow];
            }
          }
        }
}

void pin_blas_threads() {
  static std::once_flag once;
  // Parallelism is over samples; a single BLAS thread keeps results reproducible.
  std::call_once(once, [] { openblas_set_num_threads(1); });
}

}  // namespace

template <typename T>
Var<T> conv3d(const Var<T>& input, const Var<T>& kernel, const Var<T>& bias,
              const Conv3dOptions& options) {
  const ConvGeom g = conv_geometry(input.shape(), kernel.shape(), options);
  const bool has_bias = static_cast<bool>(bias);
  if (has_bias && (bias.shape().size() != 1 || bias.dim(0) != g.co)) {
    throw DimensionError("conv3d: bias must be (c_out) = (" + std::to_string(g.co) + "), got " +
                         shape_str(bias.shape()));
  }
  pin_blas_threads();
  const std::int64_t rows = g.ci * g.kt * g.kh * g.kw;
  const std::int64_t cols = g.so * g.ho * g.wo;
  Tensor<T> out(Shape{g.co, g.so, g.ho, g.wo});
  if (has_bias) {
    for (std::int64_t co = 0; co < g.co; ++co) std::fill_n(out.ptr() + co * cols, cols, bias.value()[co]);
  }
  {
    const std::vector<T> col = im2col(g, input.value().ptr());
    gemm(false, false, g.co, cols, rows, T(1), kernel.value().ptr(), col.data(), T(1), out.ptr());
  }
  std::vector<Var<T>> parents{input, kernel};
  if (has_bias) parents.push_back(bias);
  return make_result<T>(std::move(out), std::move(parents), [g, rows, cols](Node<T>& self) {
    auto& pin = *self.parents[0];
    auto& pk = *self.parents[1];
    const T* gy = self.grad.ptr();
    if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
      T* gb = self.parents[2]->grad_buffer().ptr();
      for (std::int64_t co = 0; co < g.co; ++co) {
        T acc = T(0);
        for (std::int64_t i = 0; i < cols; ++i) acc += gy[co * cols + i];
        gb[co] += acc;
      }
    }
    if (pk.requires_grad) {
      const std::vector<T> col = im2col(g, pin.value.ptr());
      gemm(false, true, g.co, rows, cols, T(1), gy, col.data(), T(1), pk.grad_buffer().ptr());
    }
    if (pin.requires_grad) {
      std::vector<T> gcol(static_cast<std::size_t>(rows * cols));
      gemm(true, false, rows, cols, g.co, T(1), pk.value.ptr(), gy, T(0), gcol.data());
      col2im_add(g, gcol.data(), pin.grad_buffer().ptr());
    }
  }, "conv3d");
}

template <typename T>
Var<T> max_pool3d(const Var<T>& input, std::array<std::int64_t, 3> window) {
  const Shape& in = input.shape();
  if (in.size() != 4) throw DimensionError("max_pool3d: expected (c, s, h, w), got " + shape_str(in));
  for (int a = 0; a < 3; ++a) {
    if (window[a] < 1) throw ConfigError("max_pool3d: window extent < 1");
    if (window[a] > in[1 + a]) {
      throw DimensionError("max_pool3d: window exceeds input on axis " + std::to_string(1 + a));
    }
  }
  const std::int64_t c = in[0], s = in[1], h = in[2], w = in[3];
  const std::int64_t so = s / window[0], ho = h / window[1], wo = w / window[2];
  Tensor<T> out(Shape{c, so, ho, wo});
  std::vector<std::int64_t> argmax(static_cast<std::size_t>(out.numel()));
  const T* x = input.value().ptr();
  std::int64_t oi = 0;
  for (std::int64_t ch = 0; ch < c; ++ch)
    for (std::int64_t ot = 0; ot < so; ++ot)
      for (std::int64_t oh = 0; oh < ho; ++oh)
        for (std::int64_t ow = 0; ow < wo; ++ow, ++oi) {
          std::int64_t best = -1;
          for (std::int64_t a = 0; a < window[0]; ++a)
            for (std::int64_t b = 0; b < window[1]; ++b)
              for (std::int64_t d = 0; d < window[2]; ++d) {
                const std::int64_t idx =
                    ((ch * s + ot * window[0] + a) * h + oh * window[1] + b) * w + ow * window[2] + d;
                if (best < 0 || x[idx] > x[best]) best = idx;
              }
          out[oi] = x[best];
          argmax[static_cast<std::size_t>(oi)] = best;
        }
  return make_result<T>(std::move(out), {input}, [argmax = std::move(argmax)](Node<T>& self) {
    T* g = self.parents[0]->grad_buffer().ptr();
    const T* go = self.grad.ptr();
    for (std::size_t j = 0; j < argmax.size(); ++j) g[argmax[j]] += go[j];
  }, "max_pool3d");
}

// -------------------------------------------------------------------- gem_pool

template <typename T>
Var<T> gem_pool(const Var<T>& input, const Var<T>& p, T eps) {
  const Shape& in = input.shape();
  if (in.size() != 3) throw DimensionError("gem_pool: expected (c, h, w), got " + shape_str(in));
  if (p.value().numel() != 1) throw DimensionError("gem_pool: exponent must be a single value");
  const double pe = static_cast<double>(p.value()[0]);
  if (!(pe > 0.0)) throw ConfigError("gem_pool: exponent must be positive, got " + std::to_string(pe));
  const std::int64_t rows = in[0] * in[1];
  const std::int64_t w = in[2];
  const double e = static_cast<double>(eps);
  // Powers are evaluated in double: eps^p underflows float for moderate p.
  std::vector<double> means(static_cast<std::size_t>(rows));
  Tensor<T> out(Shape{in[0], in[1]});
  const T* x = input.value().ptr();
  for (std::int64_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::int64_t j = 0; j < w; ++j) {
      const double z = std::max(static_cast<double>(x[r * w + j]), 0.0) + e;
      acc += std::pow(z, pe);
    }
    const double m = acc / static_cast<double>(w);
    means[static_cast<std::size_t>(r)] = m;
    out[r] = static_cast<T>(std::pow(m, 1.0 / pe));
  }
  return make_result<T>(std::move(out), {input, p},
                        [rows, w, pe, e, means = std::move(means)](Node<T>& self) {
    auto& pin = *self.parents[0];
    auto& pp = *self.parents[1];
    const T* x = pin.value.ptr();
    const T* go = self.grad.ptr();
    T* gx = pin.requires_grad ? pin.grad_buffer().ptr() : nullptr;
    double gp = 0.0;
    for (std::int64_t r = 0; r < rows; ++r) {
      const double m = means[static_cast<std::size_t>(r)];
      const double y = std::pow(m, 1.0 / pe);
      const double g = static_cast<double>(go[r]);
      if (gx) {
        const double coef = std::pow(m, 1.0 / pe - 1.0) / static_cast<double>(w);
        for (std::int64_t j = 0; j < w; ++j) {
          const double xv = static_cast<double>(x[r * w + j]);
          if (xv <= 0.0) continue;
          gx[r * w + j] += static_cast<T>(g * coef * std::pow(xv + e, pe - 1.0));
        }
      }
      if (pp.requires_grad) {
        double dm = 0.0;
        for (std::int64_t j = 0; j < w; ++j) {
          const double z = std::max(static_cast<double>(x[r * w + j]), 0.0) + e;
          dm += std::pow(z, pe) * std::log(z);
        }
        dm /= static_cast<double>(w);
        gp += g * y * (-std::log(m) / (pe * pe) + dm / (m * pe));
      }
    }
    if (pp.requires_grad) pp.grad_buffer()[0] += static_cast<T>(gp);
  }, "gem_pool");
}

// ------------------------------------------------------------------ layout ops

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape) {
  if (shape_numel(shape) != x.value().numel()) {
    throw DimensionError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape) +
                         " changes the element count");
  }
  Tensor<T> out = x.value().reshaped(std::move(shape));
  return make_result<T>(std::move(out), {x}, [](Node<T>& self) {
    auto g = self.parents[0]->grad_buffer().data();
    const auto go = self.grad.data();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i];
  }, "reshape");
}

template <typename T>
Var<T> permute(const Var<T>& x, const std::vector<std::size_t>& order) {
  const Shape& in = x.shape();
  const std::size_t r = in.size();
  if (order.size() != r) throw DimensionError("permute: order length differs from rank");
  std::vector<bool> used(r, false);
  for (const auto a : order) {
    if (a >= r || used[a]) throw DimensionError("permute: order is not a permutation");
    used[a] = true;
  }
  Shape shape(r);
  for (std::size_t i = 0; i < r; ++i) shape[i] = in[order[i]];
  std::vector<std::int64_t> in_stride(r, 1);
  for (std::size_t i = r - 1; i > 0; --i) in_stride[i - 1] = in_stride[i] * in[i];
  // Source offset for each destination element, destination in row-major order.
  std::vector<std::int64_t> src(static_cast<std::size_t>(x.value().numel()));
  std::vector<std::int64_t> idx(r, 0);
  for (std::size_t flat = 0; flat < src.size(); ++flat) {
    std::int64_t off = 0;
    for (std::size_t i = 0; i < r; ++i) off += idx[i] * in_stride[order[i]];
    src[flat] = off;
    for (std::size_t i = r; i-- > 0;) {
      if (++idx[i] < shape[i]) break;
      idx[i] = 0;
    }
  }
  Tensor<T> out(shape);
  const T* xv = x.value().ptr();
  for (std::size_t i = 0; i < src.size(); ++i) out[static_cast<std::int64_t>(i)] = xv[src[i]];
  return make_result<T>(std::move(out), {x}, [src = std::move(src)](Node<T>& self) {
    T* g = self.parents[0]->grad_buffer().ptr();
    const T* go = self.grad.ptr();
    for (std::size_t i = 0; i < src.size(); ++i) g[src[i]] += go[i];
  }, "permute");
}

template <typename T>
Var<T> stack(const std::vector<Var<T>>& items) {
  if (items.empty()) throw DimensionError("stack: no inputs");
  const Shape& first = items.front().shape();
  for (const auto& it : items) {
    if (it.shape() != first) {
      throw DimensionError("stack: shape mismatch " + shape_str(it.shape()) + " vs " + shape_str(first));
    }
  }
  Shape shape{static_cast<std::int64_t>(items.size())};
  shape.insert(shape.end(), first.begin(), first.end());
  Tensor<T> out(shape);
  const std::int64_t n = shape_numel(first);
  for (std::size_t k = 0; k < items.size(); ++k)
    std::copy_n(items[k].value().ptr(), n, out.ptr() + static_cast<std::int64_t>(k) * n);
  return make_result<T>(std::move(out), items, [n](Node<T>& self) {
    const T* go = self.grad.ptr();
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      if (!self.parents[k]->requires_grad) continue;
      T* g = self.parents[k]->grad_buffer().ptr();
      const T* src = go + static_cast<std::int64_t>(k) * n;
      for (std::int64_t i = 0; i < n; ++i) g[i] += src[i];
    }
  }, "stack");
}

// ---------------------------------------------------------------------- matmul

template <typename T>
Var<T> bmm(const Var<T>& a, const Var<T>& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 3 || sb.size() != 3) {
    throw DimensionError("bmm: expected rank-3 operands, got " + shape_str(sa) + " and " + shape_str(sb));
  }
  if (sa[0] != sb[0]) throw DimensionError("bmm: batch axis mismatch " + shape_str(sa) + " vs " + shape_str(sb));
  if (sa[2] != sb[1]) throw DimensionError("bmm: inner axis mismatch " + shape_str(sa) + " vs " + shape_str(sb));
  const std::int64_t n = sa[0], m = sa[1], k = sa[2], p = sb[2];
  Tensor<T> out(Shape{n, m, p});
  const T* av = a.value().ptr();
  const T* bv = b.value().ptr();
  T* o = out.ptr();
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t r = 0; r < m; ++r) {
      T* orow = o + (i * m + r) * p;
      for (std::int64_t q = 0; q < k; ++q) {
        const T s = av[(i * m + r) * k + q];
        const T* brow = bv + (i * k + q) * p;
        for (std::int64_t c = 0; c < p; ++c) orow[c] += s * brow[c];
      }
    }
  return make_result<T>(std::move(out), {a, b}, [n, m, k, p](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    const T* go = self.grad.ptr();
    const T* av = pa.value.ptr();
    const T* bv = pb.value.ptr();
    if (pa.requires_grad) {
      T* ga = pa.grad_buffer().ptr();
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t r = 0; r < m; ++r)
          for (std::int64_t q = 0; q < k; ++q) {
            const T* grow = go + (i * m + r) * p;
            const T* brow = bv + (i * k + q) * p;
            T acc = T(0);
            for (std::int64_t c = 0; c < p; ++c) acc += grow[c] * brow[c];
            ga[(i * m + r) * k + q] += acc;
          }
    }
    if (pb.requires_grad) {
      T* gb = pb.grad_buffer().ptr();
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t r = 0; r < m; ++r) {
          const T* grow = go + (i * m + r) * p;
          for (std::int64_t q = 0; q < k; ++q) {
            const T s = av[(i * m + r) * k + q];
            T* gbrow = gb + (i * k + q) * p;
            for (std::int64_t c = 0; c < p; ++c) gbrow[c] += s * grow[c];
          }
        }
    }
  }, "bmm");
}

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2) {
    throw DimensionError("matmul: expected matrices, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const Var<T> a3 = reshape(a, Shape{1, a.dim(0), a.dim(1)});
  const Var<T> b3 = reshape(b, Shape{1, b.dim(0), b.dim(1)});
  return reshape(bmm(a3, b3), Shape{a.dim(0), b.dim(1)});
}

// ------------------------------------------------------------------ batchnorm

template <typename T>
Var<T> batchnorm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                 BatchNormState<T>& state, bool training) {
  const Shape& sx = x.shape();
  if (sx.size() != 2) throw DimensionError("batchnorm: expected (batch, d), got " + shape_str(sx));
  const std::int64_t nb = sx[0], d = sx[1];
  const Shape feat{d};
  if (gamma.shape() != feat || beta.shape() != feat) {
    throw DimensionError("batchnorm: affine parameters must be (" + std::to_string(d) + ")");
  }
  if (state.running_mean.empty()) state.running_mean = Tensor<T>(feat, T(0));
  if (state.running_var.empty()) state.running_var = Tensor<T>(feat, T(1));
  if (state.running_mean.shape() != feat || state.running_var.shape() != feat) {
    throw DimensionError("batchnorm: running statistics do not match feature count");
  }
  const T* xv = x.value().ptr();
  std::vector<T> mean(static_cast<std::size_t>(d)), inv_std(static_cast<std::size_t>(d));
  if (training) {
    for (std::int64_t f = 0; f < d; ++f) {
      T acc = T(0);
      for (std::int64_t i = 0; i < nb; ++i) acc += xv[i * d + f];
      const T mu = acc / static_cast<T>(nb);
      T var = T(0);
      for (std::int64_t i = 0; i < nb; ++i) var += (xv[i * d + f] - mu) * (xv[i * d + f] - mu);
      const T biased = var / static_cast<T>(nb);
      const T unbiased = nb > 1 ? var / static_cast<T>(nb - 1) : biased;
      mean[static_cast<std::size_t>(f)] = mu;
      inv_std[static_cast<std::size_t>(f)] = T(1) / std::sqrt(biased + state.eps);
      state.running_mean[f] = (T(1) - state.momentum) * state.running_mean[f] + state.momentum * mu;
      state.running_var[f] = (T(1) - state.momentum) * state.running_var[f] + state.momentum * unbiased;
    }
  } else {
    for (std::int64_t f = 0; f < d; ++f) {
      mean[static_cast<std::size_t>(f)] = state.running_mean[f];
      inv_std[static_cast<std::size_t>(f)] = T(1) / std::sqrt(state.running_var[f] + state.eps);
    }
  }
  Tensor<T> xhat(sx);
  Tensor<T> out(sx);
  const T* gv = gamma.value().ptr();
  const T* bv = beta.value().ptr();
  for (std::int64_t i = 0; i < nb; ++i)
    for (std::int64_t f = 0; f < d; ++f) {
      const auto fi = static_cast<std::size_t>(f);
      const T h = (xv[i * d + f] - mean[fi]) * inv_std[fi];
      xhat[i * d + f] = h;
      out[i * d + f] = gv[f] * h + bv[f];
    }
  return make_result<T>(std::move(out), {x, gamma, beta},
                        [nb, d, training, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<T>& self) {
    auto& px = *self.parents[0];
    auto& pg = *self.parents[1];
    auto& pbeta = *self.parents[2];
    const T* go = self.grad.ptr();
    const T* gv = pg.value.ptr();
    if (pg.requires_grad || pbeta.requires_grad) {
      for (std::int64_t f = 0; f < d; ++f) {
        T sg = T(0), sb = T(0);
        for (std::int64_t i = 0; i < nb; ++i) {
          sg += go[i * d + f] * xhat[i * d + f];
          sb += go[i * d + f];
        }
        if (pg.requires_grad) pg.grad_buffer()[f] += sg;
        if (pbeta.requires_grad) pbeta.grad_buffer()[f] += sb;
      }
    }
    if (!px.requires_grad) return;
    T* gx = px.grad_buffer().ptr();
    for (std::int64_t f = 0; f < d; ++f) {
      const T is = inv_std[static_cast<std::size_t>(f)];
      if (!training) {
        for (std::int64_t i = 0; i < nb; ++i) gx[i * d + f] += go[i * d + f] * gv[f] * is;
        continue;
      }
      T sum_dh = T(0), sum_dh_h = T(0);
      for (std::int64_t i = 0; i < nb; ++i) {
        const T dh = go[i * d + f] * gv[f];
        sum_dh += dh;
        sum_dh_h += dh * xhat[i * d + f];
      }
      const T nbf = static_cast<T>(nb);
      for (std::int64_t i = 0; i < nb; ++i) {
        const T dh = go[i * d + f] * gv[f];
        gx[i * d + f] += is / nbf * (nbf * dh - sum_dh - xhat[i * d + f] * sum_dh_h);
      }
    }
  }, "batchnorm");
}

// ---------------------------------------------------------------- cross entropy

template <typename T>
Var<T> softmax_cross_entropy(const Var<T>& logits, const std::vector<std::int64_t>& labels) {
  const Shape& sl = logits.shape();
  if (sl.size() != 2) throw DimensionError("softmax_cross_entropy: expected (batch, classes), got " + shape_str(sl));
  const std::int64_t n = sl[0], k = sl[1];
  if (static_cast<std::int64_t>(labels.size()) != n) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for batch of " + std::to_string(n));
  }
  for (const auto l : labels) {
    if (l < 0 || l >= k) {
      throw DomainError("softmax_cross_entropy: label " + std::to_string(l) + " outside [0, " +
                        std::to_string(k) + ")");
    }
  }
  const T* z = logits.value().ptr();
  Tensor<T> probs(sl);
  T loss = T(0);
  for (std::int64_t i = 0; i < n; ++i) {
    const T* row = z + i * k;
    const T mx = *std::max_element(row, row + k);
    T denom = T(0);
    for (std::int64_t c = 0; c < k; ++c) denom += std::exp(row[c] - mx);
    const T lse = mx + std::log(denom);
    for (std::int64_t c = 0; c < k; ++c) probs[i * k + c] = std::exp(row[c] - lse);
    loss += lse - row[labels[static_cast<std::size_t>(i)]];
  }
  loss /= static_cast<T>(n);
  return make_result<T>(Tensor<T>::scalar(loss), {logits},
                        [n, k, labels, probs = std::move(probs)](Node<T>& self) {
    T* g = self.parents[0]->grad_buffer().ptr();
    const T scale = self.grad[0] / static_cast<T>(n);
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t c = 0; c < k; ++c) {
        const T onehot = (c == labels[static_cast<std::size_t>(i)]) ? T(1) : T(0);
        g[i * k + c] += scale * (probs[i * k + c] - onehot);
      }
  }, "softmax_cross_entropy");
}

// --------------------------------------------------------------- instantiation

#define MOTIONGAIT_INSTANTIATE_OPS(T)                                                          \
  template Var<T> add(const Var<T>&, const Var<T>&);                                            \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                            \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                            \
  template Var<T> abs(const Var<T>&);                                                           \
  template Var<T> sigmoid(const Var<T>&);                                                       \
  template Var<T> add_scalar(const Var<T>&, T);                                                 \
  template Var<T> mul_scalar(const Var<T>&, T);                                                 \
  template Var<T> sum(const Var<T>&);                                                           \
  template Var<T> reduce_mean(const Var<T>&, std::size_t);                                      \
  template Var<T> reduce_max(const Var<T>&, std::size_t);                                       \
  template Var<T> segment_mean(const Var<T>&, std::size_t, const Segments&);                    \
  template Var<T> segment_repeat(const Var<T>&, std::size_t, const Segments&);                  \
  template std::vector<Var<T>> split(const Var<T>&, std::size_t, const std::vector<std::int64_t>&); \
  template Var<T> concat(const std::vector<Var<T>>&, std::size_t);                              \
  template std::vector<Var<T>> split_h(const Var<T>&, std::int64_t);                            \
  template Var<T> concat_h(const std::vector<Var<T>>&);                                         \
  template Var<T> conv3d(const Var<T>&, const Var<T>&, const Var<T>&, const Conv3dOptions&);     \
  template Var<T> max_pool3d(const Var<T>&, std::array<std::int64_t, 3>);                       \
  template Var<T> gem_pool(const Var<T>&, const Var<T>&, T);                                    \
  template Var<T> reshape(const Var<T>&, Shape);                                                \
  template Var<T> permute(const Var<T>&, const std::vector<std::size_t>&);                      \
  template Var<T> stack(const std::vector<Var<T>>&);                                            \
  template Var<T> bmm(const Var<T>&, const Var<T>&);                                            \
  template Var<T> matmul(const Var<T>&, const Var<T>&);                                         \
  template Var<T> batchnorm(const Var<T>&, const Var<T>&, const Var<T>&, BatchNormState<T>&, bool); \
  template Var<T> softmax_cross_entropy(const Var<T>&, const std::vector<std::int64_t>&);

MOTIONGAIT_INSTANTIATE_OPS(float)
MOTIONGAIT_INSTANTIATE_OPS(double)

#undef MOTIONGAIT_INSTANTIATE_OPS

}  // namespace motiongait
