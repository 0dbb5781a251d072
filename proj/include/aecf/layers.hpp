#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "aecf/errors.hpp"
#include "aecf/rng.hpp"
#include "aecf/tensor.hpp"

namespace aecf {

enum class LayerKind { conv1d, conv1d_transpose, dense, activation, flatten, reshape, trim };
enum class Activation { relu, tanh };

inline const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::conv1d: return "conv1d";
    case LayerKind::conv1d_transpose: return "conv1d_transpose";
    case LayerKind::dense: return "dense";
    case LayerKind::activation: return "activation";
    case LayerKind::flatten: return "flatten";
    case LayerKind::reshape: return "reshape";
    case LayerKind::trim: return "trim";
  }
  return "?";
}

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

inline LayerKind layer_kind_from_string(const std::string& s) {
  if (s == "conv1d") return LayerKind::conv1d;
  if (s == "conv1d_transpose") return LayerKind::conv1d_transpose;
  if (s == "dense") return LayerKind::dense;
  if (s == "activation") return LayerKind::activation;
  if (s == "flatten") return LayerKind::flatten;
  if (s == "reshape") return LayerKind::reshape;
  if (s == "trim") return LayerKind::trim;
  throw ConfigError("unknown layer kind '" + s + "'");
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + s + "'");
}

// One layer of the fixed family. Conv weights are (out_ch, in_ch, k); transpose
// conv weights are (in_ch, out_ch, k); dense weights are (out_units, in_units).
struct LayerSpec {
  LayerKind kind = LayerKind::activation;
  int in_channels = 0;
  int out_channels = 0;
  int kernel_size = 0;
  int stride = 1;
  int padding = 0;
  int in_units = 0;
  int out_units = 0;
  Activation fn = Activation::relu;
  std::vector<int> target_shape;  // reshape: per-sample shape; trim: {target length}

  static LayerSpec conv(int in_ch, int out_ch, int k, int stride, int padding) {
    LayerSpec s;
    s.kind = LayerKind::conv1d;
    s.in_channels = in_ch;
    s.out_channels = out_ch;
    s.kernel_size = k;
    s.stride = stride;
    s.padding = padding;
    return s;
  }
  static LayerSpec conv_transpose(int in_ch, int out_ch, int k, int stride, int padding) {
    LayerSpec s = conv(in_ch, out_ch, k, stride, padding);
    s.kind = LayerKind::conv1d_transpose;
    return s;
  }
  static LayerSpec dense(int in, int out) {
    LayerSpec s;
    s.kind = LayerKind::dense;
    s.in_units = in;
    s.out_units = out;
    return s;
  }
  static LayerSpec act(Activation fn) {
    LayerSpec s;
    s.kind = LayerKind::activation;
    s.fn = fn;
    return s;
  }
  static LayerSpec flatten() {
    LayerSpec s;
    s.kind = LayerKind::flatten;
    return s;
  }
  static LayerSpec reshape(std::vector<int> shape) {
    LayerSpec s;
    s.kind = LayerKind::reshape;
    s.target_shape = std::move(shape);
    return s;
  }
  static LayerSpec trim(int target_len) {
    LayerSpec s;
    s.kind = LayerKind::trim;
    s.target_shape = {target_len};
    return s;
  }

  bool has_params() const {
    return kind == LayerKind::conv1d || kind == LayerKind::conv1d_transpose ||
           kind == LayerKind::dense;
  }
};

struct LayerParams {
  Tensor weights;
  Tensor bias;
  bool empty() const { return weights.size() == 0; }
};

namespace detail {

inline int ceil_div(int a, int b) {  // b > 0
  return a >= 0 ? (a + b - 1) / b : -((-a) / b);
}
inline int floor_div(int a, int b) {  // b > 0
  return a >= 0 ? a / b : -((-a + b - 1) / b);
}

inline int conv_out_len(int L, int k, int stride, int pad) {
  return (L + 2 * pad - k) / stride + 1;
}
inline int convt_out_len(int L, int k, int stride, int pad) {
  return (L - 1) * stride - 2 * pad + k;
}

// Valid output range [t0, t1] such that j = t*stride - pad + k stays in [0, L).
inline void conv_tap_range(int k, int stride, int pad, int L, int Lout, int& t0, int& t1) {
  t0 = std::max(0, ceil_div(pad - k, stride));
  t1 = std::min(Lout - 1, floor_div(L - 1 + pad - k, stride));
}

// x: (B,Cin,L)  w: (Cout,Cin,K)  bias: (Cout)  y: (B,Cout,Lout)
inline void conv1d_forward(const double* x, const double* w, const double* bias, double* y,
                           int B, int Cin, int L, int Cout, int K, int stride, int pad, int Lout) {
  for (int b = 0; b < B; ++b) {
    const double* xb = x + static_cast<std::size_t>(b) * Cin * L;
    double* yb = y + static_cast<std::size_t>(b) * Cout * Lout;
    for (int oc = 0; oc < Cout; ++oc) {
      double* yrow = yb + static_cast<std::size_t>(oc) * Lout;
      std::fill(yrow, yrow + Lout, bias[oc]);
      for (int ic = 0; ic < Cin; ++ic) {
        const double* xrow = xb + static_cast<std::size_t>(ic) * L;
        const double* wrow = w + (static_cast<std::size_t>(oc) * Cin + ic) * K;
        for (int k = 0; k < K; ++k) {
          const double wk = wrow[k];
          int t0, t1;
          conv_tap_range(k, stride, pad, L, Lout, t0, t1);
          const double* xp = xrow + (t0 * stride - pad + k);
          for (int t = t0; t <= t1; ++t) {
            yrow[t] += wk * xp[(t - t0) * stride];
          }
        }
      }
    }
  }
}

inline void conv1d_backward_input(const double* w, const double* dy, double* dx,
                                  int B, int Cin, int L, int Cout, int K, int stride, int pad, int Lout) {
  std::fill(dx, dx + static_cast<std::size_t>(B) * Cin * L, 0.0);
  for (int b = 0; b < B; ++b) {
    double* dxb = dx + static_cast<std::size_t>(b) * Cin * L;
    const double* dyb = dy + static_cast<std::size_t>(b) * Cout * Lout;
    for (int oc = 0; oc < Cout; ++oc) {
      const double* dyrow = dyb + static_cast<std::size_t>(oc) * Lout;
      for (int ic = 0; ic < Cin; ++ic) {
        double* dxrow = dxb + static_cast<std::size_t>(ic) * L;
        const double* wrow = w + (static_cast<std::size_t>(oc) * Cin + ic) * K;
        for (int k = 0; k < K; ++k) {
          const double wk = wrow[k];
          int t0, t1;
          conv_tap_range(k, stride, pad, L, Lout, t0, t1);
          double* dxp = dxrow + (t0 * stride - pad + k);
          for (int t = t0; t <= t1; ++t) {
            dxp[(t - t0) * stride] += wk * dyrow[t];
          }
        }
      }
    }
  }
}

inline void conv1d_backward_params(const double* x, const double* dy, double* dw, double* db,
                                   int B, int Cin, int L, int Cout, int K, int stride, int pad, int Lout) {
  std::fill(dw, dw + static_cast<std::size_t>(Cout) * Cin * K, 0.0);
  std::fill(db, db + Cout, 0.0);
  for (int b = 0; b < B; ++b) {
    const double* xb = x + static_cast<std::size_t>(b) * Cin * L;
    const double* dyb = dy + static_cast<std::size_t>(b) * Cout * Lout;
    for (int oc = 0; oc < Cout; ++oc) {
      const double* dyrow = dyb + static_cast<std::size_t>(oc) * Lout;
      double acc = 0.0;
      for (int t = 0; t < Lout; ++t) acc += dyrow[t];
      db[oc] += acc;
      for (int ic = 0; ic < Cin; ++ic) {
        const double* xrow = xb + static_cast<std::size_t>(ic) * L;
        double* dwrow = dw + (static_cast<std::size_t>(oc) * Cin + ic) * K;
        for (int k = 0; k < K; ++k) {
          int t0, t1;
          conv_tap_range(k, stride, pad, L, Lout, t0, t1);
          const double* xp = xrow + (t0 * stride - pad + k);
          double s = 0.0;
          for (int t = t0; t <= t1; ++t) {
            s += dyrow[t] * xp[(t - t0) * stride];
          }
          dwrow[k] += s;
        }
      }
    }
  }
}

// x: (B,Cin,L)  w: (Cin,Cout,K)  bias: (Cout)  y: (B,Cout,Lout)
inline void convt1d_forward(const double* x, const double* w, const double* bias, double* y,
                            int B, int Cin, int L, int Cout, int K, int stride, int pad, int Lout) {
  for (int b = 0; b < B; ++b) {
    const double* xb = x + static_cast<std::size_t>(b) * Cin * L;
    double* yb = y + static_cast<std::size_t>(b) * Cout * Lout;
    for (int oc = 0; oc < Cout; ++oc) {
      double* yrow = yb + static_cast<std::size_t>(oc) * Lout;
      std::fill(yrow, yrow + Lout, bias[oc]);
    }
    for (int ic = 0; ic < Cin; ++ic) {
      const double* xrow = xb + static_cast<std::size_t>(ic) * L;
      for (int oc = 0; oc < Cout; ++oc) {
        double* yrow = yb + static_cast<std::size_t>(oc) * Lout;
        const double* wrow = w + (static_cast<std::size_t>(ic) * Cout + oc) * K;
        for (int k = 0; k < K; ++k) {
          const double wk = wrow[k];
          int t0, t1;
          conv_tap_range(k, stride, pad, Lout, L, t0, t1);  // j = t*stride - pad + k in [0, Lout)
          double* yp = yrow + (t0 * stride - pad + k);
          for (int t = t0; t <= t1; ++t) {
            yp[(t - t0) * stride] += wk * xrow[t];
          }
        }
      }
    }
  }
}

inline void convt1d_backward_input(const double* w, const double* dy, double* dx,
                                   int B, int Cin, int L, int Cout, int K, int stride, int pad, int Lout) {
  for (int b = 0; b < B; ++b) {
    double* dxb = dx + static_cast<std::size_t>(b) * Cin * L;
    const double* dyb = dy + static_cast<std::size_t>(b) * Cout * Lout;
    for (int ic = 0; ic < Cin; ++ic) {
      double* dxrow = dxb + static_cast<std::size_t>(ic) * L;
      std::fill(dxrow, dxrow + L, 0.0);
      for (int oc = 0; oc < Cout; ++oc) {
        const double* dyrow = dyb + static_cast<std::size_t>(oc) * Lout;
        const double* wrow = w + (static_cast<std::size_t>(ic) * Cout + oc) * K;
        for (int k = 0; k < K; ++k) {
          const double wk = wrow[k];
          int t0, t1;
          conv_tap_range(k, stride, pad, Lout, L, t0, t1);
          const double* dyp = dyrow + (t0 * stride - pad + k);
          for (int t = t0; t <= t1; ++t) {
            dxrow[t] += wk * dyp[(t - t0) * stride];
          }
        }
      }
    }
  }
}

inline void convt1d_backward_params(const double* x, const double* dy, double* dw, double* db,
                                    int B, int Cin, int L, int Cout, int K, int stride, int pad, int Lout) {
  std::fill(dw, dw + static_cast<std::size_t>(Cin) * Cout * K, 0.0);
  std::fill(db, db + Cout, 0.0);
  for (int b = 0; b < B; ++b) {
    const double* xb = x + static_cast<std::size_t>(b) * Cin * L;
    const double* dyb = dy + static_cast<std::size_t>(b) * Cout * Lout;
    for (int oc = 0; oc < Cout; ++oc) {
      const double* dyrow = dyb + static_cast<std::size_t>(oc) * Lout;
      double acc = 0.0;
      for (int j = 0; j < Lout; ++j) acc += dyrow[j];
      db[oc] += acc;
    }
    for (int ic = 0; ic < Cin; ++ic) {
      const double* xrow = xb + static_cast<std::size_t>(ic) * L;
      for (int oc = 0; oc < Cout; ++oc) {
        const double* dyrow = dyb + static_cast<std::size_t>(oc) * Lout;
        double* dwrow = dw + (static_cast<std::size_t>(ic) * Cout + oc) * K;
        for (int k = 0; k < K; ++k) {
          int t0, t1;
          conv_tap_range(k, stride, pad, Lout, L, t0, t1);
          const double* dyp = dyrow + (t0 * stride - pad + k);
          double s = 0.0;
          for (int t = t0; t <= t1; ++t) {
            s += xrow[t] * dyp[(t - t0) * stride];
          }
          dwrow[k] += s;
        }
      }
    }
  }
}

// x: (B,In)  w: (Out,In)  bias: (Out)  y: (B,Out)
inline void dense_forward(const double* x, const double* w, const double* bias, double* y,
                          int B, int In, int Out) {
  for (int b = 0; b < B; ++b) {
    const double* xb = x + static_cast<std::size_t>(b) * In;
    double* yb = y + static_cast<std::size_t>(b) * Out;
    for (int o = 0; o < Out; ++o) {
      const double* wrow = w + static_cast<std::size_t>(o) * In;
      double acc = bias[o];
      for (int i = 0; i < In; ++i) acc += wrow[i] * xb[i];
      yb[o] = acc;
    }
  }
}

inline void dense_backward_input(const double* w, const double* dy, double* dx,
                                 int B, int In, int Out) {
  for (int b = 0; b < B; ++b) {
    double* dxb = dx + static_cast<std::size_t>(b) * In;
    const double* dyb = dy + static_cast<std::size_t>(b) * Out;
    std::fill(dxb, dxb + In, 0.0);
    for (int o = 0; o < Out; ++o) {
      const double g = dyb[o];
      const double* wrow = w + static_cast<std::size_t>(o) * In;
      for (int i = 0; i < In; ++i) dxb[i] += g * wrow[i];
    }
  }
}

inline void dense_backward_params(const double* x, const double* dy, double* dw, double* db,
                                  int B, int In, int Out) {
  std::fill(dw, dw + static_cast<std::size_t>(Out) * In, 0.0);
  std::fill(db, db + Out, 0.0);
  for (int b = 0; b < B; ++b) {
    const double* xb = x + static_cast<std::size_t>(b) * In;
    const double* dyb = dy + static_cast<std::size_t>(b) * Out;
    for (int o = 0; o < Out; ++o) {
      const double g = dyb[o];
      db[o] += g;
      double* dwrow = dw + static_cast<std::size_t>(o) * In;
      for (int i = 0; i < In; ++i) dwrow[i] += g * xb[i];
    }
  }
}

}  // namespace detail

// Per-sample output shape of a layer; validates the input shape. layer_index
// is included in error messages when >= 0 (chain position).
inline std::vector<int> layer_output_shape(const LayerSpec& spec, const std::vector<int>& in,
                                           int layer_index = -1) {
  auto fail = [&](const std::string& msg) -> std::vector<int> {
    std::string where = layer_index >= 0 ? "layer " + std::to_string(layer_index) + " (" +
                                               to_string(spec.kind) + "): "
                                         : std::string(to_string(spec.kind)) + ": ";
    throw ConfigError(where + msg);
  };

  switch (spec.kind) {
    case LayerKind::conv1d: {
      if (spec.kernel_size < 1 || spec.stride < 1 || spec.padding < 0) {
        return fail("kernel_size/stride must be >= 1 and padding >= 0");
      }
      if (in.size() != 2 || in[0] != spec.in_channels) {
        return fail("expected input (" + std::to_string(spec.in_channels) + "xL), got " +
                    Tensor::shape_string(in));
      }
      const int lout = detail::conv_out_len(in[1], spec.kernel_size, spec.stride, spec.padding);
      if (lout < 1) return fail("output length would be " + std::to_string(lout));
      return {spec.out_channels, lout};
    }
    case LayerKind::conv1d_transpose: {
      if (spec.kernel_size < 1 || spec.stride < 1 || spec.padding < 0) {
        return fail("kernel_size/stride must be >= 1 and padding >= 0");
      }
      if (in.size() != 2 || in[0] != spec.in_channels) {
        return fail("expected input (" + std::to_string(spec.in_channels) + "xL), got " +
                    Tensor::shape_string(in));
      }
      const int lout = detail::convt_out_len(in[1], spec.kernel_size, spec.stride, spec.padding);
      if (lout < 1) return fail("output length would be " + std::to_string(lout));
      return {spec.out_channels, lout};
    }
    case LayerKind::dense: {
      if (in.size() != 1 || in[0] != spec.in_units) {
        return fail("expected input (" + std::to_string(spec.in_units) + "), got " +
                    Tensor::shape_string(in));
      }
      return {spec.out_units};
    }
    case LayerKind::activation:
      return in;
    case LayerKind::flatten: {
      if (in.size() != 2) return fail("expected rank-2 input, got " + Tensor::shape_string(in));
      return {in[0] * in[1]};
    }
    case LayerKind::reshape: {
      if (spec.target_shape.empty() || spec.target_shape.size() > 2) {
        return fail("reshape target must have rank 1 or 2");
      }
      if (Tensor::element_count(in) != Tensor::element_count(spec.target_shape)) {
        return fail("cannot reshape " + Tensor::shape_string(in) + " to " +
                    Tensor::shape_string(spec.target_shape));
      }
      return spec.target_shape;
    }
    case LayerKind::trim: {
      if (in.size() != 2) return fail("expected rank-2 input, got " + Tensor::shape_string(in));
      if (spec.target_shape.size() != 1 || spec.target_shape[0] < 1) {
        return fail("trim needs a positive target length");
      }
      return {in[0], spec.target_shape[0]};
    }
  }
  return fail("unreachable");
}

// Type-checks a chain end to end and returns the final per-sample shape.
inline std::vector<int> chain_output_shape(const std::vector<LayerSpec>& chain,
                                           std::vector<int> in, int index_offset = 0) {
  for (std::size_t i = 0; i < chain.size(); ++i) {
    in = layer_output_shape(chain[i], in, index_offset + static_cast<int>(i));
  }
  return in;
}

inline std::vector<int> weight_shape(const LayerSpec& spec) {
  switch (spec.kind) {
    case LayerKind::conv1d:
      return {spec.out_channels, spec.in_channels, spec.kernel_size};
    case LayerKind::conv1d_transpose:
      return {spec.in_channels, spec.out_channels, spec.kernel_size};
    case LayerKind::dense:
      return {spec.out_units, spec.in_units};
    default:
      throw UsageError(std::string("layer kind ") + to_string(spec.kind) + " has no weights");
  }
}

inline std::vector<int> bias_shape(const LayerSpec& spec) {
  switch (spec.kind) {
    case LayerKind::conv1d:
    case LayerKind::conv1d_transpose:
      return {spec.out_channels};
    case LayerKind::dense:
      return {spec.out_units};
    default:
      throw UsageError(std::string("layer kind ") + to_string(spec.kind) + " has no bias");
  }
}

// Kaiming-style uniform init: U(-sqrt(6/fan_in), +sqrt(6/fan_in)), zero bias.
inline LayerParams init_params(const LayerSpec& spec, Rng& rng) {
  if (!spec.has_params()) return {};
  LayerParams p;
  p.weights = Tensor(weight_shape(spec));
  p.bias = Tensor(bias_shape(spec));
  const int fan_in = spec.kind == LayerKind::dense ? spec.in_units
                                                   : spec.in_channels * spec.kernel_size;
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (auto& v : p.weights.data()) v = rng.uniform(-bound, bound);
  return p;
}

}  // namespace aecf
