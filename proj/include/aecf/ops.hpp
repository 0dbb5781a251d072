#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "aecf/layers.hpp"
#include "aecf/tape.hpp"
#include "aecf/tensor.hpp"

namespace aecf {

namespace detail {

// Splits an actual tensor shape into (batch, per-sample shape).
inline std::vector<int> per_sample_shape(const std::vector<int>& shape, bool batched, int& batch) {
  if (!batched) {
    batch = 1;
    return shape;
  }
  if (shape.size() < 2) {
    throw ConfigError("batched input needs rank >= 2, got " + Tensor::shape_string(shape));
  }
  batch = shape[0];
  return std::vector<int>(shape.begin() + 1, shape.end());
}

inline std::vector<int> with_batch(const std::vector<int>& per_sample, bool batched, int batch) {
  if (!batched) return per_sample;
  std::vector<int> s;
  s.reserve(per_sample.size() + 1);
  s.push_back(batch);
  s.insert(s.end(), per_sample.begin(), per_sample.end());
  return s;
}

}  // namespace detail

// Runs one layer forward. When `tape` is non-null and any traced argument is
// on it, the operation is recorded so backward() can reach both parameters
// (training) and the input (counterfactual generation). Gradients are only
// produced for arguments that are actually watched, so an explanation pass
// skips all weight-gradient work.
//
// `batched` marks a leading batch dimension on input (and output); parameter
// shapes are unaffected. `layer_index` is used in error messages when >= 0.
inline Traced forward_layer(Tape* tape, const LayerSpec& spec, const Traced& weights,
                            const Traced& bias, const Traced& input, bool batched = false,
                            int layer_index = -1) {
  int B = 1;
  const std::vector<int> in_shape = detail::per_sample_shape(input.value.shape(), batched, B);
  const std::vector<int> out_shape = layer_output_shape(spec, in_shape, layer_index);

  if (spec.has_params()) {
    if (weights.value.shape() != weight_shape(spec)) {
      throw ConfigError(std::string(to_string(spec.kind)) + ": weight shape " +
                        Tensor::shape_string(weights.value.shape()) + " does not match spec " +
                        Tensor::shape_string(weight_shape(spec)));
    }
    if (bias.value.shape() != bias_shape(spec)) {
      throw ConfigError(std::string(to_string(spec.kind)) + ": bias shape " +
                        Tensor::shape_string(bias.value.shape()) + " does not match spec " +
                        Tensor::shape_string(bias_shape(spec)));
    }
  }

  Tensor out(detail::with_batch(out_shape, batched, B));
  const bool trace = tape != nullptr &&
                     (input.on_tape() || weights.on_tape() || bias.on_tape());

  switch (spec.kind) {
    case LayerKind::conv1d:
    case LayerKind::conv1d_transpose: {
      const bool transpose = spec.kind == LayerKind::conv1d_transpose;
      const int Cin = spec.in_channels, Cout = spec.out_channels, K = spec.kernel_size;
      const int stride = spec.stride, pad = spec.padding;
      const int L = in_shape[1], Lout = out_shape[1];
      if (transpose) {
        detail::convt1d_forward(input.value.raw(), weights.value.raw(), bias.value.raw(),
                                out.raw(), B, Cin, L, Cout, K, stride, pad, Lout);
      } else {
        detail::conv1d_forward(input.value.raw(), weights.value.raw(), bias.value.raw(),
                               out.raw(), B, Cin, L, Cout, K, stride, pad, Lout);
      }
      if (!trace) return Traced(std::move(out));

      std::vector<int> parents;
      const bool want_dx = input.on_tape();
      const bool want_dw = weights.on_tape();
      const bool want_db = bias.on_tape();
      if (want_dx) parents.push_back(input.id);
      if (want_dw) parents.push_back(weights.id);
      if (want_db) parents.push_back(bias.id);

      // Keep only what backward needs: x for dw, w for dx.
      Tensor x_saved = want_dw ? input.value : Tensor();
      Tensor w_saved = want_dx ? weights.value : Tensor();
      std::vector<int> in_full = input.value.shape();
      return tape->record(
          std::move(out), std::move(parents),
          [=, x = std::move(x_saved), w = std::move(w_saved)](const Tensor& up) {
            std::vector<Tensor> grads;
            if (want_dx) {
              Tensor dx(in_full);
              if (transpose) {
                detail::convt1d_backward_input(w.raw(), up.raw(), dx.raw(), B, Cin, L, Cout, K,
                                               stride, pad, Lout);
              } else {
                detail::conv1d_backward_input(w.raw(), up.raw(), dx.raw(), B, Cin, L, Cout, K,
                                              stride, pad, Lout);
              }
              grads.push_back(std::move(dx));
            }
            if (want_dw || want_db) {
              Tensor dw(transpose ? std::vector<int>{Cin, Cout, K} : std::vector<int>{Cout, Cin, K});
              Tensor db(std::vector<int>{Cout});
              if (transpose) {
                detail::convt1d_backward_params(x.raw(), up.raw(), dw.raw(), db.raw(), B, Cin, L,
                                                Cout, K, stride, pad, Lout);
              } else {
                detail::conv1d_backward_params(x.raw(), up.raw(), dw.raw(), db.raw(), B, Cin, L,
                                               Cout, K, stride, pad, Lout);
              }
              if (want_dw) grads.push_back(std::move(dw));
              if (want_db) grads.push_back(std::move(db));
            }
            return grads;
          });
    }

    case LayerKind::dense: {
      const int In = spec.in_units, Out = spec.out_units;
      detail::dense_forward(input.value.raw(), weights.value.raw(), bias.value.raw(), out.raw(),
                            B, In, Out);
      if (!trace) return Traced(std::move(out));

      std::vector<int> parents;
      const bool want_dx = input.on_tape();
      const bool want_dw = weights.on_tape();
      const bool want_db = bias.on_tape();
      if (want_dx) parents.push_back(input.id);
      if (want_dw) parents.push_back(weights.id);
      if (want_db) parents.push_back(bias.id);

      Tensor x_saved = want_dw ? input.value : Tensor();
      Tensor w_saved = want_dx ? weights.value : Tensor();
      std::vector<int> in_full = input.value.shape();
      return tape->record(
          std::move(out), std::move(parents),
          [=, x = std::move(x_saved), w = std::move(w_saved)](const Tensor& up) {
            std::vector<Tensor> grads;
            if (want_dx) {
              Tensor dx(in_full);
              detail::dense_backward_input(w.raw(), up.raw(), dx.raw(), B, In, Out);
              grads.push_back(std::move(dx));
            }
            if (want_dw || want_db) {
              Tensor dw(std::vector<int>{Out, In});
              Tensor db(std::vector<int>{Out});
              detail::dense_backward_params(x.raw(), up.raw(), dw.raw(), db.raw(), B, In, Out);
              if (want_dw) grads.push_back(std::move(dw));
              if (want_db) grads.push_back(std::move(db));
            }
            return grads;
          });
    }

    case LayerKind::activation: {
      const std::size_t N = input.value.size();
      if (spec.fn == Activation::relu) {
        const double* xi = input.value.raw();
        double* yo = out.raw();
        for (std::size_t i = 0; i < N; ++i) yo[i] = xi[i] > 0.0 ? xi[i] : 0.0;
        if (!trace || !input.on_tape()) return Traced(std::move(out));
        Tensor x_saved = input.value;
        return tape->record(std::move(out), {input.id},
                            [x = std::move(x_saved)](const Tensor& up) {
                              Tensor dx(x.shape());
                              const double* xi = x.raw();
                              const double* u = up.raw();
                              double* d = dx.raw();
                              for (std::size_t i = 0; i < x.size(); ++i) {
                                d[i] = xi[i] > 0.0 ? u[i] : 0.0;
                              }
                              return std::vector<Tensor>{std::move(dx)};
                            });
      }
      // tanh
      const double* xi = input.value.raw();
      double* yo = out.raw();
      for (std::size_t i = 0; i < N; ++i) yo[i] = std::tanh(xi[i]);
      if (!trace || !input.on_tape()) return Traced(std::move(out));
      Tensor y_saved = out;
      return tape->record(std::move(out), {input.id},
                          [y = std::move(y_saved)](const Tensor& up) {
                            Tensor dx(y.shape());
                            const double* yi = y.raw();
                            const double* u = up.raw();
                            double* d = dx.raw();
                            for (std::size_t i = 0; i < y.size(); ++i) {
                              d[i] = u[i] * (1.0 - yi[i] * yi[i]);
                            }
                            return std::vector<Tensor>{std::move(dx)};
                          });
    }

    case LayerKind::flatten:
    case LayerKind::reshape: {
      // Row-major layout is unchanged; only the shape metadata moves.
      out = Tensor(out.shape(), input.value.data());
      if (!trace || !input.on_tape()) return Traced(std::move(out));
      std::vector<int> in_full = input.value.shape();
      return tape->record(std::move(out), {input.id}, [in_full](const Tensor& up) {
        return std::vector<Tensor>{Tensor(in_full, up.data())};
      });
    }

    case LayerKind::trim: {
      const int C = in_shape[0], L = in_shape[1], T = out_shape[1];
      const int keep = std::min(L, T);
      const double* xi = input.value.raw();
      double* yo = out.raw();
      for (int bc = 0; bc < B * C; ++bc) {
        for (int t = 0; t < keep; ++t) yo[static_cast<std::size_t>(bc) * T + t] =
            xi[static_cast<std::size_t>(bc) * L + t];
        // positions beyond the source length stay zero
      }
      if (!trace || !input.on_tape()) return Traced(std::move(out));
      std::vector<int> in_full = input.value.shape();
      return tape->record(std::move(out), {input.id}, [=](const Tensor& up) {
        Tensor dx(in_full);
        const double* u = up.raw();
        double* d = dx.raw();
        for (int bc = 0; bc < B * C; ++bc) {
          for (int t = 0; t < keep; ++t) d[static_cast<std::size_t>(bc) * L + t] =
              u[static_cast<std::size_t>(bc) * T + t];
        }
        return std::vector<Tensor>{std::move(dx)};
      });
    }
  }
  throw UsageError("unreachable layer kind");
}

// Public single-layer entry point without differentiation.
inline Tensor forward_layer(const LayerSpec& spec, const LayerParams& params, const Tensor& input,
                            int layer_index = -1) {
  Traced out = forward_layer(nullptr, spec, Traced(params.weights), Traced(params.bias),
                             Traced(input), false, layer_index);
  ensure_finite(out.value, "forward_layer output");
  return std::move(out.value);
}

// Runs a chain of layers; params[i] must align with chain[i] (empty for
// parameterless layers). index_offset shifts the reported layer indices so a
// decoder chain can report positions within the whole model.
inline Traced run_chain(Tape* tape, const std::vector<LayerSpec>& chain,
                        const std::vector<Traced>& weights, const std::vector<Traced>& biases,
                        Traced input, bool batched, int index_offset = 0) {
  for (std::size_t i = 0; i < chain.size(); ++i) {
    input = forward_layer(tape, chain[i], weights[i], biases[i], input, batched,
                          index_offset + static_cast<int>(i));
  }
  return input;
}

// --- small traced reductions, used by tests and diagnostics ---

inline Traced sum_t(Tape* tape, const Traced& x) {
  Tensor out = Tensor::scalar(x.value.sum());
  if (!tape || !x.on_tape()) return Traced(std::move(out));
  std::vector<int> shape = x.value.shape();
  return tape->record(std::move(out), {x.id}, [shape](const Tensor& up) {
    return std::vector<Tensor>{Tensor::full(shape, up[0])};
  });
}

// Mean squared error between x and a constant target.
inline Traced mse_t(Tape* tape, const Traced& x, const Tensor& target) {
  ensure_same_shape(x.value, target, "mse");
  const std::size_t N = x.value.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const double r = x.value[i] - target[i];
    acc += r * r;
  }
  Tensor out = Tensor::scalar(acc / static_cast<double>(N));
  if (!tape || !x.on_tape()) return Traced(std::move(out));
  Tensor x_saved = x.value;
  return tape->record(std::move(out), {x.id}, [x_saved, target](const Tensor& up) {
    Tensor dx(x_saved.shape());
    const double scale = 2.0 * up[0] / static_cast<double>(x_saved.size());
    for (std::size_t i = 0; i < x_saved.size(); ++i) {
      dx[i] = scale * (x_saved[i] - target[i]);
    }
    return std::vector<Tensor>{std::move(dx)};
  });
}

}  // namespace aecf
