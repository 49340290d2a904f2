#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dechw/errors.hpp"
#include "dechw/rng.hpp"
#include "dechw/tensor.hpp"

namespace dechw {

enum class LayerKind { kDense, kConv2d, kMaxPool2d };
enum class Activation { kNone, kRelu };

struct LayerSpec {
  LayerKind kind{};
  int units = 0;    // kDense: output width
  int filters = 0;  // kConv2d: output channels
  int kernel = 0;   // kConv2d: square kernel extent, stride 1, no padding
  int pool = 0;     // kMaxPool2d: square window, stride equal to window
  Activation act = Activation::kNone;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct ModelSpec {
  std::string id;                // "mlp", "cnn-mnist", "cnn-fashion", "cnn-cifar"
  std::vector<int> input_shape;  // per-sample extents: {d} or {c,h,w}
  int num_classes = 0;
  std::vector<LayerSpec> layers;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

inline LayerSpec dense(int units, Activation act = Activation::kNone) {
  LayerSpec l;
  l.kind = LayerKind::kDense;
  l.units = units;
  l.act = act;
  return l;
}

inline LayerSpec conv2d(int filters, int kernel, Activation act = Activation::kRelu) {
  LayerSpec l;
  l.kind = LayerKind::kConv2d;
  l.filters = filters;
  l.kernel = kernel;
  l.act = act;
  return l;
}

inline LayerSpec max_pool2d(int window) {
  LayerSpec l;
  l.kind = LayerKind::kMaxPool2d;
  l.pool = window;
  return l;
}

inline ModelSpec make_mlp_spec(int input_dim, const std::vector<int>& hidden, int num_classes) {
  ModelSpec spec;
  spec.id = "mlp";
  spec.input_shape = {input_dim};
  spec.num_classes = num_classes;
  for (int h : hidden) spec.layers.push_back(dense(h, Activation::kRelu));
  spec.layers.push_back(dense(num_classes));
  return spec;
}

// Two 5x5 convs with pooling after each, then fc 320->50->10.
inline ModelSpec make_cnn_mnist_spec() {
  ModelSpec spec;
  spec.id = "cnn-mnist";
  spec.input_shape = {1, 28, 28};
  spec.num_classes = 10;
  spec.layers = {conv2d(10, 5), max_pool2d(2), conv2d(20, 5), max_pool2d(2),
                 dense(50, Activation::kRelu), dense(10)};
  return spec;
}

// Two 3x3 convs, one pool, fc 9216->128->10.
inline ModelSpec make_cnn_fashion_spec() {
  ModelSpec spec;
  spec.id = "cnn-fashion";
  spec.input_shape = {1, 28, 28};
  spec.num_classes = 10;
  spec.layers = {conv2d(32, 3), conv2d(64, 3), max_pool2d(2), dense(128, Activation::kRelu),
                 dense(10)};
  return spec;
}

// Three 3x3 convs, one pool, fc 21632->128->10.
inline ModelSpec make_cnn_cifar_spec() {
  ModelSpec spec;
  spec.id = "cnn-cifar";
  spec.input_shape = {3, 32, 32};
  spec.num_classes = 10;
  spec.layers = {conv2d(32, 3), conv2d(64, 3), conv2d(128, 3), max_pool2d(2),
                 dense(128, Activation::kRelu), dense(10)};
  return spec;
}

// Layer with shapes and parameter-vector offsets resolved. The flattening
// order of the parameter vector is defined by this walk: layers in model
// order, each layer's weights (row-major) followed by its biases. Index n in
// the flat vector therefore names the same semantic weight on every node that
// shares a ModelSpec.
struct ResolvedLayer {
  LayerKind kind{};
  Activation act = Activation::kNone;
  int in_c = 0, in_h = 0, in_w = 0;
  int out_c = 0, out_h = 0, out_w = 0;
  std::size_t flat_in = 0;  // dense input width
  std::size_t w_offset = 0, w_count = 0;
  std::size_t b_offset = 0, b_count = 0;

  std::size_t out_numel() const {
    return static_cast<std::size_t>(out_c) * out_h * out_w;
  }
  std::size_t in_numel() const {
    return static_cast<std::size_t>(in_c) * in_h * in_w;
  }
};

struct ResolvedModel {
  ModelSpec spec;
  std::vector<ResolvedLayer> layers;
  std::size_t param_count = 0;
};

inline ResolvedModel resolve_model(const ModelSpec& spec) {
  if (spec.layers.empty()) throw ConfigError("model '" + spec.id + "' has no layers");
  if (spec.num_classes < 2) throw ConfigError("model needs at least 2 classes");
  if (spec.input_shape.size() != 1 && spec.input_shape.size() != 3)
    throw ConfigError("model input shape must be {d} or {c,h,w}");
  for (int e : spec.input_shape)
    if (e <= 0) throw ConfigError("model input extents must be positive");

  ResolvedModel rm;
  rm.spec = spec;
  int c = 1, h = 1, w = 1;
  if (spec.input_shape.size() == 1) {
    w = spec.input_shape[0];
  } else {
    c = spec.input_shape[0];
    h = spec.input_shape[1];
    w = spec.input_shape[2];
  }

  std::size_t offset = 0;
  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    const LayerSpec& l = spec.layers[li];
    ResolvedLayer r;
    r.kind = l.kind;
    r.act = l.act;
    r.in_c = c;
    r.in_h = h;
    r.in_w = w;
    switch (l.kind) {
      case LayerKind::kDense: {
        if (l.units <= 0) throw ConfigError("dense layer needs positive units");
        r.flat_in = static_cast<std::size_t>(c) * h * w;
        r.out_c = l.units;
        r.out_h = r.out_w = 1;
        r.w_count = r.flat_in * static_cast<std::size_t>(l.units);
        r.b_count = static_cast<std::size_t>(l.units);
        c = l.units;
        h = w = 1;
        break;
      }
      case LayerKind::kConv2d: {
        if (l.filters <= 0 || l.kernel <= 0) throw ConfigError("conv layer needs filters and kernel");
        if (h < l.kernel || w < l.kernel)
          throw ConfigError("conv kernel larger than its input in model '" + spec.id + "'");
        r.out_c = l.filters;
        r.out_h = h - l.kernel + 1;
        r.out_w = w - l.kernel + 1;
        r.w_count = static_cast<std::size_t>(l.filters) * c * l.kernel * l.kernel;
        r.b_count = static_cast<std::size_t>(l.filters);
        c = l.filters;
        h = r.out_h;
        w = r.out_w;
        break;
      }
      case LayerKind::kMaxPool2d: {
        if (l.pool <= 1) throw ConfigError("pool window must exceed 1");
        if (h < l.pool || w < l.pool) throw ConfigError("pool window larger than its input");
        if (l.act != Activation::kNone) throw ConfigError("pool layers take no activation");
        r.out_c = c;
        r.out_h = h / l.pool;
        r.out_w = w / l.pool;
        h = r.out_h;
        w = r.out_w;
        break;
      }
    }
    r.w_offset = offset;
    offset += r.w_count;
    r.b_offset = offset;
    offset += r.b_count;
    rm.layers.push_back(r);
  }

  const ResolvedLayer& last = rm.layers.back();
  if (last.kind != LayerKind::kDense || last.out_c != spec.num_classes)
    throw ConfigError("final layer must be dense with num_classes units");
  if (last.act != Activation::kNone)
    throw ConfigError("final layer emits raw logits and takes no activation");
  rm.param_count = offset;
  return rm;
}

inline std::size_t param_count(const ModelSpec& spec) { return resolve_model(spec).param_count; }

// Heterogeneous initialization: per-layer uniform in
// [-sqrt(1/fan_in), +sqrt(1/fan_in)], biases zero.
template <typename Scalar>
std::vector<Scalar> build_model(const ResolvedModel& rm, std::uint64_t seed) {
  std::vector<Scalar> params(rm.param_count, Scalar(0));
  std::mt19937_64 rng = make_rng({seed, stream::kModelInit});
  for (const ResolvedLayer& l : rm.layers) {
    if (l.w_count == 0) continue;
    // dense: inputs per unit; conv: in_c * k * k receptive field
    std::size_t fan_in = l.kind == LayerKind::kDense
                             ? l.flat_in
                             : l.w_count / static_cast<std::size_t>(l.out_c);
    double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = 0; i < l.w_count; ++i)
      params[l.w_offset + i] = static_cast<Scalar>(dist(rng));
    // biases stay zero
  }
  return params;
}

template <typename Scalar>
std::vector<Scalar> build_model(const ModelSpec& spec, std::uint64_t seed) {
  return build_model<Scalar>(resolve_model(spec), seed);
}

// Scratch buffers reused across forward/backward calls. acts[k] is the output
// of layer k for the whole batch; backward mirrors them with double-precision
// gradient buffers.
template <typename Scalar>
struct Workspace {
  std::vector<Tensor<Scalar>> acts;
  std::vector<std::vector<int>> pool_argmax;  // flat input offset per pooled cell
  std::vector<std::vector<double>> dacts;
  std::vector<double> grad_acc;
  std::vector<double> probs;
};

namespace detail {

template <typename Scalar>
void check_batch_shape(const ResolvedModel& rm, const Tensor<Scalar>& batch) {
  if (batch.shape.empty()) throw DimensionError("batch tensor has no batch axis");
  if (batch.sample_numel() != shape_numel(rm.spec.input_shape))
    throw DimensionError("batch sample size does not match model input shape");
  // Conv input must be spatially compatible; a missing leading channel axis is
  // accepted when the model expects one channel.
  if (rm.layers.front().kind == LayerKind::kConv2d) {
    const auto ss = batch.sample_shape();
    const auto& in = rm.spec.input_shape;
    bool exact = ss == in;
    bool chan1 = in.size() == 3 && in[0] == 1 && ss.size() == 2 && ss[0] == in[1] && ss[1] == in[2];
    if (!exact && !chan1) throw DimensionError("batch sample shape incompatible with conv input");
  }
}

template <typename Scalar>
void ensure_workspace(const ResolvedModel& rm, Workspace<Scalar>& ws, int batch) {
  ws.acts.resize(rm.layers.size());
  ws.pool_argmax.assign(rm.layers.size(), {});
  for (std::size_t k = 0; k < rm.layers.size(); ++k) {
    const ResolvedLayer& l = rm.layers[k];
    std::size_t n = static_cast<std::size_t>(batch) * l.out_numel();
    ws.acts[k].shape = {batch, l.out_c, l.out_h, l.out_w};
    ws.acts[k].data.assign(n, Scalar(0));
    if (l.kind == LayerKind::kMaxPool2d) ws.pool_argmax[k].assign(n, -1);
  }
}

template <typename Scalar>
void dense_forward(const ResolvedLayer& l, std::span<const Scalar> params, const Scalar* x,
                   Scalar* y) {
  const Scalar* w = params.data() + l.w_offset;
  const Scalar* b = params.data() + l.b_offset;
  for (int o = 0; o < l.out_c; ++o) {
    Scalar acc = b[o];
    const Scalar* wr = w + static_cast<std::size_t>(o) * l.flat_in;
    for (std::size_t i = 0; i < l.flat_in; ++i) acc += wr[i] * x[i];
    y[o] = l.act == Activation::kRelu && acc < Scalar(0) ? Scalar(0) : acc;
  }
}

template <typename Scalar>
void conv_forward(const ResolvedLayer& l, int kernel, std::span<const Scalar> params,
                  const Scalar* x, Scalar* y) {
  const Scalar* w = params.data() + l.w_offset;
  const Scalar* b = params.data() + l.b_offset;
  for (int f = 0; f < l.out_c; ++f) {
    const Scalar* wf = w + static_cast<std::size_t>(f) * l.in_c * kernel * kernel;
    for (int oy = 0; oy < l.out_h; ++oy) {
      for (int ox = 0; ox < l.out_w; ++ox) {
        Scalar acc = b[f];
        for (int ic = 0; ic < l.in_c; ++ic) {
          const Scalar* xc = x + (static_cast<std::size_t>(ic) * l.in_h + oy) * l.in_w + ox;
          const Scalar* wc = wf + static_cast<std::size_t>(ic) * kernel * kernel;
          for (int ky = 0; ky < kernel; ++ky)
            for (int kx = 0; kx < kernel; ++kx) acc += wc[ky * kernel + kx] * xc[ky * l.in_w + kx];
        }
        Scalar v = l.act == Activation::kRelu && acc < Scalar(0) ? Scalar(0) : acc;
        y[(static_cast<std::size_t>(f) * l.out_h + oy) * l.out_w + ox] = v;
      }
    }
  }
}

template <typename Scalar>
void pool_forward(const ResolvedLayer& l, int window, const Scalar* x, Scalar* y, int* argmax) {
  for (int ch = 0; ch < l.out_c; ++ch) {
    for (int oy = 0; oy < l.out_h; ++oy) {
      for (int ox = 0; ox < l.out_w; ++ox) {
        int best = -1;
        Scalar best_v = Scalar(0);
        for (int ky = 0; ky < window; ++ky) {
          for (int kx = 0; kx < window; ++kx) {
            int iy = oy * window + ky;
            int ix = ox * window + kx;
            int idx = (ch * l.in_h + iy) * l.in_w + ix;
            if (best < 0 || x[idx] > best_v) {
              best = idx;
              best_v = x[idx];
            }
          }
        }
        std::size_t oidx = (static_cast<std::size_t>(ch) * l.out_h + oy) * l.out_w + ox;
        y[oidx] = best_v;
        argmax[oidx] = best;
      }
    }
  }
}

}  // namespace detail

// Forward pass over a batch; returns the logits tensor (batch x num_classes)
// held inside the workspace.
template <typename Scalar>
const Tensor<Scalar>& forward(std::span<const Scalar> params, const ResolvedModel& rm,
                              const Tensor<Scalar>& batch, Workspace<Scalar>& ws) {
  if (params.size() != rm.param_count) throw DimensionError("parameter vector length mismatch");
  detail::check_batch_shape(rm, batch);
  const int bsz = batch.extent(0);
  detail::ensure_workspace(rm, ws, bsz);

  for (std::size_t k = 0; k < rm.layers.size(); ++k) {
    const ResolvedLayer& l = rm.layers[k];
    const LayerSpec& ls = rm.spec.layers[k];
    const Scalar* in_base = k == 0 ? batch.data.data() : ws.acts[k - 1].data.data();
    std::size_t in_stride = l.in_numel();
    for (int b = 0; b < bsz; ++b) {
      const Scalar* x = in_base + static_cast<std::size_t>(b) * in_stride;
      Scalar* y = ws.acts[k].sample(b);
      switch (l.kind) {
        case LayerKind::kDense:
          detail::dense_forward(l, params, x, y);
          break;
        case LayerKind::kConv2d:
          detail::conv_forward(l, ls.kernel, params, x, y);
          break;
        case LayerKind::kMaxPool2d:
          detail::pool_forward(l, ls.pool, x, y,
                               ws.pool_argmax[k].data() + static_cast<std::size_t>(b) * l.out_numel());
          break;
      }
    }
  }
  return ws.acts.back();
}

template <typename Scalar>
Tensor<Scalar> forward(std::span<const Scalar> params, const ModelSpec& spec,
                       const Tensor<Scalar>& batch) {
  Workspace<Scalar> ws;
  return forward(params, resolve_model(spec), batch, ws);
}

// Mean softmax cross-entropy over the batch plus its gradient with respect to
// every parameter. Gradients are accumulated in double and rounded once into
// grad_out.
template <typename Scalar>
double loss_and_gradient(std::span<const Scalar> params, const ResolvedModel& rm,
                         const Tensor<Scalar>& batch, std::span<const int> labels,
                         std::span<Scalar> grad_out, Workspace<Scalar>& ws) {
  const int bsz = batch.extent(0);
  if (static_cast<std::size_t>(bsz) != labels.size())
    throw DimensionError("label count does not match batch size");
  if (grad_out.size() != rm.param_count) throw DimensionError("gradient buffer length mismatch");
  for (int lab : labels)
    if (lab < 0 || lab >= rm.spec.num_classes)
      throw DataError("label " + std::to_string(lab) + " outside [0, " +
                      std::to_string(rm.spec.num_classes) + ")");

  forward(params, rm, batch, ws);

  const int classes = rm.spec.num_classes;
  const std::size_t nlayers = rm.layers.size();
  ws.dacts.resize(nlayers);
  for (std::size_t k = 0; k < nlayers; ++k)
    ws.dacts[k].assign(static_cast<std::size_t>(bsz) * rm.layers[k].out_numel(), 0.0);
  ws.grad_acc.assign(rm.param_count, 0.0);

  // Softmax with max subtraction; d(logits) carries the 1/batch factor.
  double loss_sum = 0.0;
  ws.probs.resize(classes);
  const double inv_b = 1.0 / bsz;
  for (int b = 0; b < bsz; ++b) {
    const Scalar* z = ws.acts.back().sample(b);
    double zmax = z[0];
    for (int c = 1; c < classes; ++c) zmax = std::max(zmax, static_cast<double>(z[c]));
    double denom = 0.0;
    for (int c = 0; c < classes; ++c) {
      ws.probs[c] = std::exp(static_cast<double>(z[c]) - zmax);
      denom += ws.probs[c];
    }
    int y = labels[b];
    loss_sum += -(static_cast<double>(z[y]) - zmax - std::log(denom));
    double* dz = ws.dacts.back().data() + static_cast<std::size_t>(b) * classes;
    for (int c = 0; c < classes; ++c) dz[c] = (ws.probs[c] / denom - (c == y ? 1.0 : 0.0)) * inv_b;
  }

  // Reverse walk. dacts[k] is d(loss)/d(output of layer k).
  for (std::size_t kk = nlayers; kk-- > 0;) {
    const ResolvedLayer& l = rm.layers[kk];
    const LayerSpec& ls = rm.spec.layers[kk];
    double* dw = ws.grad_acc.data() + l.w_offset;
    double* db = ws.grad_acc.data() + l.b_offset;
    const Scalar* in_base = kk == 0 ? batch.data.data() : ws.acts[kk - 1].data.data();
    double* din_base = kk == 0 ? nullptr : ws.dacts[kk - 1].data();

    for (int b = 0; b < bsz; ++b) {
      const Scalar* x = in_base + static_cast<std::size_t>(b) * l.in_numel();
      const Scalar* out = ws.acts[kk].sample(b);
      double* dy = ws.dacts[kk].data() + static_cast<std::size_t>(b) * l.out_numel();
      double* dx = din_base ? din_base + static_cast<std::size_t>(b) * l.in_numel() : nullptr;

      if (l.act == Activation::kRelu)
        for (std::size_t i = 0; i < l.out_numel(); ++i)
          if (out[i] <= Scalar(0)) dy[i] = 0.0;

      switch (l.kind) {
        case LayerKind::kDense: {
          const Scalar* w = params.data() + l.w_offset;
          for (int o = 0; o < l.out_c; ++o) {
            double g = dy[o];
            if (g == 0.0) continue;
            db[o] += g;
            double* dwr = dw + static_cast<std::size_t>(o) * l.flat_in;
            const Scalar* wr = w + static_cast<std::size_t>(o) * l.flat_in;
            for (std::size_t i = 0; i < l.flat_in; ++i) {
              dwr[i] += g * static_cast<double>(x[i]);
              if (dx) dx[i] += g * static_cast<double>(wr[i]);
            }
          }
          break;
        }
        case LayerKind::kConv2d: {
          const int kern = ls.kernel;
          const Scalar* w = params.data() + l.w_offset;
          for (int f = 0; f < l.out_c; ++f) {
            const Scalar* wf = w + static_cast<std::size_t>(f) * l.in_c * kern * kern;
            double* dwf = dw + static_cast<std::size_t>(f) * l.in_c * kern * kern;
            for (int oy = 0; oy < l.out_h; ++oy) {
              for (int ox = 0; ox < l.out_w; ++ox) {
                double g = dy[(static_cast<std::size_t>(f) * l.out_h + oy) * l.out_w + ox];
                if (g == 0.0) continue;
                db[f] += g;
                for (int ic = 0; ic < l.in_c; ++ic) {
                  std::size_t in_off = (static_cast<std::size_t>(ic) * l.in_h + oy) * l.in_w + ox;
                  const Scalar* xc = x + in_off;
                  double* dxc = dx ? dx + in_off : nullptr;
                  const Scalar* wc = wf + static_cast<std::size_t>(ic) * kern * kern;
                  double* dwc = dwf + static_cast<std::size_t>(ic) * kern * kern;
                  for (int ky = 0; ky < kern; ++ky) {
                    for (int kx = 0; kx < kern; ++kx) {
                      dwc[ky * kern + kx] += g * static_cast<double>(xc[ky * l.in_w + kx]);
                      if (dxc) dxc[ky * l.in_w + kx] += g * static_cast<double>(wc[ky * kern + kx]);
                    }
                  }
                }
              }
            }
          }
          break;
        }
        case LayerKind::kMaxPool2d: {
          if (!dx) break;
          const int* arg =
              ws.pool_argmax[kk].data() + static_cast<std::size_t>(b) * l.out_numel();
          for (std::size_t i = 0; i < l.out_numel(); ++i) dx[arg[i]] += dy[i];
          break;
        }
      }
    }
  }

  for (std::size_t i = 0; i < rm.param_count; ++i)
    grad_out[i] = static_cast<Scalar>(ws.grad_acc[i]);
  return loss_sum * inv_b;
}

template <typename Scalar>
double loss_and_gradient(std::span<const Scalar> params, const ModelSpec& spec,
                         const Tensor<Scalar>& batch, std::span<const int> labels,
                         std::span<Scalar> grad_out) {
  Workspace<Scalar> ws;
  return loss_and_gradient(params, resolve_model(spec), batch, labels, grad_out, ws);
}

}  // namespace dechw
