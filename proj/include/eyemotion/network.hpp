#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "eyemotion/error.hpp"
#include "eyemotion/tensor.hpp"

namespace eyemotion {

enum class LayerKind { conv2d, relu, maxpool2x2, flatten, dense, softmax };

inline std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool2x2: return "maxpool2x2";
    case LayerKind::flatten: return "flatten";
    case LayerKind::dense: return "dense";
    case LayerKind::softmax: return "softmax";
  }
  return "unknown";
}

inline LayerKind parse_layer_kind(const std::string& name) {
  for (auto k : {LayerKind::conv2d, LayerKind::relu, LayerKind::maxpool2x2, LayerKind::flatten,
                 LayerKind::dense, LayerKind::softmax}) {
    if (to_string(k) == name) return k;
  }
  throw FormatError("unknown layer kind '" + name + "'");
}

/// One entry in a network's layer list. Only the fields relevant to `kind`
/// are meaningful; the rest stay zero.
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 0;
  std::size_t padding = 0;
  std::size_t in_features = 0;
  std::size_t out_features = 0;

  static LayerSpec conv(std::size_t in, std::size_t out, std::size_t kernel, std::size_t padding = 0) {
    return {LayerKind::conv2d, in, out, kernel, padding, 0, 0};
  }
  static LayerSpec relu() { return {LayerKind::relu}; }
  static LayerSpec maxpool() { return {LayerKind::maxpool2x2}; }
  static LayerSpec flatten() { return {LayerKind::flatten}; }
  static LayerSpec dense(std::size_t in, std::size_t out) {
    return {LayerKind::dense, 0, 0, 0, 0, in, out};
  }
  static LayerSpec softmax() { return {LayerKind::softmax}; }

  bool has_parameters() const { return kind == LayerKind::conv2d || kind == LayerKind::dense; }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct InputShape {
  std::size_t channels = 1;
  std::size_t height = 0;
  std::size_t width = 0;

  Shape shape() const { return {channels, height, width}; }
  friend bool operator==(const InputShape&, const InputShape&) = default;
};

/// A feed-forward stack over the fixed layer vocabulary. Parameters are held
/// as (weight, bias) tensor pairs in layer order; conv weights are
/// [out, in, k, k], dense weights are [out, in].
template <typename T>
class Network {
 public:
  Network() = default;

  Network(InputShape input, std::vector<LayerSpec> layers) : input_(input), layers_(std::move(layers)) {
    if (layers_.empty()) throw ConfigError("network has no layers");
    Shape shape = input_.shape();
    for (auto d : shape) {
      if (d == 0) throw ConfigError("input shape " + shape_string(shape) + " has a zero dimension");
    }
    shapes_.push_back(shape);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (layers_[i].kind == LayerKind::softmax && i + 1 != layers_.size()) {
        throw ConfigError("layer " + std::to_string(i) + " (softmax): softmax must be the final layer");
      }
      shape = output_shape(i, layers_[i], shape);
      shapes_.push_back(shape);
      if (layers_[i].has_parameters()) {
        param_index_.push_back(params_.size());
        const auto& l = layers_[i];
        if (l.kind == LayerKind::conv2d) {
          params_.emplace_back(Shape{l.out_channels, l.in_channels, l.kernel, l.kernel});
          params_.emplace_back(Shape{l.out_channels});
        } else {
          params_.emplace_back(Shape{l.out_features, l.in_features});
          params_.emplace_back(Shape{l.out_features});
        }
      } else {
        param_index_.push_back(npos);
      }
    }
  }

  const InputShape& input_shape() const noexcept { return input_; }
  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }

  /// Shape of the activation after layer `i` (index 0 is the input).
  const Shape& activation_shape(std::size_t i) const { return shapes_.at(i); }
  const Shape& output_shape() const { return shapes_.back(); }

  std::vector<Tensor<T>>& parameters() noexcept { return params_; }
  const std::vector<Tensor<T>>& parameters() const noexcept { return params_; }

  /// Index of layer `i`'s weight tensor in parameters(), if it has one.
  std::optional<std::size_t> weight_index(std::size_t layer) const {
    if (param_index_.at(layer) == npos) return std::nullopt;
    return param_index_[layer];
  }

  static bool is_bias(std::size_t param_index) { return param_index % 2 == 1; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.size();
    return n;
  }

  bool ends_with_softmax() const { return layers_.back().kind == LayerKind::softmax; }

  template <typename U>
  Network<U> cast() const {
    Network<U> out(input_, layers_);
    for (std::size_t i = 0; i < params_.size(); ++i) out.parameters()[i] = params_[i].template cast<U>();
    return out;
  }

 private:
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  static Shape output_shape(std::size_t index, const LayerSpec& l, const Shape& in) {
    auto fail = [&](const std::string& why) -> ConfigError {
      return ConfigError("layer " + std::to_string(index) + " (" + to_string(l.kind) + "): " + why +
                         "; input shape " + shape_string(in));
    };
    switch (l.kind) {
      case LayerKind::conv2d: {
        if (in.size() != 3) throw fail("expects a CxHxW input");
        if (l.kernel == 0 || l.out_channels == 0) throw fail("kernel and channel counts must be positive");
        if (in[0] != l.in_channels) {
          throw fail("expects " + std::to_string(l.in_channels) + " input channels");
        }
        if (in[1] + 2 * l.padding < l.kernel || in[2] + 2 * l.padding < l.kernel) {
          throw fail("kernel larger than padded input");
        }
        return {l.out_channels, in[1] + 2 * l.padding - l.kernel + 1, in[2] + 2 * l.padding - l.kernel + 1};
      }
      case LayerKind::relu:
        return in;
      case LayerKind::maxpool2x2:
        if (in.size() != 3) throw fail("expects a CxHxW input");
        if (in[1] < 2 || in[2] < 2) throw fail("spatial size below 2");
        return {in[0], in[1] / 2, in[2] / 2};
      case LayerKind::flatten:
        return {shape_size(in)};
      case LayerKind::dense:
        if (in.size() != 1) throw fail("expects a flat input");
        if (in[0] != l.in_features) throw fail("expects " + std::to_string(l.in_features) + " features");
        if (l.out_features == 0) throw fail("output features must be positive");
        return {l.out_features};
      case LayerKind::softmax:
        if (in.size() != 1) throw fail("expects a flat input");
        return in;
    }
    throw fail("unsupported layer");
  }

  InputShape input_;
  std::vector<LayerSpec> layers_;
  std::vector<Shape> shapes_;
  std::vector<Tensor<T>> params_;
  std::vector<std::size_t> param_index_;
};

/// Activations of every layer from one forward pass; activations[0] is the
/// input, activations.back() the network output.
template <typename T>
struct ForwardTrace {
  std::vector<Tensor<T>> activations;

  const Tensor<T>& output() const { return activations.back(); }
};

/// Numerically stable softmax (max-subtracted) over a flat vector.
template <typename T>
void softmax_inplace(std::span<T> v) {
  const T m = *std::max_element(v.begin(), v.end());
  T total{0};
  for (auto& x : v) {
    x = std::exp(x - m);
    total += x;
  }
  for (auto& x : v) x /= total;
}

namespace detail {

/// Unfolds a CxHxW input into a [C*k*k, Ho*Wo] patch matrix (zero padding).
template <typename T>
void im2col(const LayerSpec& l, const Tensor<T>& in, std::size_t Ho, std::size_t Wo, std::vector<T>& col) {
  const std::size_t H = in.dim(1), W = in.dim(2), k = l.kernel;
  const auto p = static_cast<std::ptrdiff_t>(l.padding);
  const std::size_t N = Ho * Wo;
  col.assign(l.in_channels * k * k * N, T{0});
  for (std::size_t i = 0; i < l.in_channels; ++i) {
    const T* in_ch = in.data() + i * H * W;
    for (std::size_t ky = 0; ky < k; ++ky)
      for (std::size_t kx = 0; kx < k; ++kx) {
        T* row = col.data() + ((i * k + ky) * k + kx) * N;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - p;
        const std::size_t x0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -dx));
        const std::size_t x1 = static_cast<std::size_t>(
            std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(Wo), static_cast<std::ptrdiff_t>(W) - dx));
        for (std::size_t yo = 0; yo < Ho; ++yo) {
          const std::ptrdiff_t yi = static_cast<std::ptrdiff_t>(yo + ky) - p;
          if (yi < 0 || yi >= static_cast<std::ptrdiff_t>(H) || x0 >= x1) continue;
          std::copy(in_ch + static_cast<std::size_t>(yi) * W + static_cast<std::size_t>(static_cast<std::ptrdiff_t>(x0) + dx),
                    in_ch + static_cast<std::size_t>(yi) * W + static_cast<std::size_t>(static_cast<std::ptrdiff_t>(x1) + dx),
                    row + yo * Wo + x0);
        }
      }
  }
}

/// Adds a patch-matrix gradient back onto the CxHxW input gradient.
template <typename T>
void col2im_add(const LayerSpec& l, const std::vector<T>& col, std::size_t Ho, std::size_t Wo, Tensor<T>& gin) {
  const std::size_t H = gin.dim(1), W = gin.dim(2), k = l.kernel;
  const auto p = static_cast<std::ptrdiff_t>(l.padding);
  const std::size_t N = Ho * Wo;
  for (std::size_t i = 0; i < l.in_channels; ++i) {
    T* g_ch = gin.data() + i * H * W;
    for (std::size_t ky = 0; ky < k; ++ky)
      for (std::size_t kx = 0; kx < k; ++kx) {
        const T* row = col.data() + ((i * k + ky) * k + kx) * N;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - p;
        const std::size_t x0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -dx));
        const std::size_t x1 = static_cast<std::size_t>(
            std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(Wo), static_cast<std::ptrdiff_t>(W) - dx));
        for (std::size_t yo = 0; yo < Ho; ++yo) {
          const std::ptrdiff_t yi = static_cast<std::ptrdiff_t>(yo + ky) - p;
          if (yi < 0 || yi >= static_cast<std::ptrdiff_t>(H)) continue;
          T* grow = g_ch + static_cast<std::size_t>(yi) * W;
          const T* crow = row + yo * Wo;
#pragma omp simd
          for (std::size_t xo = x0; xo < x1; ++xo) grow[xo + dx] += crow[xo];
        }
      }
  }
}

template <typename T>
void conv_forward(const LayerSpec& l, const Tensor<T>& in, const Tensor<T>& w, const Tensor<T>& b, Tensor<T>& out) {
  const std::size_t Ho = out.dim(1), Wo = out.dim(2), N = Ho * Wo;
  const std::size_t K = l.in_channels * l.kernel * l.kernel;
  thread_local std::vector<T> col;
  im2col(l, in, Ho, Wo, col);
  for (std::size_t o = 0; o < l.out_channels; ++o) {
    T* orow = out.data() + o * N;
    std::fill(orow, orow + N, b[o]);
    const T* wrow = w.data() + o * K;
    for (std::size_t r = 0; r < K; ++r) {
      const T wv = wrow[r];
      const T* crow = col.data() + r * N;
#pragma omp simd
      for (std::size_t j = 0; j < N; ++j) orow[j] += wv * crow[j];
    }
  }
}

template <typename T>
void conv_backward(const LayerSpec& l, const Tensor<T>& in, const Tensor<T>& w, const Tensor<T>& gout,
                   Tensor<T>* gin, Tensor<T>& gw, Tensor<T>& gb) {
  const std::size_t Ho = gout.dim(1), Wo = gout.dim(2), N = Ho * Wo;
  const std::size_t K = l.in_channels * l.kernel * l.kernel;
  thread_local std::vector<T> col;
  thread_local std::vector<T> gcol;
  im2col(l, in, Ho, Wo, col);
  if (gin) gcol.assign(K * N, T{0});
  for (std::size_t o = 0; o < l.out_channels; ++o) {
    const T* grow = gout.data() + o * N;
    T bias_acc{0};
#pragma omp simd reduction(+ : bias_acc)
    for (std::size_t j = 0; j < N; ++j) bias_acc += grow[j];
    gb[o] += bias_acc;
    const T* wrow = w.data() + o * K;
    T* gwrow = gw.data() + o * K;
    for (std::size_t r = 0; r < K; ++r) {
      const T* crow = col.data() + r * N;
      T acc{0};
#pragma omp simd reduction(+ : acc)
      for (std::size_t j = 0; j < N; ++j) acc += grow[j] * crow[j];
      gwrow[r] += acc;
      if (gin) {
        const T wv = wrow[r];
        T* gcrow = gcol.data() + r * N;
#pragma omp simd
        for (std::size_t j = 0; j < N; ++j) gcrow[j] += wv * grow[j];
      }
    }
  }
  if (gin) col2im_add(l, gcol, Ho, Wo, *gin);
}

template <typename T>
void maxpool_forward(const Tensor<T>& in, Tensor<T>& out) {
  const std::size_t C = out.dim(0), Ho = out.dim(1), Wo = out.dim(2);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t y = 0; y < Ho; ++y)
      for (std::size_t x = 0; x < Wo; ++x) {
        T m = in.at(c, 2 * y, 2 * x);
        m = std::max(m, in.at(c, 2 * y, 2 * x + 1));
        m = std::max(m, in.at(c, 2 * y + 1, 2 * x));
        m = std::max(m, in.at(c, 2 * y + 1, 2 * x + 1));
        out.at(c, y, x) = m;
      }
}

/// Routes each pooled gradient to the first maximal element in scan order.
template <typename T>
void maxpool_backward(const Tensor<T>& in, const Tensor<T>& gout, Tensor<T>& gin) {
  const std::size_t C = gout.dim(0), Ho = gout.dim(1), Wo = gout.dim(2);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t y = 0; y < Ho; ++y)
      for (std::size_t x = 0; x < Wo; ++x) {
        std::size_t by = 2 * y, bx = 2 * x;
        for (std::size_t dy = 0; dy < 2; ++dy)
          for (std::size_t dx = 0; dx < 2; ++dx)
            if (in.at(c, 2 * y + dy, 2 * x + dx) > in.at(c, by, bx)) {
              by = 2 * y + dy;
              bx = 2 * x + dx;
            }
        gin.at(c, by, bx) += gout.at(c, y, x);
      }
}

template <typename T>
void dense_forward(const LayerSpec& l, const Tensor<T>& in, const Tensor<T>& w, const Tensor<T>& b,
                   Tensor<T>& out) {
  const std::size_t n_in = l.in_features;
  for (std::size_t o = 0; o < l.out_features; ++o) {
    const T* row = w.data() + o * n_in;
    const T* x = in.data();
    T acc{0};
#pragma omp simd reduction(+ : acc)
    for (std::size_t i = 0; i < n_in; ++i) acc += row[i] * x[i];
    out[o] = acc + b[o];
  }
}

template <typename T>
void dense_backward(const LayerSpec& l, const Tensor<T>& in, const Tensor<T>& w, const Tensor<T>& gout,
                    Tensor<T>* gin, Tensor<T>& gw, Tensor<T>& gb) {
  const std::size_t n_in = l.in_features;
  for (std::size_t o = 0; o < l.out_features; ++o) {
    const T g = gout[o];
    gb[o] += g;
    if (g == T{0}) continue;
    T* grow = gw.data() + o * n_in;
    const T* x = in.data();
#pragma omp simd
    for (std::size_t i = 0; i < n_in; ++i) grow[i] += g * x[i];
    if (gin) {
      const T* wrow = w.data() + o * n_in;
      T* gx = gin->data();
#pragma omp simd
      for (std::size_t i = 0; i < n_in; ++i) gx[i] += g * wrow[i];
    }
  }
}

}  // namespace detail

/// Runs the network on one CxHxW sample, retaining every activation.
template <typename T>
ForwardTrace<T> forward(const Network<T>& net, const Tensor<T>& input) {
  if (input.shape() != net.activation_shape(0)) {
    throw ConfigError("layer 0 (" + to_string(net.layers().front().kind) + "): input shape " +
                      shape_string(input.shape()) + " does not match expected " +
                      shape_string(net.activation_shape(0)));
  }
  ForwardTrace<T> trace;
  trace.activations.reserve(net.layers().size() + 1);
  trace.activations.push_back(input);
  const auto& params = net.parameters();
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    const auto& l = net.layers()[i];
    const Tensor<T>& in = trace.activations.back();
    switch (l.kind) {
      case LayerKind::conv2d: {
        Tensor<T> out(net.activation_shape(i + 1));
        const auto wi = *net.weight_index(i);
        detail::conv_forward(l, in, params[wi], params[wi + 1], out);
        trace.activations.push_back(std::move(out));
        break;
      }
      case LayerKind::relu: {
        Tensor<T> out = in;
        for (auto& v : out.values()) v = v > T{0} ? v : T{0};
        trace.activations.push_back(std::move(out));
        break;
      }
      case LayerKind::maxpool2x2: {
        Tensor<T> out(net.activation_shape(i + 1));
        detail::maxpool_forward(in, out);
        trace.activations.push_back(std::move(out));
        break;
      }
      case LayerKind::flatten:
        trace.activations.push_back(in.reshaped(net.activation_shape(i + 1)));
        break;
      case LayerKind::dense: {
        Tensor<T> out(net.activation_shape(i + 1));
        const auto wi = *net.weight_index(i);
        detail::dense_forward(l, in, params[wi], params[wi + 1], out);
        trace.activations.push_back(std::move(out));
        break;
      }
      case LayerKind::softmax: {
        Tensor<T> out = in;
        softmax_inplace(out.values());
        trace.activations.push_back(std::move(out));
        break;
      }
    }
  }
  return trace;
}

template <typename T>
std::vector<Tensor<T>> zero_gradients(const Network<T>& net) {
  std::vector<Tensor<T>> grads;
  grads.reserve(net.parameters().size());
  for (const auto& p : net.parameters()) grads.emplace_back(p.shape());
  return grads;
}

/// Backpropagates `output_grad` and adds parameter gradients into `grads`.
///
/// When the network ends in softmax, `output_grad` is taken with respect to
/// the softmax input (the logits), which is what softmax cross-entropy
/// produces directly. Otherwise it is the gradient of the final output.
template <typename T>
void backward_accumulate(const Network<T>& net, const ForwardTrace<T>& trace, const Tensor<T>& output_grad,
                         std::vector<Tensor<T>>& grads) {
  const std::size_t n = net.layers().size();
  if (trace.activations.size() != n + 1) {
    throw InternalError("backward called without a complete forward trace (" +
                        std::to_string(trace.activations.size()) + " of " + std::to_string(n + 1) +
                        " activations)");
  }
  if (grads.size() != net.parameters().size()) throw InternalError("gradient buffer count mismatch");
  if (output_grad.size() != trace.output().size()) {
    throw InternalError("output gradient has " + std::to_string(output_grad.size()) + " values, expected " +
                        std::to_string(trace.output().size()));
  }
  const auto& params = net.parameters();
  Tensor<T> g = output_grad.reshaped(trace.output().shape());
  for (std::size_t idx = n; idx-- > 0;) {
    const auto& l = net.layers()[idx];
    const Tensor<T>& in = trace.activations[idx];
    const bool need_input_grad = idx > 0;
    switch (l.kind) {
      case LayerKind::softmax:
        break;
      case LayerKind::relu:
        for (std::size_t j = 0; j < g.size(); ++j)
          if (!(in[j] > T{0})) g[j] = T{0};
        break;
      case LayerKind::flatten:
        g = std::move(g).reshaped(in.shape());
        break;
      case LayerKind::maxpool2x2: {
        Tensor<T> gin(in.shape());
        detail::maxpool_backward(in, g, gin);
        g = std::move(gin);
        break;
      }
      case LayerKind::conv2d: {
        const auto wi = *net.weight_index(idx);
        Tensor<T> gin;
        if (need_input_grad) gin = Tensor<T>(in.shape());
        detail::conv_backward(l, in, params[wi], g, need_input_grad ? &gin : nullptr, grads[wi], grads[wi + 1]);
        g = std::move(gin);
        break;
      }
      case LayerKind::dense: {
        const auto wi = *net.weight_index(idx);
        Tensor<T> gin;
        if (need_input_grad) gin = Tensor<T>(in.shape());
        detail::dense_backward(l, in, params[wi], g, need_input_grad ? &gin : nullptr, grads[wi], grads[wi + 1]);
        g = std::move(gin);
        break;
      }
    }
    if (!need_input_grad) break;
  }
}

template <typename T>
std::vector<Tensor<T>> backward(const Network<T>& net, const ForwardTrace<T>& trace, const Tensor<T>& output_grad) {
  auto grads = zero_gradients(net);
  backward_accumulate(net, trace, output_grad, grads);
  return grads;
}

}  // namespace eyemotion
