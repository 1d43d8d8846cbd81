#include "chromadiff/eps_net.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <string>

#include "chromadiff/errors.hpp"
#include "chromadiff/rng.hpp"

namespace chromadiff {
namespace {

constexpr std::array<char, 8> kMagic = {'C', 'D', 'E', 'P', 'S', 'N', 'E', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
inline double silu(double z) { return z * sigmoid(z); }
inline double silu_grad(double z) {
  const double s = sigmoid(z);
  return s * (1.0 + z * (1.0 - s));
}

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

void put_u32(std::ostream& os, std::uint32_t v) {
  std::array<unsigned char, 4> b{};
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b.data()), b.size());
}

void put_f64(std::ostream& os, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  std::array<unsigned char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b.data()), b.size());
}

std::uint32_t get_u32(std::istream& is, const std::filesystem::path& path) {
  std::array<unsigned char, 4> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), b.size())) {
    throw IoError(path.string(), "truncated checkpoint header");
  }
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

SmallEpsNet::SmallEpsNet(EpsNetShape shape) : shape_(std::move(shape)) {
  if (shape_.height == 0 || shape_.width == 0) throw ConfigError("network image size must be > 0");
  if (shape_.steps < 1) throw ConfigError("network step count must be >= 1");
  for (std::size_t h : shape_.hidden) {
    if (h == 0) throw ConfigError("hidden layer width must be > 0");
  }
  const auto sizes = layer_sizes();
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    LayerView v{sizes[l], sizes[l + 1], offset, offset + sizes[l] * sizes[l + 1]};
    offset = v.bias_offset + v.out;
    layers_.push_back(v);
  }
  gate_offset_ = offset;
  params_.assign(offset + shape_.time_width + 1, 0.0);
}

SmallEpsNet SmallEpsNet::initialized(EpsNetShape shape, std::uint64_t seed) {
  SmallEpsNet net(std::move(shape));
  for (std::size_t l = 0; l < net.layers_.size(); ++l) {
    const LayerView& v = net.layers_[l];
    const CounterRng rng(seed, l);
    const double scale = 1.0 / std::sqrt(static_cast<double>(v.in));
    for (std::size_t i = 0; i < v.in * v.out; ++i) {
      net.params_[v.weight_offset + i] = scale * rng.normal(i);
    }
  }
  return net;
}

std::vector<std::size_t> SmallEpsNet::layer_sizes() const {
  std::vector<std::size_t> sizes;
  sizes.push_back(shape_.input_size());
  sizes.insert(sizes.end(), shape_.hidden.begin(), shape_.hidden.end());
  sizes.push_back(shape_.image_size());
  return sizes;
}

std::vector<double> SmallEpsNet::time_embedding(int t) const {
  const double s = static_cast<double>(t) / static_cast<double>(shape_.steps);
  std::vector<double> emb(shape_.time_width);
  for (std::size_t k = 0; 2 * k + 1 < emb.size(); ++k) {
    const double freq = std::numbers::pi * static_cast<double>(1ULL << k);
    emb[2 * k] = std::sin(freq * s);
    emb[2 * k + 1] = std::cos(freq * s);
  }
  if (emb.size() % 2 == 1) emb.back() = s;
  return emb;
}

void SmallEpsNet::check_input(const ImageTensor& x_t, int t) const {
  if (x_t.height() != shape_.height || x_t.width() != shape_.width) {
    throw ContractError("network expects 3x" + std::to_string(shape_.height) + "x" +
                        std::to_string(shape_.width) + " input, got 3x" +
                        std::to_string(x_t.height()) + "x" + std::to_string(x_t.width()));
  }
  if (t < 0 || t >= shape_.steps) {
    throw ContractError("step index " + std::to_string(t) + " outside [0, " +
                        std::to_string(shape_.steps) + ")");
  }
}

void SmallEpsNet::forward(const ImageTensor& x_t, int t, Workspace& ws) const {
  check_input(x_t, t);
  const std::size_t n_layers = layers_.size();
  ws.pre.resize(n_layers - 1);
  ws.post.resize(n_layers);

  const auto emb = time_embedding(t);
  auto& input = ws.post[0];
  input.assign(x_t.values().begin(), x_t.values().end());
  input.insert(input.end(), emb.begin(), emb.end());

  const std::span<const double> p(params_);
  for (std::size_t l = 0; l < n_layers; ++l) {
    const LayerView& v = layers_[l];
    const auto w = p.subspan(v.weight_offset, v.in * v.out);
    const auto b = p.subspan(v.bias_offset, v.out);
    const bool last = l + 1 == n_layers;
    auto& z = last ? ws.out : ws.pre[l];
    z.resize(v.out);
    kernels::affine(backend_, w, b, ws.post[l], z);
    if (!all_finite(z)) {
      throw NumericalFault("layer " + std::to_string(l), static_cast<long>(l),
                           "non-finite activation in network layer " + std::to_string(l));
    }
    if (!last) {
      auto& h = ws.post[l + 1];
      h.resize(v.out);
      for (std::size_t i = 0; i < v.out; ++i) h[i] = silu(z[i]);
    }
  }

  double gate = params_[gate_offset_ + shape_.time_width];
  for (std::size_t k = 0; k < shape_.time_width; ++k) gate += params_[gate_offset_ + k] * emb[k];
  auto x = x_t.values();
  for (std::size_t i = 0; i < ws.out.size(); ++i) ws.out[i] += gate * x[i];
  if (!all_finite(ws.out)) {
    throw NumericalFault("output", static_cast<long>(n_layers),
                         "non-finite value in network output");
  }
}

ImageTensor SmallEpsNet::predict_epsilon(const ImageTensor& x_t, int t) const {
  Workspace ws;
  forward(x_t, t, ws);
  ImageTensor out(shape_.height, shape_.width);
  std::copy(ws.out.begin(), ws.out.end(), out.values().begin());
  return out;
}

double SmallEpsNet::accumulate_gradient(const ImageTensor& x_t, int t, const ImageTensor& eps,
                                        double weight, std::span<double> grad,
                                        Workspace& ws) const {
  require_same_shape(x_t, eps, "accumulate_gradient");
  if (grad.size() != params_.size()) {
    throw ContractError("gradient buffer has " + std::to_string(grad.size()) +
                        " entries, network has " + std::to_string(params_.size()));
  }
  forward(x_t, t, ws);

  auto target = eps.values();
  ws.delta.resize(ws.out.size());
  double sse = 0.0;
  for (std::size_t i = 0; i < ws.out.size(); ++i) {
    const double r = ws.out[i] - target[i];
    sse += r * r;
    ws.delta[i] = 2.0 * weight * r;
  }

  // Gate: d out_i / d v_k = emb_k * x_i.
  auto x = x_t.values();
  double dx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) dx += ws.delta[i] * x[i];
  const std::size_t input_image = shape_.image_size();
  for (std::size_t k = 0; k < shape_.time_width; ++k) {
    grad[gate_offset_ + k] += dx * ws.post[0][input_image + k];
  }
  grad[gate_offset_ + shape_.time_width] += dx;

  const std::span<const double> p(params_);
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const LayerView& v = layers_[l];
    kernels::rank1_update(backend_, grad.subspan(v.weight_offset, v.in * v.out), ws.delta,
                          ws.post[l]);
    for (std::size_t i = 0; i < v.out; ++i) grad[v.bias_offset + i] += ws.delta[i];
    if (l == 0) break;
    ws.delta_next.assign(v.in, 0.0);
    kernels::transposed_accumulate(backend_, p.subspan(v.weight_offset, v.in * v.out), ws.delta,
                                   ws.delta_next);
    const auto& z = ws.pre[l - 1];
    for (std::size_t j = 0; j < v.in; ++j) ws.delta_next[j] *= silu_grad(z[j]);
    std::swap(ws.delta, ws.delta_next);
  }
  return sse;
}

// Layout (all little-endian): 8 magic bytes, u32 version, u32 height,
// u32 width, u32 time_width, u32 steps, u32 layer count n, n x u32 layer
// sizes, then every parameter as an IEEE-754 binary64 in layer order.
void SmallEpsNet::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError(path.string(), "cannot open checkpoint for writing");
  os.write(kMagic.data(), kMagic.size());
  put_u32(os, kFormatVersion);
  put_u32(os, static_cast<std::uint32_t>(shape_.height));
  put_u32(os, static_cast<std::uint32_t>(shape_.width));
  put_u32(os, static_cast<std::uint32_t>(shape_.time_width));
  put_u32(os, static_cast<std::uint32_t>(shape_.steps));
  const auto sizes = layer_sizes();
  put_u32(os, static_cast<std::uint32_t>(sizes.size()));
  for (std::size_t s : sizes) put_u32(os, static_cast<std::uint32_t>(s));
  for (double v : params_) put_f64(os, v);
  if (!os) throw IoError(path.string(), "failed writing checkpoint");
}

SmallEpsNet SmallEpsNet::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(path.string(), "cannot open checkpoint");
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
    throw IoError(path.string(), "not a network checkpoint (bad magic)");
  }
  const std::uint32_t version = get_u32(is, path);
  if (version != kFormatVersion) {
    throw IoError(path.string(), "unsupported checkpoint version " + std::to_string(version));
  }
  EpsNetShape shape;
  shape.height = get_u32(is, path);
  shape.width = get_u32(is, path);
  shape.time_width = get_u32(is, path);
  shape.steps = static_cast<int>(get_u32(is, path));
  const std::uint32_t n_sizes = get_u32(is, path);
  if (n_sizes < 2 || n_sizes > 64) throw IoError(path.string(), "corrupt layer-size table");
  std::vector<std::size_t> sizes(n_sizes);
  for (auto& s : sizes) s = get_u32(is, path);
  shape.hidden.assign(sizes.begin() + 1, sizes.end() - 1);

  SmallEpsNet net(shape);
  if (net.layer_sizes() != sizes) {
    throw IoError(path.string(), "layer-size table inconsistent with image shape");
  }
  std::vector<unsigned char> raw(net.params_.size() * 8);
  if (!is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    throw IoError(path.string(), "truncated checkpoint parameters");
  }
  if (is.peek() != std::char_traits<char>::eof()) {
    throw IoError(path.string(), "trailing bytes after checkpoint parameters");
  }
  for (std::size_t i = 0; i < net.params_.size(); ++i) {
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(raw[8 * i + k]) << (8 * k);
    net.params_[i] = std::bit_cast<double>(v);
  }
  return net;
}

}  // namespace chromadiff
