#include "nfce/denoiser.hpp"

#include <cmath>
#include <numeric>

namespace nfce {

using nn::Matrix;
using nn::Shape;
using nn::Tensor;

void DenoiserConfig::validate() const {
  detail::require(base_channels >= 1, "base_channels must be positive");
  for (int m : channel_mult) detail::require(m >= 1, "channel multipliers must be positive");
  detail::require(n_resblocks >= 1, "n_resblocks must be positive");
  detail::require(time_channels() % 2 == 0, "time embedding width must be even");
  detail::require(dropout >= 0.0 && dropout < 1.0, "dropout rate must lie in [0, 1)");
  detail::require(max_groups >= 1, "max_groups must be positive");
  detail::require(in_channels >= 1 && out_channels >= 1, "channel counts must be positive");
}

nlohmann::json DenoiserConfig::to_json() const {
  return {{"base_channels", base_channels}, {"channel_mult", channel_mult},
          {"n_resblocks", n_resblocks},     {"time_dim", time_channels()},
          {"dropout", dropout},             {"attention", attention},
          {"max_groups", max_groups},       {"in_channels", in_channels},
          {"out_channels", out_channels}};
}

DenoiserConfig DenoiserConfig::from_json(const nlohmann::json& j) {
  DenoiserConfig c;
  c.base_channels = j.value("base_channels", c.base_channels);
  c.channel_mult = j.value("channel_mult", c.channel_mult);
  c.n_resblocks = j.value("n_resblocks", c.n_resblocks);
  c.time_dim = j.value("time_dim", c.time_dim);
  c.dropout = j.value("dropout", c.dropout);
  c.attention = j.value("attention", c.attention);
  c.max_groups = j.value("max_groups", c.max_groups);
  c.in_channels = j.value("in_channels", c.in_channels);
  c.out_channels = j.value("out_channels", c.out_channels);
  c.validate();
  return c;
}

int group_count(int channels, int max_groups) {
  for (int g = std::min(channels, max_groups); g > 1; --g)
    if (channels % g == 0) return g;
  return 1;
}

int padded_size(int n) {
  const int unit = 1 << (DenoiserConfig::kLevels - 1);
  return (n + unit - 1) / unit * unit;
}

RVector time_embedding(double t, int dim) {
  detail::require(dim > 0 && dim % 2 == 0, "time embedding width must be even");
  detail::require(t >= 0.0, "time step must be non-negative");
  RVector te(dim);
  for (int i = 0; i < dim / 2; ++i) {
    const double w = std::pow(10000.0, -2.0 * i / dim);
    te[2 * i] = std::sin(w * t);
    te[2 * i + 1] = std::cos(w * t);
  }
  return te;
}

RMatrix time_shift_matrix(double dt, int dim) {
  detail::require(dim > 0 && dim % 2 == 0, "time embedding width must be even");
  RMatrix d = RMatrix::Zero(dim, dim);
  for (int i = 0; i < dim / 2; ++i) {
    const double w = std::pow(10000.0, -2.0 * i / dim);
    const double c = std::cos(w * dt);
    const double s = std::sin(w * dt);
    // [sin(a+b); cos(a+b)] = [[cos b, sin b]; [-sin b, cos b]]·[sin a; cos a]
    d(2 * i, 2 * i) = c;
    d(2 * i, 2 * i + 1) = s;
    d(2 * i + 1, 2 * i) = -s;
    d(2 * i + 1, 2 * i + 1) = c;
  }
  return d;
}

// ---------------------------------------------------------------------------
// ParameterStore

template <class T>
const Tensor<T>& ParameterStore<T>::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw InvalidArgument("unknown parameter: " + name);
  return it->second.tensor;
}

template <class T>
Tensor<T>& ParameterStore<T>::get(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw InvalidArgument("unknown parameter: " + name);
  return it->second.tensor;
}

template <class T>
Tensor<T>& ParameterStore<T>::add(const std::string& name, std::vector<int> shape, Matrix<T> value) {
  detail::require(!entries_.count(name), "duplicate parameter name: " + name);
  const long long total = std::accumulate(shape.begin(), shape.end(), 1LL, std::multiplies<>());
  detail::require_shape(!shape.empty() && value.rows() == shape[0] && value.size() == total,
                        "parameter " + name + " value does not match its declared shape");
  Shape s{static_cast<int>(value.cols()), static_cast<int>(value.rows()), 1, 1};
  auto& e = entries_[name];
  e.shape = std::move(shape);
  e.tensor = Tensor<T>(std::move(value), s, true);
  return e.tensor;
}

template <class T>
std::vector<std::string> ParameterStore<T>::names() const {
  std::vector<std::string> out;
  for (const auto& kv : entries_) out.push_back(kv.first);
  return out;
}

template <class T>
std::size_t ParameterStore<T>::count() const {
  std::size_t n = 0;
  for (const auto& kv : entries_) n += static_cast<std::size_t>(kv.second.tensor.value().size());
  return n;
}

template <class T>
void ParameterStore<T>::zero_grad() {
  for (auto& kv : entries_) kv.second.tensor.zero_grad();
}

template <class T>
void ParameterStore<T>::assign(const ParameterStore& other) {
  for (auto& [name, e] : entries_) {
    const auto& src = other.get(name);
    detail::require_shape(src.value().rows() == e.tensor.value().rows() &&
                              src.value().cols() == e.tensor.value().cols(),
                          "parameter " + name + " shape mismatch on assign");
    e.tensor.mutable_value() = src.value();
  }
}

template class ParameterStore<float>;
template class ParameterStore<double>;

// ---------------------------------------------------------------------------
// UNet

// Resolves parameters by name. In declare mode missing names are created with
// their initial value; otherwise every name must exist with the expected shape.
template <class T>
class UNetDenoiser<T>::Builder {
 public:
  Builder(const ParameterStore<T>* params, ParameterStore<T>* declare, Rng* init_rng)
      : params_(params), declare_(declare), rng_(init_rng) {}

  enum class Init { uniform, zeros, ones };

  const Tensor<T>& param(const std::string& name, std::vector<int> shape, int fan_in, Init init) {
    const ParameterStore<T>& store = declare_ ? *declare_ : *params_;
    if (store.contains(name)) {
      detail::require_shape(store.shape(name) == shape, "parameter " + name + " has wrong shape");
      return store.get(name);
    }
    if (!declare_) throw InvalidArgument("missing parameter: " + name);
    const int rows = shape[0];
    const int total = std::accumulate(shape.begin(), shape.end(), 1, std::multiplies<>());
    Matrix<T> v(rows, total / rows);
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max(fan_in, 1)));
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      switch (init) {
        case Init::uniform: v.data()[i] = T(rng_->uniform(-bound, bound)); break;
        case Init::zeros: v.data()[i] = T(0); break;
        case Init::ones: v.data()[i] = T(1); break;
      }
    }
    return declare_->add(name, std::move(shape), std::move(v));
  }

  Tensor<T> conv(const std::string& name, const Tensor<T>& x, int c_out, int k, int stride,
                 bool zero_init = false) {
    const int c_in = x.shape().channels;
    const auto& w = param(name + ".weight", {c_out, c_in, k, k}, c_in * k * k,
                          zero_init ? Init::zeros : Init::uniform);
    const auto& b = param(name + ".bias", {c_out, 1}, c_in * k * k, Init::zeros);
    return nn::conv2d(x, w, b, k, stride, k / 2);
  }

  Tensor<T> linear(const std::string& name, const Tensor<T>& x, int out) {
    const int in = x.shape().channels;
    const auto& w = param(name + ".weight", {out, in}, in, Init::uniform);
    const auto& b = param(name + ".bias", {out, 1}, in, Init::zeros);
    return nn::linear(x, w, b);
  }

  Tensor<T> norm(const std::string& name, const Tensor<T>& x, int max_groups) {
    const int c = x.shape().channels;
    const auto& g = param(name + ".gamma", {c, 1}, 1, Init::ones);
    const auto& b = param(name + ".beta", {c, 1}, 1, Init::zeros);
    return nn::group_norm(x, g, b, group_count(c, max_groups));
  }

  Tensor<T> attention(const std::string& name, const Tensor<T>& x) {
    const int c = x.shape().channels;
    const auto& wq = param(name + ".wq", {c, c}, c, Init::uniform);
    const auto& wk = param(name + ".wk", {c, c}, c, Init::uniform);
    const auto& wv = param(name + ".wv", {c, c}, c, Init::uniform);
    return nn::attention(x, wq, wk, wv);
  }

 private:
  const ParameterStore<T>* params_;
  ParameterStore<T>* declare_;
  Rng* rng_;
};

namespace {

template <class T>
Tensor<T> resnet_plus_impl(typename UNetDenoiser<T>::Builder& b, const DenoiserConfig& cfg,
                           const std::string& p, const Tensor<T>& x, const Tensor<T>& temb,
                           int c_out, bool train, Rng* rng) {
  // g(X) = Conv(SiLU(GN(X)))
  Tensor<T> h = b.conv(p + ".conv1", nn::silu(b.norm(p + ".norm1", x, cfg.max_groups)), c_out, 3, 1);
  // + SiLU(Lin(TE'))
  h = nn::add_channel_bias(h, nn::silu(b.linear(p + ".time", temb, c_out)));
  // ℘ = Conv(Dropout(SiLU(GN(·))))
  h = nn::silu(b.norm(p + ".norm2", h, cfg.max_groups));
  if (train && cfg.dropout > 0.0) h = nn::dropout(h, cfg.dropout, *rng);
  h = b.conv(p + ".conv2", h, c_out, 3, 1);
  const Tensor<T> skip = x.shape().channels == c_out ? x : b.conv(p + ".skip", x, c_out, 1, 1);
  return nn::add(h, skip);
}

}  // namespace

template <class T>
Tensor<T> UNetDenoiser<T>::resnet_plus(const ParameterStore<T>& params, const std::string& prefix,
                                       const Tensor<T>& x, const Tensor<T>& temb, int c_out,
                                       bool train, Rng* rng) const {
  Builder b(&params, nullptr, nullptr);
  return resnet_plus_impl<T>(b, cfg_, prefix, x, temb, c_out, train, rng);
}

template <class T>
Tensor<T> UNetDenoiser<T>::run(Builder& b, const Tensor<T>& x_t, const Tensor<T>& side,
                               const std::vector<int>& t, bool train, Rng* rng) const {
  const Shape s = x_t.shape();
  detail::require_shape(side.shape() == s, "side information and noisy image shapes differ");
  detail::require_shape(static_cast<int>(t.size()) == s.batch, "one time step per batch entry");
  detail::require_shape(s.channels + side.shape().channels == cfg_.in_channels,
                        "input channel count does not match the configuration");
  const int unit = 1 << (DenoiserConfig::kLevels - 1);
  if (s.height % unit != 0 || s.width % unit != 0)
    throw ShapeError("image size " + std::to_string(s.height) + "x" + std::to_string(s.width) +
                     " must be divisible by " + std::to_string(unit) + "; pad the input");
  if (train) detail::require(rng != nullptr, "training mode needs a dropout random stream");

  // Time path: TE' = Lin(SiLU(Lin(TE_t))).
  const int tdim = cfg_.time_channels();
  Matrix<T> te(tdim, s.batch);
  for (int i = 0; i < s.batch; ++i) te.col(i) = time_embedding(t[i], tdim).template cast<T>();
  Tensor<T> temb = Tensor<T>::vector(std::move(te));
  temb = b.linear("time.lin2", nn::silu(b.linear("time.lin1", temb, tdim)), tdim);

  auto res = [&](const std::string& p, const Tensor<T>& x, int c_out) {
    return resnet_plus_impl<T>(b, cfg_, p, x, temb, c_out, train, rng);
  };
  // Attention wrapped in a residual connection.
  auto attn = [&](const std::string& p, const Tensor<T>& x) {
    return nn::add(x, b.attention(p, x));
  };

  Tensor<T> h = b.conv("input", nn::concat_channels(side, x_t), cfg_.level_channels(0), 3, 1);
  std::vector<Tensor<T>> skips;
  for (int lvl = 0; lvl < DenoiserConfig::kLevels; ++lvl) {
    const std::string p = "down" + std::to_string(lvl);
    for (int r = 0; r < cfg_.n_resblocks; ++r)
      h = res(p + ".res" + std::to_string(r), h, cfg_.level_channels(lvl));
    if (cfg_.attention[lvl]) h = attn(p + ".attn", h);
    skips.push_back(h);
    if (lvl + 1 < DenoiserConfig::kLevels)
      h = b.conv(p + ".downsample", h, cfg_.level_channels(lvl), 3, 2);
  }

  const int mid_c = cfg_.level_channels(DenoiserConfig::kLevels - 1);
  h = res("mid.res0", h, mid_c);
  h = attn("mid.attn", h);
  h = res("mid.res1", h, mid_c);

  for (int lvl = DenoiserConfig::kLevels - 1; lvl >= 0; --lvl) {
    const std::string p = "up" + std::to_string(lvl);
    h = nn::concat_channels(h, skips[lvl]);
    for (int r = 0; r < cfg_.n_resblocks; ++r)
      h = res(p + ".res" + std::to_string(r), h, cfg_.level_channels(lvl));
    if (cfg_.attention[lvl]) h = attn(p + ".attn", h);
    if (lvl > 0)
      h = b.conv(p + ".upsample", nn::upsample_nearest2x(h), cfg_.level_channels(lvl - 1), 3, 1);
  }

  h = nn::silu(b.norm("output.norm", h, cfg_.max_groups));
  return b.conv("output.conv", h, cfg_.out_channels, 3, 1, /*zero_init=*/true);
}

template <class T>
ParameterStore<T> UNetDenoiser<T>::init_params(Rng& rng) const {
  ParameterStore<T> store;
  Builder b(nullptr, &store, &rng);
  const int unit = 1 << (DenoiserConfig::kLevels - 1);
  const int half = cfg_.in_channels / 2;
  Shape s{1, cfg_.in_channels - half, unit, unit};
  Tensor<T> x(Matrix<T>::Zero(s.channels, s.columns()), s);
  Shape ss{1, half, unit, unit};
  Tensor<T> side(Matrix<T>::Zero(ss.channels, ss.columns()), ss);
  nn::NoGradGuard guard;
  run(b, x, side, {1}, false, nullptr);
  return store;
}

template <class T>
void UNetDenoiser<T>::validate_params(const ParameterStore<T>& params) const {
  Rng rng(0);
  const ParameterStore<T> expected = init_params(rng);
  for (const auto& [name, e] : expected.entries()) {
    if (!params.contains(name)) throw InvalidArgument("missing parameter: " + name);
    if (params.shape(name) != e.shape) throw ShapeError("parameter " + name + " has wrong shape");
  }
  if (params.entries().size() != expected.entries().size())
    throw InvalidArgument("parameter store holds names unknown to this architecture");
}

template <class T>
Tensor<T> UNetDenoiser<T>::forward(const ParameterStore<T>& params, const Tensor<T>& x_t,
                                   const Tensor<T>& side, const std::vector<int>& t, bool train,
                                   Rng* rng) const {
  Builder b(&params, nullptr, nullptr);
  return run(b, x_t, side, t, train, rng);
}

template <class T>
Tensor<T> image_to_tensor(const Image& img, bool requires_grad) {
  Shape s{img.batch, img.channels, img.height, img.width};
  const int hw = s.spatial();
  Matrix<T> m(s.channels, s.columns());
  for (int b = 0; b < s.batch; ++b)
    for (int c = 0; c < s.channels; ++c)
      for (int p = 0; p < hw; ++p)
        m(c, Eigen::Index(b) * hw + p) =
            T(img.data[(Eigen::Index(b) * s.channels + c) * hw + p]);
  return Tensor<T>(std::move(m), s, requires_grad);
}

template <class T>
Image tensor_to_image(const Tensor<T>& t) {
  const Shape s = t.shape();
  Image img(s.batch, s.channels, s.height, s.width);
  const int hw = s.spatial();
  for (int b = 0; b < s.batch; ++b)
    for (int c = 0; c < s.channels; ++c)
      for (int p = 0; p < hw; ++p)
        img.data[(Eigen::Index(b) * s.channels + c) * hw + p] =
            static_cast<double>(t.value()(c, Eigen::Index(b) * hw + p));
  return img;
}

template <class T>
Image UNetDenoiser<T>::denoise(const ParameterStore<T>& params, const Image& x_t, const Image& side,
                               const std::vector<int>& t) const {
  nn::NoGradGuard guard;
  return tensor_to_image(forward(params, image_to_tensor<T>(x_t), image_to_tensor<T>(side), t,
                                 false, nullptr));
}

template class UNetDenoiser<float>;
template class UNetDenoiser<double>;
template Tensor<float> image_to_tensor<float>(const Image&, bool);
template Tensor<double> image_to_tensor<double>(const Image&, bool);
template Image tensor_to_image<float>(const Tensor<float>&);
template Image tensor_to_image<double>(const Tensor<double>&);

diffusion::Denoiser make_denoiser(const UNetDenoiser<float>& net, const ParameterStore<float>& params) {
  return [&net, &params](const Image& x_t, const Image& side, const std::vector<int>& t) {
    return net.denoise(params, x_t, side, t);
  };
}

}  // namespace nfce
