#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "nfce/diffusion.hpp"
#include "nfce/image.hpp"
#include "nfce/nn/ops.hpp"
#include "nfce/rng.hpp"

namespace nfce {

struct DenoiserConfig {
  int base_channels = 8;
  std::array<int, 4> channel_mult{1, 2, 2, 2};
  int n_resblocks = 2;
  /// 0 selects 4·base_channels.
  int time_dim = 0;
  double dropout = 0.1;
  std::array<bool, 4> attention{true, true, true, true};
  int max_groups = 8;
  int in_channels = 4;   // side information + noisy image, two channels each
  int out_channels = 2;

  static constexpr int kLevels = 4;

  int time_channels() const { return time_dim > 0 ? time_dim : 4 * base_channels; }
  int level_channels(int level) const { return base_channels * channel_mult.at(level); }
  void validate() const;

  nlohmann::json to_json() const;
  static DenoiserConfig from_json(const nlohmann::json& j);
};

/// Largest group count ≤ max_groups dividing the channel count.
int group_count(int channels, int max_groups);

/// Interleaved sinusoidal embedding [sin(w₀t), cos(w₀t), sin(w₁t), ...], w_i = 10000^(-2i/c).
RVector time_embedding(double t, int dim);

/// Block-diagonal rotation D_Δt with TE_{t+Δt} = D_Δt·TE_t.
RMatrix time_shift_matrix(double dt, int dim);

/// Named trainable arrays with declared logical shapes (row-major on disk).
template <class T>
class ParameterStore {
 public:
  struct Entry {
    std::vector<int> shape;
    nn::Tensor<T> tensor;
  };

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  const nn::Tensor<T>& get(const std::string& name) const;
  nn::Tensor<T>& get(const std::string& name);
  const std::vector<int>& shape(const std::string& name) const { return entries_.at(name).shape; }

  /// Registers a parameter; the matrix is rows × cols where rows = shape[0].
  nn::Tensor<T>& add(const std::string& name, std::vector<int> shape, nn::Matrix<T> value);

  std::vector<std::string> names() const;
  std::size_t count() const;
  void zero_grad();

  const std::map<std::string, Entry>& entries() const { return entries_; }
  std::map<std::string, Entry>& entries() { return entries_; }

  template <class U>
  ParameterStore<U> cast() const {
    ParameterStore<U> out;
    for (const auto& [name, e] : entries_) out.add(name, e.shape, e.tensor.value().template cast<U>());
    return out;
  }

  /// Copies values from another store with identical names and shapes.
  void assign(const ParameterStore& other);

 private:
  std::map<std::string, Entry> entries_;
};

/// Conditional noise predictor ε_θ(Ĥ*, H_t, t): a four-level UNet of ResNet+ and attention blocks.
template <class T>
class UNetDenoiser {
 public:
  explicit UNetDenoiser(DenoiserConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

  const DenoiserConfig& config() const { return cfg_; }

  /// Declares every parameter with its initial value.
  ParameterStore<T> init_params(Rng& rng) const;

  /// Checks names and shapes against this architecture.
  void validate_params(const ParameterStore<T>& params) const;

  /// x_t, side: 2 × (B·N·K) feature maps. Returns ε̂ with the same shape as x_t.
  nn::Tensor<T> forward(const ParameterStore<T>& params, const nn::Tensor<T>& x_t,
                        const nn::Tensor<T>& side, const std::vector<int>& t, bool train,
                        Rng* rng) const;

  /// Convenience evaluation on images (eval mode, no gradient recording).
  Image denoise(const ParameterStore<T>& params, const Image& x_t, const Image& side,
                const std::vector<int>& t) const;

  /// One ResNet+ block; public so it can be exercised in isolation.
  nn::Tensor<T> resnet_plus(const ParameterStore<T>& params, const std::string& prefix,
                            const nn::Tensor<T>& x, const nn::Tensor<T>& temb, int c_out,
                            bool train, Rng* rng) const;

  /// Resolves (and in declare mode creates) parameters by name.
  class Builder;

 private:
  nn::Tensor<T> run(Builder& b, const nn::Tensor<T>& x_t, const nn::Tensor<T>& side,
                    const std::vector<int>& t, bool train, Rng* rng) const;

  DenoiserConfig cfg_;
};

/// Converts a (B, C, H, W) image into the C × (B·H·W) feature layout and back.
template <class T>
nn::Tensor<T> image_to_tensor(const Image& img, bool requires_grad = false);
template <class T>
Image tensor_to_image(const nn::Tensor<T>& t);

/// Wraps a float network and its parameters as a diffusion denoiser.
diffusion::Denoiser make_denoiser(const UNetDenoiser<float>& net, const ParameterStore<float>& params);

/// Pads a spatial size up to a multiple of 2^(levels-1).
int padded_size(int n);

}  // namespace nfce
