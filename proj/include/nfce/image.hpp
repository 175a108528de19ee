#pragma once

#include <string>

#include "nfce/types.hpp"

namespace nfce {

/// Batch of real multi-channel images stored row-major as (batch, channel, row, col).
struct Image {
  int batch = 1;
  int channels = 0;
  int height = 0;
  int width = 0;
  Eigen::ArrayXd data;

  Image() = default;
  Image(int b, int c, int h, int w) : batch(b), channels(c), height(h), width(w), data(Eigen::ArrayXd::Zero(Eigen::Index(b) * c * h * w)) {}

  static Image zeros_like(const Image& o) { return Image(o.batch, o.channels, o.height, o.width); }

  Eigen::Index size() const { return data.size(); }
  Eigen::Index sample_size() const { return Eigen::Index(channels) * height * width; }
  bool same_shape(const Image& o) const {
    return batch == o.batch && channels == o.channels && height == o.height && width == o.width;
  }
  std::string shape_string() const {
    return std::to_string(batch) + "x" + std::to_string(channels) + "x" + std::to_string(height) +
           "x" + std::to_string(width);
  }

  double& at(int b, int c, int y, int x) {
    return data[((Eigen::Index(b) * channels + c) * height + y) * width + x];
  }
  double at(int b, int c, int y, int x) const {
    return data[((Eigen::Index(b) * channels + c) * height + y) * width + x];
  }

  auto sample(int b) { return data.segment(Eigen::Index(b) * sample_size(), sample_size()); }
  auto sample(int b) const { return data.segment(Eigen::Index(b) * sample_size(), sample_size()); }
};

inline void require_same_shape(const Image& a, const Image& b, const char* what) {
  detail::require_shape(a.same_shape(b), std::string(what) + ": image shapes differ (" +
                                             a.shape_string() + " vs " + b.shape_string() + ")");
}

}  // namespace nfce
