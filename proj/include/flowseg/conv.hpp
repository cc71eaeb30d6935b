#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace flowseg {

/// Channel-major feature map: data[(c * height + y) * width + x].
struct Tensor3 {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> data;

  Tensor3() = default;
  Tensor3(std::size_t c, std::size_t h, std::size_t w, double fill = 0.0)
      : channels(c), height(h), width(w), data(c * h * w, fill) {}

  std::size_t plane() const { return height * width; }
  double* channel(std::size_t c) { return data.data() + c * plane(); }
  const double* channel(std::size_t c) const { return data.data() + c * plane(); }
  double& at(std::size_t c, std::size_t y, std::size_t x) { return data[(c * height + y) * width + x]; }
  double at(std::size_t c, std::size_t y, std::size_t x) const { return data[(c * height + y) * width + x]; }

  friend bool operator==(const Tensor3&, const Tensor3&) = default;
};

/// Square-kernel convolution geometry. For transposed convolutions
/// `output_padding` extends the bottom/right edge of the output.
struct ConvShape {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t padding = 1;
  std::size_t output_padding = 0;
};

std::size_t conv_output_size(std::size_t in, const ConvShape& s);
std::size_t deconv_output_size(std::size_t in, const ConvShape& s);

// Convolution weights are [out][in][k][k]; transposed convolution weights
// are [in][out][k][k]. Backward passes accumulate into the gradient outputs.

Tensor3 conv2d_forward(const Tensor3& in, std::span<const double> weight, std::span<const double> bias,
                       const ConvShape& s);
void conv2d_backward(const Tensor3& in, const Tensor3& grad_out, std::span<const double> weight, const ConvShape& s,
                     Tensor3* grad_in, std::span<double> grad_weight, std::span<double> grad_bias);

Tensor3 deconv2d_forward(const Tensor3& in, std::span<const double> weight, std::span<const double> bias,
                         const ConvShape& s);
void deconv2d_backward(const Tensor3& in, const Tensor3& grad_out, std::span<const double> weight,
                       const ConvShape& s, Tensor3* grad_in, std::span<double> grad_weight,
                       std::span<double> grad_bias);

}  // namespace flowseg
