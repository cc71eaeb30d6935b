#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <utility>
#include <vector>

#include "flowseg/field.hpp"
#include "flowseg/levelset.hpp"

namespace flowseg {

class ImageFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Rgb = std::array<std::uint8_t, 3>;

/// Binary P5 with maxval <= 255; values scaled to [0, 1] by maxval.
ScalarField read_pgm(const std::filesystem::path& path);
/// Values clamped to [0, 1] and written as 8-bit P5.
void write_pgm(const std::filesystem::path& path, const ScalarField& image);

/// Binary P6: grayscale of `image` (clamped to [0, 1]) with contour pixels
/// painted in order. Throws DomainError if a pixel lies outside the image.
void write_ppm_overlay(const std::filesystem::path& path, const ScalarField& image,
                       const std::vector<std::pair<Contour, Rgb>>& contours);

/// Min-max rescale to [0, 1]; constant fields map to 0.
ScalarField normalize_for_display(const ScalarField& f);

}  // namespace flowseg
