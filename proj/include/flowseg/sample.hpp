#pragma once

#include <array>
#include <stdexcept>

#include "flowseg/capnet.hpp"
#include "flowseg/levelset.hpp"

namespace flowseg {

inline constexpr std::array<const char*, 3> kRegionNames{"WT", "TC", "EC"};

/// Image with nested ground truth: labels[0] whole tumor, [1] core,
/// [2] enhancing core.
struct Sample {
  MultiChannelImage image;
  std::array<Mask, 3> labels;

  /// Throws std::invalid_argument on a domain mismatch or broken nesting.
  void validate() const {
    image.validate();
    for (const auto& m : labels) require_same_domain(m.domain(), image.domain(), "sample labels");
    if (!is_subset(labels[1], labels[0]) || !is_subset(labels[2], labels[1])) {
      throw std::invalid_argument("sample labels are not nested");
    }
  }
};

}  // namespace flowseg
