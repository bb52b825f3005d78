#ifndef SPECTEX_TEXTURE_OPS_HPP_
#define SPECTEX_TEXTURE_OPS_HPP_

#include <optional>

#include "spectex/image.hpp"

namespace spectex {

struct ManipulationSpec {
  /// 1 keeps the texture, 0 removes it, >1 enhances, <0 inverts.
  double gain = 1.0;
  /// Binary mask; nonzero pixels are manipulated, the rest pass through.
  std::optional<ScalarField> mask;
  bool clamp = true;
};

/// Y + (gain − 1)·texture inside the mask, Y elsewhere. Never clamps.
ScalarField manipulate_luma(const ScalarField& luma, const ScalarField& texture,
                            const ManipulationSpec& spec);

/// Applies manipulate_luma to the luminance of f; chroma is left untouched.
ColorImage manipulate(const ColorImage& f, const ScalarField& texture,
                      const ManipulationSpec& spec);

}  // namespace spectex

#endif  // SPECTEX_TEXTURE_OPS_HPP_
