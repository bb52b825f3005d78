#include "spectex/texture_ops.hpp"

#include <algorithm>
#include <cmath>

#include "spectex/errors.hpp"

namespace spectex {

ScalarField manipulate_luma(const ScalarField& luma, const ScalarField& texture,
                            const ManipulationSpec& spec) {
  if (!luma.same_shape(texture)) throw ContractError("texture size differs from image");
  if (spec.mask && !spec.mask->same_shape(luma)) {
    throw ContractError("mask size differs from image");
  }
  if (!std::isfinite(spec.gain)) throw ParameterError("gain must be finite");
  ScalarField out = luma;
  const double delta = spec.gain - 1.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (spec.mask && (*spec.mask)[i] == 0.0) continue;
    out[i] += delta * texture[i];
  }
  return out;
}

ColorImage manipulate(const ColorImage& f, const ScalarField& texture,
                      const ManipulationSpec& spec) {
  ScalarField y = manipulate_luma(f.luma(), texture, spec);
  if (spec.clamp) y = clamped(y, 0.0, 1.0);
  return f.with_luma(std::move(y));
}

}  // namespace spectex
