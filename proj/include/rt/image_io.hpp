#pragma once

#include <iosfwd>
#include <string>

#include "rt/tensor.hpp"

namespace rt {

enum class ImageFormat { pgm, ppm };

// pgm for (H,W) or (1,H,W) tensors, ppm for (3,H,W)
ImageFormat infer_image_format(const Tensor& t);

// Binary 8-bit P5/P6 with max value 255; value v maps to round(v*255).
// Values must already lie in [0,1]; out-of-range pixels are an error, the
// caller clamps first. ppm interleaves the tensor's channel planes.
void write_image(std::ostream& out, const Tensor& t, ImageFormat fmt);
void write_image_file(const Tensor& t, const std::string& path, ImageFormat fmt);
void write_image_file(const Tensor& t, const std::string& path);  // inferred format

}  // namespace rt
