#include "rt/image_io.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace rt {

namespace {

uint8_t to_byte(Scalar v, int64_t i) {
    if (!(v >= 0 && v <= 1))
        throw std::invalid_argument("pixel " + std::to_string(i) + " is " + std::to_string(v) +
                                    ", outside [0,1] (clamp before writing)");
    return static_cast<uint8_t>(std::lround(static_cast<double>(v) * 255.0));
}

}  // namespace

ImageFormat infer_image_format(const Tensor& t) {
    if (t.rank() == 2 || (t.rank() == 3 && t.dim(0) == 1)) return ImageFormat::pgm;
    if (t.rank() == 3 && t.dim(0) == 3) return ImageFormat::ppm;
    throw std::invalid_argument("tensor of shape " + t.shape_str() +
                                " is not an image (want HxW, 1xHxW or 3xHxW)");
}

void write_image(std::ostream& out, const Tensor& t, ImageFormat fmt) {
    int h = 0, w = 0, channels = fmt == ImageFormat::ppm ? 3 : 1;
    if (t.rank() == 2 && channels == 1) {
        h = t.dim(0), w = t.dim(1);
    } else if (t.rank() == 3 && t.dim(0) == channels) {
        h = t.dim(1), w = t.dim(2);
    } else {
        throw std::invalid_argument("tensor of shape " + t.shape_str() + " does not fit a " +
                                    std::to_string(channels) + "-channel image");
    }

    out << (fmt == ImageFormat::ppm ? "P6" : "P5") << "\n" << w << " " << h << "\n255\n";
    std::vector<uint8_t> row(static_cast<size_t>(w) * static_cast<size_t>(channels));
    int64_t plane = static_cast<int64_t>(h) * w;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c) {
                int64_t i = static_cast<int64_t>(c) * plane + static_cast<int64_t>(y) * w + x;
                row[static_cast<size_t>(x * channels + c)] = to_byte(t[i], i);
            }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw std::runtime_error("image write failed");
}

void write_image_file(const Tensor& t, const std::string& path, ImageFormat fmt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    write_image(out, t, fmt);
}

void write_image_file(const Tensor& t, const std::string& path) {
    write_image_file(t, path, infer_image_format(t));
}

}  // namespace rt
