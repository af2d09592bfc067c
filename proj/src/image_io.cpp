#include "image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace drf {

void write_ppm(const Latent& z, const std::string& path) {
    if (z.channels != 1 && z.channels != 3)
        throw IoError("ppm output needs 1 or 3 channels, got " + std::to_string(z.channels));
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os << "P6\n" << z.width << " " << z.height << "\n255\n";
    const int np = z.pixels();
    for (int p = 0; p < np; ++p) {
        for (int c = 0; c < 3; ++c) {
            const int ch   = z.channels == 3 ? c : 0;
            const double v = z.data[size_t(ch) * np + p];
            const int byte = int(std::lround((std::clamp(v, -1.0, 1.0) + 1.0) * 0.5 * 255.0));
            os.put(char(byte));
        }
    }
    if (!os) throw IoError("failed writing '" + path + "'");
}

ToyImage read_ppm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path + "'");
    std::string magic;
    is >> magic;
    if (magic != "P6") throw IoError("'" + path + "' is not a P6 ppm");
    int w = 0, h = 0, maxval = 0;
    is >> w >> h >> maxval;
    if (!is || w <= 0 || h <= 0 || maxval != 255) throw IoError("bad ppm header in '" + path + "'");
    is.get();  // single whitespace after the header
    ToyImage img(3, h, w);
    const int np = h * w;
    for (int p = 0; p < np; ++p) {
        for (int c = 0; c < 3; ++c) {
            const int byte = is.get();
            if (byte < 0) throw IoError("truncated ppm '" + path + "'");
            img.pixels[size_t(c) * np + p] = byte / 255.0 * 2.0 - 1.0;
        }
    }
    return img;
}

}  // namespace drf
