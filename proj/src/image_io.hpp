#pragma once

#include <string>

#include "control.hpp"

namespace drf {

// P6 binary PPM, [-1,1] mapped to [0,255]. Latents with one channel are
// replicated to gray; anything else must have three channels.
void write_ppm(const Latent& z, const std::string& path);

ToyImage read_ppm(const std::string& path);

}  // namespace drf
