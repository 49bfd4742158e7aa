#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "liftwave/tensor.hpp"

namespace liftwave {

// Binary PGM (P5) or PPM (P6), max value <= 255, as a (1, h, w) plane on
// the [0, 255] scale. Colour is converted with BT.601 luma weights.
Tensor read_image(const std::string& path);
Tensor parse_pnm(const std::vector<std::uint8_t>& bytes, const std::string& name = "image");
// Rounds and clamps to 8 bits.
void write_pgm(const std::string& path, const Tensor& image);
Tensor round_to_pixels(const Tensor& image);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);

}  // namespace liftwave
