#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "fedgrain/imaging/grid.hpp"

namespace fedgrain::synth {

// Binary PGM (P5). Gray images: 8-bit, value round(255 v). Label maps: 8-bit
// {0, 255}. Instance maps: 16-bit big-endian with maxval 65535.
std::string encode_pgm(const GrayImage& image);
std::string encode_pgm(const LabelMap& labels);
std::string encode_pgm(const InstanceMap& instances);

// Decoders throw FormatError (with byte offset) on malformed input.
GrayImage decode_gray_pgm(std::string_view bytes);
LabelMap decode_label_pgm(std::string_view bytes);
InstanceMap decode_instance_pgm(std::string_view bytes);

void save_image(const std::filesystem::path& path, const GrayImage& image);
void save_image(const std::filesystem::path& path, const LabelMap& labels);
void save_image(const std::filesystem::path& path, const InstanceMap& instances);

GrayImage load_gray_image(const std::filesystem::path& path);
LabelMap load_label_map(const std::filesystem::path& path);
InstanceMap load_instance_map(const std::filesystem::path& path);

}  // namespace fedgrain::synth
