#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "encscan/dataset.hpp"
#include "encscan/encoder.hpp"

// On-disk formats. Both are little-endian throughout.
//
// Encoder weights, magic "ENCW", version 1:
//   char[4]  magic
//   u16      version
//   u32      layer_count
//   per layer:
//     u32    rows            (output dim)
//     u32    cols            (input dim)
//     f32[rows*cols] weights, row-major
//     f32[rows]      biases
//   u8       activation code (0 = relu, 1 = tanh)
//   u8       normalize flag  (0 / 1)
//
// Dataset, magic "DSET", version 1:
//   char[4]  magic
//   u16      version
//   u32      n, height, width, channels
//   f32[n*h*w*c] samples, row-major
//   u8       has_labels
//   u32[n]   labels          (present only when has_labels = 1)
//
// Readers reject wrong magic, unknown versions, truncation and trailing
// bytes with FormatError; a byte-exact round-trip is covered by tests.

namespace encscan {

inline constexpr uint16_t kEncwVersion = 1;
inline constexpr uint16_t kDsetVersion = 1;

void save_encoder(const EncoderNet& net, const std::string& path);
EncoderNet load_encoder(const std::string& path);

void save_dataset(const SampleSet& set, const std::string& path);
SampleSet load_dataset(const std::string& path);

std::string base64_encode(const uint8_t* data, size_t len);
std::vector<uint8_t> base64_decode(const std::string& text);  // FormatError on bad input

std::string base64_encode_floats(const std::vector<float>& v);
std::vector<float> base64_decode_floats(const std::string& text);

// FNV-1a 64-bit over raw bytes, rendered as 16 hex digits. Used to pin
// report inputs to concrete files; not a cryptographic hash.
std::string digest_bytes(const uint8_t* data, size_t len);
std::string digest_file(const std::string& path);
std::string digest_string(const std::string& text);

}  // namespace encscan
