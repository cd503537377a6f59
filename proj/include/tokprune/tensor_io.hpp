// Copyright 2026 The tokprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "tokprune/tensor.hpp"

namespace tokprune {

// Container layout, all integers little-endian:
//   "VITW" | version u16 | tensor count u32 |
//   per tensor: name length u32 | UTF-8 name | rank u32 | dims u32[rank] |
//               f32[numel] payload
inline constexpr char kTensorMagic[4] = {'V', 'I', 'T', 'W'};
inline constexpr std::uint16_t kTensorFormatVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

std::string encode_tensors(const std::vector<NamedTensor>& tensors);

/// Throws FormatError on a bad header or truncation; a truncated payload
/// error names the tensor being read.
std::vector<NamedTensor> decode_tensors(std::string_view bytes, const std::string& source);

void save_tensors(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_tensors(const std::filesystem::path& path);

}  // namespace tokprune
