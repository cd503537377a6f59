// Copyright 2026 The tokprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "tokprune/tensor_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>

#include "tokprune/errors.hpp"
#include "tokprune/io.hpp"

namespace tokprune {

namespace {

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff));
  }
}

class Reader {
 public:
  Reader(std::string_view bytes, const std::string& source) : bytes_(bytes), source_(source) {}

  template <typename T>
  T get(const std::string& what) {
    need(sizeof(T), what);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }

  std::string_view take(std::size_t n, const std::string& what) {
    need(n, what);
    std::string_view s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const std::string& what) {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(source_ + ": truncated while reading " + what);
    }
  }

  std::string_view bytes_;
  const std::string& source_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_tensors(const std::vector<NamedTensor>& tensors) {
  std::string out(kTensorMagic, sizeof(kTensorMagic));
  put_le<std::uint16_t>(out, kTensorFormatVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, tensor] : tensors) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.rank()));
    for (std::size_t d : tensor.shape()) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (float v : tensor.data()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

std::vector<NamedTensor> decode_tensors(std::string_view bytes, const std::string& source) {
  Reader r(bytes, source);
  if (r.take(4, "magic") != std::string_view(kTensorMagic, 4)) {
    throw FormatError(source + ": bad magic (expected VITW)");
  }
  const auto version = r.get<std::uint16_t>("version");
  if (version != kTensorFormatVersion) {
    throw FormatError(source + ": unsupported version " + std::to_string(version));
  }
  const auto count = r.get<std::uint32_t>("tensor count");
  std::vector<NamedTensor> out;
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::string where = "tensor #" + std::to_string(t);
    const auto name_len = r.get<std::uint32_t>(where + " name length");
    std::string name(r.take(name_len, where + " name"));
    const auto rank = r.get<std::uint32_t>("rank of tensor '" + name + "'");
    if (rank == 0 || rank > 8) {
      throw FormatError(source + ": tensor '" + name + "' has invalid rank " +
                        std::to_string(rank));
    }
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const auto d = r.get<std::uint32_t>("dims of tensor '" + name + "'");
      if (d == 0) throw FormatError(source + ": tensor '" + name + "' has a zero dimension");
      shape.push_back(d);
    }
    const std::size_t n = shape_numel(shape);
    std::string_view payload = r.take(n * 4, "payload of tensor '" + name + "'");
    Tensor tensor(shape);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t bits = 0;
      for (std::size_t b = 0; b < 4; ++b) {
        bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(payload[i * 4 + b]))
                << (8 * b);
      }
      tensor[i] = std::bit_cast<float>(bits);
    }
    out.push_back({std::move(name), std::move(tensor)});
  }
  if (!r.done()) throw FormatError(source + ": trailing bytes after last tensor");
  return out;
}

void save_tensors(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  atomic_write(path, encode_tensors(tensors));
}

std::vector<NamedTensor> load_tensors(const std::filesystem::path& path) {
  return decode_tensors(read_file(path), path.string());
}

}  // namespace tokprune
