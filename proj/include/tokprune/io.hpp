// Copyright 2026 The tokprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include <json.hpp>

#include "tokprune/errors.hpp"

namespace tokprune {

/// Reads a whole file. Throws ValidationError naming the path when it is
/// missing or unreadable.
std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file, then renames over `path`, so a
/// failure never leaves a partial output behind.
void atomic_write(const std::filesystem::path& path, std::string_view contents);

/// FNV-1a, 64 bit.
std::uint64_t fnv1a64(std::span<const std::byte> bytes,
                      std::uint64_t basis = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::string_view text);
std::string hex64(std::uint64_t value);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

/// `doc[key]` converted to T; errors name both the file context and key.
template <typename T>
T require_field(const nlohmann::json& doc, const std::string& key, const std::string& context) {
  if (!doc.is_object() || !doc.contains(key)) {
    throw ValidationError(context + ": missing field '" + key + "'");
  }
  try {
    return doc.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(context + ": invalid field '" + key + "': " + e.what());
  }
}

}  // namespace tokprune
