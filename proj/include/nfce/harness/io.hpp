#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace nfce::io {

/// Raw float32 little-endian, row-major.
void write_f32(const std::filesystem::path& path, std::span<const float> values);
std::vector<float> read_f32(const std::filesystem::path& path, std::size_t expected_count);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

/// Creates the directory (and parents) or throws if it cannot be written.
void ensure_directory(const std::filesystem::path& dir);

}  // namespace nfce::io
