#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "rmae/tensor.hpp"

namespace rmae::inline RMAE_ABI {

// Blob layout: one JSON line {"shape":[...],"name":"..."} terminated by '\n',
// followed by numel little-endian IEEE-754 f32 values.
void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);

void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

}  // namespace rmae::inline RMAE_ABI
