#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <string>
#include <functional>
#include <vector>

#include "rmae/rng.hpp"
#include "rmae/tensor.hpp"

namespace rmae_test {

// Scalar-typed helpers follow the library's ABI namespace so f32 and f64
// translation units can share one executable.
inline namespace RMAE_ABI {

inline rmae::Tensor random_tensor(rmae::Shape shape, rmae::Rng& rng, double scale = 1.0,
                                  bool requires_grad = false) {
  std::vector<rmae::Scalar> v(rmae::shape_numel(shape));
  for (auto& x : v) x = static_cast<rmae::Scalar>(scale * rng.normal());
  return rmae::Tensor::from(std::move(shape), std::move(v), requires_grad);
}

inline double max_abs_diff(const std::vector<rmae::Scalar>& a, const std::vector<rmae::Scalar>& b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return m;
}

}  // namespace RMAE_ABI

// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    rmae::Rng rng(std::hash<std::string>{}(tag) ^
                  static_cast<std::uint64_t>(
                      std::chrono::steady_clock::now().time_since_epoch().count()));
    path_ = std::filesystem::temp_directory_path() /
            ("rmae_" + tag + "_" + std::to_string(rng.next_u64() % 1000000007ULL));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace rmae_test
