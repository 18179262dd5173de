#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "rmae/config.hpp"

namespace rmae {

// Analytic multiply-accumulate counts per component. Norms, activations,
// softmax and biases are not counted.
struct FlopsReport {
  std::vector<std::pair<std::string, std::uint64_t>> components;

  std::uint64_t total() const;
  std::uint64_t get(const std::string& name) const;
  // region_encoder + neck + region_decoder + region_head + cross_feed
  std::uint64_t region_branch() const;

  nlohmann::json to_json() const;
  std::string table() const;
};

// Building blocks, exposed for tests.
namespace macs {
std::uint64_t linear(std::uint64_t rows, std::uint64_t in, std::uint64_t out);
std::uint64_t attention(std::uint64_t lq, std::uint64_t lk, std::uint64_t dim);
std::uint64_t mlp(std::uint64_t rows, std::uint64_t dim, std::uint64_t ratio);
std::uint64_t self_block(std::uint64_t len, std::uint64_t dim, std::uint64_t ratio);
std::uint64_t cross_block(std::uint64_t lq, std::uint64_t lk, std::uint64_t dim,
                          std::uint64_t ratio);
std::uint64_t mlp_head(std::uint64_t rows, std::uint64_t in, std::uint64_t hidden,
                       std::uint64_t out);
}  // namespace macs

FlopsReport flops_estimate(const ModelConfig& cfg);

}  // namespace rmae
