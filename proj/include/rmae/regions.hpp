#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "rmae/image.hpp"

namespace rmae {

// Felzenszwalb-Huttenlocher graph segmentation parameters. `scale` is the
// merge constant k in the size-adaptive threshold Int(C) + k/|C|, expressed
// for 8-bit intensities (edge weights are RGB distances on a 0..255 scale).
struct FhParams {
  double scale = 1000.0;
  int min_size = 1;
  double sigma = 0.8;
};

struct LabelMap {
  int width = 0;
  int height = 0;
  int num_components = 0;
  std::vector<int> labels;  // row-major, ids in [0, num_components)
};

enum class RegionSource { fh, external };
std::string to_string(RegionSource s);
RegionSource region_source_from_string(const std::string& s);

using RegionMap = std::vector<std::uint8_t>;  // H x W, values 0/1

struct RegionSet {
  int width = 0;
  int height = 0;
  RegionSource source = RegionSource::fh;
  std::vector<RegionMap> maps;
  // Partitions the maps were cut from, one per scale; kept for file IO.
  std::vector<LabelMap> layers;
  std::vector<double> scales;
  int min_pixels = 1;

  std::size_t size() const { return maps.size(); }
  bool empty() const { return maps.empty(); }
};

// One edge of the 8-connected pixel grid graph.
struct GridEdge {
  int a = 0;
  int b = 0;
  double w = 0.0;
};

// Per-channel separable Gaussian blur with the FH reference kernel
// (half-width ceil(4*sigma), clamped borders). sigma <= 0 is a copy.
Image gaussian_smooth(const Image& img, double sigma);

// 8-connected grid edges in generation order, weighted by RGB distance on the
// 0..255 scale.
std::vector<GridEdge> grid_edges(const Image& img);

// Sorts by (weight, source, target) so ties resolve identically everywhere.
void sort_edges(std::vector<GridEdge>& edges);

LabelMap fh_segment(const Image& img, const FhParams& params);

// Relabels ids to 0..n-1 in order of first row-major appearance.
LabelMap relabel_contiguous(int width, int height, const std::vector<int>& ids);

RegionSet regions_from_labels(const LabelMap& lm, int min_pixels = 1);

// FH at every scale with min_size = scale; exact-duplicate maps removed.
RegionSet multi_scale_regions(const Image& img, const std::vector<double>& scales,
                              double sigma = 0.8);

// Rebuilds maps from layers (used after reading a region file).
RegionSet region_set_from_layers(std::vector<LabelMap> layers, RegionSource source,
                                 std::vector<double> scales, int min_pixels);

class RegionFileError : public std::runtime_error {
 public:
  RegionFileError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// Region file: `<stem>.pgm` holds one binary P5 label image per layer
// (maxval 255 when a layer has <= 255 components, else 16-bit big-endian),
// and `<stem>.json` is the sidecar {"num_components", "source", "scales",
// "layers", "min_pixels"}. `path` may name either file or the stem.
void write_regions(const std::filesystem::path& path, const RegionSet& rs);
RegionSet read_regions(const std::filesystem::path& path);

}  // namespace rmae
