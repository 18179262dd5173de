#include "rmae/regions.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include "json.hpp"

namespace rmae {

namespace {

class DisjointSet {
 public:
  explicit DisjointSet(int n) : parent_(n), size_(n, 1), rank_(n, 0) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  // Returns the surviving root.
  int join(int a, int b) {
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    if (rank_[a] == rank_[b]) ++rank_[a];
    return a;
  }
  int size(int root) const { return size_[root]; }

 private:
  std::vector<int> parent_;
  std::vector<int> size_;
  std::vector<int> rank_;
};

std::vector<double> gaussian_kernel(double sigma) {
  const int len = static_cast<int>(std::ceil(sigma * 4.0)) + 1;
  std::vector<double> k(len);
  for (int i = 0; i < len; ++i) k[i] = std::exp(-0.5 * (i / sigma) * (i / sigma));
  double total = 0.0;
  for (int i = 1; i < len; ++i) total += std::abs(k[i]);
  total = 2.0 * total + std::abs(k[0]);
  for (auto& v : k) v /= total;
  return k;
}

std::filesystem::path stem_of(const std::filesystem::path& path) {
  auto p = path;
  if (p.extension() == ".pgm" || p.extension() == ".json") p.replace_extension();
  return p;
}

std::filesystem::path with_ext(const std::filesystem::path& stem, const char* ext) {
  auto p = stem;
  p += ext;
  return p;
}

}  // namespace

std::string to_string(RegionSource s) { return s == RegionSource::fh ? "fh" : "external"; }

RegionSource region_source_from_string(const std::string& s) {
  if (s == "fh") return RegionSource::fh;
  if (s == "external") return RegionSource::external;
  throw std::invalid_argument("unknown region source '" + s + "'");
}

Image gaussian_smooth(const Image& img, double sigma) {
  if (sigma <= 0.0) return img;
  const auto k = gaussian_kernel(sigma);
  const int len = static_cast<int>(k.size());
  const int w = img.width, h = img.height, c = img.channels;
  Image tmp(w, h, c), out(w, h, c);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch) {
        double acc = k[0] * img.at(x, y, ch);
        for (int i = 1; i < len; ++i) {
          acc += k[i] * (img.at(std::max(x - i, 0), y, ch) +
                         img.at(std::min(x + i, w - 1), y, ch));
        }
        tmp.at(x, y, ch) = static_cast<float>(acc);
      }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch) {
        double acc = k[0] * tmp.at(x, y, ch);
        for (int i = 1; i < len; ++i) {
          acc += k[i] * (tmp.at(x, std::max(y - i, 0), ch) +
                         tmp.at(x, std::min(y + i, h - 1), ch));
        }
        out.at(x, y, ch) = static_cast<float>(acc);
      }
  return out;
}

std::vector<GridEdge> grid_edges(const Image& img) {
  const int w = img.width, h = img.height;
  auto dist = [&](int x1, int y1, int x2, int y2) {
    double s = 0.0;
    for (int c = 0; c < img.channels; ++c) {
      const double d = 255.0 * (static_cast<double>(img.at(x1, y1, c)) - img.at(x2, y2, c));
      s += d * d;
    }
    return std::sqrt(s);
  };
  std::vector<GridEdge> edges;
  edges.reserve(static_cast<std::size_t>(w) * h * 4);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int a = y * w + x;
      if (x < w - 1) edges.push_back({a, y * w + x + 1, dist(x, y, x + 1, y)});
      if (y < h - 1) edges.push_back({a, (y + 1) * w + x, dist(x, y, x, y + 1)});
      if (x < w - 1 && y < h - 1)
        edges.push_back({a, (y + 1) * w + x + 1, dist(x, y, x + 1, y + 1)});
      if (x < w - 1 && y > 0)
        edges.push_back({a, (y - 1) * w + x + 1, dist(x, y, x + 1, y - 1)});
    }
  return edges;
}

void sort_edges(std::vector<GridEdge>& edges) {
  std::sort(edges.begin(), edges.end(), [](const GridEdge& l, const GridEdge& r) {
    return std::tie(l.w, l.a, l.b) < std::tie(r.w, r.a, r.b);
  });
}

LabelMap relabel_contiguous(int width, int height, const std::vector<int>& ids) {
  LabelMap lm;
  lm.width = width;
  lm.height = height;
  lm.labels.resize(ids.size());
  std::unordered_map<int, int> remap;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto [it, inserted] = remap.try_emplace(ids[i], static_cast<int>(remap.size()));
    lm.labels[i] = it->second;
  }
  lm.num_components = static_cast<int>(remap.size());
  return lm;
}

LabelMap fh_segment(const Image& img, const FhParams& params) {
  if (img.empty()) throw std::invalid_argument("fh_segment: empty image");
  if (params.scale <= 0.0) throw std::invalid_argument("fh_segment: scale must be > 0");
  if (params.min_size < 1) throw std::invalid_argument("fh_segment: min_size must be >= 1");

  const Image smooth = gaussian_smooth(img, params.sigma);
  auto edges = grid_edges(smooth);
  sort_edges(edges);

  const int n = img.width * img.height;
  DisjointSet sets(n);
  std::vector<double> threshold(n, params.scale);
  for (const auto& e : edges) {
    int a = sets.find(e.a);
    int b = sets.find(e.b);
    if (a != b && e.w <= threshold[a] && e.w <= threshold[b]) {
      const int root = sets.join(a, b);
      threshold[root] = e.w + params.scale / sets.size(root);
    }
  }
  for (const auto& e : edges) {
    const int a = sets.find(e.a);
    const int b = sets.find(e.b);
    if (a != b && (sets.size(a) < params.min_size || sets.size(b) < params.min_size)) {
      sets.join(a, b);
    }
  }
  std::vector<int> roots(n);
  for (int i = 0; i < n; ++i) roots[i] = sets.find(i);
  return relabel_contiguous(img.width, img.height, roots);
}

RegionSet regions_from_labels(const LabelMap& lm, int min_pixels) {
  RegionSet rs;
  rs.width = lm.width;
  rs.height = lm.height;
  rs.min_pixels = min_pixels;
  rs.layers.push_back(lm);
  std::vector<int> counts(lm.num_components, 0);
  for (int l : lm.labels) ++counts[l];
  for (int id = 0; id < lm.num_components; ++id) {
    if (counts[id] < std::max(min_pixels, 1)) continue;
    RegionMap m(lm.labels.size(), 0);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = lm.labels[i] == id ? 1 : 0;
    rs.maps.push_back(std::move(m));
  }
  return rs;
}

RegionSet region_set_from_layers(std::vector<LabelMap> layers, RegionSource source,
                                 std::vector<double> scales, int min_pixels) {
  RegionSet rs;
  rs.source = source;
  rs.scales = std::move(scales);
  rs.min_pixels = min_pixels;
  if (!layers.empty()) {
    rs.width = layers[0].width;
    rs.height = layers[0].height;
  }
  for (auto& lm : layers) {
    RegionSet one = regions_from_labels(lm, min_pixels);
    for (auto& m : one.maps) {
      if (std::find(rs.maps.begin(), rs.maps.end(), m) == rs.maps.end()) {
        rs.maps.push_back(std::move(m));
      }
    }
  }
  rs.layers = std::move(layers);
  return rs;
}

RegionSet multi_scale_regions(const Image& img, const std::vector<double>& scales,
                              double sigma) {
  if (scales.empty()) throw std::invalid_argument("multi_scale_regions: no scales");
  std::vector<LabelMap> layers;
  for (double s : scales) {
    FhParams p;
    p.scale = s;
    p.min_size = std::max(1, static_cast<int>(std::lround(s)));
    p.sigma = sigma;
    layers.push_back(fh_segment(img, p));
  }
  return region_set_from_layers(std::move(layers), RegionSource::fh, scales, 1);
}

void write_regions(const std::filesystem::path& path, const RegionSet& rs) {
  if (rs.layers.empty()) throw std::invalid_argument("write_regions: region set has no layers");
  const auto stem = stem_of(path);
  std::ofstream os(with_ext(stem, ".pgm"), std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + with_ext(stem, ".pgm").string());
  nlohmann::json layer_counts = nlohmann::json::array();
  int total = 0;
  for (const auto& lm : rs.layers) {
    const bool wide = lm.num_components > 255;
    os << "P5\n" << lm.width << ' ' << lm.height << '\n' << (wide ? 65535 : 255) << '\n';
    std::string raw;
    raw.reserve(lm.labels.size() * (wide ? 2 : 1));
    for (int l : lm.labels) {
      if (wide) raw.push_back(static_cast<char>((l >> 8) & 0xff));
      raw.push_back(static_cast<char>(l & 0xff));
    }
    os.write(raw.data(), static_cast<std::streamsize>(raw.size()));
    layer_counts.push_back(lm.num_components);
    total += lm.num_components;
  }
  if (!os) throw std::runtime_error("failed writing region labels");
  nlohmann::json meta = {{"num_components", total},
                         {"source", to_string(rs.source)},
                         {"scales", rs.scales},
                         {"layers", layer_counts},
                         {"min_pixels", rs.min_pixels}};
  std::ofstream js(with_ext(stem, ".json"));
  js << meta.dump(2) << '\n';
}

namespace {

struct PgmCursor {
  const std::string& buf;
  std::size_t pos = 0;

  [[noreturn]] void fail(const std::string& what) const { throw RegionFileError(what, pos); }

  void skip_space() {
    while (pos < buf.size()) {
      if (buf[pos] == '#') {
        while (pos < buf.size() && buf[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(buf[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  }
  std::string token() {
    skip_space();
    const std::size_t start = pos;
    while (pos < buf.size() && !std::isspace(static_cast<unsigned char>(buf[pos]))) ++pos;
    if (start == pos) fail("unexpected end of region header");
    return buf.substr(start, pos - start);
  }
  int number() {
    const std::size_t at = pos;
    const std::string t = token();
    if (!std::all_of(t.begin(), t.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      throw RegionFileError("malformed number '" + t + "' in region header", at);
    }
    return std::stoi(t);
  }
};

}  // namespace

RegionSet read_regions(const std::filesystem::path& path) {
  const auto stem = stem_of(path);
  std::ifstream js(with_ext(stem, ".json"));
  if (!js) throw std::runtime_error("missing region sidecar " + with_ext(stem, ".json").string());
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(js);
  } catch (const nlohmann::json::exception& e) {
    throw RegionFileError(std::string("malformed region sidecar: ") + e.what(), 0);
  }
  std::ifstream is(with_ext(stem, ".pgm"), std::ios::binary);
  if (!is) throw std::runtime_error("missing region labels " + with_ext(stem, ".pgm").string());
  const std::string buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());

  std::vector<int> expected_layers;
  if (meta.contains("layers")) {
    expected_layers = meta["layers"].get<std::vector<int>>();
  } else {
    expected_layers = {meta.value("num_components", 0)};
  }
  if (expected_layers.empty()) throw RegionFileError("region sidecar lists no layers", 0);

  PgmCursor cur{buf};
  std::vector<LabelMap> layers;
  for (std::size_t li = 0; li < expected_layers.size(); ++li) {
    const std::size_t header_at = cur.pos;
    if (cur.token() != "P5") throw RegionFileError("expected P5 label image", header_at);
    LabelMap lm;
    lm.width = cur.number();
    lm.height = cur.number();
    const int maxval = cur.number();
    if (lm.width <= 0 || lm.height <= 0) cur.fail("non-positive region map dimensions");
    if (maxval != 255 && maxval != 65535) cur.fail("unsupported maxval " + std::to_string(maxval));
    if (!layers.empty() && (lm.width != layers[0].width || lm.height != layers[0].height)) {
      throw RegionFileError("layer dimensions differ from first layer", header_at);
    }
    ++cur.pos;  // single whitespace byte after maxval
    const std::size_t bytes = maxval > 255 ? 2 : 1;
    const std::size_t n = static_cast<std::size_t>(lm.width) * lm.height;
    if (cur.pos + n * bytes > buf.size()) cur.fail("truncated region label data");
    lm.labels.resize(n);
    int max_label = -1;
    for (std::size_t i = 0; i < n; ++i) {
      int v = static_cast<unsigned char>(buf[cur.pos + i * bytes]);
      if (bytes == 2) v = (v << 8) | static_cast<unsigned char>(buf[cur.pos + i * 2 + 1]);
      lm.labels[i] = v;
      max_label = std::max(max_label, v);
    }
    if (max_label + 1 != expected_layers[li]) {
      cur.fail("layer " + std::to_string(li) + " has " + std::to_string(max_label + 1) +
               " ids but sidecar declares " + std::to_string(expected_layers[li]));
    }
    lm.num_components = expected_layers[li];
    cur.pos += n * bytes;
    layers.push_back(std::move(lm));
  }
  return region_set_from_layers(std::move(layers),
                                region_source_from_string(meta.value("source", std::string("external"))),
                                meta.value("scales", std::vector<double>{}),
                                meta.value("min_pixels", 1));
}

}  // namespace rmae
