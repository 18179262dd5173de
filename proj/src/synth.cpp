#include "rmae/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "rmae/rng.hpp"

namespace rmae {

namespace fs = std::filesystem;

SynthSample synth_sample(const SynthSpec& spec, int index) {
  if (spec.image_size < 4) throw std::invalid_argument("synthetic images need size >= 4");
  if (spec.min_shapes < 1 || spec.max_shapes < spec.min_shapes) {
    throw std::invalid_argument("synthetic shape counts must satisfy 1 <= min <= max");
  }
  Rng rng(spec.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(index) + 1);
  const int s = spec.image_size;
  SynthSample out;
  out.image = Image(s, s, 3);
  out.labels.width = s;
  out.labels.height = s;
  std::vector<int> owner(static_cast<std::size_t>(s) * s, 0);

  float bg[3];
  for (float& c : bg) c = static_cast<float>(rng.uniform());
  const double fx = rng.uniform(0.5, 2.0) * 2.0 * std::numbers::pi / s;
  const double fy = rng.uniform(0.5, 2.0) * 2.0 * std::numbers::pi / s;
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  for (int y = 0; y < s; ++y)
    for (int x = 0; x < s; ++x) {
      const double t = spec.texture * std::sin(fx * x + fy * y + phase);
      for (int c = 0; c < 3; ++c) out.image.at(x, y, c) = static_cast<float>(bg[c] + t);
    }

  out.num_shapes = spec.min_shapes + rng.below(spec.max_shapes - spec.min_shapes + 1);
  const int lo = std::max(2, s / 6), hi = std::max(lo + 1, s / 2);
  for (int shape = 1; shape <= out.num_shapes; ++shape) {
    const bool ellipse = rng.uniform() < 0.5;
    const int w = lo + rng.below(hi - lo + 1);
    const int h = lo + rng.below(hi - lo + 1);
    const int x0 = rng.below(s - w + 1);
    const int y0 = rng.below(s - h + 1);
    float col[3];
    for (float& c : col) c = static_cast<float>(rng.uniform());
    const double cx = x0 + w / 2.0, cy = y0 + h / 2.0;
    for (int y = y0; y < y0 + h; ++y)
      for (int x = x0; x < x0 + w; ++x) {
        if (ellipse) {
          const double dx = (x + 0.5 - cx) / (w / 2.0), dy = (y + 0.5 - cy) / (h / 2.0);
          if (dx * dx + dy * dy > 1.0) continue;
        }
        owner[static_cast<std::size_t>(y) * s + x] = shape;
        for (int c = 0; c < 3; ++c) out.image.at(x, y, c) = col[c];
      }
  }
  for (float& v : out.image.pixels) {
    v = std::clamp(static_cast<float>(v + spec.noise * rng.normal()), 0.0f, 1.0f);
  }

  // Fully occluded shapes vanish; the remaining ids are made contiguous.
  std::vector<int> remap(static_cast<std::size_t>(out.num_shapes) + 1, -1);
  remap[0] = 0;
  int next = 1;
  for (int id : owner)
    if (remap[id] < 0) remap[id] = -2;
  for (int shape = 1; shape <= out.num_shapes; ++shape)
    if (remap[shape] == -2) remap[shape] = next++;
  out.labels.labels.resize(owner.size());
  bool has_bg = false;
  for (std::size_t i = 0; i < owner.size(); ++i) {
    out.labels.labels[i] = remap[owner[i]];
    has_bg = has_bg || owner[i] == 0;
  }
  if (!has_bg) {
    for (int& l : out.labels.labels) l -= 1;
    next -= 1;
  }
  out.labels.num_components = next;
  return out;
}

std::vector<SynthSample> synth_dataset(const SynthSpec& spec) {
  std::vector<SynthSample> out;
  out.reserve(static_cast<std::size_t>(std::max(0, spec.count)));
  for (int i = 0; i < spec.count; ++i) out.push_back(synth_sample(spec, i));
  return out;
}

RegionSet ground_truth_regions(const SynthSample& s) {
  RegionSet rs = regions_from_labels(s.labels, 1);
  rs.source = RegionSource::external;
  return rs;
}

double foreground_prior(const std::vector<SynthSample>& data) {
  double acc = 0;
  std::size_t maps = 0;
  for (const auto& s : data) {
    for (const auto& m : ground_truth_regions(s).maps) {
      acc += static_cast<double>(std::count(m.begin(), m.end(), std::uint8_t{1})) /
             static_cast<double>(m.size());
      ++maps;
    }
  }
  return maps ? acc / static_cast<double>(maps) : 0.5;
}

std::string sample_id(int index) {
  std::ostringstream os;
  os << "img" << std::setw(5) << std::setfill('0') << index;
  return os.str();
}

fs::path image_path(const fs::path& dir, const std::string& id) {
  return dir / "images" / (id + ".ppm");
}

fs::path region_path(const fs::path& dir, const std::string& id) {
  return dir / "regions" / (id + ".pgm");
}

void write_dataset(const fs::path& dir, const SynthSpec& spec) {
  fs::create_directories(dir);
  if (spec.count <= 0) return;
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "regions");
  for (int i = 0; i < spec.count; ++i) {
    const SynthSample s = synth_sample(spec, i);
    const std::string id = sample_id(i);
    write_ppm(image_path(dir, id), s.image);
    RegionSet rs = ground_truth_regions(s);
    write_regions(region_path(dir, id), rs);
  }
  std::ofstream meta(dir / "synth.json");
  meta << nlohmann::json(spec).dump(2) << '\n';
}

std::vector<std::string> list_image_ids(const fs::path& dir) {
  std::vector<std::string> ids;
  const fs::path images = dir / "images";
  if (!fs::is_directory(images)) return ids;
  for (const auto& entry : fs::directory_iterator(images)) {
    if (entry.is_regular_file() && entry.path().extension() == ".ppm") {
      ids.push_back(entry.path().stem().string());
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

void to_json(nlohmann::json& j, const SynthSpec& s) {
  j = {{"image_size", s.image_size}, {"min_shapes", s.min_shapes}, {"max_shapes", s.max_shapes},
       {"noise", s.noise},           {"texture", s.texture},       {"count", s.count},
       {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, SynthSpec& s) {
  s.image_size = j.value("image_size", s.image_size);
  s.min_shapes = j.value("min_shapes", s.min_shapes);
  s.max_shapes = j.value("max_shapes", s.max_shapes);
  s.noise = j.value("noise", s.noise);
  s.texture = j.value("texture", s.texture);
  s.count = j.value("count", s.count);
  s.seed = j.value("seed", s.seed);
}

}  // namespace rmae
