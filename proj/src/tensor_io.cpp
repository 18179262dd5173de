#include "rmae/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "json.hpp"

namespace rmae::inline RMAE_ABI {

static_assert(std::endian::native == std::endian::little,
              "tensor blobs assume a little-endian host");

void write_tensor(std::ostream& os, const Tensor& t) {
  nlohmann::json header = {{"shape", t.shape()}, {"name", t.name()}};
  os << header.dump() << '\n';
  std::vector<float> buf(t.data().begin(), t.data().end());
  os.write(reinterpret_cast<const char*>(buf.data()),
           static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!os) throw std::runtime_error("failed writing tensor '" + t.name() + "'");
}

Tensor read_tensor(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("tensor blob: missing header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("tensor blob: bad header: ") + e.what());
  }
  if (!header.contains("shape") || !header["shape"].is_array()) {
    throw std::runtime_error("tensor blob: header has no shape");
  }
  Shape shape = header["shape"].get<Shape>();
  const std::size_t n = shape_numel(shape);
  std::vector<float> buf(n);
  is.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(n * sizeof(float)));
  if (static_cast<std::size_t>(is.gcount()) != n * sizeof(float)) {
    throw std::runtime_error("tensor blob: truncated payload (expected " +
                             std::to_string(n * sizeof(float)) + " bytes, got " +
                             std::to_string(is.gcount()) + ")");
  }
  Tensor t = Tensor::from(std::move(shape), std::vector<Scalar>(buf.begin(), buf.end()));
  t.set_name(header.value("name", std::string{}));
  return t;
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_tensor(os, t);
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return read_tensor(is);
}

}  // namespace rmae::inline RMAE_ABI
