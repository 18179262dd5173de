#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "rmae/model.hpp"

namespace httplib {
class Server;
}

namespace rmae {

struct HttpReply {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

// Region-completion endpoints over a data directory of images/<id>.ppm.
// Handlers only read the model and the filesystem.
class RegionService {
 public:
  RegionService(std::shared_ptr<const RMaeModel> model, std::filesystem::path data_dir,
                bool full_image = false);

  HttpReply list_images() const;
  HttpReply image_png(const std::string& id) const;
  HttpReply meta(const std::string& id) const;
  HttpReply segment(const std::string& body) const;

  // Routes: GET /images, GET /image/{id}, GET /meta/{id}, POST /segment.
  void mount(httplib::Server& server) const;
  // Blocks until the server stops.
  bool listen(const std::string& host, int port) const;

 private:
  std::filesystem::path locate(const std::string& id) const;

  std::shared_ptr<const RMaeModel> model_;
  std::filesystem::path data_dir_;
  bool full_image_;
};

}  // namespace rmae
