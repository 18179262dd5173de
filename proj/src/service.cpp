#include "rmae/service.hpp"

#include <algorithm>
#include <cctype>

#include "httplib.h"
#include "json.hpp"
#include "rmae/completion.hpp"
#include "rmae/synth.hpp"

namespace rmae {

namespace fs = std::filesystem;

namespace {

HttpReply error_reply(int status, const std::string& message) {
  return {status, "application/json", nlohmann::json{{"error", message}}.dump()};
}

bool valid_id(const std::string& id) {
  return !id.empty() && id.size() <= 128 && std::all_of(id.begin(), id.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '-';
  });
}

void send(httplib::Response& res, const HttpReply& r) {
  res.status = r.status;
  res.set_header("Access-Control-Allow-Origin", "*");
  res.set_content(r.body, r.content_type);
}

}  // namespace

RegionService::RegionService(std::shared_ptr<const RMaeModel> model, fs::path data_dir,
                             bool full_image)
    : model_(std::move(model)), data_dir_(std::move(data_dir)), full_image_(full_image) {
  if (!model_) throw std::invalid_argument("service needs a model");
  if (!model_->has_region_branch()) {
    throw std::invalid_argument("service needs a checkpoint with a region branch");
  }
}

fs::path RegionService::locate(const std::string& id) const {
  if (!valid_id(id)) return {};
  const fs::path p = image_path(data_dir_, id);
  return fs::is_regular_file(p) ? p : fs::path{};
}

HttpReply RegionService::list_images() const {
  return {200, "application/json", nlohmann::json{{"ids", list_image_ids(data_dir_)}}.dump()};
}

HttpReply RegionService::image_png(const std::string& id) const {
  const fs::path p = locate(id);
  if (p.empty()) return error_reply(404, "unknown image id '" + id + "'");
  return {200, "image/png", encode_png(read_pnm(p))};
}

HttpReply RegionService::meta(const std::string& id) const {
  const fs::path p = locate(id);
  if (p.empty()) return error_reply(404, "unknown image id '" + id + "'");
  const Image img = read_pnm(p);
  const int patch = model_->config().patch;
  const int n = (img.width / patch) * (img.height / patch);
  return {200, "application/json",
          nlohmann::json{{"h", img.height}, {"w", img.width}, {"patch", patch}, {"n", n}}.dump()};
}

HttpReply RegionService::segment(const std::string& body) const {
  nlohmann::json req;
  try {
    req = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    return error_reply(400, std::string("malformed JSON: ") + e.what());
  }
  PromptSet prompts;
  try {
    prompts = PromptSet::parse(req);
  } catch (const std::exception& e) {
    return error_reply(400, e.what());
  }
  const fs::path p = locate(prompts.image_id);
  if (p.empty()) return error_reply(404, "unknown image id '" + prompts.image_id + "'");
  const Image img = read_pnm(p);
  const ModelConfig& cfg = model_->config();
  if (img.width != cfg.image_size || img.height != cfg.image_size) {
    return error_reply(422, "image geometry does not match the model");
  }
  try {
    const Completion c = complete_prompts(*model_, patchify(img, cfg.patch), prompts, full_image_);
    return {200, "application/json", c.to_json().dump()};
  } catch (const std::exception& e) {
    return error_reply(400, e.what());
  }
}

void RegionService::mount(httplib::Server& server) const {
  server.Get("/images", [this](const httplib::Request&, httplib::Response& res) {
    send(res, list_images());
  });
  server.Get(R"(/image/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    send(res, image_png(req.matches[1]));
  });
  server.Get(R"(/meta/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    send(res, meta(req.matches[1]));
  });
  server.Post("/segment", [this](const httplib::Request& req, httplib::Response& res) {
    send(res, segment(req.body));
  });
}

bool RegionService::listen(const std::string& host, int port) const {
  httplib::Server server;
  mount(server);
  return server.listen(host, port);
}

}  // namespace rmae
