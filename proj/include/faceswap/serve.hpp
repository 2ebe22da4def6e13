#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "faceswap/error.hpp"
#include "faceswap/file_io.hpp"
#include "faceswap/image.hpp"
#include "faceswap/png_io.hpp"
#include "faceswap/segment.hpp"

// Last: httplib pulls in <resolv.h>, whose _res macro breaks Eigen headers
// parsed after it.
#include "httplib.h"

namespace faceswap {

/// Frames of a labeling session: every `<id>.png` directly under root.
/// Region proposals are cached as `<id>.regions.png`, saved masks live in
/// `<id>.mask.png`.
class FrameStore {
 public:
  explicit FrameStore(std::filesystem::path root, double region_threshold = 24.0)
      : root_(std::move(root)), threshold_(region_threshold) {
    if (!std::filesystem::is_directory(root_)) fail(ErrorCode::kIo, root_.string() + " is not a directory");
  }

  const std::filesystem::path& root() const { return root_; }

  std::vector<std::string> frames() const {
    std::vector<std::string> ids;
    for (const auto& f : std::filesystem::directory_iterator(root_)) {
      if (!f.is_regular_file() || f.path().extension() != ".png") continue;
      const auto stem = f.path().stem().string();
      if (stem.find('.') != std::string::npos) continue;  // derived files
      ids.push_back(stem);
    }
    std::sort(ids.begin(), ids.end());
    return ids;
  }

  bool has_frame(const std::string& id) const {
    if (id.empty() || id.find_first_of("/\\.") != std::string::npos) return false;
    return std::filesystem::is_regular_file(image_path(id));
  }

  std::filesystem::path image_path(const std::string& id) const { return root_ / (id + ".png"); }
  std::filesystem::path mask_path(const std::string& id) const { return root_ / (id + ".mask.png"); }
  std::filesystem::path regions_path(const std::string& id) const { return root_ / (id + ".regions.png"); }

  /// Regions of a frame, proposed on first use and persisted.
  std::shared_ptr<const RegionMap> regions(const std::string& id) {
    auto& slot = frame(id);
    std::lock_guard lock(slot.mutex);
    if (!slot.regions) {
      const auto path = regions_path(id);
      RegionMap r = std::filesystem::exists(path) ? load_regions(path)
                                                  : propose_regions(load_image(image_path(id)), threshold_);
      if (!std::filesystem::exists(path)) save_png(r, path);
      slot.regions = std::make_shared<const RegionMap>(std::move(r));
    }
    return slot.regions;
  }

  /// Assembles and stores the mask; writes to one frame are serialized.
  Mask save_selection(const std::string& id, const std::set<std::uint32_t>& selected) {
    const auto r = regions(id);
    Mask mask = assemble_mask(*r, selected);
    auto& slot = frame(id);
    std::lock_guard lock(slot.write_mutex);
    save_png(mask, mask_path(id));
    return mask;
  }

 private:
  struct Slot {
    std::mutex mutex;
    std::mutex write_mutex;
    std::shared_ptr<const RegionMap> regions;
  };

  Slot& frame(const std::string& id) {
    std::lock_guard lock(slots_mutex_);
    auto& p = slots_[id];
    if (!p) p = std::make_unique<Slot>();
    return *p;
  }

  std::filesystem::path root_;
  double threshold_;
  std::mutex slots_mutex_;
  std::map<std::string, std::unique_ptr<Slot>> slots_;
};

namespace serve_detail {

inline void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, int status, const std::string& message,
                       nlohmann::json extra = nlohmann::json::object()) {
  extra["error"] = message;
  send_json(res, status, extra);
}

inline void send_png(httplib::Response& res, const std::string& bytes) {
  res.status = 200;
  res.set_content(bytes, "image/png");
}

struct SelectionParse {
  std::set<std::uint32_t> ids;
  nlohmann::json problems = nlohmann::json::array();
  std::vector<long long> unknown;
};

/// Reads {"selected": [ids]}; collects every bad entry instead of stopping
/// at the first.
inline SelectionParse parse_selection(const nlohmann::json& body, std::uint32_t region_count) {
  SelectionParse out;
  if (!body.is_object() || !body.contains("selected") || !body["selected"].is_array()) {
    out.problems.push_back("body must be an object with a 'selected' array");
    return out;
  }
  const auto& arr = body["selected"];
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto& v = arr[i];
    if (!v.is_number_integer()) {
      out.problems.push_back("entry " + std::to_string(i) + " is not an integer: " + v.dump());
      continue;
    }
    const auto id = v.get<long long>();
    if (id < 0 || id >= static_cast<long long>(region_count)) {
      out.unknown.push_back(id);
      continue;
    }
    out.ids.insert(static_cast<std::uint32_t>(id));
  }
  return out;
}

}  // namespace serve_detail

struct ServeOptions {
  double region_threshold = 24.0;
};

/// HTTP service behind the mask editor. All responses are JSON or PNG.
class MaskServer {
 public:
  explicit MaskServer(const std::filesystem::path& root, const ServeOptions& opts = {})
      : store_(root, opts.region_threshold) {
    routes();
  }

  FrameStore& store() { return store_; }
  httplib::Server& http() { return server_; }

  bool listen(const std::string& host, int port) { return server_.listen(host, port); }
  int bind_to_any_port(const std::string& host) { return server_.bind_to_any_port(host); }
  bool listen_after_bind() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() { server_.wait_until_ready(); }

 private:
  template <typename F>
  void with_frame(const httplib::Request& req, httplib::Response& res, F&& f) {
    const std::string id = req.matches[1];
    if (!store_.has_frame(id)) return serve_detail::send_error(res, 404, "unknown frame '" + id + "'");
    try {
      f(id);
    } catch (const Error& e) {
      serve_detail::send_error(res, 500, e.what(), {{"code", static_cast<int>(e.code())}});
    }
  }

  void routes() {
    using serve_detail::send_error;
    using serve_detail::send_json;
    using serve_detail::send_png;
    server_.Get("/frames", [this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, {{"frames", store_.frames()}});
    });
    server_.Get(R"(/frame/([^/]+)/image)", [this](const httplib::Request& req, httplib::Response& res) {
      with_frame(req, res, [&](const std::string& id) { send_png(res, to_string(read_file(store_.image_path(id)))); });
    });
    server_.Get(R"(/frame/([^/]+)/regions)", [this](const httplib::Request& req, httplib::Response& res) {
      with_frame(req, res, [&](const std::string& id) {
        const auto r = store_.regions(id);
        send_json(res, 200,
                  {{"frame", id}, {"width", r->width}, {"height", r->height}, {"count", r->count},
                   {"png", "/frame/" + id + "/regions.png"}, {"ids", r->ids}});
      });
    });
    server_.Get(R"(/frame/([^/]+)/regions\.png)", [this](const httplib::Request& req, httplib::Response& res) {
      with_frame(req, res, [&](const std::string& id) { send_png(res, encode_png(*store_.regions(id))); });
    });
    server_.Get(R"(/frame/([^/]+)/mask)", [this](const httplib::Request& req, httplib::Response& res) {
      with_frame(req, res, [&](const std::string& id) {
        const auto path = store_.mask_path(id);
        if (!std::filesystem::exists(path)) return send_error(res, 404, "no mask saved for '" + id + "'");
        send_png(res, to_string(read_file(path)));
      });
    });
    server_.Get(R"(/frame/([^/]+)/selection)", [this](const httplib::Request& req, httplib::Response& res) {
      with_frame(req, res, [&](const std::string& id) {
        const auto path = store_.mask_path(id);
        std::set<std::uint32_t> selected;
        if (std::filesystem::exists(path)) selected = selection_from_mask(*store_.regions(id), load_mask(path));
        send_json(res, 200, {{"frame", id}, {"selected", selected}, {"saved", std::filesystem::exists(path)}});
      });
    });
    server_.Post(R"(/frame/([^/]+)/mask)", [this](const httplib::Request& req, httplib::Response& res) {
      with_frame(req, res, [&](const std::string& id) {
        const auto body = nlohmann::json::parse(req.body, nullptr, false);
        if (body.is_discarded()) return send_error(res, 400, "body is not valid JSON");
        const auto r = store_.regions(id);
        auto sel = serve_detail::parse_selection(body, r->count);
        if (!sel.problems.empty() || !sel.unknown.empty())
          return send_error(res, 400, "malformed selection",
                            {{"frame", id}, {"region_count", r->count}, {"problems", sel.problems},
                             {"unknown_ids", sel.unknown}});
        const auto mask = store_.save_selection(id, sel.ids);
        send_json(res, 200, {{"frame", id}, {"selected", sel.ids}, {"pixels", mask.count()}});
      });
    });
  }

  static std::string to_string(const std::vector<char>& v) { return {v.begin(), v.end()}; }

  FrameStore store_;
  httplib::Server server_;
};

}  // namespace faceswap
