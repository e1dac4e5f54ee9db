#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include <httplib.h>

#include "densesynth/study/store.hpp"
#include "densesynth/study/study.hpp"

namespace densesynth::study {

/// HTTP+JSON front end for a saved study directory:
///   GET  /api/session/{reader}           create or resume
///   GET  /api/session/{reader}/next      next stimulus (id, image URL, size)
///   POST /api/session/{reader}/response  {"stimulus_id": ..., "choice": 1..6}
///   GET  /api/report                     CSV over completed sessions
///   GET  /images/{id}.png
/// No payload carries truth, source dataset or model.
class StudyServer {
 public:
  explicit StudyServer(const std::filesystem::path& dir)
      : dir_(dir), set_(load_stimulus_set(dir)), store_(std::make_unique<ResponseStore>(set_, dir)) {
    routes();
  }

  /// Blocks until stop().
  bool listen(const std::string& host, int port) { return http_.listen(host, port); }

  /// Binds an ephemeral port; serve with listen_after_bind().
  int bind_any(const std::string& host) { return http_.bind_to_any_port(host); }
  bool listen_after_bind() { return http_.listen_after_bind(); }
  void stop() { http_.stop(); }
  void wait_until_ready() { http_.wait_until_ready(); }

  [[nodiscard]] const StimulusSet& stimuli() const noexcept { return set_; }
  [[nodiscard]] ResponseStore& store() noexcept { return *store_; }

 private:
  static constexpr const char* kReader = R"(/api/session/([A-Za-z0-9_.\-]{1,64}))";

  static void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void send_error(httplib::Response& res, int status, const std::string& message) {
    send_json(res, status, {{"error", message}});
  }

  json progress_json(const std::string& reader, const ResponseStore::Progress& p) const {
    return {{"reader", reader}, {"answered", p.answered}, {"total", p.total}, {"complete", p.complete()}};
  }

  void routes() {
    http_.Get(kReader, [this](const httplib::Request& req, httplib::Response& res) {
      const std::string reader = req.matches[1];
      send_json(res, 200, progress_json(reader, store_->open_session(reader)));
    });

    http_.Get(std::string(kReader) + "/next", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string reader = req.matches[1];
      const auto p = store_->open_session(reader);
      json body = progress_json(reader, p);
      if (p.next) {
        const Stimulus* s = set_.find(*p.next);
        body["index"] = p.answered + 1;
        body["stimulus"] = {{"id", s->id},
                            {"image_url", "/images/" + s->id + ".png"},
                            {"width", s->width},
                            {"height", s->height}};
        json choices = json::array();
        for (int c = 1; c <= 6; ++c) choices.push_back({{"value", c}, {"label", set_.config.choice_labels[c - 1]}});
        body["choices"] = choices;
      }
      send_json(res, 200, body);
    });

    http_.Post(std::string(kReader) + "/response", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string reader = req.matches[1];
      json body;
      try {
        body = json::parse(req.body);
      } catch (const json::exception&) {
        return send_error(res, 400, "body must be JSON");
      }
      if (!body.is_object() || !body.contains("stimulus_id") || !body["stimulus_id"].is_string() ||
          !body.contains("choice") || !body["choice"].is_number_integer())
        return send_error(res, 400, "expected {\"stimulus_id\": string, \"choice\": 1..6}");
      try {
        const auto p = store_->record(reader, body["stimulus_id"].get<std::string>(), body["choice"].get<int>());
        send_json(res, 200, progress_json(reader, p));
      } catch (const UnknownStimulus& e) {
        send_error(res, 404, e.what());
      } catch (const DuplicateResponse& e) {
        send_error(res, 409, e.what());
      } catch (const InvalidInput& e) {
        send_error(res, 400, e.what());
      }
    });

    http_.Get("/api/report", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(emit_study_csv(score_study(store_->completed_responses(), set_)), "text/csv");
    });

    http_.Get(R"(/images/(s[0-9a-f]{12})\.png)", [this](const httplib::Request& req, httplib::Response& res) {
      const Stimulus* s = set_.find(std::string(req.matches[1]));
      if (!s) return send_error(res, 404, "no such image");
      std::ifstream in(dir_ / s->image_path, std::ios::binary);
      if (!in) return send_error(res, 404, "image missing on disk");
      std::ostringstream data;
      data << in.rdbuf();
      res.set_content(data.str(), "image/png");
    });

    http_.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        send_error(res, 500, e.what());
      }
    });
  }

  std::filesystem::path dir_;
  StimulusSet set_;
  std::unique_ptr<ResponseStore> store_;
  httplib::Server http_;
};

}  // namespace densesynth::study
