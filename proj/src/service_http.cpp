#include <atomic>

#include <httplib.h>

#include "sqbc/service.hpp"

namespace sqbc {

using nlohmann::json;

struct LabelServer::Impl {
  LabelService& service;
  std::optional<std::string> token;
  httplib::Server server;

  Impl(LabelService& s, std::optional<std::string> t) : service(s), token(std::move(t)) {}

  static void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void reply_error(httplib::Response& res, int status, std::string_view code,
                          const std::string& message) {
    reply(res, status, {{"error", code}, {"message", message}});
  }

  // Runs a handler, mapping library errors onto {"error", "message"} bodies.
  template <typename Fn>
  auto guarded(Fn fn) {
    return [this, fn](const httplib::Request& req, httplib::Response& res) {
      try {
        if (token && req.get_header_value("Authorization") != "Bearer " + *token)
          throw Error(ErrorCode::kUnauthorized, "missing or wrong bearer token");
        fn(req, res);
      } catch (const Error& e) {
        reply_error(res, http_status(e.code()), error_code_name(e.code()), e.what());
      } catch (const json::exception& e) {
        reply_error(res, 400, "invalid_argument", e.what());
      } catch (const std::exception& e) {
        reply_error(res, 500, "internal", e.what());
      }
    };
  }

  static json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    try {
      auto body = json::parse(req.body);
      if (!body.is_object()) throw Error(ErrorCode::kInvalidArgument, "body must be an object");
      return body;
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kInvalidArgument, std::string("invalid JSON body: ") + e.what());
    }
  }

  static json progress_json(const Progress& p) {
    return {{"labeled", p.labeled}, {"remaining", p.remaining}, {"total", p.total}};
  }

  void routes() {
    // The browser annotation front end may be served from another origin.
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Headers", "Content-Type, Authorization"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    server.Options(R"(/runs.*)", [](const httplib::Request&, httplib::Response& res) {
      res.status = 204;
    });
    server.Post("/runs", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto [spec, input] = parse_create_request(parse_body(req));
      const auto id = service.create_run(std::move(spec), input);
      const auto state = service.state(id);
      reply(res, 201,
            {{"run_id", id}, {"phase", phase_name(state.phase)}, {"queue_size", state.queue.size()}});
    }));
    server.Get("/runs", guarded([this](const httplib::Request&, httplib::Response& res) {
      reply(res, 200, {{"runs", service.run_ids()}});
    }));
    server.Get(R"(/runs/([^/]+))",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 reply(res, 200, to_json(service.state(req.matches[1])));
               }));
    server.Get(R"(/runs/([^/]+)/next)",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const std::string id = req.matches[1];
                 const auto item = service.next_unlabeled(id);
                 const auto state = service.state(id);
                 json body = {{"done", !item.has_value()},
                              {"labeled", state.labeled()},
                              {"total", state.queue.size()}};
                 if (item) {
                   body["example_id"] = item->example_id;
                   body["question_text"] = item->question_text;
                   body["comment_text"] = item->comment_text;
                   body["score"] = item->score;
                 }
                 reply(res, 200, body);
               }));
    server.Post(R"(/runs/([^/]+)/labels)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const auto body = parse_body(req);
                  const auto& label = body.at("label");
                  if (!label.is_number_integer())
                    throw Error(ErrorCode::kInvalidArgument, "label must be 0 or 1");
                  const auto progress =
                      service.submit_label(req.matches[1], body.at("example_id").get<std::string>(),
                                           label.get<long long>(),
                                           body.value("annotator", std::string()));
                  reply(res, 200, progress_json(progress));
                }));
    server.Post(R"(/runs/([^/]+)/finalize)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const auto body = parse_body(req);
                  const auto result = service.finalize(req.matches[1], body.value("force", false));
                  reply(res, 200, to_json(result));
                }));
    server.Get(R"(/runs/([^/]+)/metrics)",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 reply(res, 200, to_json(service.metrics(req.matches[1])));
               }));
  }
};

LabelServer::LabelServer(LabelService& service, std::optional<std::string> bearer_token)
    : impl_(std::make_unique<Impl>(service, std::move(bearer_token))) {
  impl_->routes();
}

LabelServer::~LabelServer() { stop(); }

int LabelServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error(ErrorCode::kIo, "cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port))
    throw Error(ErrorCode::kIo, "cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void LabelServer::serve() { impl_->server.listen_after_bind(); }

void LabelServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace sqbc
