#include <httplib.h>

#include <fstream>
#include <iterator>

#include "prosody_eval/service.hpp"

namespace prosody_eval::service {
namespace {

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(canonical_json(body), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  send_json(res, status, Json{{"code", code}, {"message", message}});
}

Json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  try {
    return Json::parse(req.body);
  } catch (const Json::exception& e) {
    throw ServiceError(400, "invalid_json", std::string("request body is not valid JSON: ") + e.what());
  }
}

// Every handler runs through here so failures always come back as {code, message}.
template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const ServiceError& e) {
      send_error(res, e.status(), e.code(), e.what());
    } catch (const Error& e) {
      send_error(res, 400, "invalid_request", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal_error", e.what());
    }
  };
}

}  // namespace

struct HttpServer::Impl {
  explicit Impl(Store& s) : store(s) {}
  Store& store;
  httplib::Server server;
};

HttpServer::HttpServer(Store& store) : impl_(std::make_unique<Impl>(store)) {
  auto& srv = impl_->server;
  Store& st = store;

  srv.Post("/api/tests", guarded([&st](const httplib::Request& req, httplib::Response& res) {
    const std::string id = st.create_test(TestDefinition::from_json(parse_body(req)));
    send_json(res, 201, Json{{"test_id", id}});
  }));

  srv.Post(R"(/api/tests/([^/]+)/sessions)", guarded([&st](const httplib::Request& req, httplib::Response& res) {
    const Json body = parse_body(req);
    const std::string listener = body.is_object() ? body.value("listener_id", std::string()) : std::string();
    send_json(res, 201, st.open_session(req.matches[1], listener));
  }));

  srv.Get(R"(/api/sessions/([^/]+)/screens/next)", guarded([&st](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, st.next_screen(req.matches[1]));
  }));

  srv.Post(R"(/api/sessions/([^/]+)/screens/([^/]+)/responses)",
           guarded([&st](const httplib::Request& req, httplib::Response& res) {
             send_json(res, 201, st.submit(req.matches[1], req.matches[2], parse_body(req)));
           }));

  srv.Get(R"(/api/audio/([0-9a-f]+))", guarded([&st](const httplib::Request& req, httplib::Response& res) {
    const auto path = st.audio_path(req.matches[1]);
    if (!path) throw ServiceError(404, "unknown_audio", "unknown audio token");
    std::ifstream in(*path, std::ios::binary);
    if (!in) throw ServiceError(404, "missing_audio", "audio file is no longer available");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    res.set_header("Accept-Ranges", "bytes");
    res.set_content(std::move(bytes), "audio/wav");
  }));

  srv.Get(R"(/api/tests/([^/]+)/report)", guarded([&st](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, st.report(req.matches[1]));
  }));

  srv.Get(R"(/api/tests/([^/]+)/export\.csv)", guarded([&st](const httplib::Request& req, httplib::Response& res) {
    res.set_content(st.export_csv(req.matches[1]), "text/csv");
  }));

  srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) send_error(res, res.status, res.status == 404 ? "not_found" : "http_error", "request failed");
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  if (!impl_->server.bind_to_port(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpServer::serve_bound() { impl_->server.listen_after_bind(); }

void HttpServer::listen(const std::string& host, int port) {
  bind(host, port);
  serve_bound();
}

void HttpServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace prosody_eval::service
