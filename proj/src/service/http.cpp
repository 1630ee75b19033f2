#include "qauction/service/http.hpp"

#include <httplib.h>

namespace qauction::service {

namespace {

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json parse_body(const httplib::Request& req, bool allow_empty = false) {
  if (req.body.empty()) {
    if (allow_empty) return json::object();
    throw validation_error("request body must be a JSON document");
  }
  try {
    return json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw validation_error(std::string("malformed JSON: ") + e.what());
  }
}

template <class F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const ServiceError& e) {
      reply(res, e.status(), error_body(e.code(), e.what()));
    } catch (const json::exception& e) {
      reply(res, 400, error_body("validation", e.what()));
    } catch (const std::invalid_argument& e) {
      reply(res, 400, error_body("validation", e.what()));
    } catch (const std::exception& e) {
      reply(res, 500, error_body("internal", e.what()));
    }
  };
}

std::string viewer_of(const httplib::Request& req) {
  return req.has_param("viewer") ? req.get_param_value("viewer") : std::string(kPublic);
}

}  // namespace

json error_body(const std::string& code, const std::string& message) {
  return {{"error", {{"code", code}, {"message", message}}}};
}

void install_routes(httplib::Server& server, SessionStore& store) {
  server.Post("/sessions", guarded([&store](const httplib::Request& req, httplib::Response& res) {
    const std::string id = store.create(parse_body(req));
    reply(res, 201, {{"id", id}, {"phase", to_string(Phase::Announced)}});
  }));

  server.Post(R"(/sessions/([^/]+)/configure)", guarded([&store](const httplib::Request& req, httplib::Response& res) {
    reply(res, 200, store.configure(req.matches[1], parse_body(req)));
  }));

  server.Post(R"(/sessions/([^/]+)/bids)", guarded([&store](const httplib::Request& req, httplib::Response& res) {
    json bid = parse_body(req);
    std::string bidder = req.get_header_value("X-Bidder-Id");
    if (bid.is_object() && bid.contains("bidder_id")) {
      const std::string in_body = bid.at("bidder_id").get<std::string>();
      if (!bidder.empty() && bidder != in_body)
        throw validation_error("X-Bidder-Id header and body bidder_id disagree");
      bidder = in_body;
      bid.erase("bidder_id");
    }
    if (bidder.empty()) throw validation_error("bids need an X-Bidder-Id header or a bidder_id field");
    reply(res, 200, store.submit_bid(req.matches[1], bidder, bid));
  }));

  server.Post(R"(/sessions/([^/]+)/search)", guarded([&store](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req, true);
    std::uint64_t seed = 0;
    if (body.contains("seed")) {
      if (!body["seed"].is_number_unsigned()) throw validation_error("seed must be a non-negative integer");
      seed = body["seed"].get<std::uint64_t>();
    }
    reply(res, 200, store.search(req.matches[1], seed));
  }));

  server.Get(R"(/sessions/([^/]+))", guarded([&store](const httplib::Request& req, httplib::Response& res) {
    reply(res, 200, store.view(req.matches[1], viewer_of(req)));
  }));

  server.Get(R"(/sessions/([^/]+)/events)", guarded([&store](const httplib::Request& req, httplib::Response& res) {
    reply(res, 200, store.events(req.matches[1], viewer_of(req)));
  }));

  server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) reply(res, res.status, error_body(res.status == 404 ? "not_found" : "http", "no such route"));
  });
}

bool serve(SessionStore& store, const std::string& host, int port) {
  httplib::Server server;
  install_routes(server, store);
  return server.listen(host, port);
}

}  // namespace qauction::service
