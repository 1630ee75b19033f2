#pragma once

#include <string>

#include "qauction/service/store.hpp"

namespace httplib {
class Server;
}

namespace qauction::service {

/// {"error": {"code": ..., "message": ...}}
json error_body(const std::string& code, const std::string& message);

/// Routes:
///   POST /sessions                      spec            -> 201 {id, phase}
///   POST /sessions/{id}/configure       model config
///   POST /sessions/{id}/bids            bid; bidder from X-Bidder-Id or body bidder_id
///   POST /sessions/{id}/search          {seed}
///   GET  /sessions/{id}?viewer=...      redacted view (default public)
///   GET  /sessions/{id}/events?viewer=auctioneer
void install_routes(httplib::Server& server, SessionStore& store);

/// Serves until the process is stopped; false if the port cannot be bound.
bool serve(SessionStore& store, const std::string& host, int port);

}  // namespace qauction::service
