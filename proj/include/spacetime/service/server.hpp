#pragma once

// HTTP + WebSocket front end for Api. GET /ws upgrades to a WebSocket that
// receives {"type": "call", "session", "ordinal", "call", "function"} for
// every call committed to the store while connected.

#include <atomic>
#include <memory>
#include <string>

#include "spacetime/service/api.hpp"

namespace spacetime::service {

class Server {
 public:
  Server(Api& api, store::Store& store);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds and starts serving in background threads. Port 0 picks a free
  // port; the bound port is returned.
  unsigned short start(const std::string& address = "127.0.0.1", unsigned short port = 0);
  void stop();
  unsigned short port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace spacetime::service
