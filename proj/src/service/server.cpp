#include "spacetime/service/server.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <chrono>
#include <condition_variable>
#include <deque>
#include <list>
#include <mutex>
#include <thread>

namespace spacetime::service {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

// Per-subscriber outbox; the listener never blocks on a slow socket.
struct Outbox {
  std::mutex mutex;
  std::condition_variable cv;
  std::deque<std::string> messages;
  bool closed = false;
};

}  // namespace

struct Server::Impl {
  Api& api;
  store::Store& store;
  asio::io_context ioc;
  std::unique_ptr<tcp::acceptor> acceptor;
  std::thread accept_thread;
  std::atomic<bool> stopping{false};
  unsigned short bound = 0;
  int token = 0;

  std::mutex conns_mutex;
  std::list<std::thread> threads;
  std::list<std::shared_ptr<tcp::socket>> sockets;
  std::list<std::shared_ptr<Outbox>> outboxes;

  Impl(Api& a, store::Store& s) : api(a), store(s) {}

  void broadcast(const store::CallRecord& c) {
    std::string msg = json{{"type", "call"},
                           {"session", c.session},
                           {"ordinal", c.ordinal},
                           {"call", c.id},
                           {"function", c.function}}
                          .dump();
    std::lock_guard<std::mutex> lock(conns_mutex);
    for (auto& box : outboxes) {
      std::lock_guard<std::mutex> l(box->mutex);
      box->messages.push_back(msg);
      box->cv.notify_all();
    }
  }

  void accept_loop() {
    while (!stopping) {
      auto socket = std::make_shared<tcp::socket>(ioc);
      beast::error_code ec;
      acceptor->accept(*socket, ec);
      if (ec || stopping) break;
      std::lock_guard<std::mutex> lock(conns_mutex);
      sockets.push_back(socket);
      threads.emplace_back([this, socket] { session(socket); });
    }
  }

  void session(std::shared_ptr<tcp::socket> socket) {
    beast::error_code ec;
    beast::flat_buffer buffer;
    for (;;) {
      http::request<http::string_body> req;
      http::read(*socket, buffer, req, ec);
      if (ec) break;
      if (websocket::is_upgrade(req)) {
        if (req.target() == "/ws") websocket_session(std::move(*socket), req);
        return;
      }
      Response r = api.handle(std::string(req.method_string()), std::string(req.target()), req.body());
      http::response<http::string_body> res{static_cast<http::status>(r.status), req.version()};
      res.set(http::field::server, "spacetime");
      res.set(http::field::content_type, r.content_type);
      for (const auto& [k, v] : r.headers) res.set(k, v);
      res.keep_alive(req.keep_alive());
      res.body() = std::move(r.body);
      res.prepare_payload();
      http::write(*socket, res, ec);
      if (ec || !res.keep_alive()) break;
    }
    socket->shutdown(tcp::socket::shutdown_both, ec);
  }

  void websocket_session(tcp::socket socket, const http::request<http::string_body>& req) {
    websocket::stream<tcp::socket> ws(std::move(socket));
    beast::error_code ec;
    ws.accept(req, ec);
    if (ec) return;
    auto box = std::make_shared<Outbox>();
    {
      std::lock_guard<std::mutex> lock(conns_mutex);
      outboxes.push_back(box);
    }
    ws.text(true);
    while (!stopping) {
      // Clients only ever send control frames and chatter we ignore; reading
      // whatever has arrived lets beast answer pings and close handshakes.
      if (ws.next_layer().available(ec) > 0) {
        beast::flat_buffer in;
        ws.read(in, ec);
        if (ec) break;
        continue;
      }
      std::string msg;
      {
        std::unique_lock<std::mutex> l(box->mutex);
        box->cv.wait_for(l, std::chrono::milliseconds(100), [&] { return box->closed || !box->messages.empty(); });
        if (box->closed) break;
        if (box->messages.empty()) continue;
        msg = std::move(box->messages.front());
        box->messages.pop_front();
      }
      ws.write(asio::buffer(msg), ec);
      if (ec) break;
    }
    {
      std::lock_guard<std::mutex> lock(conns_mutex);
      outboxes.remove(box);
    }
    ws.close(websocket::close_code::going_away, ec);
  }
};

Server::Server(Api& api, store::Store& store) : impl_(std::make_unique<Impl>(api, store)) {}

Server::~Server() { stop(); }

unsigned short Server::start(const std::string& address, unsigned short port) {
  auto& i = *impl_;
  tcp::endpoint ep{asio::ip::make_address(address), port};
  i.acceptor = std::make_unique<tcp::acceptor>(i.ioc);
  i.acceptor->open(ep.protocol());
  i.acceptor->set_option(asio::socket_base::reuse_address(true));
  i.acceptor->bind(ep);
  i.acceptor->listen();
  i.bound = i.acceptor->local_endpoint().port();
  i.token = i.store.subscribe([&i](const store::CallRecord& c) { i.broadcast(c); });
  i.accept_thread = std::thread([&i] { i.accept_loop(); });
  return i.bound;
}

unsigned short Server::port() const { return impl_->bound; }

void Server::stop() {
  auto& i = *impl_;
  if (!i.acceptor || i.stopping.exchange(true)) return;
  i.store.unsubscribe(i.token);
  beast::error_code ec;
  // Wake the blocking accept with a throwaway connection, then close.
  {
    auto ep = i.acceptor->local_endpoint(ec);
    if (ep.address().is_unspecified()) ep.address(asio::ip::make_address("127.0.0.1"));
    tcp::socket poke(i.ioc);
    poke.connect(ep, ec);
  }
  if (i.accept_thread.joinable()) i.accept_thread.join();
  i.acceptor->close(ec);
  std::list<std::thread> threads;
  {
    std::lock_guard<std::mutex> lock(i.conns_mutex);
    for (auto& s : i.sockets) s->shutdown(tcp::socket::shutdown_both, ec);
    for (auto& b : i.outboxes) {
      std::lock_guard<std::mutex> l(b->mutex);
      b->closed = true;
      b->cv.notify_all();
    }
    threads.swap(i.threads);
  }
  for (auto& t : threads)
    if (t.joinable()) t.join();
}

}  // namespace spacetime::service
