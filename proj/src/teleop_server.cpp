#include "fovcbf/teleop_server.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <nlohmann/json.hpp>

#include "fovcbf/teleop.hpp"

namespace fovcbf {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace {

// Most recent value wins; readers take it out.
template <class T>
class Mailbox {
 public:
  void put(T value) {
    std::lock_guard lock(mu_);
    slot_ = std::move(value);
  }
  std::optional<T> take() {
    std::lock_guard lock(mu_);
    std::optional<T> out = std::move(slot_);
    slot_.reset();
    return out;
  }

 private:
  std::mutex mu_;
  std::optional<T> slot_;
};

// Inbound slot contents. The twist is latest-wins; discrete commands
// received since the last tick ride along so a toggle is not lost to a
// following twist.
struct Inbound {
  std::optional<HilMessage> hil;
  double hil_time = 0.0;
  std::vector<ClientMessage> commands;
};

std::string_view mime_type(std::string_view path) {
  const auto dot = path.rfind('.');
  const std::string_view ext = dot == std::string_view::npos ? "" : path.substr(dot);
  if (ext == ".html") return "text/html";
  if (ext == ".js") return "application/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  return "application/octet-stream";
}

class WsSession;

}  // namespace

struct TeleopServer::Impl {
  Impl(ScenarioConfig c, ServiceOptions o) : config(std::move(c)), options(std::move(o)), acceptor(ioc) {}

  ScenarioConfig config;
  ServiceOptions options;
  net::io_context ioc;
  tcp::acceptor acceptor;
  std::optional<net::executor_work_guard<net::io_context::executor_type>> work;
  std::thread io_thread;
  std::thread control_thread;
  std::atomic<bool> stopping{false};
  std::mutex stop_mu;
  std::condition_variable stop_cv;
  std::atomic<double> sim_time{0.0};
  std::chrono::steady_clock::time_point epoch = std::chrono::steady_clock::now();

  std::mutex inbound_mu;
  Inbound inbound;
  Mailbox<std::shared_ptr<const std::string>> outbound;
  std::vector<std::weak_ptr<WsSession>> sessions;  // io thread only

  double now() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch).count(); }

  std::optional<std::string> ingest(const std::string& text) {
    Decoded d = decode_client(text);
    if (!d.message) return d.error;
    std::lock_guard lock(inbound_mu);
    if (auto* hil = std::get_if<HilMessage>(&*d.message)) {
      inbound.hil = *hil;
      inbound.hil_time = now();
    } else {
      if (inbound.commands.size() >= 64) inbound.commands.erase(inbound.commands.begin());
      inbound.commands.push_back(*d.message);
    }
    return std::nullopt;
  }

  void control_loop();
  void broadcast();
  void do_accept();
  http::response<http::string_body> handle_http(const http::request<http::string_body>& req) const;
};

namespace {

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket&& socket, TeleopServer::Impl& server) : ws_(std::move(socket)), server_(server) {}

  void run(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, beast::bind_front_handler(&WsSession::on_accept, shared_from_this()));
  }

  void offer(std::shared_ptr<const std::string> snapshot) {
    latest_ = std::move(snapshot);
    pump();
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    ws_.text(true);
    server_.sessions.push_back(weak_from_this());
    do_read();
  }

  void do_read() { ws_.async_read(buffer_, beast::bind_front_handler(&WsSession::on_read, shared_from_this())); }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) return;
    std::optional<std::string> error;
    if (!ws_.got_text()) {
      error = "expected a text frame";
    } else {
      error = server_.ingest(beast::buffers_to_string(buffer_.data()));
    }
    buffer_.consume(buffer_.size());
    if (error) {
      urgent_.push_back(encode_error(*error));
      pump();
    }
    do_read();
  }

  void pump() {
    if (writing_) return;
    if (!urgent_.empty()) {
      current_ = std::make_shared<const std::string>(std::move(urgent_.front()));
      urgent_.pop_front();
    } else if (latest_) {
      current_ = std::move(latest_);
      latest_.reset();
    } else {
      return;
    }
    writing_ = true;
    ws_.async_write(net::buffer(*current_), beast::bind_front_handler(&WsSession::on_write, shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t) {
    writing_ = false;
    if (ec) return;
    pump();
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  TeleopServer::Impl& server_;
  std::deque<std::string> urgent_;
  std::shared_ptr<const std::string> latest_;
  std::shared_ptr<const std::string> current_;
  bool writing_ = false;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket&& socket, TeleopServer::Impl& server) : stream_(std::move(socket)), server_(server) {}

  void run() { do_read(); }

 private:
  void do_read() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_, beast::bind_front_handler(&HttpSession::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec == http::error::end_of_stream) {
      stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
      return;
    }
    if (ec) return;
    if (websocket::is_upgrade(req_) && req_.target() == "/ws") {
      stream_.expires_never();
      std::make_shared<WsSession>(stream_.release_socket(), server_)->run(std::move(req_));
      return;
    }
    auto res = std::make_shared<http::response<http::string_body>>(server_.handle_http(req_));
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code wec, std::size_t) {
      if (wec) return;
      if (res->need_eof()) {
        beast::error_code ignored;
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
        return;
      }
      self->do_read();
    });
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
  TeleopServer::Impl& server_;
};

}  // namespace

http::response<http::string_body> TeleopServer::Impl::handle_http(const http::request<http::string_body>& req) const {
  auto reply = [&](http::status status, std::string_view type, std::string body) {
    http::response<http::string_body> res{status, req.version()};
    res.set(http::field::content_type, std::string(type));
    res.keep_alive(req.keep_alive());
    res.body() = std::move(body);
    res.prepare_payload();
    return res;
  };

  if (req.method() != http::verb::get) return reply(http::status::method_not_allowed, "text/plain", "GET only\n");
  const std::string target(req.target());
  if (target == "/healthz") {
    return reply(http::status::ok, "application/json",
                 nlohmann::json{{"status", "ok"}, {"t", sim_time.load()}}.dump());
  }
  if (target == "/scenario") {
    const RobustCamera robust = robust_camera(config.camera(), config.bounds);
    nlohmann::json corners = nlohmann::json::array();
    for (const auto& c : robust.shrunken_corners) corners.push_back({c.x(), c.y()});
    return reply(http::status::ok, "application/json",
                 nlohmann::json{{"width", config.width},
                                {"length", config.length},
                                {"robust_corners", corners},
                                {"h_safe", config.hil.h_safe},
                                {"config", config_to_json(config)}}
                     .dump());
  }
  if (!options.static_dir.empty() && target.find("..") == std::string::npos) {
    const std::string rel = target == "/" ? "/index.html" : target.substr(0, target.find('?'));
    std::ifstream in(options.static_dir + rel, std::ios::binary);
    if (in) {
      std::ostringstream body;
      body << in.rdbuf();
      return reply(http::status::ok, mime_type(rel), body.str());
    }
  }
  return reply(http::status::not_found, "text/plain", "not found\n");
}

void TeleopServer::Impl::do_accept() {
  acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
    if (ec) return;
    std::make_shared<HttpSession>(std::move(socket), *this)->run();
    do_accept();
  });
}

void TeleopServer::Impl::broadcast() {
  auto snap = outbound.take();
  if (!snap) return;
  std::erase_if(sessions, [](const auto& w) { return w.expired(); });
  for (auto& w : sessions) {
    if (auto s = w.lock()) s->offer(*snap);
  }
}

void TeleopServer::Impl::control_loop() {
  TeleopSession session(config, options.rate_hz);
  const auto period = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(1.0 / options.rate_hz));
  auto next = std::chrono::steady_clock::now();
  while (!stopping.load()) {
    Inbound in;
    {
      std::lock_guard lock(inbound_mu);
      std::swap(in, inbound);
    }
    for (const auto& cmd : in.commands) session.apply(cmd, now());
    if (in.hil) session.apply(*in.hil, in.hil_time);

    const Snapshot snap = session.tick(now());
    sim_time.store(snap.t);
    outbound.put(std::make_shared<const std::string>(encode(snap)));
    net::post(ioc, [this] { broadcast(); });

    next += period;
    std::unique_lock lock(stop_mu);
    stop_cv.wait_until(lock, next, [this] { return stopping.load(); });
  }
}

TeleopServer::TeleopServer(ScenarioConfig config, ServiceOptions options)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(options))) {}

TeleopServer::~TeleopServer() { stop(); }

void TeleopServer::start() {
  Impl& s = *impl_;
  const tcp::endpoint endpoint(net::ip::make_address(s.options.address), s.options.port);
  s.acceptor.open(endpoint.protocol());
  s.acceptor.set_option(net::socket_base::reuse_address(true));
  s.acceptor.bind(endpoint);
  s.acceptor.listen(net::socket_base::max_listen_connections);
  s.work.emplace(net::make_work_guard(s.ioc));
  s.do_accept();
  s.io_thread = std::thread([&s] { s.ioc.run(); });
  s.control_thread = std::thread([&s] { s.control_loop(); });
}

std::uint16_t TeleopServer::port() const { return impl_->acceptor.local_endpoint().port(); }

void TeleopServer::stop() {
  Impl& s = *impl_;
  {
    std::lock_guard lock(s.stop_mu);
    s.stopping.store(true);
  }
  s.stop_cv.notify_all();
  if (s.control_thread.joinable()) s.control_thread.join();
  s.work.reset();
  s.ioc.stop();
  if (s.io_thread.joinable()) s.io_thread.join();
}

void TeleopServer::run_until_signal() {
  net::io_context signals_ctx;
  net::signal_set signals(signals_ctx, SIGINT, SIGTERM);
  net::steady_timer poll(signals_ctx);
  std::function<void()> arm = [&] {
    poll.expires_after(std::chrono::milliseconds(100));
    poll.async_wait([&](const beast::error_code& ec) {
      if (ec) return;
      if (impl_->stopping.load()) {
        signals.cancel();
        return;
      }
      arm();
    });
  };
  signals.async_wait([&](const beast::error_code& ec, int) {
    if (!ec) poll.cancel();
  });
  arm();
  signals_ctx.run();
  stop();
}

}  // namespace fovcbf
