#include "hsc/live/live_proxy.hpp"

#include <array>

namespace hsc::live {

namespace {

/// Local leg writing a plain HTTP/1.0 response back to the browser.
class SocketLeg final : public LocalLeg {
 public:
  explicit SocketLeg(Socket sock) : sock_(std::move(sock)) {}

  void begin(std::optional<ByteCount> content_length) override {
    std::string head = "HTTP/1.0 200 OK\r\n";
    if (content_length) head += "Content-Length: " + std::to_string(*content_length) + "\r\n";
    head += "\r\n";
    send(head);
  }
  void write(std::span<const std::byte> bytes) override {
    if (!sock_) return;
    try {
      sock_.send_all(bytes);
    } catch (const std::system_error&) {
      sock_.close();
    }
  }
  void finish() override { sock_.close(); }
  void abort(std::string_view reason) override {
    send("HTTP/1.0 502 Bad Gateway\r\nContent-Length: " + std::to_string(reason.size()) +
         "\r\n\r\n" + std::string(reason));
    sock_.close();
  }

 private:
  void send(std::string_view text) { write(std::as_bytes(std::span(text))); }
  Socket sock_;
};

}  // namespace

LiveProxy::LiveProxy(LiveProxyConfig config, Poller::Source source)
    : config_(std::move(config)),
      gateway_(host_port(config_.proxy.gateway_base)),
      proxy_(config_.proxy),
      listener_(config_.port),
      source_(source ? std::move(source) : Poller::Source(system_interfaces)),
      poller_(config_.poll_interval, source_,
              [this](const std::vector<InterfaceDescriptor>& snap) { proxy_.on_poll(snap); }) {}

void LiveProxy::start() {
  proxy_.set_interfaces(source_());
  poller_.start();
  for (std::size_t i = 0; i < config_.proxy.workers; ++i)
    workers_.emplace_back([this](std::stop_token st) { worker(st); });
  acceptor_ = std::jthread([this] { accept_loop(); });
}

void LiveProxy::stop() {
  if (stopping_.exchange(true)) return;
  listener_.close();
  if (acceptor_.joinable()) acceptor_.join();
  poller_.stop();
  for (auto& w : workers_) w.request_stop();
  proxy_.notify_all();
  workers_.clear();
}

void LiveProxy::accept_loop() {
  while (auto sock = listener_.accept()) {
    if (stopping_) break;
    try {
      sock->set_timeouts(config_.io_timeout);
      std::string rest;
      const auto head = sock->recv_header_block(rest);
      OriginRequest req;
      try {
        req = parse_origin_request(head);
      } catch (const ProtocolError& e) {
        const std::string body = e.what();
        sock->send_all("HTTP/1.0 400 Bad Request\r\nContent-Length: " + std::to_string(body.size()) +
                       "\r\n\r\n" + body);
        continue;
      }
      proxy_.accept_request(req, std::make_shared<SocketLeg>(std::move(*sock)));
    } catch (const std::exception&) {
      // Browser hung up before sending a full request.
    }
  }
}

void LiveProxy::worker(std::stop_token stop) {
  while (!stop.stop_requested()) {
    auto d = proxy_.wait_dispatch(stop);
    if (!d) continue;
    run_remote(*d);
  }
}

void LiveProxy::run_remote(const Dispatch& d) {
  SessionRun run(proxy_, d);
  std::optional<RunOutcome> outcome;
  try {
    auto sock = connect_tcp(gateway_.host, gateway_.port);
    sock.set_timeouts(config_.io_timeout);
    sock.send_all(run.request());
    std::array<std::byte, 16384> buf{};
    while (!outcome) {
      const auto n = sock.recv_some(buf);
      if (n == 0) {
        outcome = run.on_eof();
        break;
      }
      outcome = run.on_bytes(std::span(buf).first(n));
    }
  } catch (const std::system_error& e) {
    outcome = RunOutcome::failure(cause_from_errno(e.code().value()), e.what());
  }
  proxy_.handle_outcome(d.session_id, *outcome);
}

}  // namespace hsc::live
