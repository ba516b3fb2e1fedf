// Copyright 2026 The MGVO Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mgvo/socket_transport.h"

#include <array>
#include <chrono>
#include <deque>
#include <thread>
#include <vector>

#include <boost/asio.hpp>

#include "mgvo/error.h"
#include "mgvo/wire.h"

namespace mgvo {

namespace asio = boost::asio;
using asio::ip::tcp;
using boost::system::error_code;

std::pair<std::string, std::string> SplitHostPort(std::string_view address) {
  auto colon = address.rfind(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == address.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "expected host:port, got '" + std::string(address) + "'");
  }
  std::string port(address.substr(colon + 1));
  if (port.find_first_not_of("0123456789") != std::string::npos) {
    throw Error(ErrorCode::kInvalidArgument, "bad port '" + port + "'");
  }
  return {std::string(address.substr(0, colon)), port};
}

CallOutcome SocketTransport::Call(std::string_view /*from*/, const std::string& address,
                                  const std::string& frame, std::int64_t timeout_ms) {
  const auto start = std::chrono::steady_clock::now();
  CallOutcome outcome;
  auto finish = [&](CallOutcome::Status status) {
    outcome.status = status;
    outcome.elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - start)
                             .count();
    return outcome;
  };
  std::pair<std::string, std::string> hp;
  try {
    hp = SplitHostPort(address);
  } catch (const Error&) {
    return finish(CallOutcome::Status::kUnreachable);
  }

  asio::io_context ioc;
  tcp::resolver resolver(ioc);
  tcp::socket socket(ioc);
  std::array<unsigned char, 4> header{};
  std::string body;
  bool done = false;
  bool failed = false;
  bool oversize = false;

  auto fail = [&](const error_code& ec) {
    if (ec) failed = true;
    return static_cast<bool>(ec);
  };
  resolver.async_resolve(hp.first, hp.second, [&](error_code ec, tcp::resolver::results_type results) {
    if (fail(ec)) return;
    asio::async_connect(socket, results, [&](error_code ec, const tcp::endpoint&) {
      if (fail(ec)) return;
      asio::async_write(socket, asio::buffer(frame), [&](error_code ec, std::size_t) {
        if (fail(ec)) return;
        asio::async_read(socket, asio::buffer(header), [&](error_code ec, std::size_t) {
          if (fail(ec)) return;
          std::uint32_t len = (std::uint32_t{header[0]} << 24) |
                              (std::uint32_t{header[1]} << 16) |
                              (std::uint32_t{header[2]} << 8) | header[3];
          if (len > kMaxFrameLength) {
            oversize = true;
            return;
          }
          body.resize(len);
          asio::async_read(socket, asio::buffer(body), [&](error_code ec, std::size_t) {
            if (fail(ec)) return;
            done = true;
          });
        });
      });
    });
  });
  ioc.run_for(std::chrono::milliseconds(timeout_ms));

  if (oversize) {
    outcome.response = EncodeFrame(MakeError(0, "MalformedFrame", "oversize response"));
    return finish(CallOutcome::Status::kOk);
  }
  if (done) {
    outcome.response.reserve(4 + body.size());
    outcome.response.append(reinterpret_cast<const char*>(header.data()), 4);
    outcome.response += body;
    return finish(CallOutcome::Status::kOk);
  }
  if (failed) return finish(CallOutcome::Status::kUnreachable);
  return finish(CallOutcome::Status::kTimeout);
}

namespace {

class Session : public std::enable_shared_from_this<Session> {
 public:
  Session(tcp::socket socket, Endpoint& endpoint, asio::thread_pool& workers)
      : socket_(std::move(socket)), endpoint_(endpoint), workers_(workers) {}

  void Start() { Read(); }

 private:
  // Everything below runs on the socket's strand.
  void Read() {
    auto self = shared_from_this();
    socket_.async_read_some(asio::buffer(buf_), [self](error_code ec, std::size_t n) {
      if (ec) {
        self->read_closed_ = true;
        if (ec == asio::error::eof && self->decoder_.buffered() > 0) {
          self->Reject("stream ended inside a frame");
        }
        self->MaybeClose();
        return;
      }
      self->decoder_.Feed(std::string_view(self->buf_.data(), n));
      try {
        while (auto frame = self->decoder_.NextFrame()) self->Dispatch(std::move(*frame));
      } catch (const Error& e) {
        self->read_closed_ = true;
        self->Reject(e.message());
        return;
      }
      self->Read();
    });
  }

  void Dispatch(std::string frame) {
    ++in_flight_;
    auto self = shared_from_this();
    asio::post(workers_, [self, frame = std::move(frame)] {
      std::string response = self->endpoint_.HandleFrame(frame);
      asio::post(self->socket_.get_executor(), [self, response = std::move(response)]() mutable {
        --self->in_flight_;
        self->Send(std::move(response));
      });
    });
  }

  void Reject(const std::string& why) {
    close_after_writes_ = true;
    Send(EncodeFrame(MakeError(0, "MalformedFrame", why)));
  }

  void Send(std::string frame) {
    outbox_.push_back(std::move(frame));
    if (!writing_) Write();
  }

  void Write() {
    writing_ = true;
    auto self = shared_from_this();
    asio::async_write(socket_, asio::buffer(outbox_.front()),
                      [self](error_code ec, std::size_t) {
                        self->outbox_.pop_front();
                        if (ec) {
                          self->outbox_.clear();
                          self->writing_ = false;
                          self->Close();
                          return;
                        }
                        if (!self->outbox_.empty()) {
                          self->Write();
                          return;
                        }
                        self->writing_ = false;
                        self->MaybeClose();
                      });
  }

  void MaybeClose() {
    if (writing_ || in_flight_ > 0) return;
    if (close_after_writes_ || read_closed_) Close();
  }

  void Close() {
    error_code ignored;
    socket_.shutdown(tcp::socket::shutdown_both, ignored);
    socket_.close(ignored);
  }

  tcp::socket socket_;
  Endpoint& endpoint_;
  asio::thread_pool& workers_;
  std::array<char, 65536> buf_{};
  FrameDecoder decoder_;
  std::deque<std::string> outbox_;
  bool writing_ = false;
  bool read_closed_ = false;
  bool close_after_writes_ = false;
  int in_flight_ = 0;
};

}  // namespace

struct SocketServer::Impl {
  Impl(Endpoint& endpoint, int workers)
      : endpoint(endpoint), acceptor(ioc), pool(static_cast<std::size_t>(workers)) {}

  void Accept() {
    acceptor.async_accept(asio::make_strand(ioc), [this](error_code ec, tcp::socket socket) {
      if (ec) {
        if (ec == asio::error::operation_aborted) return;
      } else {
        std::make_shared<Session>(std::move(socket), endpoint, pool)->Start();
      }
      Accept();
    });
  }

  Endpoint& endpoint;
  asio::io_context ioc;
  tcp::acceptor acceptor;
  asio::thread_pool pool;
  std::vector<std::thread> threads;
  std::string address;
  bool stopped = false;
};

SocketServer::SocketServer(Endpoint& endpoint, const std::string& listen,
                           int io_threads, int workers)
    : impl_(std::make_unique<Impl>(endpoint, workers)) {
  auto [host, port] = SplitHostPort(listen);
  error_code ec;
  auto address = asio::ip::make_address(host == "localhost" ? "127.0.0.1" : host, ec);
  if (ec) throw Error(ErrorCode::kIoFailure, "bad listen host '" + host + "'");
  tcp::endpoint ep(address, static_cast<unsigned short>(std::stoul(port)));
  impl_->acceptor.open(ep.protocol(), ec);
  if (!ec) impl_->acceptor.set_option(tcp::acceptor::reuse_address(true), ec);
  if (!ec) impl_->acceptor.bind(ep, ec);
  if (!ec) impl_->acceptor.listen(asio::socket_base::max_listen_connections, ec);
  if (ec) {
    throw Error(ErrorCode::kIoFailure, "cannot listen on " + listen + ": " + ec.message());
  }
  auto bound = impl_->acceptor.local_endpoint();
  impl_->address = bound.address().to_string() + ":" + std::to_string(bound.port());
  impl_->Accept();
  for (int i = 0; i < io_threads; ++i) {
    impl_->threads.emplace_back([this] { impl_->ioc.run(); });
  }
}

SocketServer::~SocketServer() { Stop(); }

const std::string& SocketServer::address() const { return impl_->address; }

void SocketServer::Stop() {
  if (impl_->stopped) return;
  impl_->stopped = true;
  asio::post(impl_->ioc, [this] {
    error_code ignored;
    impl_->acceptor.close(ignored);
  });
  impl_->pool.join();
  impl_->ioc.stop();
  for (auto& t : impl_->threads) t.join();
}

}  // namespace mgvo
