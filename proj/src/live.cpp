#include "wams/live.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>

#include <fmt/format.h>

#include "wams/frame.hpp"
#include "wams/log.hpp"

namespace wams::live {
namespace {

using Clock = std::chrono::system_clock;

std::string errno_text() { return std::strerror(errno); }

sockaddr_in resolve(const std::string& host, std::uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr)
    throw LiveError(fmt::format("cannot resolve host '{}'", host));
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  freeaddrinfo(res);
  return addr;
}

// Connect with a timeout. Returns -1 on failure.
int connect_to(const sockaddr_in& addr, double timeout_ms) {
  const int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) return -1;
  const int flags = fcntl(fd, F_GETFL, 0);
  fcntl(fd, F_SETFL, flags | O_NONBLOCK);
  int rc = ::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr);
  if (rc < 0 && errno == EINPROGRESS) {
    pollfd p{fd, POLLOUT, 0};
    rc = ::poll(&p, 1, static_cast<int>(timeout_ms));
    int err = 0;
    socklen_t len = sizeof err;
    if (rc == 1 && getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len) == 0 && err == 0) rc = 0;
    else rc = -1;
  }
  if (rc != 0) {
    ::close(fd);
    return -1;
  }
  fcntl(fd, F_SETFL, flags);
  int one = 1;
  setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return fd;
}

bool send_all(int fd, const std::uint8_t* data, std::size_t n) {
  while (n > 0) {
    const auto sent = ::send(fd, data, n, MSG_NOSIGNAL);
    if (sent < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data += sent;
    n -= static_cast<std::size_t>(sent);
  }
  return true;
}

}  // namespace

std::int64_t utc_now_us() {
  return std::chrono::duration_cast<std::chrono::microseconds>(Clock::now().time_since_epoch()).count();
}

Server::Server(ServerConfig config) : config_(std::move(config)) {
  if (config_.max_conns == 0) throw LiveError("max_conns must be >= 1");
  if (!(config_.skew_bound_ms >= 0)) throw LiveError("skew_bound_ms must be >= 0");
}

Server::~Server() { stop(); }

void Server::start() {
  if (started_) return;
  std::filesystem::create_directories(config_.out_dir);
  const auto addr = resolve(config_.host, config_.port);

  listen_fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (listen_fd_ < 0) throw LiveError(fmt::format("socket: {}", errno_text()));
  int one = 1;
  setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(listen_fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
    const auto msg = fmt::format("cannot bind {}:{}: {}", config_.host, config_.port, errno_text());
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw LiveError(msg);
  }
  if (::listen(listen_fd_, 128) != 0) {
    const auto msg = fmt::format("listen: {}", errno_text());
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw LiveError(msg);
  }
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  bound_port_ = ntohs(bound.sin_port);

  capture_out_.open(capture_path(), std::ios::binary | std::ios::trunc);
  rows_out_.open(measurements_path(), std::ios::binary | std::ios::trunc);
  if (!capture_out_ || !rows_out_) throw LiveError(fmt::format("cannot write logs in '{}'", config_.out_dir.string()));

  CaptureHeader header;
  header.source = "live";
  header.start_time_us = utc_now_us();
  header.duration_s = 0.0;  // open-ended
  header.skew_bound_ms = config_.skew_bound_ms;
  header.t_dcs_ms = config_.t_dcs_ms;
  capture_out_ << format_header_line(header) << '\n';
  rows_out_ << format_measurement_header_line(header) << '\n';
  capture_out_.flush();
  rows_out_.flush();

  started_ = true;
  writer_ = std::thread([this] { writer_loop(); });
  acceptor_ = std::thread([this] { accept_loop(); });
  log::get()->info("serving on {}:{}, logs in {}", config_.host, bound_port_, config_.out_dir.string());
}

void Server::stop() {
  if (!started_) return;
  started_ = false;
  stopping_ = true;
  if (acceptor_.joinable()) acceptor_.join();
  if (listen_fd_ >= 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
  {
    std::lock_guard lk(handlers_mu_);
    for (auto& h : handlers_)
      if (h.thread.joinable()) h.thread.join();
    handlers_.clear();
  }
  {
    std::lock_guard lk(queue_mu_);
    writer_exit_ = true;
  }
  queue_cv_.notify_all();
  if (writer_.joinable()) writer_.join();
  capture_out_.flush();
  rows_out_.flush();
  capture_out_.close();
  rows_out_.close();
  log::get()->info("stopped; {} rows, {} duplicate frames, {} refused connections", stats_.rows,
                   stats_.duplicate_frames, stats_.refused);
}

ServerStats Server::stats() const {
  std::lock_guard lk(queue_mu_);
  return stats_;
}

void Server::accept_loop() {
  while (!stopping_) {
    pollfd p{listen_fd_, POLLIN, 0};
    const int rc = ::poll(&p, 1, 100);
    {
      std::lock_guard lk(handlers_mu_);
      for (auto it = handlers_.begin(); it != handlers_.end();) {
        if (it->done) {
          it->thread.join();
          it = handlers_.erase(it);
        } else {
          ++it;
        }
      }
    }
    if (rc <= 0) continue;
    sockaddr_in peer{};
    socklen_t len = sizeof peer;
    const int fd = ::accept4(listen_fd_, reinterpret_cast<sockaddr*>(&peer), &len, SOCK_CLOEXEC);
    if (fd < 0) continue;
    char ip[INET_ADDRSTRLEN] = {};
    inet_ntop(AF_INET, &peer.sin_addr, ip, sizeof ip);
    if (active_ >= config_.max_conns) {
      ::close(fd);
      {
        std::lock_guard lk(queue_mu_);
        ++stats_.refused;
        ++stats_.integrity.refused_connections;
      }
      log::get()->warn("refused connection from {}:{}: max_conns={} reached", ip, ntohs(peer.sin_port),
                       config_.max_conns);
      continue;
    }
    ++active_;
    const auto conn_id = next_conn_id_++;
    {
      std::lock_guard lk(queue_mu_);
      ++stats_.accepted;
    }
    log::get()->debug("connection {} from {}:{}", conn_id, ip, ntohs(peer.sin_port));
    std::lock_guard lk(handlers_mu_);
    auto& h = handlers_.emplace_back();
    h.thread = std::thread([this, fd, conn_id, hp = &h] { handle(fd, conn_id, hp); });
  }
}

void Server::handle(int fd, std::uint64_t conn_id, Handler* self) {
  dcs::FrameAssembler assembler;
  dcs::IntegrityStats reported;
  std::uint64_t offset = 0;
  std::vector<std::uint8_t> buf(4096);
  while (!stopping_) {
    pollfd p{fd, POLLIN, 0};
    const int rc = ::poll(&p, 1, 100);
    if (rc < 0 && errno != EINTR) break;
    if (rc <= 0) continue;
    const auto n = ::recv(fd, buf.data(), buf.size(), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    const auto now = utc_now_us();
    const auto bytes = std::span<const std::uint8_t>(buf.data(), static_cast<std::size_t>(n));
    const auto done = assembler.ingest_bytes(bytes, now);

    Ingest item;
    item.record.wall_time_us = now;
    item.record.device_id = assembler.last_device_id().value_or(0);
    item.record.conn_id = conn_id;
    item.record.direction = Direction::kUplink;
    item.record.seq_begin = offset;
    item.record.seq_end = offset + static_cast<std::uint64_t>(n);
    item.record.payload_bytes = static_cast<std::uint32_t>(n);
    offset += static_cast<std::uint64_t>(n);
    for (const auto& c : done) {
      item.record.frame_complete.push_back({c.frame.frame_seq, c.frame.utc_timestamp_ms, c.arrival_time_us});
      item.rows.push_back(dcs::make_row(c.frame, conn_id, c.arrival_time_us));
    }
    const auto& now_integrity = assembler.integrity();
    item.integrity.crc_failures = now_integrity.crc_failures - reported.crc_failures;
    item.integrity.framing_errors = now_integrity.framing_errors - reported.framing_errors;
    reported = now_integrity;
    push(std::move(item));
  }
  ::close(fd);
  --active_;
  log::get()->debug("connection {} closed", conn_id);
  self->done = true;
}

void Server::push(Ingest item) {
  {
    std::lock_guard lk(queue_mu_);
    queue_.push_back(std::move(item));
  }
  queue_cv_.notify_one();
}

void Server::writer_loop() {
  auto last_flush = Clock::now();
  std::unique_lock lk(queue_mu_);
  for (;;) {
    queue_cv_.wait_for(lk, std::chrono::milliseconds(200), [this] { return writer_exit_ || !queue_.empty(); });
    while (!queue_.empty()) {
      Ingest item = std::move(queue_.front());
      queue_.pop_front();
      stats_.integrity += item.integrity;
      // Device id is unknown until the first frame completes on a connection.
      if (item.record.device_id == 0 && !item.rows.empty()) item.record.device_id = item.rows.front().device_id;
      capture_out_ << format_record_line(item.record) << '\n';
      ++stats_.capture_records;
      for (const auto& row : item.rows) {
        if (!seen_.insert({row.device_id, row.frame_seq}).second) {
          ++stats_.duplicate_frames;
          ++stats_.integrity.duplicate_frames;
          continue;
        }
        rows_out_ << format_row_line(row) << '\n';
        ++stats_.rows;
      }
    }
    if (Clock::now() - last_flush > std::chrono::seconds(1)) {
      capture_out_.flush();
      rows_out_.flush();
      last_flush = Clock::now();
    }
    if (writer_exit_ && queue_.empty()) break;
  }
}

bool EmulatorReport::any_offline() const {
  for (const auto& d : devices)
    if (d.offline) return true;
  return false;
}

std::uint64_t EmulatorReport::frames_generated() const {
  std::uint64_t n = 0;
  for (const auto& d : devices) n += d.frames_generated;
  return n;
}

namespace {

void run_one(const EmulatorConfig& cfg, const sockaddr_in& addr, std::uint16_t device_id, const std::atomic<bool>* stop,
             std::int64_t end_us, EmulatorDeviceReport& rep) {
  rep.device_id = device_id;
  fdr::MeasurementSynth synth(cfg.signal, device_id, sim::make_rng(cfg.seed, device_id, 1));
  int fd = -1;
  int failures = 0;
  double backoff_ms = cfg.retry_initial_ms;
  std::int64_t next_attempt_us = 0;
  const auto stopped = [&] { return stop != nullptr && stop->load(); };

  const auto try_connect = [&](std::int64_t now_us) {
    if (now_us < next_attempt_us) return;
    fd = connect_to(addr, cfg.connect_timeout_ms);
    if (fd >= 0) {
      ++rep.connections;
      failures = 0;
      backoff_ms = cfg.retry_initial_ms;
      return;
    }
    ++failures;
    log::get()->warn("device {}: connect to {}:{} failed ({}/{})", device_id, cfg.host, cfg.port, failures,
                     cfg.connect_attempts);
    if (failures >= cfg.connect_attempts) {
      rep.offline = true;
      return;
    }
    next_attempt_us = utc_now_us() + static_cast<std::int64_t>(backoff_ms * 1000.0);
    backoff_ms = std::min(backoff_ms * 2.0, cfg.retry_max_ms);
  };

  try_connect(utc_now_us());
  constexpr std::int64_t kTickUs = fdr::kReportingIntervalMs * 1000;
  std::int64_t tick = (utc_now_us() / kTickUs + 1) * kTickUs;
  while (!rep.offline && !stopped() && tick < end_us) {
    std::this_thread::sleep_until(Clock::time_point(std::chrono::microseconds(tick)));
    const auto frame = synth.next_measurement(tick / 1000);
    ++rep.frames_generated;
    if (fd < 0) try_connect(utc_now_us());
    if (fd >= 0) {
      const auto bytes = encode_frame(frame);
      if (send_all(fd, bytes.data(), bytes.size())) {
        ++rep.frames_sent;
      } else {
        ++rep.frames_dropped;
        ::close(fd);
        fd = -1;
        log::get()->warn("device {}: connection lost", device_id);
      }
    } else {
      ++rep.frames_dropped;
    }
    tick += kTickUs;
  }
  if (fd >= 0) {
    ::shutdown(fd, SHUT_WR);
    ::close(fd);
  }
}

}  // namespace

EmulatorReport run_emulators(const EmulatorConfig& cfg, const std::atomic<bool>* stop) {
  if (cfg.devices == 0) throw LiveError("at least one device is required");
  if (cfg.connect_attempts < 1) throw LiveError("connect_attempts must be >= 1");
  if (!(cfg.duration_s > 0)) throw LiveError("duration must be > 0");
  if (cfg.first_device_id == 0 || cfg.first_device_id + cfg.devices - 1 > 0xFFFF)
    throw LiveError("device ids must lie in 1..65535");
  cfg.signal.validate();
  const auto addr = resolve(cfg.host, cfg.port);
  const auto end_us = utc_now_us() + static_cast<std::int64_t>(cfg.duration_s * 1e6);

  EmulatorReport report;
  report.devices.resize(cfg.devices);
  std::vector<std::thread> threads;
  threads.reserve(cfg.devices);
  for (std::size_t i = 0; i < cfg.devices; ++i) {
    const auto id = static_cast<std::uint16_t>(cfg.first_device_id + i);
    threads.emplace_back([&, i, id] { run_one(cfg, addr, id, stop, end_us, report.devices[i]); });
  }
  for (auto& t : threads) t.join();
  return report;
}

}  // namespace wams::live
