#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <list>
#include <mutex>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "wams/capture.hpp"
#include "wams/dcs.hpp"
#include "wams/fdr.hpp"

namespace wams::live {

class LiveError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ServerConfig {
  std::string host = "127.0.0.1";
  std::uint16_t port = 4712;  // 0 picks an ephemeral port
  std::size_t max_conns = 64;
  std::filesystem::path out_dir = "wams-live";
  double skew_bound_ms = 10.0;  // residual NTP/GPS disagreement declared in the log header
  double t_dcs_ms = 0.0;
};

struct ServerStats {
  std::uint64_t accepted = 0;
  std::uint64_t refused = 0;
  std::uint64_t rows = 0;
  std::uint64_t duplicate_frames = 0;
  std::uint64_t capture_records = 0;
  dcs::IntegrityStats integrity;
};

/// Real-socket data concentrator. One handler thread per device
/// connection; handlers push into an ordered queue drained by a single
/// writer thread that owns both log files.
class Server {
 public:
  explicit Server(ServerConfig config);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds, listens and starts serving. Throws LiveError (e.g. port busy).
  void start();
  /// Stops accepting, closes connections, drains the queue, flushes logs.
  void stop();

  std::uint16_t port() const noexcept { return bound_port_; }
  ServerStats stats() const;
  std::filesystem::path capture_path() const { return config_.out_dir / "capture.jsonl"; }
  std::filesystem::path measurements_path() const { return config_.out_dir / "measurements.jsonl"; }

 private:
  struct Ingest {
    CaptureRecord record;
    std::vector<MeasurementRow> rows;
    dcs::IntegrityStats integrity;
  };
  struct Handler {
    std::thread thread;
    std::atomic<bool> done{false};
  };

  void accept_loop();
  void handle(int fd, std::uint64_t conn_id, Handler* self);
  void writer_loop();
  void push(Ingest item);

  ServerConfig config_;
  int listen_fd_ = -1;
  std::uint16_t bound_port_ = 0;
  std::atomic<bool> stopping_{false};
  std::atomic<std::size_t> active_{0};
  std::atomic<std::uint64_t> next_conn_id_{1};
  std::thread acceptor_;
  std::thread writer_;
  std::mutex handlers_mu_;
  std::list<Handler> handlers_;

  mutable std::mutex queue_mu_;
  std::condition_variable queue_cv_;
  std::deque<Ingest> queue_;
  bool writer_exit_ = false;

  std::ofstream capture_out_;
  std::ofstream rows_out_;
  std::set<std::pair<std::uint16_t, std::uint32_t>> seen_;
  ServerStats stats_;
  bool started_ = false;
};

struct EmulatorConfig {
  std::string host = "127.0.0.1";
  std::uint16_t port = 4712;
  std::size_t devices = 1;
  std::uint16_t first_device_id = 1;
  double duration_s = 10.0;
  int connect_attempts = 5;  // consecutive failures before a device goes offline
  double retry_initial_ms = 500.0;
  double retry_max_ms = 8000.0;
  double connect_timeout_ms = 2000.0;
  fdr::SignalModel signal;
  std::uint64_t seed = 1;
};

struct EmulatorDeviceReport {
  std::uint16_t device_id = 0;
  std::uint64_t frames_generated = 0;
  std::uint64_t frames_sent = 0;
  std::uint64_t frames_dropped = 0;
  std::uint64_t connections = 0;
  bool offline = false;
};

struct EmulatorReport {
  std::vector<EmulatorDeviceReport> devices;
  bool any_offline() const;
  std::uint64_t frames_generated() const;
};

/// Runs N FDR clients, one thread each, streaming 55-byte frames on the UTC
/// 100 ms grid until `duration_s` elapses or `stop` becomes true.
EmulatorReport run_emulators(const EmulatorConfig& config, const std::atomic<bool>* stop = nullptr);

/// Current UTC time in microseconds.
std::int64_t utc_now_us();

}  // namespace wams::live
