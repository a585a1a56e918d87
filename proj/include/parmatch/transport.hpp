#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "parmatch/data_service.hpp"
#include "parmatch/engine.hpp"
#include "parmatch/messages.hpp"

namespace parmatch {

// Wire framing for multi-process mode: each message is a 4-byte big-endian
// payload length followed by that many bytes of UTF-8 JSON.
void write_frame(int fd, const std::string& payload);
// Returns nullopt on clean EOF; throws TransportError on framing errors.
std::optional<std::string> read_frame(int fd);

int connect_to(const std::string& host, std::uint16_t port);
int listen_on(std::uint16_t port);  // port 0 picks an ephemeral port
std::uint16_t local_port(int fd);

// Accepts worker control connections for a coordinator: join, heartbeat,
// completion and failure frames become coordinator events; each connection
// is exposed to the coordinator as a WorkerEndpoint that frames outbound
// messages. A dropped connection surfaces as WorkerDisconnectedEvent.
class CoordinatorServer {
 public:
  CoordinatorServer(Mailbox<CoordinatorEvent>& events, std::uint16_t port);
  ~CoordinatorServer();

  std::uint16_t port() const { return port_; }
  void stop();

 private:
  void accept_loop();
  void connection_loop(int fd);

  Mailbox<CoordinatorEvent>& events_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  std::mutex threads_mutex_;
  std::vector<std::thread> connections_;
  std::vector<int> connection_fds_;
};

// Serves fetchPartition requests over one socket per worker.
class DataServiceServer {
 public:
  DataServiceServer(std::shared_ptr<DataStore> store, std::uint16_t port);
  ~DataServiceServer();

  std::uint16_t port() const { return port_; }
  void stop();

 private:
  void accept_loop();
  void connection_loop(int fd);

  std::shared_ptr<DataStore> store_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  std::mutex threads_mutex_;
  std::vector<std::thread> connections_;
  std::vector<int> connection_fds_;
};

// Fetches partitions from a remote data service over one persistent
// connection; requests are serialized.
class RemoteDataClient : public DataClient {
 public:
  RemoteDataClient(const std::string& host, std::uint16_t port);
  ~RemoteDataClient() override;
  PayloadPtr fetch(const std::string& partition_id) override;

 private:
  std::mutex mutex_;
  int fd_ = -1;
};

// Runs a match service that joins a remote coordinator and executes
// assigned tasks until told to stop or the connection drops. Returns 0 on
// clean shutdown.
int run_remote_worker(const WorkerDescriptor& descriptor,
                      const std::string& coordinator_host,
                      std::uint16_t coordinator_port,
                      const std::string& data_host, std::uint16_t data_port);

}  // namespace parmatch
