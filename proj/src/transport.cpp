#include "parmatch/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <json.hpp>

#include "parmatch/error.hpp"
#include "parmatch/lru_cache.hpp"
#include "parmatch/strategy.hpp"

namespace parmatch {
namespace {

using nlohmann::json;

constexpr std::uint32_t kMaxFrameBytes = 256u * 1024u * 1024u;

void write_all(int fd, const void* data, std::size_t size) {
  const char* p = static_cast<const char*>(data);
  while (size > 0) {
    ssize_t n = ::send(fd, p, size, MSG_NOSIGNAL);
    if (n <= 0) throw TransportError("socket write failed");
    p += n;
    size -= static_cast<std::size_t>(n);
  }
}

bool read_all(int fd, void* data, std::size_t size) {
  char* p = static_cast<char*>(data);
  std::size_t got = 0;
  while (got < size) {
    ssize_t n = ::recv(fd, p + got, size - got, 0);
    if (n == 0) {
      if (got == 0) return false;  // clean EOF between frames
      throw TransportError("truncated frame");
    }
    if (n < 0) throw TransportError("socket read failed");
    got += static_cast<std::size_t>(n);
  }
  return true;
}

void close_fd(int fd) {
  if (fd >= 0) {
    ::shutdown(fd, SHUT_RDWR);
    ::close(fd);
  }
}

json entity_to_json(const Entity& e) {
  return {{"id", e.id}, {"source", e.source_id}, {"attributes", e.attributes}};
}

Entity entity_from_json(const json& j) {
  Entity e;
  e.id = j.at("id").get<std::string>();
  e.source_id = j.at("source").get<std::string>();
  e.attributes =
      j.at("attributes").get<std::map<std::string, std::string>>();
  return e;
}

}  // namespace

void write_frame(int fd, const std::string& payload) {
  std::uint32_t length = htonl(static_cast<std::uint32_t>(payload.size()));
  char header[4];
  std::memcpy(header, &length, 4);
  write_all(fd, header, 4);
  write_all(fd, payload.data(), payload.size());
}

std::optional<std::string> read_frame(int fd) {
  char header[4];
  if (!read_all(fd, header, 4)) return std::nullopt;
  std::uint32_t length = 0;
  std::memcpy(&length, header, 4);
  length = ntohl(length);
  if (length > kMaxFrameBytes) throw TransportError("oversized frame");
  std::string payload(length, '\0');
  if (length > 0 && !read_all(fd, payload.data(), length)) {
    throw TransportError("truncated frame");
  }
  return payload;
}

int connect_to(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* result = nullptr;
  std::string service = std::to_string(port);
  if (::getaddrinfo(host.c_str(), service.c_str(), &hints, &result) != 0) {
    throw TransportError("cannot resolve " + host);
  }
  int fd = -1;
  for (addrinfo* rp = result; rp != nullptr; rp = rp->ai_next) {
    fd = ::socket(rp->ai_family, rp->ai_socktype, rp->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, rp->ai_addr, rp->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(result);
  if (fd < 0) {
    throw TransportError("cannot connect to " + host + ":" + service);
  }
  int nodelay = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &nodelay, sizeof(nodelay));
  return fd;
}

int listen_on(std::uint16_t port) {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw TransportError("cannot create socket");
  int reuse = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &reuse, sizeof(reuse));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_ANY);
  addr.sin_port = htons(port);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
      ::listen(fd, 16) != 0) {
    ::close(fd);
    throw TransportError("cannot listen on port " + std::to_string(port));
  }
  return fd;
}

std::uint16_t local_port(int fd) {
  sockaddr_in addr{};
  socklen_t len = sizeof(addr);
  if (::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) != 0) {
    throw TransportError("getsockname failed");
  }
  return ntohs(addr.sin_port);
}

namespace {

// Endpoint writing framed WorkerMessages to a connected worker. Write
// failures are swallowed; a dead connection is reported by the reader.
class SocketEndpoint : public WorkerEndpoint {
 public:
  explicit SocketEndpoint(int fd) : fd_(fd) {}
  void send(const WorkerMessage& message) override {
    std::lock_guard lock(mutex_);
    try {
      write_frame(fd_, encode_worker_message(message));
    } catch (const TransportError&) {
    }
  }

 private:
  int fd_;
  std::mutex mutex_;
};

}  // namespace

CoordinatorServer::CoordinatorServer(Mailbox<CoordinatorEvent>& events,
                                     std::uint16_t port)
    : events_(events) {
  listen_fd_ = listen_on(port);
  port_ = local_port(listen_fd_);
  acceptor_ = std::thread([this] { accept_loop(); });
}

CoordinatorServer::~CoordinatorServer() { stop(); }

void CoordinatorServer::stop() {
  if (stopping_.exchange(true)) return;
  close_fd(listen_fd_);
  {
    std::lock_guard lock(threads_mutex_);
    for (int fd : connection_fds_) close_fd(fd);
  }
  if (acceptor_.joinable()) acceptor_.join();
  std::lock_guard lock(threads_mutex_);
  for (auto& t : connections_) {
    if (t.joinable()) t.join();
  }
  connections_.clear();
}

void CoordinatorServer::accept_loop() {
  while (!stopping_.load()) {
    int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) break;
    std::lock_guard lock(threads_mutex_);
    connection_fds_.push_back(fd);
    connections_.emplace_back([this, fd] { connection_loop(fd); });
  }
}

void CoordinatorServer::connection_loop(int fd) {
  std::string worker_id;
  try {
    // First frame must be a join.
    auto first = read_frame(fd);
    if (!first) return;
    auto message = decode_coordinator_message(*first);
    auto* join = std::get_if<JoinMessage>(&message);
    if (join == nullptr) throw TransportError("expected join frame");
    worker_id = join->descriptor.worker_id;
    events_.push(WorkerJoinEvent{join->descriptor,
                                 std::make_shared<SocketEndpoint>(fd)});
    while (auto frame = read_frame(fd)) {
      auto msg = decode_coordinator_message(*frame);
      if (auto* leave = std::get_if<LeaveMessage>(&msg)) {
        events_.push(*leave);
      } else if (auto* hb = std::get_if<HeartbeatMessage>(&msg)) {
        events_.push(*hb);
      } else if (auto* done = std::get_if<CompletionMessage>(&msg)) {
        events_.push(std::move(*done));
      } else if (auto* failed = std::get_if<TaskFailedMessage>(&msg)) {
        events_.push(std::move(*failed));
      }
    }
  } catch (const TransportError&) {
  }
  if (!worker_id.empty() && !stopping_.load()) {
    events_.push(WorkerDisconnectedEvent{worker_id, "connection-lost"});
  }
}

// --- data service ---

DataServiceServer::DataServiceServer(std::shared_ptr<DataStore> store,
                                     std::uint16_t port)
    : store_(std::move(store)) {
  listen_fd_ = listen_on(port);
  port_ = local_port(listen_fd_);
  acceptor_ = std::thread([this] { accept_loop(); });
}

DataServiceServer::~DataServiceServer() { stop(); }

void DataServiceServer::stop() {
  if (stopping_.exchange(true)) return;
  close_fd(listen_fd_);
  {
    std::lock_guard lock(threads_mutex_);
    for (int fd : connection_fds_) close_fd(fd);
  }
  if (acceptor_.joinable()) acceptor_.join();
  std::lock_guard lock(threads_mutex_);
  for (auto& t : connections_) {
    if (t.joinable()) t.join();
  }
  connections_.clear();
}

void DataServiceServer::accept_loop() {
  while (!stopping_.load()) {
    int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) break;
    std::lock_guard lock(threads_mutex_);
    connection_fds_.push_back(fd);
    connections_.emplace_back([this, fd] { connection_loop(fd); });
  }
}

void DataServiceServer::connection_loop(int fd) {
  try {
    while (auto frame = read_frame(fd)) {
      json request = json::parse(*frame, nullptr, false);
      if (request.is_discarded() ||
          request.value("type", "") != "fetchPartition") {
        throw TransportError("bad fetch request");
      }
      std::string partition_id = request.at("partitionId").get<std::string>();
      json response;
      try {
        PayloadPtr payload = store_->fetch_partition(partition_id);
        json entities = json::array();
        for (const auto& e : payload->entities) {
          entities.push_back(entity_to_json(e));
        }
        response = {{"type", "partitionPayload"},
                    {"ok", true},
                    {"partitionId", partition_id},
                    {"entities", std::move(entities)}};
      } catch (const NotFoundError& e) {
        response = {{"type", "partitionPayload"},
                    {"ok", false},
                    {"error", e.what()}};
      }
      write_frame(fd, response.dump());
    }
  } catch (const TransportError&) {
  }
}

// --- remote data client ---

RemoteDataClient::RemoteDataClient(const std::string& host,
                                   std::uint16_t port) {
  fd_ = connect_to(host, port);
}

RemoteDataClient::~RemoteDataClient() { close_fd(fd_); }

PayloadPtr RemoteDataClient::fetch(const std::string& partition_id) {
  std::lock_guard lock(mutex_);
  json request = {{"type", "fetchPartition"}, {"partitionId", partition_id}};
  write_frame(fd_, request.dump());
  auto frame = read_frame(fd_);
  if (!frame) throw TransportError("data service closed the connection");
  json response = json::parse(*frame, nullptr, false);
  if (response.is_discarded() || !response.contains("ok")) {
    throw TransportError("bad fetch response");
  }
  if (!response.at("ok").get<bool>()) {
    throw NotFoundError(response.value("error", "partition not found"));
  }
  auto payload = std::make_shared<PartitionPayload>();
  payload->partition_id = response.at("partitionId").get<std::string>();
  for (const auto& e : response.at("entities")) {
    payload->entities.push_back(entity_from_json(e));
  }
  return payload;
}

// --- remote worker ---

namespace {

struct RemoteWorkerState {
  WorkerDescriptor descriptor;
  int control_fd = -1;
  std::mutex write_mutex;
  std::shared_ptr<RemoteDataClient> data;
  PartitionCache cache{0};
  StrategyTable strategies;
  std::mutex strategies_mutex;
  Mailbox<AssignTaskMessage> assignments;
  std::atomic<bool> stopping{false};
  std::atomic<std::uint32_t> heartbeat_interval_ms{1000};

  explicit RemoteWorkerState(const WorkerDescriptor& d)
      : descriptor(d), cache(d.cache_capacity) {}

  void send(const CoordinatorWireMessage& message) {
    std::lock_guard lock(write_mutex);
    write_frame(control_fd, encode_coordinator_message(message));
  }
};

void remote_execute(RemoteWorkerState& state, const AssignTaskMessage& assign) {
  try {
    std::uint64_t hits = 0;
    std::uint64_t fetches = 0;
    auto acquire = [&](const std::string& id) {
      if (PayloadPtr cached = state.cache.get(id)) {
        ++hits;
        return cached;
      }
      PayloadPtr payload = state.data->fetch(id);
      ++fetches;
      state.cache.put(id, payload);
      return payload;
    };
    PayloadPtr a = acquire(assign.partition_a);
    PayloadPtr b = assign.self_task ? a : acquire(assign.partition_b);
    MatchStrategy strategy;
    {
      std::lock_guard lock(state.strategies_mutex);
      auto it = state.strategies.find(assign.strategy_id);
      if (it == state.strategies.end()) {
        throw NotFoundError("unknown strategy " + assign.strategy_id);
      }
      strategy = it->second;
    }
    MatchResult result =
        evaluate_partition_pair(strategy, assign.task_id, a->entities,
                                b->entities, assign.self_task);
    CompletionMessage done;
    done.worker_id = state.descriptor.worker_id;
    done.task_id = assign.task_id;
    done.result = std::move(result);
    done.cached_partition_ids = state.cache.resident_ids();
    done.cache_hits = hits;
    done.fetches = fetches;
    state.send(done);
  } catch (const std::exception& e) {
    try {
      state.send(TaskFailedMessage{state.descriptor.worker_id, assign.task_id,
                                   e.what()});
    } catch (const TransportError&) {
    }
  }
}

}  // namespace

int run_remote_worker(const WorkerDescriptor& descriptor,
                      const std::string& coordinator_host,
                      std::uint16_t coordinator_port,
                      const std::string& data_host, std::uint16_t data_port) {
  RemoteWorkerState state(descriptor);
  state.control_fd = connect_to(coordinator_host, coordinator_port);
  state.data = std::make_shared<RemoteDataClient>(data_host, data_port);
  state.send(JoinMessage{descriptor});

  std::vector<std::thread> threads;
  for (std::uint32_t i = 0; i < descriptor.thread_count; ++i) {
    threads.emplace_back([&state] {
      while (auto assign = state.assignments.pop()) {
        remote_execute(state, *assign);
      }
    });
  }
  threads.emplace_back([&state] {
    while (!state.stopping.load()) {
      std::this_thread::sleep_for(
          std::chrono::milliseconds(state.heartbeat_interval_ms.load()));
      if (state.stopping.load()) break;
      try {
        state.send(HeartbeatMessage{state.descriptor.worker_id});
      } catch (const TransportError&) {
        break;
      }
    }
  });

  int status = 0;
  try {
    while (auto frame = read_frame(state.control_fd)) {
      WorkerMessage message = decode_worker_message(*frame);
      if (const auto* setup = std::get_if<SetupMessage>(&message)) {
        std::lock_guard lock(state.strategies_mutex);
        for (const auto& s : setup->strategies) {
          state.strategies.emplace(s.id, s);
        }
        state.heartbeat_interval_ms.store(setup->heartbeat_interval_ms);
      } else if (const auto* assign = std::get_if<AssignTaskMessage>(&message)) {
        state.assignments.push(*assign);
      } else {
        break;  // stop
      }
    }
  } catch (const TransportError&) {
    status = 1;  // coordinator vanished mid-run
  }

  state.stopping.store(true);
  state.assignments.close();
  for (auto& t : threads) {
    if (t.joinable()) t.join();
  }
  close_fd(state.control_fd);
  return status;
}

}  // namespace parmatch
