#include "maskrl/reward_net.hpp"

#include "maskrl/rewards.hpp"

#include <json.hpp>

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstring>

namespace maskrl::reward_net {

namespace {

using Kind = RewardServiceError::Kind;

void write_line(int fd, const std::string& line) {
  std::string buf = line + "\n";
  std::size_t off = 0;
  while (off < buf.size()) {
    const ssize_t n = ::send(fd, buf.data() + off, buf.size() - off, 0);
    if (n <= 0) throw RewardServiceError(Kind::Connect, "send failed");
    off += static_cast<std::size_t>(n);
  }
}

}  // namespace

RewardClient::RewardClient(const std::string& host, int port, int timeout_ms)
    : timeout_ms_(timeout_ms) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw RewardServiceError(Kind::Connect, "socket() failed");

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    hostent* he = ::gethostbyname(host.c_str());
    if (he == nullptr || he->h_addr_list[0] == nullptr) {
      ::close(fd_);
      throw RewardServiceError(Kind::Connect, "cannot resolve " + host);
    }
    std::memcpy(&addr.sin_addr, he->h_addr_list[0], sizeof(in_addr));
  }
  if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw RewardServiceError(Kind::Connect,
                             "connect to " + host + ":" +
                                 std::to_string(port) + " refused");
  }
  int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  reader_ = std::thread([this] { reader_loop(); });
}

RewardClient::~RewardClient() {
  {
    std::lock_guard<std::mutex> lock(mu_);
    closed_ = true;
  }
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
  if (reader_.joinable()) reader_.join();
  if (fd_ >= 0) ::close(fd_);
}

void RewardClient::fail_all(const std::string& reason) {
  std::lock_guard<std::mutex> lock(mu_);
  closed_ = true;
  close_reason_ = reason;
  for (auto& [id, slot] : pending_) {
    slot.done = true;
    slot.error = reason;
  }
  cv_.notify_all();
}

void RewardClient::reader_loop() {
  std::string buffer;
  char chunk[4096];
  for (;;) {
    const ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
    if (n <= 0) {
      fail_all("connection closed");
      return;
    }
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t pos;
    while ((pos = buffer.find('\n')) != std::string::npos) {
      const std::string line = buffer.substr(0, pos);
      buffer.erase(0, pos + 1);
      if (line.empty()) continue;

      nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
      std::lock_guard<std::mutex> lock(mu_);
      if (j.is_discarded() || !j.contains("id")) {
        // Unparseable frame: every waiter sees a malformed-protocol error.
        for (auto& [id, slot] : pending_) {
          slot.done = true;
          slot.error = "malformed response record";
        }
        cv_.notify_all();
        continue;
      }
      const auto id = j["id"].get<std::uint64_t>();
      auto it = pending_.find(id);
      if (it == pending_.end()) continue;  // stale id from a retried request
      if (j.contains("reward") && j["reward"].is_number()) {
        it->second.has_reward = true;
        it->second.reward = j["reward"].get<double>();
      } else if (j.contains("error")) {
        it->second.error = j["error"].get<std::string>();
      } else {
        it->second.error = "malformed response record";
      }
      it->second.done = true;
      cv_.notify_all();
    }
  }
}

double RewardClient::evaluate(const std::string& task, const Sequence& prompt,
                              const Sequence& response) {
  for (int attempt = 0; attempt < 3; ++attempt) {
    const std::uint64_t id = next_id_.fetch_add(1);
    {
      std::lock_guard<std::mutex> lock(mu_);
      if (closed_)
        throw RewardServiceError(Kind::Connect,
                                 "reward service unavailable: " +
                                     close_reason_);
      pending_[id] = Pending{};
    }

    nlohmann::json j;
    j["id"] = id;
    j["task"] = task;
    j["prompt"] = prompt;
    j["response"] = response;
    {
      std::lock_guard<std::mutex> lock(write_mu_);
      write_line(fd_, j.dump());
    }

    std::unique_lock<std::mutex> lock(mu_);
    const bool done = cv_.wait_for(
        lock, std::chrono::milliseconds(timeout_ms_),
        [&] { return pending_[id].done; });
    const Pending slot = pending_[id];
    pending_.erase(id);
    if (!done) continue;  // timeout: retry with a fresh id
    if (slot.has_reward) return slot.reward;
    if (slot.error == "malformed response record")
      throw RewardServiceError(Kind::Malformed, slot.error);
    if (closed_)
      throw RewardServiceError(Kind::Connect,
                               "reward service unavailable: " + slot.error);
    throw RewardServiceError(Kind::Remote, "reward service error: " +
                                               slot.error);
  }
  throw RewardServiceError(Kind::Timeout,
                           "reward request timed out after 2 retries");
}

RewardServer::RewardServer(const Vocabulary& vocab, int port) : vocab_(vocab) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw std::runtime_error("reward server: socket failed");
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) !=
      0)
    throw std::runtime_error("reward server: bind failed");
  if (::listen(listen_fd_, 16) != 0)
    throw std::runtime_error("reward server: listen failed");

  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);

  running_ = true;
  accepter_ = std::thread([this] { accept_loop(); });
}

RewardServer::~RewardServer() { stop(); }

void RewardServer::stop() {
  if (!running_.exchange(false)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  if (accepter_.joinable()) accepter_.join();
  std::lock_guard<std::mutex> lock(conn_mu_);
  for (auto& th : connections_)
    if (th.joinable()) th.join();
  connections_.clear();
}

void RewardServer::accept_loop() {
  while (running_) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (!running_) return;
      continue;
    }
    std::lock_guard<std::mutex> lock(conn_mu_);
    connections_.emplace_back([this, fd] { serve_connection(fd); });
  }
}

void RewardServer::serve_connection(int fd) {
  std::string buffer;
  char chunk[4096];
  while (running_) {
    const ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
    if (n <= 0) break;
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t pos;
    while ((pos = buffer.find('\n')) != std::string::npos) {
      const std::string line = buffer.substr(0, pos);
      buffer.erase(0, pos + 1);
      if (line.empty()) continue;

      nlohmann::json req = nlohmann::json::parse(line, nullptr, false);
      nlohmann::json resp;
      if (req.is_discarded() || !req.contains("id")) {
        resp["id"] = 0;
        resp["error"] = "malformed request";
      } else {
        resp["id"] = req["id"];
        try {
          const auto task = req.at("task").get<std::string>();
          const auto prompt = req.at("prompt").get<Sequence>();
          const auto response = req.at("response").get<Sequence>();
          if (task == "modsum") {
            // Prompt is d1 + d2 + d3; the target digit is their sum mod 10.
            if (prompt.size() != 5)
              throw std::runtime_error("bad modsum prompt");
            const int sum = vocab_.digit_value(prompt[0]) +
                            vocab_.digit_value(prompt[2]) +
                            vocab_.digit_value(prompt[4]);
            const Sequence target = {vocab_.digit(sum % 10)};
            resp["reward"] =
                rewards::correctness_reward(vocab_, response, target);
          } else if (task == "interval") {
            // Prompt is (c, w); ground truth interval is [c, c+w].
            if (prompt.size() != 2)
              throw std::runtime_error("bad interval prompt");
            const int c = vocab_.coord_value(prompt[0]);
            const int w = vocab_.coord_value(prompt[1]);
            resp["reward"] = rewards::iou_reward(vocab_, response,
                                                 {c, c + w});
          } else {
            resp["error"] = "unknown task: " + task;
          }
        } catch (const std::exception& e) {
          resp["error"] = e.what();
        }
      }
      try {
        write_line(fd, resp.dump());
      } catch (const RewardServiceError&) {
        ::close(fd);
        return;
      }
    }
  }
  ::close(fd);
}

}  // namespace maskrl::reward_net
