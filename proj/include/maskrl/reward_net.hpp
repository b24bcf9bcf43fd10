#pragma once

#include "maskrl/vocab.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace maskrl::reward_net {

// Wire protocol: one JSON object per line over plain TCP.
//   request:  {"id": u64, "task": str, "prompt": [tokens], "response": [tokens]}
//   response: {"id": u64, "reward": float} or {"id": u64, "error": str}
struct RewardServiceError : std::runtime_error {
  enum class Kind { Connect, Timeout, Malformed, Remote };
  Kind kind;
  RewardServiceError(Kind k, const std::string& what)
      : std::runtime_error(what), kind(k) {}
};

// Client multiplexing concurrent requests over one connection. Writes are
// serialized, responses are matched back to callers by id, so any number
// of rollout workers can share one instance. A timed-out request is
// retried twice with a fresh id before the error surfaces; the caller is
// expected to skip the group, never to substitute a zero reward.
class RewardClient {
 public:
  RewardClient(const std::string& host, int port, int timeout_ms = 10000);
  ~RewardClient();

  RewardClient(const RewardClient&) = delete;
  RewardClient& operator=(const RewardClient&) = delete;

  double evaluate(const std::string& task, const Sequence& prompt,
                  const Sequence& response);

 private:
  struct Pending {
    bool done = false;
    bool has_reward = false;
    double reward = 0.0;
    std::string error;
  };

  void reader_loop();
  void fail_all(const std::string& reason);

  int fd_ = -1;
  int timeout_ms_;
  std::thread reader_;
  std::mutex write_mu_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::map<std::uint64_t, Pending> pending_;
  std::atomic<std::uint64_t> next_id_{1};
  bool closed_ = false;
  std::string close_reason_;
};

// Reference server: scores "modsum" with the correctness reward and
// "interval" with the interval IoU, deriving the ground truth from the
// prompt tokens. Exists for loopback tests and as the template for
// external reward services.
class RewardServer {
 public:
  // port 0 binds an ephemeral port; port() reports the actual one.
  RewardServer(const Vocabulary& vocab, int port);
  ~RewardServer();

  int port() const { return port_; }
  void stop();

 private:
  void accept_loop();
  void serve_connection(int fd);

  Vocabulary vocab_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<bool> running_{false};
  std::thread accepter_;
  std::mutex conn_mu_;
  std::vector<std::thread> connections_;
};

}  // namespace maskrl::reward_net
