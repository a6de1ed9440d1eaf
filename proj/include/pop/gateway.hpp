#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pop {

enum class Role { kProposer, kSolver, kVerifier, kGoldVerifier, kCategorizer };

std::string to_string(Role role);
std::optional<Role> role_from_string(std::string_view name);

/// One chat-completion endpoint bound to a pipeline role.
struct RoleEndpoint {
  Role role = Role::kProposer;
  std::string base_url;  // e.g. "http://localhost:8000"; unused by mocks
  std::string model_name;
  std::string api_key_env;  // env var holding the bearer token, may be empty
  int max_context = 32768;
};

struct ChatRequest {
  std::string system;
  std::string user;
  double temperature = 1.0;
  double top_p = 1.0;
  int max_new_tokens = 1024;
  std::optional<std::uint64_t> seed;
};

enum class FinishReason { kStop, kLength, kError };

std::string to_string(FinishReason reason);

struct ChatResponse {
  std::string text;
  FinishReason finish_reason = FinishReason::kStop;
  long prompt_tokens = 0;
  long completion_tokens = 0;
  std::chrono::milliseconds latency{0};
};

/// Transport-level failure. `transient` failures (429/5xx/timeout) are
/// retried by the gateway; the rest surface immediately.
class TransportError : public std::runtime_error {
 public:
  TransportError(const std::string& what, bool transient, int status = 0)
      : std::runtime_error(what), transient(transient), status(status) {}
  bool transient;
  int status;
};

class AuthError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Response body did not conform to the chat-completion schema.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by replay backends when a request matches no script entry.
class UnscriptedRequestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A single completion attempt against some backend.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual ChatResponse chat(const RoleEndpoint& endpoint,
                            const ChatRequest& request) = 0;
};

struct RetryPolicy {
  int max_retries = 5;
  std::chrono::milliseconds base_delay{1000};
  double factor = 2.0;
  double jitter = 0.2;  // +-20%
};

struct RoleUsage {
  long calls = 0;
  long prompt_tokens = 0;
  long completion_tokens = 0;
  long retries = 0;
  long failures = 0;
};

/// Per-role call/token/retry counters; all counts monotone within a run.
class UsageStats {
 public:
  void record_call(Role role, const ChatResponse& response);
  void record_retry(Role role);
  void record_failure(Role role);
  std::map<Role, RoleUsage> snapshot() const;

 private:
  mutable std::mutex mutex_;
  std::map<Role, RoleUsage> usage_;
};

/// Uniform client over a Backend: retries with exponential backoff on
/// transient failures, bounded-parallelism batching, usage accounting.
/// Safe for concurrent submission from multiple threads.
class Gateway {
 public:
  using SleepFn = std::function<void(std::chrono::milliseconds)>;

  explicit Gateway(std::shared_ptr<Backend> backend, RetryPolicy policy = {},
                   SleepFn sleep = {});

  /// One completion with retries. On success *retries_out (when given)
  /// holds the number of failed attempts that preceded it.
  ChatResponse complete(const RoleEndpoint& endpoint,
                        const ChatRequest& request,
                        int* retries_out = nullptr);

  struct BatchItem {
    std::size_t index = 0;
    std::optional<ChatResponse> response;
    std::string error;  // non-empty iff response is absent
    bool ok() const { return response.has_value(); }
  };

  /// Completes every request with at most `parallelism` in flight; results
  /// are keyed by input index and one failure never aborts the others.
  std::vector<BatchItem> complete_batch(const RoleEndpoint& endpoint,
                                        const std::vector<ChatRequest>& requests,
                                        int parallelism);

  const UsageStats& usage() const { return usage_; }
  Backend& backend() { return *backend_; }

 private:
  std::chrono::milliseconds backoff_delay(int failures);

  std::shared_ptr<Backend> backend_;
  RetryPolicy policy_;
  SleepFn sleep_;
  UsageStats usage_;
  std::mutex jitter_mutex_;
  std::uint64_t jitter_state_ = 0x9e3779b97f4a7c15ull;
};

}  // namespace pop
