#include "pop/gateway.hpp"

#include <atomic>
#include <cmath>
#include <thread>

namespace pop {

std::string to_string(Role role) {
  switch (role) {
    case Role::kProposer: return "proposer";
    case Role::kSolver: return "solver";
    case Role::kVerifier: return "verifier";
    case Role::kGoldVerifier: return "gold_verifier";
    case Role::kCategorizer: return "categorizer";
  }
  return "unknown";
}

std::optional<Role> role_from_string(std::string_view name) {
  if (name == "proposer") return Role::kProposer;
  if (name == "solver") return Role::kSolver;
  if (name == "verifier") return Role::kVerifier;
  if (name == "gold_verifier") return Role::kGoldVerifier;
  if (name == "categorizer") return Role::kCategorizer;
  return std::nullopt;
}

std::string to_string(FinishReason reason) {
  switch (reason) {
    case FinishReason::kStop: return "stop";
    case FinishReason::kLength: return "length";
    case FinishReason::kError: return "error";
  }
  return "unknown";
}

void UsageStats::record_call(Role role, const ChatResponse& response) {
  std::lock_guard<std::mutex> lock(mutex_);
  RoleUsage& u = usage_[role];
  ++u.calls;
  u.prompt_tokens += response.prompt_tokens;
  u.completion_tokens += response.completion_tokens;
}

void UsageStats::record_retry(Role role) {
  std::lock_guard<std::mutex> lock(mutex_);
  ++usage_[role].retries;
}

void UsageStats::record_failure(Role role) {
  std::lock_guard<std::mutex> lock(mutex_);
  ++usage_[role].failures;
}

std::map<Role, RoleUsage> UsageStats::snapshot() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return usage_;
}

Gateway::Gateway(std::shared_ptr<Backend> backend, RetryPolicy policy,
                 SleepFn sleep)
    : backend_(std::move(backend)), policy_(policy), sleep_(std::move(sleep)) {
  if (!sleep_) {
    sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
}

std::chrono::milliseconds Gateway::backoff_delay(int failures) {
  double base = static_cast<double>(policy_.base_delay.count()) *
                std::pow(policy_.factor, failures - 1);
  double u;
  {
    // splitmix64 step; jitter only affects sleep timing, not results
    std::lock_guard<std::mutex> lock(jitter_mutex_);
    jitter_state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = jitter_state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    z ^= z >> 31;
    u = static_cast<double>(z >> 11) / 9007199254740992.0;  // [0,1)
  }
  double jitter = 1.0 + policy_.jitter * (2.0 * u - 1.0);
  return std::chrono::milliseconds(
      static_cast<long long>(std::max(0.0, base * jitter)));
}

ChatResponse Gateway::complete(const RoleEndpoint& endpoint,
                               const ChatRequest& request, int* retries_out) {
  int failures = 0;
  while (true) {
    try {
      ChatResponse response = backend_->chat(endpoint, request);
      usage_.record_call(endpoint.role, response);
      if (retries_out) *retries_out = failures;
      return response;
    } catch (const TransportError& e) {
      if (!e.transient || failures >= policy_.max_retries) {
        usage_.record_failure(endpoint.role);
        throw;
      }
      ++failures;
      usage_.record_retry(endpoint.role);
      sleep_(backoff_delay(failures));
    } catch (...) {
      usage_.record_failure(endpoint.role);
      throw;
    }
  }
}

std::vector<Gateway::BatchItem> Gateway::complete_batch(
    const RoleEndpoint& endpoint, const std::vector<ChatRequest>& requests,
    int parallelism) {
  if (parallelism < 1)
    throw std::invalid_argument("complete_batch: parallelism must be >= 1");

  std::vector<BatchItem> results(requests.size());
  for (std::size_t i = 0; i < results.size(); ++i) results[i].index = i;
  if (requests.empty()) return results;

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= requests.size()) break;
      try {
        results[i].response = complete(endpoint, requests[i]);
      } catch (const std::exception& e) {
        results[i].error = e.what();
      }
    }
  };

  std::size_t n_threads =
      std::min<std::size_t>(static_cast<std::size_t>(parallelism),
                            requests.size());
  if (n_threads <= 1) {
    worker();
    return results;
  }
  std::vector<std::thread> threads;
  threads.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  return results;
}

}  // namespace pop
