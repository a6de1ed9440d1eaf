#pragma once

#include <chrono>
#include <cstddef>
#include <deque>
#include <mutex>
#include <string>
#include <vector>

#include "pop/gateway.hpp"

namespace pop {

/// Deterministic replay backend. Script entries map a substring matcher to
/// an ordered queue of replies; every request is recorded verbatim for
/// assertions (call counting, prompt snapshots, concurrency probes).
class MockBackend : public Backend {
 public:
  struct Reply {
    std::string text;
    FinishReason finish_reason = FinishReason::kStop;
    // Failure injection: exactly one of these may be set.
    bool fail_transient = false;
    bool fail_terminal = false;
    long prompt_tokens = -1;  // -1: estimated as ceil(chars/4)
    long completion_tokens = -1;

    static Reply ok(std::string text) {
      Reply r;
      r.text = std::move(text);
      return r;
    }
    static Reply transient_failure() {
      Reply r;
      r.fail_transient = true;
      return r;
    }
    static Reply terminal_failure() {
      Reply r;
      r.fail_terminal = true;
      return r;
    }
    static Reply truncated(std::string text) {
      Reply r;
      r.text = std::move(text);
      r.finish_reason = FinishReason::kLength;
      return r;
    }
  };

  struct RecordedRequest {
    Role role;
    std::string system;
    std::string user;
    double temperature = 0.0;
    std::optional<std::uint64_t> seed;
  };

  /// Appends a script entry. Matchers are tested in insertion order against
  /// system+user; first match wins. With repeat_last=true the final reply
  /// keeps replaying once the queue empties.
  void script(std::string matcher, std::vector<Reply> replies,
              bool repeat_last = false);

  /// Convenience: single always-repeating reply.
  void script_always(std::string matcher, std::string text);

  ChatResponse chat(const RoleEndpoint& endpoint,
                    const ChatRequest& request) override;

  std::vector<RecordedRequest> requests() const;
  std::size_t call_count() const;
  int peak_concurrency() const;

  /// Holds each call open for `latency` so that overlap becomes observable
  /// by the concurrency probe.
  void set_latency(std::chrono::milliseconds latency);

 private:
  struct Entry {
    std::string matcher;
    std::deque<Reply> replies;
    bool repeat_last = false;
  };

  mutable std::mutex mutex_;
  std::vector<Entry> entries_;
  std::vector<RecordedRequest> recorded_;
  int in_flight_ = 0;
  int peak_ = 0;
  std::chrono::milliseconds latency_{0};
};

}  // namespace pop
