#include "pop/mock_backend.hpp"

#include <algorithm>
#include <thread>

namespace pop {

void MockBackend::script(std::string matcher, std::vector<Reply> replies,
                         bool repeat_last) {
  if (replies.empty())
    throw std::invalid_argument("mock script entry needs at least one reply");
  std::lock_guard<std::mutex> lock(mutex_);
  Entry entry;
  entry.matcher = std::move(matcher);
  entry.replies.assign(replies.begin(), replies.end());
  entry.repeat_last = repeat_last;
  entries_.push_back(std::move(entry));
}

void MockBackend::script_always(std::string matcher, std::string text) {
  script(std::move(matcher), {Reply::ok(std::move(text))}, true);
}

void MockBackend::set_latency(std::chrono::milliseconds latency) {
  std::lock_guard<std::mutex> lock(mutex_);
  latency_ = latency;
}

ChatResponse MockBackend::chat(const RoleEndpoint& endpoint,
                               const ChatRequest& request) {
  Reply reply;
  std::chrono::milliseconds hold{0};
  {
    std::lock_guard<std::mutex> lock(mutex_);
    recorded_.push_back({endpoint.role, request.system, request.user,
                         request.temperature, request.seed});
    in_flight_ += 1;
    peak_ = std::max(peak_, in_flight_);
    hold = latency_;

    std::string joined = request.system + "\n" + request.user;
    Entry* hit = nullptr;
    for (Entry& entry : entries_) {
      if (joined.find(entry.matcher) != std::string::npos) {
        hit = &entry;
        break;
      }
    }
    if (!hit || hit->replies.empty()) {
      in_flight_ -= 1;
      std::string head = request.user.substr(0, 160);
      throw UnscriptedRequestError(
          (hit ? "mock script exhausted for request: " : "unscripted request: ") +
          head);
    }
    reply = hit->replies.front();
    if (hit->replies.size() > 1 || !hit->repeat_last) hit->replies.pop_front();
  }

  if (hold.count() > 0) std::this_thread::sleep_for(hold);
  {
    std::lock_guard<std::mutex> lock(mutex_);
    in_flight_ -= 1;
  }

  if (reply.fail_transient)
    throw TransportError("mock transient failure", /*transient=*/true, 503);
  if (reply.fail_terminal)
    throw TransportError("mock terminal failure", /*transient=*/false, 400);

  ChatResponse response;
  response.text = reply.text;
  response.finish_reason = reply.finish_reason;
  long chars =
      static_cast<long>(request.system.size() + request.user.size());
  response.prompt_tokens =
      reply.prompt_tokens >= 0 ? reply.prompt_tokens : (chars + 3) / 4;
  response.completion_tokens =
      reply.completion_tokens >= 0
          ? reply.completion_tokens
          : static_cast<long>((reply.text.size() + 3) / 4);
  response.latency = hold;
  return response;
}

std::vector<MockBackend::RecordedRequest> MockBackend::requests() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return recorded_;
}

std::size_t MockBackend::call_count() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return recorded_.size();
}

int MockBackend::peak_concurrency() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return peak_;
}

}  // namespace pop
