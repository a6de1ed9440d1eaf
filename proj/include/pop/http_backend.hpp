#pragma once

#include <chrono>
#include <string>

#include "pop/gateway.hpp"

namespace pop {

struct HttpOptions {
  std::chrono::seconds connect_timeout{15};
  std::chrono::seconds read_timeout{600};  // long-form generations are slow
};

/// OpenAI-compatible backend: POST {base_url}/v1/chat/completions with a
/// [system, user] message pair. The bearer token is read from the
/// endpoint's api_key_env at call time.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(HttpOptions options = {}) : options_(options) {}

  ChatResponse chat(const RoleEndpoint& endpoint,
                    const ChatRequest& request) override;

 private:
  HttpOptions options_;
};

/// Request body for one chat completion, exposed for tests and tracing.
std::string build_chat_completion_body(const RoleEndpoint& endpoint,
                                       const ChatRequest& request);

/// Parses a chat-completion response body; throws SchemaError when the
/// body does not carry choices[0].message.content.
ChatResponse parse_chat_completion_body(const std::string& body);

}  // namespace pop
