#include "pop/http_backend.hpp"

#include <cstdlib>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace pop {

using json = nlohmann::json;

std::string build_chat_completion_body(const RoleEndpoint& endpoint,
                                       const ChatRequest& request) {
  json body;
  body["model"] = endpoint.model_name;
  body["messages"] = json::array({
      {{"role", "system"}, {"content", request.system}},
      {{"role", "user"}, {"content", request.user}},
  });
  body["temperature"] = request.temperature;
  body["top_p"] = request.top_p;
  body["max_tokens"] = request.max_new_tokens;
  if (request.seed) body["seed"] = *request.seed;
  return body.dump();
}

ChatResponse parse_chat_completion_body(const std::string& body) {
  json parsed = json::parse(body, nullptr, false);
  if (parsed.is_discarded())
    throw SchemaError("chat completion response is not valid JSON");
  if (!parsed.contains("choices") || !parsed["choices"].is_array() ||
      parsed["choices"].empty())
    throw SchemaError("chat completion response has no choices");
  const json& choice = parsed["choices"][0];
  if (!choice.contains("message") || !choice["message"].contains("content") ||
      !choice["message"]["content"].is_string())
    throw SchemaError("chat completion choice has no message content");

  ChatResponse response;
  response.text = choice["message"]["content"].get<std::string>();
  std::string reason = choice.value("finish_reason", "stop");
  if (reason == "stop") response.finish_reason = FinishReason::kStop;
  else if (reason == "length") response.finish_reason = FinishReason::kLength;
  else response.finish_reason = FinishReason::kError;
  if (parsed.contains("usage")) {
    response.prompt_tokens = parsed["usage"].value("prompt_tokens", 0L);
    response.completion_tokens = parsed["usage"].value("completion_tokens", 0L);
  }
  return response;
}

ChatResponse HttpBackend::chat(const RoleEndpoint& endpoint,
                               const ChatRequest& request) {
  if (endpoint.base_url.empty())
    throw TransportError("endpoint has no base_url", /*transient=*/false);

  httplib::Client client(endpoint.base_url);
  client.set_connection_timeout(options_.connect_timeout);
  client.set_read_timeout(options_.read_timeout);
  client.set_follow_location(true);

  httplib::Headers headers;
  if (!endpoint.api_key_env.empty()) {
    const char* key = std::getenv(endpoint.api_key_env.c_str());
    if (key && *key) headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  auto started = std::chrono::steady_clock::now();
  auto result = client.Post("/v1/chat/completions", headers,
                            build_chat_completion_body(endpoint, request),
                            "application/json");
  auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - started);

  if (!result) {
    // Connection failures and timeouts are worth retrying.
    throw TransportError("transport failure talking to " + endpoint.base_url +
                             ": " + httplib::to_string(result.error()),
                         /*transient=*/true);
  }
  int status = result->status;
  if (status == 401 || status == 403)
    throw AuthError("authentication failed against " + endpoint.base_url +
                    " (HTTP " + std::to_string(status) + ")");
  if (status == 429 || status >= 500)
    throw TransportError("HTTP " + std::to_string(status) + " from " +
                             endpoint.base_url,
                         /*transient=*/true, status);
  if (status < 200 || status >= 300)
    throw TransportError("HTTP " + std::to_string(status) + " from " +
                             endpoint.base_url,
                         /*transient=*/false, status);

  ChatResponse response = parse_chat_completion_body(result->body);
  response.latency = elapsed;
  return response;
}

}  // namespace pop
