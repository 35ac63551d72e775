#pragma once

/**
 * @file remote_backend.hpp
 * @brief HTTP backend speaking two provider wire formats: an OpenAI-style
 *        chat-completions dialect and an Anthropic-style messages dialect,
 *        both with base64-embedded images.
 *
 * Credentials come from the environment: SOC_OPENAI_API_KEY for the
 * chat-completions dialect, SOC_ANTHROPIC_API_KEY for the messages dialect.
 */

#include <cstdlib>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "soc/backend.hpp"
#include "soc/errors.hpp"

namespace soc {

namespace detail {

inline std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  static const char* alphabet =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  while (i + 2 < bytes.size()) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out.push_back(alphabet[(v >> 18) & 63]);
    out.push_back(alphabet[(v >> 12) & 63]);
    out.push_back(alphabet[(v >> 6) & 63]);
    out.push_back(alphabet[v & 63]);
    i += 3;
  }
  if (i + 1 == bytes.size()) {
    const std::uint32_t v = bytes[i] << 16;
    out.push_back(alphabet[(v >> 18) & 63]);
    out.push_back(alphabet[(v >> 12) & 63]);
    out += "==";
  } else if (i + 2 == bytes.size()) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out.push_back(alphabet[(v >> 18) & 63]);
    out.push_back(alphabet[(v >> 12) & 63]);
    out.push_back(alphabet[(v >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

inline void throw_for_status(int status, const std::string& body) {
  if (status == 401 || status == 403)
    throw AuthFailureError("auth-failure: HTTP " + std::to_string(status) +
                           " " + body.substr(0, 200));
  if (status == 429)
    throw RateLimitedError("rate-limited: HTTP 429 " + body.substr(0, 200));
  if (status == 413)
    throw OversizedPayloadError("oversized-payload: HTTP 413");
  if (status >= 400)
    throw TransportError("transport-failure: HTTP " + std::to_string(status) +
                         " " + body.substr(0, 200));
}

}  // namespace detail

inline const char* credential_env_var(WireDialect dialect) {
  return dialect == WireDialect::chat_completions ? "SOC_OPENAI_API_KEY"
                                                  : "SOC_ANTHROPIC_API_KEY";
}

class RemoteBackend : public ModelBackend {
 public:
  RemoteBackend() = default;

 protected:
  ModelResponse do_complete(const PromptPayload& payload,
                            const ModelConfig& config) override {
    const char* key = std::getenv(credential_env_var(config.dialect));
    if (!key || !*key)
      throw AuthFailureError(std::string("auth-failure: ") +
                             credential_env_var(config.dialect) + " not set");
    const auto start = std::chrono::steady_clock::now();
    ModelResponse r = config.dialect == WireDialect::chat_completions
                          ? complete_chat(payload, config, key)
                          : complete_messages(payload, config, key);
    r.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - start);
    return r;
  }

 private:
  ModelResponse complete_chat(const PromptPayload& payload,
                              const ModelConfig& config,
                              const std::string& api_key) {
    nlohmann::json content = nlohmann::json::array();
    for (const auto& img : payload.images) {
      content.push_back(
          {{"type", "image_url"},
           {"image_url",
            {{"url", "data:" + img.media_type + ";base64," +
                         detail::base64_encode(img.bytes)}}}});
    }
    content.push_back({{"type", "text"}, {"text", payload.user_text}});
    const nlohmann::json body = {
        {"model", config.model_name},
        {"temperature", config.temperature},
        {"max_tokens", config.max_output_tokens},
        {"messages",
         {{{"role", "system"}, {"content", payload.system_text}},
          {{"role", "user"}, {"content", content}}}},
    };
    httplib::Client client(config.endpoint);
    client.set_read_timeout(300, 0);
    httplib::Headers headers = {{"Authorization", "Bearer " + api_key}};
    auto res = client.Post("/v1/chat/completions", headers, body.dump(),
                           "application/json");
    if (!res) throw TransportError("transport-failure: no response from " +
                                   config.endpoint);
    detail::throw_for_status(res->status, res->body);
    try {
      const auto j = nlohmann::json::parse(res->body);
      ModelResponse r;
      r.text = j.at("choices").at(0).at("message").at("content")
                   .get<std::string>();
      if (j.contains("usage")) {
        r.input_tokens = j["usage"].value("prompt_tokens", std::int64_t{0});
        r.output_tokens = j["usage"].value("completion_tokens", std::int64_t{0});
      }
      return r;
    } catch (const nlohmann::json::exception& e) {
      throw TransportError(std::string("transport-failure: bad response: ") +
                           e.what());
    }
  }

  ModelResponse complete_messages(const PromptPayload& payload,
                                  const ModelConfig& config,
                                  const std::string& api_key) {
    nlohmann::json content = nlohmann::json::array();
    for (const auto& img : payload.images) {
      content.push_back({{"type", "image"},
                         {"source",
                          {{"type", "base64"},
                           {"media_type", img.media_type},
                           {"data", detail::base64_encode(img.bytes)}}}});
    }
    content.push_back({{"type", "text"}, {"text", payload.user_text}});
    const nlohmann::json body = {
        {"model", config.model_name},
        {"temperature", config.temperature},
        {"max_tokens", config.max_output_tokens},
        {"system", payload.system_text},
        {"messages", {{{"role", "user"}, {"content", content}}}},
    };
    httplib::Client client(config.endpoint);
    client.set_read_timeout(300, 0);
    httplib::Headers headers = {{"x-api-key", api_key},
                                {"anthropic-version", "2023-06-01"}};
    auto res = client.Post("/v1/messages", headers, body.dump(),
                           "application/json");
    if (!res) throw TransportError("transport-failure: no response from " +
                                   config.endpoint);
    detail::throw_for_status(res->status, res->body);
    try {
      const auto j = nlohmann::json::parse(res->body);
      ModelResponse r;
      r.text = j.at("content").at(0).at("text").get<std::string>();
      if (j.contains("usage")) {
        r.input_tokens = j["usage"].value("input_tokens", std::int64_t{0});
        r.output_tokens = j["usage"].value("output_tokens", std::int64_t{0});
      }
      return r;
    } catch (const nlohmann::json::exception& e) {
      throw TransportError(std::string("transport-failure: bad response: ") +
                           e.what());
    }
  }
};

}  // namespace soc
