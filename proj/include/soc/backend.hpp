#pragma once

/**
 * @file backend.hpp
 * @brief Model-backend abstraction: scripted mock, deterministic rule oracle,
 *        content-addressed disk cache, retry with backoff, and a global
 *        rate limiter. The remote HTTP backend lives in remote_backend.hpp.
 */

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <ctime>
#include <functional>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "soc/digest.hpp"
#include "soc/errors.hpp"
#include "soc/prompting.hpp"
#include "soc/registry.hpp"

namespace soc {

enum class BackendKind { remote, mock, oracle };
enum class WireDialect { chat_completions, messages };

inline const char* to_string(BackendKind k) {
  switch (k) {
    case BackendKind::remote: return "remote";
    case BackendKind::mock: return "mock";
    case BackendKind::oracle: return "oracle";
  }
  return "?";
}

struct ModelConfig {
  BackendKind backend_kind = BackendKind::oracle;
  std::string endpoint;                               // remote only
  WireDialect dialect = WireDialect::chat_completions;  // remote only
  std::string model_name = "oracle";
  double temperature = 0.1;
  int max_output_tokens = 1024;
  int run_index = 1;
};

struct ModelResponse {
  std::string text;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
  std::chrono::milliseconds latency{0};
  bool from_cache = false;
};

/// Deterministic digest over everything that identifies a completion: model,
/// backend kind, temperature, run index, and the full payload bytes including
/// images. Any byte change changes the key.
inline std::string cache_key(const PromptPayload& payload,
                             const ModelConfig& config) {
  std::string buf;
  auto put = [&buf](const std::string& s) {
    buf += std::to_string(s.size());
    buf.push_back('|');
    buf += s;
  };
  put(config.model_name);
  put(to_string(config.backend_kind));
  {
    std::ostringstream os;
    os << config.temperature;
    put(os.str());
  }
  put(std::to_string(config.run_index));
  put(payload.system_text);
  put(payload.user_text);
  put(payload.expected_output_schema);
  put(std::to_string(payload.images.size()));
  for (const auto& img : payload.images) {
    put(img.media_type);
    buf += std::to_string(img.bytes.size());
    buf.push_back('|');
    buf.append(reinterpret_cast<const char*>(img.bytes.data()),
               img.bytes.size());
  }
  return sha256_hex(buf);
}

namespace detail {

inline std::int64_t approx_tokens(const std::string& text) {
  return static_cast<std::int64_t>(text.size() / 4) + 1;
}

}  // namespace detail

class ModelBackend {
 public:
  virtual ~ModelBackend() = default;

  ModelResponse complete(const PromptPayload& payload,
                         const ModelConfig& config) {
    ++calls_;
    return do_complete(payload, config);
  }

  /// Number of complete() invocations that reached this backend.
  std::int64_t call_count() const { return calls_.load(); }

 protected:
  virtual ModelResponse do_complete(const PromptPayload& payload,
                                    const ModelConfig& config) = 0;

 private:
  std::atomic<std::int64_t> calls_{0};
};

// ---------------------------------------------------------------------------
// Scripted mock

/// Returns scripted responses: a queue consumed in order, then a fallback.
class MockBackend : public ModelBackend {
 public:
  explicit MockBackend(std::string fallback_text = "")
      : fallback_(std::move(fallback_text)) {}

  void push_response(std::string text) {
    std::lock_guard lock(mu_);
    queue_.push_back(std::move(text));
  }

  void set_error(std::function<void()> thrower, int times) {
    std::lock_guard lock(mu_);
    thrower_ = std::move(thrower);
    error_times_ = times;
  }

 protected:
  ModelResponse do_complete(const PromptPayload& payload,
                            const ModelConfig&) override {
    std::function<void()> thrower;
    std::string text;
    {
      std::lock_guard lock(mu_);
      if (error_times_ > 0) {
        --error_times_;
        thrower = thrower_;
      } else if (!queue_.empty()) {
        text = queue_.front();
        queue_.pop_front();
      } else {
        text = fallback_;
      }
    }
    if (thrower) thrower();
    ModelResponse r;
    r.text = text;
    r.input_tokens = detail::approx_tokens(payload.user_text);
    r.output_tokens = detail::approx_tokens(r.text);
    return r;
  }

 private:
  std::mutex mu_;
  std::deque<std::string> queue_;
  std::string fallback_;
  std::function<void()> thrower_;
  int error_times_ = 0;
};

// ---------------------------------------------------------------------------
// Rule oracle

/// Scripted ground truth for closed-loop tests: maps (frame_id, check_id) to
/// a verdict token and (frame_id, criterion_id) to a confidence.
struct OracleRuleset {
  std::map<std::pair<std::string, std::string>, std::string> check_verdicts;
  std::map<std::pair<std::string, int>, double> confidences;
  std::map<std::pair<std::string, int>, double> agg_scores;

  bool knows_frame(const std::string& frame_id) const {
    for (const auto& [k, v] : check_verdicts)
      if (k.first == frame_id) return true;
    for (const auto& [k, v] : confidences)
      if (k.first == frame_id) return true;
    return false;
  }
};

/// Emits perfectly formatted response text for the payload's declared output
/// schema. Deterministic; the closed-loop counterpart of MODULE parsing.
class OracleBackend : public ModelBackend {
 public:
  OracleBackend(OracleRuleset ruleset, CheckRegistry registry)
      : ruleset_(std::move(ruleset)), registry_(std::move(registry)) {}

 protected:
  ModelResponse do_complete(const PromptPayload& payload,
                            const ModelConfig&) override {
    const auto& schema = payload.expected_output_schema;
    ModelResponse r;
    if (schema == "agg_score") {
      r.text = "final score: " + format_score(agg_score_for(payload));
    } else {
      if (!ruleset_.knows_frame(payload.frame_id))
        throw UnknownFrameError("unknown-frame: " + payload.frame_id);
      if (schema == "check_lines") {
        r.text = check_lines_for(payload);
      } else if (schema == "verdict_confidence" ||
                 schema == "reasoning_verdict_confidence") {
        const double conf = confidence_for(payload);
        std::string text;
        if (schema == "reasoning_verdict_confidence")
          text += "Considering the visible evidence step by step.\n";
        text += std::string("verdict: ") + (conf > 0.5 ? "yes" : "no") +
                ", confidence: " + format_score(conf) + "\n";
        r.text = text;
      } else if (schema == "subq_qa") {
        r.text = "Q: Is the relevant anatomy exposed?\nA: scripted answer for " +
                 payload.frame_id + " criterion " +
                 std::to_string(payload.criterion_id) + "\n";
      } else {
        throw BackendError("oracle: unknown schema " + schema);
      }
    }
    r.input_tokens = detail::approx_tokens(payload.user_text);
    r.output_tokens = detail::approx_tokens(r.text);
    return r;
  }

 private:
  static std::string format_score(double v) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(4);
    os << v;
    return os.str();
  }

  std::string check_lines_for(const PromptPayload& payload) const {
    const Criterion* crit = registry_.find(payload.criterion_id);
    if (!crit)
      throw BackendError("oracle: unknown criterion " +
                         std::to_string(payload.criterion_id));
    std::string text;
    for (const auto& ch : crit->checks) {
      auto it = ruleset_.check_verdicts.find({payload.frame_id, ch.check_id});
      const std::string verdict =
          it != ruleset_.check_verdicts.end() ? it->second : "uncertain";
      text += ch.check_id + ": " + verdict + " - scripted justification for " +
              ch.check_id + "\n";
    }
    return text;
  }

  double confidence_for(const PromptPayload& payload) const {
    auto it = ruleset_.confidences.find({payload.frame_id, payload.criterion_id});
    if (it == ruleset_.confidences.end())
      throw UnknownFrameError("unknown-frame: no confidence for " +
                              payload.frame_id);
    return it->second;
  }

  double agg_score_for(const PromptPayload& payload) const {
    auto it = ruleset_.agg_scores.find({payload.frame_id, payload.criterion_id});
    if (it != ruleset_.agg_scores.end()) return it->second;
    // Default: fraction of affirmative scripted verdicts for the criterion.
    const Criterion* crit = registry_.find(payload.criterion_id);
    if (!crit || crit->checks.empty())
      throw BackendError("oracle: no agg score for " + payload.frame_id);
    int yes = 0;
    for (const auto& ch : crit->checks) {
      auto v = ruleset_.check_verdicts.find({payload.frame_id, ch.check_id});
      if (v != ruleset_.check_verdicts.end() && v->second == "yes") ++yes;
    }
    return static_cast<double>(yes) / static_cast<double>(crit->checks.size());
  }

  OracleRuleset ruleset_;
  CheckRegistry registry_;
};

// ---------------------------------------------------------------------------
// Rate limiting and retry

/// Bounds the number of in-flight backend requests.
class RateLimiter {
 public:
  explicit RateLimiter(int ceiling) : ceiling_(ceiling) {}

  void acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [this] { return in_flight_ < ceiling_; });
    ++in_flight_;
  }

  void release() {
    {
      std::lock_guard lock(mu_);
      --in_flight_;
    }
    cv_.notify_one();
  }

  struct Guard {
    RateLimiter& limiter;
    explicit Guard(RateLimiter& l) : limiter(l) { limiter.acquire(); }
    ~Guard() { limiter.release(); }
  };

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int ceiling_;
  int in_flight_ = 0;
};

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds initial_backoff{200};
  double multiplier = 2.0;
};

/// Retries transient failures (rate limits, transport errors) with
/// exponential backoff; auth and payload errors fail immediately.
class RetryingBackend : public ModelBackend {
 public:
  RetryingBackend(std::shared_ptr<ModelBackend> inner, RetryPolicy policy,
                  std::shared_ptr<RateLimiter> limiter = nullptr)
      : inner_(std::move(inner)),
        policy_(policy),
        limiter_(std::move(limiter)) {}

 protected:
  ModelResponse do_complete(const PromptPayload& payload,
                            const ModelConfig& config) override {
    auto backoff = policy_.initial_backoff;
    for (int attempt = 1;; ++attempt) {
      try {
        if (limiter_) {
          RateLimiter::Guard guard(*limiter_);
          return inner_->complete(payload, config);
        }
        return inner_->complete(payload, config);
      } catch (const RateLimitedError&) {
        if (attempt >= policy_.max_attempts) throw;
      } catch (const TransportError&) {
        if (attempt >= policy_.max_attempts) throw;
      }
      std::this_thread::sleep_for(backoff);
      backoff = std::chrono::milliseconds(static_cast<std::int64_t>(
          static_cast<double>(backoff.count()) * policy_.multiplier));
    }
  }

 private:
  std::shared_ptr<ModelBackend> inner_;
  RetryPolicy policy_;
  std::shared_ptr<RateLimiter> limiter_;
};

// ---------------------------------------------------------------------------
// Disk cache

/// Content-addressed response cache: one JSON file per key under the cache
/// directory. Concurrent writes of the same key are idempotent (temp file
/// plus atomic rename).
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  std::optional<ModelResponse> lookup(const std::string& key) const {
    const auto path = entry_path(key);
    if (!std::filesystem::exists(path)) return std::nullopt;
    std::ifstream in(path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error&) {
      return std::nullopt;  // partial write from a crashed run, re-fetch
    }
    ModelResponse r;
    r.text = j.value("response_text", "");
    r.input_tokens = j.value("input_tokens", std::int64_t{0});
    r.output_tokens = j.value("output_tokens", std::int64_t{0});
    r.from_cache = true;
    return r;
  }

  void store(const std::string& key, const ModelResponse& response) {
    const nlohmann::json j = {
        {"key", key},
        {"request_digest", key},
        {"response_text", response.text},
        {"input_tokens", response.input_tokens},
        {"output_tokens", response.output_tokens},
        {"created_at", now_iso8601()},
    };
    const auto path = entry_path(key);
    const auto tmp = path.string() + "." + unique_suffix();
    {
      std::ofstream out(tmp);
      out << j.dump(2) << "\n";
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) std::filesystem::remove(tmp, ec);
  }

  bool contains(const std::string& key) const {
    return std::filesystem::exists(entry_path(key));
  }

  void erase(const std::string& key) {
    std::error_code ec;
    std::filesystem::remove(entry_path(key), ec);
  }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path entry_path(const std::string& key) const {
    return dir_ / (key + ".json");
  }

  static std::string now_iso8601() {
    const auto t = std::chrono::system_clock::to_time_t(
        std::chrono::system_clock::now());
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
  }

  static std::string unique_suffix() {
    static std::atomic<std::uint64_t> counter{0};
    std::ostringstream os;
    os << "tmp." << std::this_thread::get_id() << "." << counter++;
    return os.str();
  }

  std::filesystem::path dir_;
};

/// Cache-through wrapper: hits return the stored response with no inner call.
class CachingBackend : public ModelBackend {
 public:
  CachingBackend(std::shared_ptr<ModelBackend> inner,
                 std::shared_ptr<ResponseCache> cache)
      : inner_(std::move(inner)), cache_(std::move(cache)) {}

  ResponseCache& cache() { return *cache_; }

 protected:
  ModelResponse do_complete(const PromptPayload& payload,
                            const ModelConfig& config) override {
    const auto key = cache_key(payload, config);
    if (auto hit = cache_->lookup(key)) return *hit;
    ModelResponse r = inner_->complete(payload, config);
    cache_->store(key, r);
    r.from_cache = false;
    return r;
  }

 private:
  std::shared_ptr<ModelBackend> inner_;
  std::shared_ptr<ResponseCache> cache_;
};

}  // namespace soc
