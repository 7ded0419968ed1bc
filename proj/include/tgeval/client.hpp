#pragma once

// HTTP client for chat-completions-style vision endpoints: builds the wire
// request from a PromptSequence, retries transient failures, and serves
// repeat prompts from an on-disk response cache keyed by content digest.

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "tgeval/blueprint.hpp"

namespace tgeval {

enum class ImageDetail { Low, High };

struct RetryPolicy {
  int max_attempts = 4;
  // Sleep before attempt k+1 is backoff_ms[min(k-1, size-1)].
  std::vector<int> backoff_ms = {250, 1000, 4000};
};

struct ClientConfig {
  std::string endpoint_url = "https://api.openai.com/v1/chat/completions";
  std::string model_name = "gpt-4o-2024-08-06";
  // Name of the environment variable holding the key; the key itself never
  // appears in config files or flags. Empty env var means no auth header.
  std::string api_key_env = "OPENAI_API_KEY";
  double temperature = 0.0;
  ImageDetail image_detail = ImageDetail::Low;
  int max_output_tokens = 4096;
  int num_runs = 2;
  RetryPolicy retry;
  int request_parallelism = 4;
  // Directory holding cache.jsonl; empty keeps the cache in-memory only.
  std::string cache_dir;
};

struct ClientError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// 401/403 from the endpoint; never retried.
struct AuthError : ClientError {
  using ClientError::ClientError;
};
// Endpoint spoke, but not in the chat-completions shape, or rejected the
// request outright.
struct EndpointError : ClientError {
  using ClientError::ClientError;
};
// Transient failures persisted through every allowed attempt.
struct RetriesExhaustedError : ClientError {
  using ClientError::ClientError;
};

// SHA-256 as lowercase hex; exposed for cache-layout tests.
std::string sha256_hex(const void* data, std::size_t len);
std::string sha256_hex(const std::string& data);

class Client {
 public:
  explicit Client(ClientConfig cfg);
  ~Client();

  // Returns the completion text for one (prompt, run_index) pair, from cache
  // when present. run_index keys run-averaging: the same prompt under a
  // different run_index is a distinct request. Throws AuthError,
  // EndpointError, or RetriesExhaustedError.
  std::string complete(const PromptSequence& seq, int run_index);

  // Cache key for a (prompt, run_index) pair: digest over model name,
  // temperature, the serialized prompt with image content digests, and the
  // run index.
  std::string cache_key(const PromptSequence& seq, int run_index) const;

  struct Stats {
    int http_requests = 0;  // requests actually sent, including retries
    int cache_hits = 0;
  };
  Stats stats() const;

  const ClientConfig& config() const { return cfg_; }

 private:
  struct Impl;
  ClientConfig cfg_;
  std::unique_ptr<Impl> impl_;
};

// Reads an image's bytes, from ref.bytes when inline or else from ref.path.
// Throws std::runtime_error when neither is available.
std::vector<std::uint8_t> load_image_bytes(const ImageRef& ref);

// Standard base64 with padding, as used for data: image URLs.
std::string base64_encode(const std::vector<std::uint8_t>& data);

}  // namespace tgeval
