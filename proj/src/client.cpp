#include "tgeval/client.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace tgeval {

std::string sha256_hex(const void* data, std::size_t len) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int digest_len = 0;
  if (EVP_Digest(data, len, digest, &digest_len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256_hex: digest computation failed");
  }
  static const char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(digest_len * 2);
  for (unsigned int i = 0; i < digest_len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0x0f];
  }
  return out;
}

std::string sha256_hex(const std::string& data) {
  return sha256_hex(data.data(), data.size());
}

std::string base64_encode(const std::vector<std::uint8_t>& data) {
  static const char table[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((data.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < data.size(); i += 3) {
    const std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
    out += table[(v >> 18) & 0x3f];
    out += table[(v >> 12) & 0x3f];
    out += table[(v >> 6) & 0x3f];
    out += table[v & 0x3f];
  }
  if (i + 1 == data.size()) {
    const std::uint32_t v = data[i] << 16;
    out += table[(v >> 18) & 0x3f];
    out += table[(v >> 12) & 0x3f];
    out += "==";
  } else if (i + 2 == data.size()) {
    const std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8);
    out += table[(v >> 18) & 0x3f];
    out += table[(v >> 12) & 0x3f];
    out += table[(v >> 6) & 0x3f];
    out += "=";
  }
  return out;
}

std::vector<std::uint8_t> load_image_bytes(const ImageRef& ref) {
  if (!ref.bytes.empty()) return ref.bytes;
  if (ref.path.empty()) {
    throw std::runtime_error("load_image_bytes: image ref has no path/bytes");
  }
  std::ifstream in(ref.path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("load_image_bytes: cannot read " + ref.path);
  }
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>());
}

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port], for httplib::Client
  std::string path;
};

ParsedUrl split_url(const std::string& url) {
  const std::size_t scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw EndpointError("endpoint URL needs a scheme: " + url);
  }
  const std::size_t path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    return {url, "/"};
  }
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::string detail_name(ImageDetail detail) {
  return detail == ImageDetail::Low ? "low" : "high";
}

std::string now_utc() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

bool retryable_status(int status) {
  return status == 408 || status == 429 || status >= 500;
}

}  // namespace

struct Client::Impl {
  std::mutex mutex;
  std::map<std::string, std::string> cache;
  std::ofstream cache_out;
  Stats stats;
};

Client::Client(ClientConfig cfg)
    : cfg_(std::move(cfg)), impl_(std::make_unique<Impl>()) {
  if (cfg_.num_runs < 1) {
    throw std::invalid_argument("Client: num_runs must be >= 1");
  }
  if (!(cfg_.temperature >= 0.0)) {
    throw std::invalid_argument("Client: temperature must be >= 0");
  }
  if (cfg_.cache_dir.empty()) return;

  fs::create_directories(cfg_.cache_dir);
  const std::string path =
      (fs::path(cfg_.cache_dir) / "cache.jsonl").string();
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const json rec = json::parse(line);
      // First record for a key wins; later duplicates are append artifacts.
      impl_->cache.emplace(rec.at("key").get<std::string>(),
                           rec.at("completion").get<std::string>());
    } catch (const std::exception&) {
      // A torn trailing line from a killed process is not fatal.
    }
  }
  in.close();
  impl_->cache_out.open(path, std::ios::app);
  if (!impl_->cache_out) {
    throw std::runtime_error("Client: cannot open cache file " + path);
  }
}

Client::~Client() = default;

std::string Client::cache_key(const PromptSequence& seq,
                              int run_index) const {
  // Image parts contribute their content digest rather than the full base64
  // payload, so the key stays stable across payload re-encoding and cheap to
  // compute on warm runs.
  json parts = json::array();
  for (const auto& item : seq.items) {
    if (const auto* img = std::get_if<ImageItem>(&item)) {
      const auto bytes = load_image_bytes(img->image);
      parts.push_back({{"type", "image"},
                       {"digest", sha256_hex(bytes.data(), bytes.size())},
                       {"detail", detail_name(cfg_.image_detail)}});
    } else {
      parts.push_back({{"type", "text"},
                       {"text", std::get<TextItem>(item).text}});
    }
  }
  char temp[32];
  std::snprintf(temp, sizeof(temp), "%.10g", cfg_.temperature);
  const json key_doc = {{"model", cfg_.model_name},
                        {"temperature", temp},
                        {"prompt", parts},
                        {"run_index", run_index}};
  return sha256_hex(key_doc.dump());
}

std::string Client::complete(const PromptSequence& seq, int run_index) {
  const std::string key = cache_key(seq, run_index);
  {
    std::lock_guard<std::mutex> lock(impl_->mutex);
    const auto it = impl_->cache.find(key);
    if (it != impl_->cache.end()) {
      ++impl_->stats.cache_hits;
      return it->second;
    }
  }

  json content = json::array();
  for (const auto& item : seq.items) {
    if (const auto* img = std::get_if<ImageItem>(&item)) {
      const auto bytes = load_image_bytes(img->image);
      const std::string media =
          img->image.media_type.empty() ? "image/jpeg" : img->image.media_type;
      content.push_back(
          {{"type", "image_url"},
           {"image_url",
            {{"url", "data:" + media + ";base64," + base64_encode(bytes)},
             {"detail", detail_name(cfg_.image_detail)}}}});
    } else {
      content.push_back(
          {{"type", "text"}, {"text", std::get<TextItem>(item).text}});
    }
  }
  const json request = {
      {"model", cfg_.model_name},
      {"temperature", cfg_.temperature},
      {"max_tokens", cfg_.max_output_tokens},
      {"messages",
       json::array({{{"role", "user"}, {"content", content}}})}};
  const std::string body = request.dump();

  const ParsedUrl url = split_url(cfg_.endpoint_url);
  std::string api_key;
  if (!cfg_.api_key_env.empty()) {
    if (const char* env = std::getenv(cfg_.api_key_env.c_str())) {
      api_key = env;
    }
  }

  std::string last_error;
  for (int attempt = 1; attempt <= cfg_.retry.max_attempts; ++attempt) {
    if (attempt > 1 && !cfg_.retry.backoff_ms.empty()) {
      const std::size_t idx =
          std::min(static_cast<std::size_t>(attempt - 2),
                   cfg_.retry.backoff_ms.size() - 1);
      std::this_thread::sleep_for(
          std::chrono::milliseconds(cfg_.retry.backoff_ms[idx]));
    }

    // One connection per request keeps retries independent; completions are
    // long-lived calls, so connection reuse buys little.
    httplib::Client http(url.origin);
    http.set_connection_timeout(30, 0);
    http.set_read_timeout(600, 0);
    http.set_write_timeout(600, 0);
    httplib::Headers headers;
    if (!api_key.empty()) {
      headers.emplace("Authorization", "Bearer " + api_key);
    }
    {
      std::lock_guard<std::mutex> lock(impl_->mutex);
      ++impl_->stats.http_requests;
    }
    auto res = http.Post(url.path, headers, body, "application/json");

    if (!res) {
      last_error = "connection failure: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 401 || res->status == 403) {
      throw AuthError("endpoint rejected credentials (HTTP " +
                      std::to_string(res->status) + "); set $" +
                      cfg_.api_key_env);
    }
    if (retryable_status(res->status)) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw EndpointError("endpoint returned HTTP " +
                          std::to_string(res->status) + ": " + res->body);
    }

    std::string completion;
    try {
      const json reply = json::parse(res->body);
      completion =
          reply.at("choices").at(0).at("message").at("content")
              .get<std::string>();
    } catch (const std::exception& e) {
      throw EndpointError(std::string("malformed completion response: ") +
                          e.what());
    }

    std::lock_guard<std::mutex> lock(impl_->mutex);
    impl_->cache.emplace(key, completion);
    if (impl_->cache_out.is_open()) {
      const json rec = {{"key", key},
                        {"request_digest", sha256_hex(body)},
                        {"timestamp", now_utc()},
                        {"completion", completion}};
      impl_->cache_out << rec.dump() << "\n";
      impl_->cache_out.flush();
    }
    return completion;
  }
  throw RetriesExhaustedError("gave up after " +
                              std::to_string(cfg_.retry.max_attempts) +
                              " attempts; last error: " + last_error);
}

Client::Stats Client::stats() const {
  std::lock_guard<std::mutex> lock(impl_->mutex);
  return impl_->stats;
}

}  // namespace tgeval
