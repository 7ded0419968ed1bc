#pragma once

// In-process chat-completions endpoint for tests and offline runs. Speaks
// the same wire format as the real client target and answers from canned
// logic instead of a model.

#include <memory>
#include <string>
#include <vector>

#include "tgeval/blueprint.hpp"
#include "tgeval/core.hpp"

namespace tgeval {

enum class MockMode {
  // Look up the sample by the "Query: "/"Question: " line and answer with
  // its ground-truth windows (and gold option letter for QA samples).
  EchoGroundTruth,
  // Same lookup, but answer with a window that overlaps no ground-truth
  // window of the sample.
  DisjointWindows,
  // Always return fixed_response verbatim.
  Fixed,
  // Reply per script entries; first entry whose "match" string occurs in the
  // prompt text wins. Unmatched prompts get HTTP 400.
  Scripted,
};

struct MockScriptEntry {
  std::string match;
  std::string response;
};

struct MockServerConfig {
  MockMode mode = MockMode::EchoGroundTruth;
  int port = 0;  // 0 picks a free port
  // Lookup table for the echo modes.
  std::vector<AnnotationSample> samples;
  // Style used to render echoed windows back into text.
  TimestampStyle style;
  std::string fixed_response;
  std::vector<MockScriptEntry> script;
};

class MockServer {
 public:
  // Starts listening on a background thread; ready once constructed.
  // Throws std::runtime_error when the port cannot be bound.
  explicit MockServer(MockServerConfig cfg);
  ~MockServer();

  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  int port() const;
  // Full chat-completions endpoint URL for ClientConfig::endpoint_url.
  std::string url() const;
  // Number of completion requests received so far.
  int request_count() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Loads a script file: one JSON object {"match": ..., "response": ...} per
// line. Throws std::runtime_error on unreadable or malformed files.
std::vector<MockScriptEntry> load_mock_script(const std::string& path);

}  // namespace tgeval
