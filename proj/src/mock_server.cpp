#include "tgeval/mock_server.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <thread>

#include "httplib.h"
#include "json.hpp"

using nlohmann::json;

namespace tgeval {

namespace {

constexpr char kEndpointPath[] = "/v1/chat/completions";

std::string first_line(const std::string& text) {
  const std::size_t eol = text.find('\n');
  return eol == std::string::npos ? text : text.substr(0, eol);
}

// Recovers the dataset query from the prompt's query/question text part; the
// prompt builder appends one period after moment-retrieval queries.
std::optional<std::string> extract_query(const json& content) {
  for (const auto& part : content) {
    if (!part.is_object() || part.value("type", "") != "text") continue;
    const std::string text = part.value("text", "");
    if (text.rfind("Query: ", 0) == 0) {
      std::string q = first_line(text).substr(7);
      if (!q.empty() && q.back() == '.') q.pop_back();
      return q;
    }
    if (text.rfind("Question: ", 0) == 0) {
      return first_line(text).substr(10);
    }
  }
  return std::nullopt;
}

// A window guaranteed to overlap none of the sample's ground-truth windows.
TimeInterval disjoint_window(const AnnotationSample& sample) {
  double s_min = sample.duration_s;
  double e_max = 0.0;
  for (const auto& gt : sample.gt_windows) {
    s_min = std::min(s_min, gt.start_s);
    e_max = std::max(e_max, gt.end_s);
  }
  if (s_min > 0.0) return {0.0, s_min / 2.0};
  if (e_max < sample.duration_s) {
    return {(e_max + sample.duration_s) / 2.0, sample.duration_s};
  }
  return {0.0, 0.0};  // zero-length window never reaches IoU > 0 here
}

json completion_body(const std::string& content) {
  return {{"id", "mock-completion"},
          {"object", "chat.completion"},
          {"choices",
           json::array({{{"index", 0},
                         {"message",
                          {{"role", "assistant"}, {"content", content}}},
                         {"finish_reason", "stop"}}})}};
}

}  // namespace

struct MockServer::Impl {
  MockServerConfig cfg;
  httplib::Server svr;
  std::thread thread;
  std::atomic<int> requests{0};
  int port = 0;

  void handle(const httplib::Request& req, httplib::Response& res) {
    ++requests;
    json body;
    try {
      body = json::parse(req.body);
    } catch (const std::exception&) {
      res.status = 400;
      res.set_content(R"({"error": "request body is not JSON"})",
                      "application/json");
      return;
    }

    std::string content;
    switch (cfg.mode) {
      case MockMode::Fixed:
        content = cfg.fixed_response;
        break;
      case MockMode::Scripted: {
        std::string prompt_text;
        for (const auto& msg : body.value("messages", json::array())) {
          for (const auto& part : msg.value("content", json::array())) {
            if (part.is_object() && part.value("type", "") == "text") {
              prompt_text += part.value("text", "");
              prompt_text += "\n";
            }
          }
        }
        bool found = false;
        for (const auto& entry : cfg.script) {
          if (prompt_text.find(entry.match) != std::string::npos) {
            content = entry.response;
            found = true;
            break;
          }
        }
        if (!found) {
          res.status = 400;
          res.set_content(R"({"error": "no script entry matches prompt"})",
                          "application/json");
          return;
        }
        break;
      }
      case MockMode::EchoGroundTruth:
      case MockMode::DisjointWindows: {
        std::optional<std::string> query;
        const auto& messages = body.value("messages", json::array());
        if (!messages.empty()) {
          query = extract_query(messages[0].value("content", json::array()));
        }
        const AnnotationSample* sample = nullptr;
        if (query) {
          for (const auto& s : cfg.samples) {
            if (s.query == *query) {
              sample = &s;
              break;
            }
          }
        }
        if (!sample) {
          res.status = 400;
          res.set_content(R"({"error": "no sample matches prompt query"})",
                          "application/json");
          return;
        }
        content = "ANSWER: ";
        if (sample->qa_answer_index) {
          content += static_cast<char>('A' + *sample->qa_answer_index);
          content += ' ';
        }
        const std::vector<TimeInterval> windows =
            cfg.mode == MockMode::EchoGroundTruth
                ? sample->gt_windows
                : std::vector<TimeInterval>{disjoint_window(*sample)};
        content += render_windows(windows, cfg.style, sample->duration_s);
        break;
      }
    }
    res.set_content(completion_body(content).dump(), "application/json");
  }
};

MockServer::MockServer(MockServerConfig cfg)
    : impl_(std::make_unique<Impl>()) {
  impl_->cfg = std::move(cfg);
  impl_->svr.Post(kEndpointPath,
                  [this](const httplib::Request& req, httplib::Response& res) {
                    impl_->handle(req, res);
                  });
  if (impl_->cfg.port == 0) {
    impl_->port = impl_->svr.bind_to_any_port("127.0.0.1");
    if (impl_->port <= 0) {
      throw std::runtime_error("MockServer: cannot bind a local port");
    }
  } else {
    if (!impl_->svr.bind_to_port("127.0.0.1", impl_->cfg.port)) {
      throw std::runtime_error("MockServer: cannot bind port " +
                               std::to_string(impl_->cfg.port));
    }
    impl_->port = impl_->cfg.port;
  }
  impl_->thread = std::thread([this] { impl_->svr.listen_after_bind(); });
  impl_->svr.wait_until_ready();
}

MockServer::~MockServer() { stop(); }

int MockServer::port() const { return impl_->port; }

std::string MockServer::url() const {
  return "http://127.0.0.1:" + std::to_string(impl_->port) + kEndpointPath;
}

int MockServer::request_count() const { return impl_->requests.load(); }

void MockServer::stop() {
  if (impl_->svr.is_running()) {
    impl_->svr.stop();
  }
  if (impl_->thread.joinable()) {
    impl_->thread.join();
  }
}

std::vector<MockScriptEntry> load_mock_script(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot read mock script: " + path);
  }
  std::vector<MockScriptEntry> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      out.push_back({j.at("match").get<std::string>(),
                     j.at("response").get<std::string>()});
    } catch (const std::exception& e) {
      throw std::runtime_error("mock script line " + std::to_string(line_no) +
                               " is malformed: " + e.what());
    }
  }
  return out;
}

}  // namespace tgeval
