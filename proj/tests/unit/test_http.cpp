#include <doctest.h>

#include <atomic>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "sigkit/llmrun.hpp"

using namespace sigkit;

namespace {

/// Local chat-completions stand-in on an ephemeral port.
class FakeServer {
 public:
  FakeServer() {
    server_.Post("/flaky", [this](const httplib::Request& req, httplib::Response& res) {
      last_body = req.body;
      last_auth = req.get_header_value("Authorization");
      if (++flaky_calls < 3) {
        res.status = flaky_calls == 1 ? 503 : 429;
        return;
      }
      nlohmann::json j;
      j["choices"] = {{{"message", {{"role", "assistant"}, {"content", "| a | b |"}}}}};
      res.set_content(j.dump(), "application/json");
    });
    server_.Post("/down", [this](const httplib::Request&, httplib::Response& res) {
      ++down_calls;
      res.status = 500;
    });
    server_.Post("/denied", [this](const httplib::Request&, httplib::Response& res) {
      ++denied_calls;
      res.status = 401;
      res.set_content("bad key", "text/plain");
    });
    server_.Post("/garbled", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("{\"choices\":[]}", "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }

  HttpConfig config(const std::string& path) const {
    HttpConfig c;
    c.base_url = "http://127.0.0.1:" + std::to_string(port_);
    c.path = path;
    c.api_key = "test-key";
    c.max_attempts = 3;
    c.backoff = std::chrono::milliseconds(1);
    c.timeout = std::chrono::seconds(5);
    return c;
  }

  std::atomic<int> flaky_calls{0}, down_calls{0}, denied_calls{0};
  std::string last_body, last_auth;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST_CASE("http backend retries 5xx and 429, then succeeds") {
  FakeServer s;
  HttpBackend b(s.config("/flaky"));
  auto out = b.complete({"the prompt", {{"model", "gpt-3.5-turbo"}, {"temperature", "0"}}});
  CHECK(out == "| a | b |");
  CHECK(s.flaky_calls == 3);
  auto body = nlohmann::json::parse(s.last_body);
  CHECK(body["messages"].size() == 1);
  CHECK(body["messages"][0]["content"] == "the prompt");
  CHECK(body["model"] == "gpt-3.5-turbo");
  CHECK(body["temperature"] == 0.0);
  CHECK(s.last_auth == "Bearer test-key");
}

TEST_CASE("http backend gives up with a retriable transport error") {
  FakeServer s;
  HttpBackend b(s.config("/down"));
  try {
    b.complete({"p", {}});
    FAIL("expected TransportError");
  } catch (const TransportError& e) {
    CHECK(e.attempts() == 3);
    CHECK(e.retriable());
  }
  CHECK(s.down_calls == 3);
}

TEST_CASE("http backend does not retry client errors") {
  FakeServer s;
  HttpBackend b(s.config("/denied"));
  CHECK_THROWS_AS(b.complete({"p", {}}), BackendError);
  CHECK(s.denied_calls == 1);
  HttpBackend g(s.config("/garbled"));
  CHECK_THROWS_AS(g.complete({"p", {}}), BackendError);
}

TEST_CASE("unreachable host is a transport error") {
  HttpConfig c;
  c.base_url = "http://127.0.0.1:1";
  c.max_attempts = 2;
  c.backoff = std::chrono::milliseconds(1);
  c.timeout = std::chrono::seconds(2);
  HttpBackend b(c);
  CHECK_THROWS_AS(b.complete({"p", {}}), TransportError);
}
