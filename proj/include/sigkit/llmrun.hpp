#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sigkit/corpus.hpp"
#include "sigkit/lexicon.hpp"
#include "sigkit/sigparse.hpp"

namespace sigkit {

// ---------------------------------------------------------------- requests

struct CompletionRequest {
  std::string prompt;
  std::map<std::string, std::string> backend_params;  // e.g. model, temperature

  /// Every request is sent without conversational history.
  static constexpr bool fresh_session() { return true; }
};

/// SHA-256 over the prompt and the sorted key=value parameters.
std::string request_hash(const CompletionRequest& request);

class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CassetteMiss : public BackendError {
 public:
  explicit CassetteMiss(std::string hash)
      : BackendError("no cassette entry for request " + hash), hash_(std::move(hash)) {}
  const std::string& hash() const { return hash_; }

 private:
  std::string hash_;
};

/// Network-level failure after all retries.
class TransportError : public BackendError {
 public:
  TransportError(const std::string& what, int attempts)
      : BackendError(what + " (after " + std::to_string(attempts) + " attempt" + (attempts == 1 ? "" : "s") + ")"),
        attempts_(attempts) {}
  int attempts() const { return attempts_; }
  bool retriable() const { return true; }

 private:
  int attempts_;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string complete(const CompletionRequest& request) = 0;
  virtual std::string_view name() const = 0;
};

std::string complete(Backend& backend, const CompletionRequest& request);

/// Canned responses keyed by request hash. Unknown requests raise BackendError.
class MockBackend : public Backend {
 public:
  void add_fixture(const CompletionRequest& request, std::string response);
  void add_fixture_by_hash(std::string hash, std::string response);
  std::size_t size() const { return fixtures_.size(); }

  std::string complete(const CompletionRequest& request) override;
  std::string_view name() const override { return "mock"; }

 private:
  std::map<std::string, std::string> fixtures_;
};

// ---------------------------------------------------------------- cassettes

struct CassetteEntry {
  std::string request_hash;
  std::string prompt_text;
  std::string response_text;
  std::string timestamp;

  bool operator==(const CassetteEntry&) const = default;
};

/// Append-only JSON Lines log of completions. When bound to a file, appends
/// are written through immediately.
class Cassette {
 public:
  Cassette() = default;
  /// Loads the file when present; a missing file yields an empty cassette bound to that path.
  explicit Cassette(const std::filesystem::path& path);
  Cassette(const Cassette&) = delete;
  Cassette& operator=(const Cassette&) = delete;

  const std::vector<CassetteEntry>& entries() const { return entries_; }
  /// Latest entry for the hash.
  const CassetteEntry* find(std::string_view hash) const;
  void append(CassetteEntry entry);

 private:
  std::optional<std::filesystem::path> path_;
  std::vector<CassetteEntry> entries_;
  mutable std::mutex mu_;
};

enum class CassetteMode { replay, record };

class CassetteBackend : public Backend {
 public:
  using Clock = std::function<std::string()>;

  /// Replay mode never calls `upstream`; record mode calls it on a miss and appends.
  CassetteBackend(Cassette& cassette, CassetteMode mode, Backend* upstream = nullptr, Clock clock = {});

  std::string complete(const CompletionRequest& request) override;
  std::string_view name() const override { return "cassette"; }

 private:
  Cassette& cassette_;
  CassetteMode mode_;
  Backend* upstream_;
  Clock clock_;
};

std::string utc_timestamp();

// ---------------------------------------------------------------- http

struct HttpConfig {
  std::string base_url = "https://api.openai.com";
  std::string path = "/v1/chat/completions";
  std::string api_key;  // defaults to $SIGKIT_API_KEY
  int max_attempts = 3;
  std::chrono::milliseconds backoff{500};
  std::chrono::seconds timeout{120};
};

/// OpenAI-compatible chat completions; one user message per request.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(HttpConfig config);

  std::string complete(const CompletionRequest& request) override;
  std::string_view name() const override { return "http"; }

 private:
  HttpConfig config_;
};

// ---------------------------------------------------------------- response parsing

struct NerParse {
  std::vector<TableRow> rows;  // exactly expected_count rows
  std::vector<std::string> diagnostics;
};

/// Reads a markdown or comma-separated table. Never throws.
NerParse parse_ner_response(std::string_view text, std::size_t expected_count);

/// Phrases recognised when splitting an expanded instructions cell.
struct ResponseVocabulary {
  std::set<std::string> dose_forms;
  std::set<std::string> routes;
  std::set<std::string> meal_phrases;
  std::set<std::string> frequency_phrases;

  static ResponseVocabulary from_lexicon(const SigLexicon& lexicon);
};

struct ExParse {
  std::vector<ExpansionRecord> records;  // exactly expected_count records
  std::vector<bool> extra_content;       // surplus ";" segments in the instructions cell
  std::vector<std::string> diagnostics;
};

/// Splits one expanded instructions cell into the five instruction categories.
/// The first ";" segment is segmented; further segments go to `other`.
ExpansionRecord split_instructions_cell(std::string_view cell, const ResponseVocabulary& vocabulary,
                                        bool* extra_content = nullptr);

ExParse parse_ex_response(std::string_view text, std::size_t expected_count, const ResponseVocabulary& vocabulary);

}  // namespace sigkit
