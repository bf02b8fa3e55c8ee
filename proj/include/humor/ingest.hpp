#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace humor::ingest {

struct JokeRecord {
  std::string id;
  std::string body;       // setup, may be empty
  std::string punchline;  // may be empty (but not both)
  std::int64_t score = 0;
  std::int64_t created_at = 0;
  std::int64_t last_refreshed = 0;

  void validate() const;
};

struct IngestConfig {
  std::int64_t poll_interval = 3600;  // seconds between poll cycles
  std::string api_base_url;
  int page_size = 100;
  int max_retries = 3;
  int rate_limit = 60;  // requests per minute
  std::string store_path;

  void validate() const;
};

// Transport failed entirely (status 0) or kept failing after retries.
class RetriableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Upstream payload did not decode; names the offending field.
class DecodeError : public std::runtime_error {
 public:
  DecodeError(const std::string& field, const std::string& detail)
      : std::runtime_error("decode error in field '" + field + "': " + detail),
        field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct HttpResponse {
  int status = 0;  // 0 = transport failure
  std::string body;
};

// The upstream API sits behind this interface so tests run against an
// in-process mock; the real implementation wraps an HTTP client.
class HttpClient {
 public:
  virtual ~HttpClient() = default;
  virtual HttpResponse get(const std::string& path_and_query) = 0;
};

std::unique_ptr<HttpClient> make_http_client(const std::string& base_url);

using ClockFn = std::function<double()>;        // seconds, monotonic
using SleepFn = std::function<void(double)>;    // seconds

// Client-side limiter: at most `per_minute` acquisitions in any sliding
// 60-second window. The clock and sleep hooks keep tests instant.
class RateLimiter {
 public:
  RateLimiter(int per_minute, ClockFn clock = {}, SleepFn sleep = {});
  void acquire();
  const std::vector<double>& request_log() const { return log_; }

 private:
  int per_minute_;
  ClockFn clock_;
  SleepFn sleep_;
  std::deque<double> window_;
  std::vector<double> log_;
};

// In-memory store with insertion-ordered iteration and id upserts.
class JokeStore {
 public:
  // Replaces any existing record with the same id, keeping its position.
  void upsert(JokeRecord record);
  bool contains(const std::string& id) const;
  const JokeRecord& get(const std::string& id) const;
  const std::vector<JokeRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

 private:
  std::vector<JokeRecord> records_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct FetchPage {
  std::vector<JokeRecord> records;
  std::string next_cursor;
};

// GET /jokes/new?limit=N[&after=C]; records newer than the cursor in
// chronological order. Each record is validated; last_refreshed is stamped
// with `now_epoch`.
FetchPage fetch_new_jokes(HttpClient& client, RateLimiter& limiter,
                          const IngestConfig& config,
                          const std::optional<std::string>& after_cursor,
                          std::int64_t now_epoch);

struct RefreshOutcome {
  std::int64_t updated = 0;    // records whose score actually changed
  std::int64_t refreshed = 0;  // records successfully re-fetched
  std::vector<std::string> missing_ids;  // absent upstream, left unchanged
  std::vector<std::string> failed_ids;   // request failed after retries
};

// GET /jokes/scores?ids=a,b,c in pages of page_size. Partial failure
// updates what succeeded and reports the rest.
RefreshOutcome refresh_scores(JokeStore& store, HttpClient& client,
                              RateLimiter& limiter, const IngestConfig& config,
                              std::int64_t now_epoch);

// Append-only JSONL; one record per line. Returns appended count.
std::int64_t persist(const std::string& path,
                     const std::vector<JokeRecord>& records);

// Duplicate ids upsert in line order, so the latest score wins.
JokeStore load(const std::string& path);

IngestConfig load_ingest_config(const std::string& path);

}  // namespace humor::ingest
