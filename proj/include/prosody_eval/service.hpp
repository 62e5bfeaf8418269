#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "prosody_eval/report.hpp"
#include "prosody_eval/stats.hpp"

namespace prosody_eval::service {

/// Error carrying the HTTP status and machine-readable code for the API.
class ServiceError : public Error {
 public:
  ServiceError(int status, std::string code, const std::string& message)
      : Error(message), status_(status), code_(std::move(code)) {}
  int status() const { return status_; }
  const std::string& code() const { return code_; }

 private:
  int status_;
  std::string code_;
};

enum class TestKind { kMushra, kPreference };

struct Stimulus {
  std::string system_id;
  std::string audio_path;
};

struct Screen {
  std::string screen_id;
  std::string utterance_id;
  std::vector<Stimulus> stimuli;
};

struct SystemDef {
  std::string system_id;
  std::string label;
};

struct TestDefinition {
  std::string test_id;
  std::string name;
  TestKind kind = TestKind::kMushra;
  std::vector<SystemDef> systems;
  std::vector<Screen> screens;
  std::optional<std::string> reference_system_id;
  /// 0 means every screen.
  std::size_t screens_per_listener = 0;
  /// Classic MUSHRA post-screening: the reference must be rated 100. Off by default.
  bool enforce_reference_100 = false;

  static TestDefinition from_json(const Json& doc);
  Json to_json() const;
  /// Structural checks; with check_audio, every stimulus path must exist.
  void validate(bool check_audio) const;
  std::size_t session_length() const;
};

/// Deterministic Fisher-Yates permutation of 0..n-1 from (seed, stream).
std::vector<std::size_t> seeded_permutation(std::uint64_t seed, std::uint64_t stream, std::size_t n);

std::string slot_label(std::size_t slot);

struct Session {
  std::string session_id;
  std::string test_id;
  std::string listener_id;
  std::uint64_t seed = 0;
  /// Screen indices in presentation order.
  std::vector<std::size_t> screen_order;
  /// Per screen index: slot -> stimulus index.
  std::map<std::size_t, std::vector<std::size_t>> slot_order;
  /// Per screen index: slot -> opaque audio token.
  std::map<std::size_t, std::vector<std::string>> tokens;
  std::size_t cursor = 0;

  bool complete() const { return cursor >= screen_order.size(); }
};

/// Session expanded from its seed; identical seeds give identical sessions.
Session derive_session(const TestDefinition& test, std::string session_id, std::string listener_id,
                       std::uint64_t seed);

struct Response {
  std::string session_id;
  std::string screen_id;
  /// MUSHRA: slot -> score. Preference: empty.
  std::map<std::string, int> ratings;
  /// Preference: "A", "B" (slots) or "NP".
  std::string vote;
  std::string timestamp;
};

struct TestRecord {
  TestDefinition definition;
  std::vector<Response> responses;
};

/// Immutable view of the whole service.
struct State {
  std::map<std::string, TestRecord> tests;
  std::map<std::string, Session> sessions;
  struct AudioRef {
    std::string test_id;
    std::string path;
  };
  std::map<std::string, AudioRef> audio;
  /// (test, listener) -> session id, for sessions not yet complete.
  std::map<std::pair<std::string, std::string>, std::string> open;
};

/// Event-sourced store: one append-only JSON-Lines log per test under
/// data_dir. Every mutation is appended and fsync'ed before it is applied
/// to a fresh snapshot. Readers take the current snapshot without blocking
/// the writer.
class Store {
 public:
  explicit Store(std::filesystem::path data_dir, double alpha = 0.01);

  std::string create_test(TestDefinition definition);
  Json open_session(const std::string& test_id, const std::string& listener_id);
  Json next_screen(const std::string& session_id) const;
  Json submit(const std::string& session_id, const std::string& screen_id, const Json& body);

  std::optional<std::string> audio_path(const std::string& token) const;

  RatingsTable ratings(const std::string& test_id) const;
  PreferenceTable preferences(const std::string& test_id) const;
  Json report(const std::string& test_id) const;
  std::string export_csv(const std::string& test_id) const;

  std::shared_ptr<const State> snapshot() const;

 private:
  void replay(const std::filesystem::path& log);
  void append_and_apply(const std::string& test_id, const Json& event);
  std::filesystem::path log_path(const std::string& test_id) const;

  std::filesystem::path data_dir_;
  double alpha_;
  std::mutex writer_;
  mutable std::shared_mutex snapshot_mutex_;
  std::shared_ptr<const State> state_;
};

/// Applies one log event to a state. Shared by live writes and replay.
void apply_event(State& state, const Json& event);

/// Blocking HTTP/1.1 server; returns when stop() is called from another thread.
class HttpServer {
 public:
  explicit HttpServer(Store& store);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds and serves. port 0 picks a free port (see bound_port()).
  void listen(const std::string& host, int port);
  int bind(const std::string& host, int port);
  void serve_bound();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace prosody_eval::service
