#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "prosody_eval/service.hpp"

namespace prosody_eval::service {
namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t random_u64() {
  static std::mutex mutex;
  static std::random_device device;
  std::lock_guard lock(mutex);
  return (static_cast<std::uint64_t>(device()) << 32) ^ device();
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

bool valid_identifier(const std::string& id) {
  return !id.empty() && id.size() <= 128 &&
         std::all_of(id.begin(), id.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.'; }) &&
         id.front() != '.';
}

ServiceError bad_request(const std::string& code, const std::string& message) {
  return ServiceError(400, code, message);
}

const char* kind_name(TestKind kind) { return kind == TestKind::kMushra ? "mushra" : "preference"; }

std::size_t screen_index(const TestDefinition& test, const std::string& screen_id) {
  for (std::size_t i = 0; i < test.screens.size(); ++i)
    if (test.screens[i].screen_id == screen_id) return i;
  throw ServiceError(404, "unknown_screen", "unknown screen: " + screen_id);
}

void fsync_path(const std::filesystem::path& p, int flags) {
  const int fd = ::open(p.c_str(), flags);
  if (fd < 0) return;
  ::fsync(fd);
  ::close(fd);
}

}  // namespace

// ---------------------------------------------------------------------------
// Test definitions

TestDefinition TestDefinition::from_json(const Json& doc) {
  try {
    TestDefinition def;
    def.test_id = doc.value("test_id", std::string());
    def.name = doc.value("name", std::string());
    const std::string kind = doc.value("kind", std::string("mushra"));
    if (kind == "mushra") {
      def.kind = TestKind::kMushra;
    } else if (kind == "preference") {
      def.kind = TestKind::kPreference;
    } else {
      throw bad_request("invalid_definition", "unknown test kind: " + kind);
    }
    for (const auto& s : doc.at("systems"))
      def.systems.push_back({s.at("system_id").get<std::string>(), s.value("label", std::string())});
    for (const auto& sc : doc.at("screens")) {
      Screen screen;
      screen.screen_id = sc.at("screen_id").get<std::string>();
      screen.utterance_id = sc.value("utterance_id", screen.screen_id);
      for (const auto& st : sc.at("stimuli"))
        screen.stimuli.push_back({st.at("system_id").get<std::string>(), st.at("audio").get<std::string>()});
      def.screens.push_back(std::move(screen));
    }
    if (doc.contains("reference_system_id") && !doc["reference_system_id"].is_null())
      def.reference_system_id = doc["reference_system_id"].get<std::string>();
    def.screens_per_listener = doc.value("screens_per_listener", std::size_t{0});
    def.enforce_reference_100 = doc.value("enforce_reference_100", false);
    return def;
  } catch (const Json::exception& e) {
    throw bad_request("invalid_definition", std::string("malformed test definition: ") + e.what());
  }
}

Json TestDefinition::to_json() const {
  Json systems_json = Json::array();
  for (const auto& s : systems) systems_json.push_back(Json{{"system_id", s.system_id}, {"label", s.label}});
  Json screens_json = Json::array();
  for (const auto& sc : screens) {
    Json stimuli = Json::array();
    for (const auto& st : sc.stimuli) stimuli.push_back(Json{{"system_id", st.system_id}, {"audio", st.audio_path}});
    screens_json.push_back(Json{{"screen_id", sc.screen_id}, {"utterance_id", sc.utterance_id}, {"stimuli", stimuli}});
  }
  return Json{{"test_id", test_id},
              {"name", name},
              {"kind", kind_name(kind)},
              {"systems", systems_json},
              {"screens", screens_json},
              {"reference_system_id", reference_system_id ? Json(*reference_system_id) : Json(nullptr)},
              {"screens_per_listener", screens_per_listener},
              {"enforce_reference_100", enforce_reference_100}};
}

void TestDefinition::validate(bool check_audio) const {
  if (!valid_identifier(test_id)) throw bad_request("invalid_definition", "invalid test_id: '" + test_id + "'");
  if (systems.empty()) throw bad_request("invalid_definition", "test defines no systems");
  if (kind == TestKind::kPreference && systems.size() != 2)
    throw bad_request("invalid_definition", "a preference test needs exactly 2 systems");
  if (kind == TestKind::kMushra && systems.size() < 2)
    throw bad_request("invalid_definition", "a MUSHRA test needs at least 2 systems");
  if (systems.size() > 26) throw bad_request("invalid_definition", "at most 26 systems per screen");
  std::set<std::string> system_ids;
  for (const auto& s : systems) {
    if (s.system_id.empty()) throw bad_request("invalid_definition", "empty system_id");
    if (!system_ids.insert(s.system_id).second)
      throw bad_request("duplicate_id", "duplicate system_id: " + s.system_id);
  }
  if (reference_system_id && !system_ids.contains(*reference_system_id))
    throw bad_request("invalid_definition", "reference system not defined: " + *reference_system_id);
  if (enforce_reference_100 && !reference_system_id)
    throw bad_request("invalid_definition", "enforce_reference_100 requires reference_system_id");
  if (screens.empty()) throw bad_request("invalid_definition", "test defines no screens");
  if (screens_per_listener > screens.size())
    throw bad_request("invalid_definition", "screens_per_listener exceeds the number of screens");

  std::set<std::string> screen_ids;
  for (const auto& sc : screens) {
    if (sc.screen_id.empty()) throw bad_request("invalid_definition", "empty screen_id");
    if (!screen_ids.insert(sc.screen_id).second)
      throw bad_request("duplicate_id", "duplicate screen_id: " + sc.screen_id);
    std::set<std::string> present;
    for (const auto& st : sc.stimuli) {
      if (!system_ids.contains(st.system_id))
        throw bad_request("invalid_definition", "screen " + sc.screen_id + " references unknown system " + st.system_id);
      if (!present.insert(st.system_id).second)
        throw bad_request("invalid_definition", "screen " + sc.screen_id + " has two stimuli for " + st.system_id);
      if (check_audio && !std::filesystem::is_regular_file(st.audio_path))
        throw bad_request("missing_audio", "screen " + sc.screen_id + ": audio not found: " + st.audio_path);
    }
    if (present.size() != system_ids.size())
      throw bad_request("invalid_definition",
                        "screen " + sc.screen_id + " must carry one stimulus per system (" +
                            std::to_string(present.size()) + " of " + std::to_string(system_ids.size()) + ")");
  }
}

std::size_t TestDefinition::session_length() const {
  return screens_per_listener == 0 ? screens.size() : screens_per_listener;
}

// ---------------------------------------------------------------------------
// Sessions

std::vector<std::size_t> seeded_permutation(std::uint64_t seed, std::uint64_t stream, std::size_t n) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  std::uint64_t state = seed ^ (stream * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL);
  for (std::size_t i = n; i > 1; --i) {
    const std::uint64_t bound = i;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t draw;
    do {
      draw = splitmix64(state);
    } while (draw >= limit);
    std::swap(perm[i - 1], perm[static_cast<std::size_t>(draw % bound)]);
  }
  return perm;
}

std::string slot_label(std::size_t slot) { return std::string(1, static_cast<char>('A' + slot)); }

Session derive_session(const TestDefinition& test, std::string session_id, std::string listener_id,
                       std::uint64_t seed) {
  Session s;
  s.session_id = std::move(session_id);
  s.test_id = test.test_id;
  s.listener_id = std::move(listener_id);
  s.seed = seed;
  auto order = seeded_permutation(seed, 0, test.screens.size());
  order.resize(test.session_length());
  s.screen_order = std::move(order);

  std::uint64_t token_state = seed ^ 0xA5A5A5A55A5A5A5AULL;
  for (std::size_t idx : s.screen_order) {
    const std::size_t n = test.screens[idx].stimuli.size();
    s.slot_order[idx] = seeded_permutation(seed, idx + 1, n);
    auto& toks = s.tokens[idx];
    for (std::size_t slot = 0; slot < n; ++slot) {
      const std::uint64_t hi = splitmix64(token_state);
      const std::uint64_t lo = splitmix64(token_state);
      toks.push_back(hex64(hi) + hex64(lo));
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Events

void apply_event(State& state, const Json& event) {
  const std::string type = event.at("type").get<std::string>();
  if (type == "test-created") {
    TestDefinition def = TestDefinition::from_json(event.at("test"));
    def.validate(false);
    if (state.tests.contains(def.test_id)) throw ServiceError(409, "duplicate_id", "test already exists: " + def.test_id);
    const std::string id = def.test_id;
    state.tests.emplace(id, TestRecord{std::move(def), {}});
    return;
  }
  if (type == "session-opened") {
    const std::string test_id = event.at("test_id").get<std::string>();
    const auto& test = state.tests.at(test_id).definition;
    Session s = derive_session(test, event.at("session_id").get<std::string>(),
                               event.at("listener_id").get<std::string>(), event.at("seed").get<std::uint64_t>());
    for (const auto& [idx, toks] : s.tokens) {
      const auto& order = s.slot_order.at(idx);
      for (std::size_t slot = 0; slot < toks.size(); ++slot)
        state.audio[toks[slot]] = {test_id, test.screens[idx].stimuli[order[slot]].audio_path};
    }
    state.open[{test_id, s.listener_id}] = s.session_id;
    const std::string sid = s.session_id;
    state.sessions.emplace(sid, std::move(s));
    return;
  }
  if (type == "response-submitted") {
    Session& s = state.sessions.at(event.at("session_id").get<std::string>());
    TestRecord& test = state.tests.at(s.test_id);
    Response r;
    r.session_id = s.session_id;
    r.screen_id = event.at("screen_id").get<std::string>();
    if (event.contains("ratings")) r.ratings = event["ratings"].get<std::map<std::string, int>>();
    r.vote = event.value("vote", std::string());
    r.timestamp = event.value("timestamp", std::string());
    if (s.complete() || test.definition.screens[s.screen_order[s.cursor]].screen_id != r.screen_id)
      throw Error("event log out of order for session " + s.session_id);
    test.responses.push_back(std::move(r));
    ++s.cursor;
    if (s.complete()) state.open.erase({s.test_id, s.listener_id});
    return;
  }
  throw Error("unknown event type: " + type);
}

// ---------------------------------------------------------------------------
// Store

Store::Store(std::filesystem::path data_dir, double alpha)
    : data_dir_(std::move(data_dir)), alpha_(alpha), state_(std::make_shared<State>()) {
  std::filesystem::create_directories(data_dir_);
  std::vector<std::filesystem::path> logs;
  for (const auto& entry : std::filesystem::directory_iterator(data_dir_))
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") logs.push_back(entry.path());
  std::sort(logs.begin(), logs.end());
  for (const auto& log : logs) replay(log);
}

std::filesystem::path Store::log_path(const std::string& test_id) const { return data_dir_ / (test_id + ".jsonl"); }

void Store::replay(const std::filesystem::path& log) {
  std::ifstream in(log, std::ios::binary);
  const std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  auto next = std::make_shared<State>(*state_);
  std::size_t pos = 0;
  std::size_t good_end = 0;
  while (pos < content.size()) {
    const std::size_t nl = content.find('\n', pos);
    const bool terminated = nl != std::string::npos;
    const std::string line = content.substr(pos, terminated ? nl - pos : std::string::npos);
    const std::size_t end = terminated ? nl + 1 : content.size();
    if (line.empty()) {
      pos = end;
      good_end = end;
      continue;
    }
    Json event;
    try {
      event = Json::parse(line);
    } catch (const Json::exception&) {
      if (terminated && end < content.size())
        throw Error(log.string() + ": corrupt event at byte " + std::to_string(pos));
      break;  // torn final write: the event never happened
    }
    apply_event(*next, event);
    good_end = end;
    pos = end;
  }
  if (good_end == 0) {
    std::filesystem::remove(log);
  } else if (good_end < content.size()) {
    std::filesystem::resize_file(log, good_end);
  } else if (!content.empty() && content.back() != '\n') {
    std::ofstream(log, std::ios::app | std::ios::binary) << '\n';
  }
  std::unique_lock lock(snapshot_mutex_);
  state_ = std::move(next);
}

std::shared_ptr<const State> Store::snapshot() const {
  std::shared_lock lock(snapshot_mutex_);
  return state_;
}

void Store::append_and_apply(const std::string& test_id, const Json& event) {
  // caller holds writer_
  auto next = std::make_shared<State>(*snapshot());
  apply_event(*next, event);

  const auto path = log_path(test_id);
  const bool created = !std::filesystem::exists(path);
  const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT, 0644);
  if (fd < 0) throw ServiceError(500, "storage_error", "cannot open event log " + path.string());
  const std::string line = event.dump() + "\n";
  std::size_t written = 0;
  while (written < line.size()) {
    const ssize_t n = ::write(fd, line.data() + written, line.size() - written);
    if (n <= 0) {
      ::close(fd);
      throw ServiceError(500, "storage_error", "write to event log failed");
    }
    written += static_cast<std::size_t>(n);
  }
  ::fsync(fd);
  ::close(fd);
  if (created) fsync_path(data_dir_, O_RDONLY | O_DIRECTORY);

  std::unique_lock lock(snapshot_mutex_);
  state_ = std::move(next);
}

std::string Store::create_test(TestDefinition definition) {
  std::lock_guard lock(writer_);
  if (definition.test_id.empty()) {
    do {
      definition.test_id = "test-" + hex64(random_u64()).substr(0, 12);
    } while (snapshot()->tests.contains(definition.test_id));
  }
  definition.validate(true);
  if (snapshot()->tests.contains(definition.test_id) || std::filesystem::exists(log_path(definition.test_id)))
    throw ServiceError(409, "duplicate_id", "test already exists: " + definition.test_id);
  const std::string id = definition.test_id;
  append_and_apply(id, Json{{"type", "test-created"}, {"test", definition.to_json()}});
  return id;
}

Json Store::open_session(const std::string& test_id, const std::string& listener_id) {
  std::lock_guard lock(writer_);
  const auto state = snapshot();
  const auto it = state->tests.find(test_id);
  if (it == state->tests.end()) throw ServiceError(404, "unknown_test", "unknown test: " + test_id);
  if (listener_id.empty()) throw bad_request("invalid_listener", "listener_id is required");
  if (state->open.contains({test_id, listener_id}))
    throw ServiceError(409, "session_open", "listener " + listener_id + " already has an open session for " + test_id);

  std::string session_id;
  do {
    session_id = "s-" + hex64(random_u64());
  } while (state->sessions.contains(session_id));
  const std::uint64_t seed = random_u64();
  append_and_apply(test_id, Json{{"type", "session-opened"},
                                 {"test_id", test_id},
                                 {"session_id", session_id},
                                 {"listener_id", listener_id},
                                 {"seed", seed}});
  const auto& def = it->second.definition;
  return Json{{"session_id", session_id},
              {"test_id", test_id},
              {"listener_id", listener_id},
              {"kind", kind_name(def.kind)},
              {"total_screens", def.session_length()}};
}

Json Store::next_screen(const std::string& session_id) const {
  const auto state = snapshot();
  const auto it = state->sessions.find(session_id);
  if (it == state->sessions.end()) throw ServiceError(404, "unknown_session", "unknown session: " + session_id);
  const Session& s = it->second;
  const auto& def = state->tests.at(s.test_id).definition;
  Json out{{"session_id", s.session_id},
           {"kind", kind_name(def.kind)},
           {"total", s.screen_order.size()},
           {"answered", s.cursor},
           {"done", s.complete()}};
  if (s.complete()) return out;
  const std::size_t idx = s.screen_order[s.cursor];
  Json slots = Json::array();
  const auto& toks = s.tokens.at(idx);
  for (std::size_t slot = 0; slot < toks.size(); ++slot)
    slots.push_back(Json{{"slot", slot_label(slot)}, {"audio_url", "/api/audio/" + toks[slot]}});
  out["screen_id"] = def.screens[idx].screen_id;
  out["position"] = s.cursor + 1;
  out["slots"] = std::move(slots);
  if (def.kind == TestKind::kMushra) {
    out["scale"] = Json{{"min", 0}, {"max", 100}};
  } else {
    out["choices"] = Json::array({"A", "B", "NP"});
  }
  return out;
}

Json Store::submit(const std::string& session_id, const std::string& screen_id, const Json& body) {
  std::lock_guard lock(writer_);
  const auto state = snapshot();
  const auto it = state->sessions.find(session_id);
  if (it == state->sessions.end()) throw ServiceError(404, "unknown_session", "unknown session: " + session_id);
  const Session& s = it->second;
  const auto& def = state->tests.at(s.test_id).definition;
  const std::size_t idx = screen_index(def, screen_id);
  const auto pos = std::find(s.screen_order.begin(), s.screen_order.end(), idx);
  if (pos == s.screen_order.end())
    throw ServiceError(404, "unknown_screen", "screen " + screen_id + " is not part of this session");
  const auto position = static_cast<std::size_t>(pos - s.screen_order.begin());
  if (position < s.cursor) throw ServiceError(409, "duplicate", "screen " + screen_id + " was already answered");
  if (position > s.cursor)
    throw ServiceError(409, "out_of_order", "screen " + screen_id + " is not the current screen");

  Json event{{"type", "response-submitted"},
             {"test_id", s.test_id},
             {"session_id", session_id},
             {"screen_id", screen_id},
             {"timestamp", utc_now()}};
  const std::size_t n_slots = def.screens[idx].stimuli.size();
  if (def.kind == TestKind::kMushra) {
    if (!body.is_object() || !body.contains("ratings") || !body["ratings"].is_object())
      throw bad_request("invalid_ratings", "body must contain a ratings object");
    const Json& ratings = body["ratings"];
    Json clean = Json::object();
    for (auto r = ratings.begin(); r != ratings.end(); ++r) {
      const std::string& slot = r.key();
      if (slot.size() != 1 || slot[0] < 'A' || static_cast<std::size_t>(slot[0] - 'A') >= n_slots)
        throw bad_request("invalid_ratings", "unknown slot: " + slot);
      if (!r.value().is_number_integer())
        throw bad_request("invalid_ratings", "rating for slot " + slot + " must be an integer");
      const auto score = r.value().get<long long>();
      if (score < 0 || score > 100)
        throw bad_request("score_out_of_range", "rating " + std::to_string(score) + " for slot " + slot + " outside [0, 100]");
      clean[slot] = static_cast<int>(score);
    }
    if (clean.size() != n_slots)
      throw bad_request("partial_ratings", "expected " + std::to_string(n_slots) + " ratings, got " + std::to_string(clean.size()));
    if (def.enforce_reference_100) {
      const auto& order = s.slot_order.at(idx);
      for (std::size_t slot = 0; slot < n_slots; ++slot)
        if (def.screens[idx].stimuli[order[slot]].system_id == *def.reference_system_id &&
            clean[slot_label(slot)].get<int>() != 100)
          throw bad_request("reference_not_100", "the hidden reference must be rated 100");
    }
    event["ratings"] = std::move(clean);
  } else {
    if (!body.is_object() || !body.contains("vote") || !body["vote"].is_string())
      throw bad_request("invalid_vote", "body must contain a vote");
    const std::string vote = body["vote"].get<std::string>();
    if (vote != "A" && vote != "B" && vote != "NP")
      throw bad_request("invalid_vote", "vote must be A, B or NP, got '" + vote + "'");
    event["vote"] = vote;
  }
  append_and_apply(s.test_id, event);
  return Json{{"accepted", true}, {"screen_id", screen_id}, {"answered", s.cursor + 1},
              {"total", s.screen_order.size()}, {"done", s.cursor + 1 >= s.screen_order.size()}};
}

std::optional<std::string> Store::audio_path(const std::string& token) const {
  const auto state = snapshot();
  const auto it = state->audio.find(token);
  if (it == state->audio.end()) return std::nullopt;
  return it->second.path;
}

namespace {

const TestRecord& find_test(const State& state, const std::string& test_id) {
  const auto it = state.tests.find(test_id);
  if (it == state.tests.end()) throw ServiceError(404, "unknown_test", "unknown test: " + test_id);
  return it->second;
}

}  // namespace

RatingsTable Store::ratings(const std::string& test_id) const {
  const auto state = snapshot();
  const TestRecord& test = find_test(*state, test_id);
  if (test.definition.kind != TestKind::kMushra)
    throw ServiceError(409, "wrong_kind", "test " + test_id + " is not a MUSHRA test");
  RatingsTable table;
  for (const Response& r : test.responses) {
    const Session& s = state->sessions.at(r.session_id);
    const std::size_t idx = screen_index(test.definition, r.screen_id);
    const auto& order = s.slot_order.at(idx);
    for (std::size_t slot = 0; slot < order.size(); ++slot)
      table.rows.push_back({s.listener_id, r.screen_id, test.definition.screens[idx].stimuli[order[slot]].system_id,
                            r.ratings.at(slot_label(slot))});
  }
  return table;
}

PreferenceTable Store::preferences(const std::string& test_id) const {
  const auto state = snapshot();
  const TestRecord& test = find_test(*state, test_id);
  if (test.definition.kind != TestKind::kPreference)
    throw ServiceError(409, "wrong_kind", "test " + test_id + " is not a preference test");
  PreferenceTable table;
  const std::string& first_system = test.definition.systems[0].system_id;
  for (const Response& r : test.responses) {
    const Session& s = state->sessions.at(r.session_id);
    Vote vote = Vote::kNoPreference;
    if (r.vote != "NP") {
      const std::size_t idx = screen_index(test.definition, r.screen_id);
      const std::size_t slot = r.vote == "A" ? 0 : 1;
      const auto& stim = test.definition.screens[idx].stimuli[s.slot_order.at(idx)[slot]];
      vote = stim.system_id == first_system ? Vote::kA : Vote::kB;
    }
    table.rows.push_back({s.listener_id, r.screen_id, vote});
  }
  return table;
}

Json Store::report(const std::string& test_id) const {
  const auto state = snapshot();
  const TestRecord& test = find_test(*state, test_id);
  if (test.responses.empty()) throw ServiceError(409, "no_responses", "no responses");
  if (test.definition.kind == TestKind::kMushra) {
    MushraReportOptions options;
    options.alpha = alpha_;
    options.topline = test.definition.reference_system_id;
    return mushra_report_json(ratings(test_id), options);
  }
  const PreferenceTable prefs = preferences(test_id);
  if (std::all_of(prefs.rows.begin(), prefs.rows.end(), [](const auto& v) { return v.vote == Vote::kNoPreference; }))
    throw ServiceError(409, "insufficient_data", "every vote is NP");
  return preference_report_json(prefs, {test.definition.systems[0].system_id, test.definition.systems[1].system_id});
}

std::string Store::export_csv(const std::string& test_id) const {
  const auto state = snapshot();
  const TestRecord& test = find_test(*state, test_id);
  std::ostringstream out;
  if (test.definition.kind == TestKind::kMushra) {
    ratings(test_id).write_csv(out);
  } else {
    preferences(test_id).write_csv(out);
  }
  return out.str();
}

}  // namespace prosody_eval::service
