#include <CLI11.hpp>

#include <atomic>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <set>
#include <thread>

#include "prosody_eval/cli.hpp"
#include "prosody_eval/csv.hpp"
#include "prosody_eval/report.hpp"
#include "prosody_eval/service.hpp"

namespace prosody_eval {
namespace {

namespace fs = std::filesystem;

struct GlobalOptions {
  std::size_t jobs = 1;
  bool resample = false;
  std::optional<int> sample_rate;
  double hop_ms = 12.5;
  double window_ms = 50.0;
  int n_mels = 80;
  double f0_min = 60.0;
  double f0_max = 400.0;
  double voicing_threshold = 0.15;
};

struct OutputOptions {
  std::string output;
  bool table = false;
};

SpectroConfig spectro_config(const GlobalOptions& g) {
  SpectroConfig c;
  c.window_ms = g.window_ms;
  c.hop_ms = g.hop_ms;
  c.n_mels = g.n_mels;
  return c;
}

PitchConfig pitch_config(const GlobalOptions& g) {
  PitchConfig c;
  c.f0_min = g.f0_min;
  c.f0_max = g.f0_max;
  c.voicing_threshold = g.voicing_threshold;
  return c;
}

AudioBuffer load_audio(const fs::path& path, const GlobalOptions& g) {
  AudioBuffer audio = load_wav(path);
  if (g.sample_rate && audio.sample_rate != *g.sample_rate) {
    if (!g.resample)
      throw Error(path.string() + ": sample rate " + std::to_string(audio.sample_rate) + " Hz differs from --sample-rate " +
                  std::to_string(*g.sample_rate) + " (use --resample)");
    audio = resample_linear(audio, *g.sample_rate);
  }
  return audio;
}

void emit(const Json& doc, const std::string& table, const OutputOptions& o, std::ostream& out) {
  const std::string text = canonical_json(doc);
  if (!o.output.empty()) {
    std::ofstream file(o.output, std::ios::binary);
    if (!file) throw Error("cannot write " + o.output);
    file << text;
  }
  if (o.table) {
    out << table;
  } else if (o.output.empty()) {
    out << text;
  }
}

void add_output_flags(CLI::App* cmd, OutputOptions& o) {
  cmd->add_option("-o,--output", o.output, "Write the JSON report to this file");
  cmd->add_flag("--table", o.table, "Print a fixed-width table instead of JSON");
}

fs::path resolve(const fs::path& base_dir, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

// ---------------------------------------------------------------------------

int cmd_extract(const std::string& input, const std::string& out_dir, bool mel_csv, const GlobalOptions& g,
                std::ostream& out) {
  const AudioBuffer audio = load_audio(input, g);
  const SpectroConfig spectro = spectro_config(g);
  const MelSpectrogram mel = extract_mel_spectrogram(audio, spectro);
  const PitchTrack pitch = extract_pitch(audio, spectro, pitch_config(g));

  const fs::path dir = out_dir.empty() ? fs::path(".") : fs::path(out_dir);
  fs::create_directories(dir);
  const std::string stem = fs::path(input).stem().string();
  const fs::path mel_path = dir / (stem + ".mels");
  const fs::path pitch_path = dir / (stem + ".pitch.csv");
  write_mel_dump(mel_path, mel);
  write_pitch_csv(pitch_path, pitch);
  Json doc{{"input", input},
           {"sample_rate", audio.sample_rate},
           {"frames", mel.num_frames()},
           {"bands", mel.num_bands()},
           {"voiced_frames", pitch.voiced_count()},
           {"mel_path", mel_path.string()},
           {"pitch_path", pitch_path.string()}};
  if (mel_csv) {
    const fs::path csv_path = dir / (stem + ".mel.csv");
    write_mel_csv(csv_path, mel);
    doc["mel_csv_path"] = csv_path.string();
  }
  out << canonical_json(doc);
  return 0;
}

struct ManifestRow {
  std::string utterance_id;
  fs::path reference;
  fs::path prediction;
};

std::vector<ManifestRow> read_manifest(const fs::path& path) {
  const CsvTable csv = read_csv(path, {"utterance_id", "reference_path", "prediction_path"});
  const fs::path base = path.parent_path();
  std::vector<ManifestRow> rows;
  std::set<std::string> ids;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    ManifestRow row{csv.get(r, "utterance_id"), resolve(base, csv.get(r, "reference_path")),
                    resolve(base, csv.get(r, "prediction_path"))};
    if (row.utterance_id.empty()) throw csv.error(r, "utterance_id", "empty utterance id");
    if (!ids.insert(row.utterance_id).second) throw csv.error(r, "utterance_id", "duplicate utterance id " + row.utterance_id);
    rows.push_back(std::move(row));
  }
  return rows;
}

int cmd_compare(const std::string& manifest, std::optional<std::size_t> band, const GlobalOptions& g,
                const OutputOptions& o, std::ostream& out, std::ostream& err) {
  const auto rows = read_manifest(manifest);
  CompareOptions options;
  options.spectro = spectro_config(g);
  options.pitch = pitch_config(g);
  options.resample = g.resample;
  options.dtw.band = band;

  std::vector<UtteranceOutcome> outcomes(rows.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < rows.size(); i = next++) {
      UtteranceOutcome& o = outcomes[i];
      o.utterance_id = rows[i].utterance_id;
      try {
        o.report = compare_utterances(load_audio(rows[i].reference, g), load_audio(rows[i].prediction, g), options);
      } catch (const std::exception& e) {
        o.error = e.what();
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(g.jobs, rows.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::size_t failures = 0;
  for (const auto& oc : outcomes)
    if (!oc.report) {
      ++failures;
      err << "error: " << oc.utterance_id << ": " << oc.error << '\n';
    }
  const Json doc = compare_report_json(outcomes);
  emit(doc, compare_report_table(doc), o, out);
  return failures == 0 ? 0 : 1;
}

int cmd_corpus_stats(const std::vector<std::string>& inputs, const std::string& list, const GlobalOptions& g,
                     const OutputOptions& o, std::ostream& out, std::ostream& err) {
  std::vector<fs::path> paths(inputs.begin(), inputs.end());
  if (!list.empty()) {
    std::ifstream in(list);
    if (!in) throw Error("cannot open " + list);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      paths.push_back(resolve(fs::path(list).parent_path(), line));
    }
  }
  if (paths.empty()) throw Error("corpus-stats: no input files");
  std::sort(paths.begin(), paths.end());

  const SpectroConfig spectro = spectro_config(g);
  const PitchConfig pitch = pitch_config(g);
  std::vector<PitchTrack> tracks;
  Json utterances = Json::array();
  int status = 0;
  for (const auto& p : paths) {
    try {
      PitchTrack track = extract_pitch(load_audio(p, g), spectro, pitch);
      Json row{{"path", p.string()}, {"voiced_frames", track.voiced_count()}};
      if (track.voiced_count() >= 2) {
        const Lf0Stats s = utterance_lf0_stats(track);
        row["lf0_variance"] = s.variance;
        row["lf0_range"] = s.range;
      } else {
        row["lf0_variance"] = nullptr;
        row["lf0_range"] = nullptr;
      }
      utterances.push_back(std::move(row));
      tracks.push_back(std::move(track));
    } catch (const std::exception& e) {
      err << "error: " << p.string() << ": " << e.what() << '\n';
      utterances.push_back(Json{{"path", p.string()}, {"error", e.what()}});
      status = 1;
    }
  }
  Json doc = corpus_stats_json(corpus_prosody_stats(tracks));
  doc["utterances"] = std::move(utterances);
  char table[256];
  std::snprintf(table, sizeof table, "%-20s %10s %10s %6s\n%-20s %10.4f %10.4f %6zu\n", "Corpus", "Variance", "Range",
                "N", "lf0", doc["mean_lf0_variance"].get<double>(), doc["mean_lf0_range"].get<double>(),
                doc["n_utterances"].get<std::size_t>());
  emit(doc, table, o, out);
  return status;
}

int cmd_tempo(const std::string& manifest, const OutputOptions& o, std::ostream& out) {
  const auto records = read_tempo_manifest(manifest);
  const Json doc = tempo_json(records);
  char table[128];
  std::snprintf(table, sizeof table, "speech tempo: %.2f phonemes/s over %zu utterances\n",
                doc["speech_tempo"].get<double>(), records.size());
  emit(doc, table, o, out);
  return 0;
}

int cmd_mushra_report(const std::string& ratings, const MushraReportOptions& options, const OutputOptions& o,
                      std::ostream& out) {
  const RatingsTable table = RatingsTable::read_csv(ratings);
  const Json doc = mushra_report_json(table, options);
  emit(doc, mushra_report_table(doc), o, out);
  return 0;
}

int cmd_pref_report(const std::string& prefs, const PreferenceLabels& labels, const OutputOptions& o,
                    std::ostream& out) {
  const PreferenceTable table = PreferenceTable::read_csv(prefs);
  const Json doc = preference_report_json(table, labels);
  emit(doc, preference_report_table(doc), o, out);
  return 0;
}

std::mutex g_server_mutex;
service::HttpServer* g_server = nullptr;
std::atomic<bool> g_stop_requested{false};

int cmd_serve(const std::string& host, int port, const std::string& data_dir, double alpha, std::ostream& out) {
  service::Store store(data_dir, alpha);
  service::HttpServer server(store);
  const int bound = server.bind(host, port);
  {
    std::lock_guard lock(g_server_mutex);
    g_server = &server;
  }
  out << "listening on " << host << ':' << bound << std::endl;
  if (!g_stop_requested) server.serve_bound();
  std::lock_guard lock(g_server_mutex);
  g_server = nullptr;
  return 0;
}

}  // namespace

bool request_server_stop() {
  g_stop_requested = true;
  std::lock_guard lock(g_server_mutex);
  if (!g_server) return false;
  g_server->stop();
  return true;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Objective and subjective evaluation toolkit for synthesised speech", "prosody_eval"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML file mirroring the command-line flags")->envname("PROSODY_EVAL_CONFIG");

  GlobalOptions g;
  int sample_rate = 0;
  app.add_option("--jobs", g.jobs, "Parallel utterance workers")->check(CLI::PositiveNumber);
  app.add_flag("--resample", g.resample, "Resample mismatched audio with linear interpolation");
  app.add_option("--sample-rate", sample_rate, "Expected sample rate in Hz (target when resampling)");
  app.add_option("--hop-ms", g.hop_ms, "Frame hop in ms");
  app.add_option("--window-ms", g.window_ms, "Analysis window in ms");
  app.add_option("--n-mels", g.n_mels, "Mel bands");
  app.add_option("--f0-min", g.f0_min, "Lowest f0 searched (Hz)");
  app.add_option("--f0-max", g.f0_max, "Highest f0 searched (Hz)");
  app.add_option("--voicing-threshold", g.voicing_threshold, "CMND threshold for voicing");

  // extract
  auto* extract = app.add_subcommand("extract", "Write mel-spectrogram and pitch dumps for one WAV file");
  std::string extract_input;
  std::string extract_dir;
  bool extract_csv = false;
  extract->add_option("audio", extract_input, "Input WAV (16-bit PCM mono)")->required();
  extract->add_option("--out-dir", extract_dir, "Directory for the feature files");
  extract->add_flag("--mel-csv", extract_csv, "Also write the mel matrix as CSV");

  // compare
  auto* compare = app.add_subcommand("compare", "Objective metrics over a manifest of reference/prediction pairs");
  std::string manifest;
  std::size_t band = 0;
  OutputOptions compare_out;
  compare->add_option("manifest", manifest, "CSV: utterance_id,reference_path,prediction_path")->required();
  compare->add_option("--band", band, "Sakoe-Chiba band half-width in frames (0 = unconstrained)");
  add_output_flags(compare, compare_out);

  // corpus-stats
  auto* corpus = app.add_subcommand("corpus-stats", "Mean per-utterance lf0 variance and range");
  std::vector<std::string> corpus_inputs;
  std::string corpus_list;
  OutputOptions corpus_out;
  corpus->add_option("audio", corpus_inputs, "WAV files");
  corpus->add_option("--list", corpus_list, "Text file with one WAV path per line");
  add_output_flags(corpus, corpus_out);

  // tempo
  auto* tempo = app.add_subcommand("tempo", "Average phonemes per second");
  std::string tempo_manifest;
  OutputOptions tempo_out;
  tempo->add_option("manifest", tempo_manifest, "CSV: utterance_id,phoneme_count,duration_s")->required();
  add_output_flags(tempo, tempo_out);

  // mushra-report
  auto* mushra = app.add_subcommand("mushra-report", "Summaries, pairwise tests and gap closure for MUSHRA ratings");
  std::string ratings_path;
  MushraReportOptions mushra_opts;
  std::string topline;
  std::string pairing = "cell";
  OutputOptions mushra_out;
  mushra->add_option("ratings", ratings_path, "CSV: listener_id,screen_id,system_id,score")->required();
  mushra->add_option("--alpha", mushra_opts.alpha, "Family-wise significance level")->check(CLI::Range(1e-12, 0.999999));
  mushra->add_option("--topline", topline, "System treated as the 100% end of gap closure");
  mushra->add_option("--baseline", mushra_opts.baselines, "Gap-closure baseline system (repeatable)");
  mushra->add_option("--pairing", pairing, "Pairing unit for the tests")->check(CLI::IsMember({"cell", "listener"}));
  add_output_flags(mushra, mushra_out);

  // pref-report
  auto* pref = app.add_subcommand("pref-report", "Vote shares and binomial test for an A/B/NP preference test");
  std::string prefs_path;
  PreferenceLabels labels;
  OutputOptions pref_out;
  pref->add_option("votes", prefs_path, "CSV: listener_id,item_id,vote")->required();
  pref->add_option("--label-a", labels.a, "Display name for option A");
  pref->add_option("--label-b", labels.b, "Display name for option B");
  add_output_flags(pref, pref_out);

  // serve
  auto* serve = app.add_subcommand("serve", "Run the listening-test service");
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string data_dir = "mushra-data";
  double serve_alpha = 0.01;
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "TCP port (0 picks a free one)");
  serve->add_option("--data-dir", data_dir, "Directory holding the event logs");
  serve->add_option("--alpha", serve_alpha, "Significance level used in reports");

  std::vector<const char*> argv{"prosody_eval"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  if (sample_rate > 0) g.sample_rate = sample_rate;
  mushra_opts.pairing = pairing == "listener" ? Pairing::kListenerMean : Pairing::kCell;
  if (!topline.empty()) mushra_opts.topline = topline;

  try {
    if (*extract) return cmd_extract(extract_input, extract_dir, extract_csv, g, out);
    if (*compare) return cmd_compare(manifest, band > 0 ? std::optional(band) : std::nullopt, g, compare_out, out, err);
    if (*corpus) return cmd_corpus_stats(corpus_inputs, corpus_list, g, corpus_out, out, err);
    if (*tempo) return cmd_tempo(tempo_manifest, tempo_out, out);
    if (*mushra) return cmd_mushra_report(ratings_path, mushra_opts, mushra_out, out);
    if (*pref) return cmd_pref_report(prefs_path, labels, pref_out, out);
    if (*serve) return cmd_serve(host, port, data_dir, serve_alpha, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}

}  // namespace prosody_eval
