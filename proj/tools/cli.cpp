// tools/cli.cpp

// Copyright 2026  The CDI Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "cli.hpp"

#include <signal.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "cdi/corpus.hpp"
#include "cdi/discovery.hpp"
#include "cdi/error.hpp"
#include "cdi/pipeline.hpp"
#include "cdi/serialization.hpp"
#include "service.hpp"

namespace cdi {

namespace fs = std::filesystem;

namespace {

std::string Format(const char *fmt, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

// Desk-scale defaults for the command line; the library defaults follow
// the transformer-sized setup and are far slower on a CPU.
PipelineConfig DeskPipeline() {
  PipelineConfig p;
  p.train.epochs = 3;
  p.stage2_max_rounds = 3;
  p.kmeans_restarts = 3;
  return p;
}
constexpr std::size_t kDeskHiddenDim = 128;

struct CorpusArgs {
  std::string dir;
  std::string dataset;
  std::string embeddings;

  void Add(CLI::App *cmd) {
    cmd->add_option("--corpus", dir, "Directory holding dataset.jsonl and embeddings.cdie");
    cmd->add_option("--dataset", dataset, "JSONL dataset (id, text, optional label)");
    cmd->add_option("--embeddings", embeddings, "CDIE embedding file");
  }

  Corpus Load() const {
    fs::path d = dataset, e = embeddings;
    if (!dir.empty()) {
      if (d.empty()) d = fs::path(dir) / "dataset.jsonl";
      if (e.empty()) e = fs::path(dir) / "embeddings.cdie";
    }
    if (d.empty() || e.empty()) throw Error(ErrorCode::kInvalidArgument, "give --corpus DIR or --dataset and --embeddings");
    return LoadCorpus(d, e);
  }
};

// Shared model/training flags. Unset flags leave the config file (or the
// desk defaults) untouched.
struct TrainingArgs {
  std::string config_path;
  std::optional<std::size_t> hidden_dim, epochs, ucl_epochs, stage1_epochs, stage2_epochs, stage2_rounds,
      kmeans_restarts, batch_size;
  std::optional<double> lambda, tau, learning_rate, dropout;

  void Add(CLI::App *cmd) {
    cmd->add_option("--config", config_path, "JSON config file; flags override it");
    cmd->add_option("--hidden-dim", hidden_dim, "Encoder width");
    cmd->add_option("--epochs", epochs, "Epochs per stage (default for all stages)");
    cmd->add_option("--ucl-epochs", ucl_epochs);
    cmd->add_option("--stage1-epochs", stage1_epochs);
    cmd->add_option("--stage2-epochs", stage2_epochs, "Epochs per stage-2 clustering round");
    cmd->add_option("--stage2-rounds", stage2_rounds, "Maximum stage-2 clustering rounds");
    cmd->add_option("--kmeans-restarts", kmeans_restarts);
    cmd->add_option("--batch-size", batch_size);
    cmd->add_option("--lambda", lambda, "LwF weight");
    cmd->add_option("--tau", tau, "Contrastive temperature");
    cmd->add_option("--lr", learning_rate, "Adam learning rate");
    cmd->add_option("--dropout", dropout, "Input dropout rate");
  }

  Json File() const {
    if (config_path.empty()) return Json::object();
    std::ifstream in(config_path);
    if (!in) throw Error(ErrorCode::kIo, "cannot read config " + config_path);
    try {
      Json j = Json::parse(in);
      if (!j.is_object()) throw Error(ErrorCode::kParse, "config must be a JSON object");
      return j;
    } catch (const nlohmann::json::exception &e) {
      throw Error(ErrorCode::kParse, "config " + config_path + ": " + e.what());
    }
  }

  void Apply(PipelineConfig &p, std::size_t &hidden, double &dropout_rate) const {
    if (hidden_dim) hidden = *hidden_dim;
    if (dropout) dropout_rate = *dropout;
    if (epochs) p.train.epochs = *epochs;
    if (ucl_epochs) p.ucl_epochs = *ucl_epochs;
    if (stage1_epochs) p.stage1_epochs = *stage1_epochs;
    if (stage2_epochs) p.stage2_epochs = *stage2_epochs;
    if (stage2_rounds) p.stage2_max_rounds = *stage2_rounds;
    if (kmeans_restarts) p.kmeans_restarts = *kmeans_restarts;
    if (batch_size) p.train.batch_size = *batch_size;
    if (lambda) p.train.lambda = *lambda;
    if (tau) p.train.tau = *tau;
    if (learning_rate) p.train.learning_rate = *learning_rate;
  }
};

std::string Pct(double v) { return std::isfinite(v) ? Format("%6.2f", 100.0 * v) : std::string("   nan"); }

// ---- synth --------------------------------------------------------------------

int Synth(const BlobSpec &spec, const std::string &out_dir, std::ostream &out) {
  const Corpus corpus = MakeSyntheticBlobs(spec);
  fs::create_directories(out_dir);
  SaveCorpus(corpus, fs::path(out_dir) / "dataset.jsonl", fs::path(out_dir) / "embeddings.cdie");
  out << "wrote " << corpus.size() << " utterances (" << corpus.vocab().size() << " intents, dim " << corpus.dim()
      << ") to " << out_dir << "\n";
  return 0;
}

// ---- ingest -------------------------------------------------------------------

std::string ReadFile(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int Ingest(const CorpusArgs &args, const std::string &store, bool json, std::ostream &out) {
  const Corpus corpus = args.Load();  // validates
  fs::path d = args.dataset.empty() ? fs::path(args.dir) / "dataset.jsonl" : fs::path(args.dataset);
  fs::path e = args.embeddings.empty() ? fs::path(args.dir) / "embeddings.cdie" : fs::path(args.embeddings);
  const std::string id = RegisterCorpus(store, ReadFile(d), ReadFile(e));
  if (json) {
    out << Json({{"corpus_id", id},
                 {"fingerprint", corpus.Fingerprint()},
                 {"size", corpus.size()},
                 {"dim", corpus.dim()},
                 {"gold_intents", corpus.vocab().size()}})
               .dump()
        << "\n";
  } else {
    out << "corpus " << id << ": " << corpus.size() << " utterances, dim " << corpus.dim() << ", "
        << corpus.vocab().size() << " gold intents\n";
  }
  return 0;
}

// ---- benchmark ----------------------------------------------------------------

int Benchmark(const CorpusArgs &cargs, const TrainingArgs &targs, double known_ratio, double labeled_frac,
              std::optional<double> test_fraction, const std::vector<std::uint64_t> &seeds, bool json,
              const std::string &run_log, std::ostream &out) {
  const Corpus corpus = cargs.Load();
  ExperimentConfig cfg;
  cfg.pipeline = DeskPipeline();
  cfg.hidden_dim = kDeskHiddenDim;
  const Json file = targs.File();
  if (auto it = file.find("pipeline"); it != file.end()) FromJson(*it, cfg.pipeline);
  if (auto it = file.find("hidden_dim"); it != file.end()) cfg.hidden_dim = it->get<std::size_t>();
  if (auto it = file.find("dropout_rate"); it != file.end()) cfg.dropout_rate = it->get<double>();
  if (auto it = file.find("test_fraction"); it != file.end()) cfg.test_fraction = it->get<double>();
  targs.Apply(cfg.pipeline, cfg.hidden_dim, cfg.dropout_rate);
  cfg.known_ratio = known_ratio;
  cfg.labeled_fraction = labeled_frac;
  if (test_fraction) cfg.test_fraction = *test_fraction;
  if (!(known_ratio > 0.0 && known_ratio <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "--known-ratio must be in (0, 1]");
  if (!(labeled_frac > 0.0 && labeled_frac <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "--labeled-frac must be in (0, 1]");
  if (seeds.empty()) throw Error(ErrorCode::kInvalidArgument, "--seeds needs at least one seed");

  std::vector<ExperimentResult> results;
  for (std::uint64_t s : seeds) results.push_back(RunKnownRatioExperiment(corpus, cfg, s));

  if (!run_log.empty()) {
    // One line per stage and seed.
    std::ofstream log(run_log, std::ios::trunc);
    if (!log) throw Error(ErrorCode::kIo, "cannot write " + run_log);
    for (const auto &r : results)
      for (const auto &report : r.reports)
        log << Json({{"seed", r.seed},
                     {"known_ratio", known_ratio},
                     {"labeled_fraction", labeled_frac},
                     {"test_fraction", cfg.test_fraction},
                     {"hidden_dim", cfg.hidden_dim},
                     {"dropout_rate", cfg.dropout_rate},
                     {"pipeline", ToJson(cfg.pipeline)},
                     {"report", ToJson(report)}})
                   .dump()
            << "\n";
    if (!log) throw Error(ErrorCode::kIo, "short write to " + run_log);
  }

  ClusteringScores m1{}, m2{};
  for (const auto &r : results) {
    m1.acc += r.stage1.acc, m1.ari += r.stage1.ari, m1.nmi += r.stage1.nmi;
    m2.acc += r.stage2.acc, m2.ari += r.stage2.ari, m2.nmi += r.stage2.nmi;
  }
  const double n = static_cast<double>(results.size());
  for (auto *m : {&m1, &m2}) m->acc /= n, m->ari /= n, m->nmi /= n;

  if (json) {
    Json runs = Json::array();
    for (const auto &r : results)
      runs.push_back({{"seed", r.seed},
                      {"k", r.k},
                      {"known_intents", r.known_intents},
                      {"labeled_count", r.labeled_count},
                      {"stage1", ToJson(r.stage1)},
                      {"stage2", ToJson(r.stage2)}});
    out << Json({{"known_ratio", known_ratio},
                 {"labeled_fraction", labeled_frac},
                 {"runs", std::move(runs)},
                 {"mean", {{"stage1", ToJson(m1)}, {"stage2", ToJson(m2)}}}})
               .dump(2)
        << "\n";
    return 0;
  }
  out << Format("known ratio %.2f, labeled fraction %.2f, K = %zu\n", known_ratio, labeled_frac,
                results.front().k);
  out << "  seed |  S1 ACC  S1 ARI  S1 NMI |  S2 ACC  S2 ARI  S2 NMI\n";
  out << "-------+--------------------------+--------------------------\n";
  auto row = [&](const std::string &name, const ClusteringScores &a, const ClusteringScores &b) {
    out << Format("%6s |  ", name.c_str()) << Pct(a.acc) << "  " << Pct(a.ari) << "  " << Pct(a.nmi) << " |  "
        << Pct(b.acc) << "  " << Pct(b.ari) << "  " << Pct(b.nmi) << "\n";
  };
  for (const auto &r : results) row(std::to_string(r.seed), r.stage1, r.stage2);
  out << "-------+--------------------------+--------------------------\n";
  row("mean", m1, m2);
  return 0;
}

// ---- discover -----------------------------------------------------------------

struct DiscoverArgs {
  bool oracle = false;
  std::optional<double> gamma_first, gamma_rest, top_fraction;
  std::optional<std::size_t> top_window, k_prime, fixed_k, max_iterations;
  std::uint64_t seed = 0;
  std::string events_path;
  bool json = false;
};

int Discover(const CorpusArgs &cargs, const TrainingArgs &targs, const DiscoverArgs &a, std::ostream &out,
             std::ostream &err) {
  if (!a.oracle) {
    err << "discover runs the simulated oracle; pass --oracle (use `cdi serve` for interactive sessions)\n";
    return 2;
  }
  auto corpus = std::make_shared<const Corpus>(cargs.Load());
  DiscoveryConfig cfg;
  cfg.pipeline = DeskPipeline();
  cfg.hidden_dim = kDeskHiddenDim;
  FromJson(targs.File(), cfg);
  targs.Apply(cfg.pipeline, cfg.hidden_dim, cfg.dropout_rate);
  cfg.mode = DiscoveryMode::kOracle;
  cfg.seed = a.seed;
  if (a.gamma_first) cfg.gamma_first = *a.gamma_first;
  if (a.gamma_rest) cfg.gamma_rest = *a.gamma_rest;
  if (a.top_fraction) cfg.top_fraction = *a.top_fraction;
  if (a.top_window) cfg.top_window = *a.top_window;
  if (a.k_prime) cfg.k_prime = *a.k_prime;
  if (a.fixed_k) cfg.fixed_k = *a.fixed_k;
  if (a.max_iterations) cfg.max_iterations = *a.max_iterations;

  std::optional<fs::path> log;
  if (!a.events_path.empty()) {
    log = a.events_path;
    if (fs::exists(*log)) fs::remove(*log);
  }
  DiscoverySession session = DiscoverySession::Create(corpus, cfg, log);
  const OracleRunResult r = RunOracleDiscovery(session);

  if (a.json) {
    Json hist = Json::array();
    for (const auto &h : r.history) hist.push_back(ToJson(h));
    out << Json({{"k_1", session.state().k_history.front()},
                 {"iterations", r.iterations},
                 {"discovered", r.discovered},
                 {"gold_intents", r.gold_intents},
                 {"termination_reason", r.termination_reason},
                 {"pure", r.pure},
                 {"final", r.final_scores ? ToJson(*r.final_scores) : Json(nullptr)},
                 {"digest", StateDigest(session.state())},
                 {"history", std::move(hist)}})
               .dump(2)
        << "\n";
  } else {
    out << "iter |    k | |I| | labeled% |    ACC    ARI    NMI\n";
    out << "-----+------+-----+----------+----------------------\n";
    for (const auto &h : r.history) {
      const ClusteringScores s = h.stage2.value_or(ClusteringScores{NAN, NAN, NAN});
      out << Format("%4zu | %4zu | %3zu |   ", h.iteration, h.k, h.num_intents) << Pct(h.labeled_fraction)
          << " | " << Pct(s.acc) << " " << Pct(s.ari) << " " << Pct(s.nmi) << "\n";
    }
    out << "discovered " << r.discovered << "/" << r.gold_intents << " intents in " << r.iterations
        << " iteration(s): " << r.termination_reason << "\n";
    if (r.final_scores)
      out << "final ACC " << Pct(r.final_scores->acc) << "  ARI " << Pct(r.final_scores->ari) << "  NMI "
          << Pct(r.final_scores->nmi) << "\n";
    out << "state digest " << StateDigest(session.state()) << "\n";
  }
  if (!r.pure) {
    err << "oracle purity violated: a sample was labeled with a non-gold intent\n";
    return 3;
  }
  return 0;
}

// ---- replay -------------------------------------------------------------------

int Replay(const CorpusArgs &cargs, const std::string &events_path, std::ostream &out) {
  auto corpus = std::make_shared<const Corpus>(cargs.Load());
  const auto events = EventLog::Read(events_path);
  const DiscoverySession session = DiscoverySession::Replay(corpus, events);
  out << "replayed " << events.size() << " events; iteration " << session.state().iteration << ", "
      << session.state().intents.size() << " intents, status " << StatusName(session.state().status) << "\n";
  out << "state digest " << StateDigest(session.state()) << "\n";
  return 0;
}

// ---- serve --------------------------------------------------------------------

int Serve(const std::string &store, const std::string &host, int port, std::ostream &out) {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  Service service(store);
  const int bound = service.Bind(host, port);
  out << "listening on http://" << host << ":" << bound << " (store " << store << ")" << std::endl;
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    service.Stop();
  });
  service.Listen();
  // Wake the waiter if the server stopped for another reason.
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return 0;
}

std::string DefaultStore() {
  const char *env = std::getenv("CDI_STORE");
  return env && *env ? env : "cdi-store";
}

}  // namespace

int RunCli(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
  CLI::App app{"Controllable intent discovery: clustering, training and a labeling service", "cdi"};
  app.require_subcommand(1);

  BlobSpec blob;
  blob.n = 1600;
  blob.k = 16;
  blob.dim = 64;
  blob.separation = 6.0;
  std::string synth_out;
  auto *synth = app.add_subcommand("synth", "Write a synthetic Gaussian-blob corpus");
  synth->add_option("--n", blob.n, "Utterances")->capture_default_str();
  synth->add_option("--k", blob.k, "Intents")->capture_default_str();
  synth->add_option("--dim", blob.dim, "Embedding dimension")->capture_default_str();
  synth->add_option("--separation", blob.separation, "Radius of the center sphere")->capture_default_str();
  synth->add_option("--noise", blob.noise_sigma, "Per-coordinate noise sigma")->capture_default_str();
  synth->add_option("--seed", blob.seed)->capture_default_str();
  synth->add_option("--out", synth_out, "Output directory")->required();

  CorpusArgs ingest_corpus;
  std::string store = DefaultStore();
  bool ingest_json = false;
  auto *ingest = app.add_subcommand("ingest", "Validate a corpus and register it in the store");
  ingest_corpus.Add(ingest);
  ingest->add_option("--store", store, "Store directory (env CDI_STORE)")->capture_default_str();
  ingest->add_flag("--json", ingest_json);

  CorpusArgs bench_corpus;
  TrainingArgs bench_train;
  double known_ratio = 0.5, labeled_frac = 0.1;
  std::optional<double> test_fraction;
  std::vector<std::uint64_t> seeds{0};
  bool bench_json = false;
  std::string run_log;
  auto *bench = app.add_subcommand("benchmark", "Known-ratio protocol: UCL, stage 1, stage 2 with gold K");
  bench_corpus.Add(bench);
  bench_train.Add(bench);
  bench->add_option("--known-ratio", known_ratio, "Share of intents revealed")->capture_default_str();
  bench->add_option("--labeled-frac", labeled_frac, "Share of known-intent utterances labeled")->capture_default_str();
  bench->add_option("--test-fraction", test_fraction, "Held-out evaluation share (default 0.2)");
  bench->add_option("--seeds", seeds, "Comma-separated seeds")->delimiter(',')->capture_default_str();
  bench->add_flag("--json", bench_json, "Print JSON instead of a table");
  bench->add_option("--run-log", run_log, "Write per-stage reports as JSON lines");

  CorpusArgs disc_corpus;
  TrainingArgs disc_train;
  DiscoverArgs disc;
  auto *discover = app.add_subcommand("discover", "Run the discovery loop with a simulated oracle");
  disc_corpus.Add(discover);
  disc_train.Add(discover);
  discover->add_flag("--oracle", disc.oracle, "Answer feedback from gold labels");
  discover->add_option("--gamma-first", disc.gamma_first, "Confidence threshold on iteration 1 (default 0.75)");
  discover->add_option("--gamma-rest", disc.gamma_rest, "Confidence threshold afterwards (default 0.95)");
  discover->add_option("--top-fraction", disc.top_fraction);
  discover->add_option("--top-window", disc.top_window);
  discover->add_option("--k-prime", disc.k_prime, "Over-clustering size for K estimation (default 200)");
  discover->add_option("--fixed-k", disc.fixed_k, "Skip K estimation");
  discover->add_option("--max-iterations", disc.max_iterations);
  discover->add_option("--seed", disc.seed)->capture_default_str();
  discover->add_option("--events", disc.events_path, "Write the session event log here");
  discover->add_flag("--json", disc.json);

  CorpusArgs replay_corpus;
  std::string replay_events;
  auto *replay = app.add_subcommand("replay", "Rebuild a session from its event log and print its digest");
  replay_corpus.Add(replay);
  replay->add_option("--events", replay_events)->required();

  std::string host = "127.0.0.1";
  int port = 8080;
  std::string serve_store = DefaultStore();
  auto *serve = app.add_subcommand("serve", "Start the HTTP service");
  serve->add_option("--store", serve_store, "Store directory (env CDI_STORE)")->capture_default_str();
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port, "0 picks a free port")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    return app.exit(e, out, err);
  }

  try {
    if (*synth) return Synth(blob, synth_out, out);
    if (*ingest) return Ingest(ingest_corpus, store, ingest_json, out);
    if (*bench)
      return Benchmark(bench_corpus, bench_train, known_ratio, labeled_frac, test_fraction, seeds, bench_json,
                       run_log, out);
    if (*discover) return Discover(disc_corpus, disc_train, disc, out, err);
    if (*replay) return Replay(replay_corpus, replay_events, out);
    if (*serve) return Serve(serve_store, host, port, out);
  } catch (const Error &e) {
    err << "cdi: " << ErrorCodeName(e.code()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception &e) {
    err << "cdi: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace cdi
