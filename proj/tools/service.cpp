// tools/service.cpp

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

#include "service.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <thread>
#include <vector>

#include "cdi/discovery.hpp"
#include "cdi/encoder.hpp"
#include "cdi/error.hpp"
#include "cdi/serialization.hpp"
#include "httplib.h"

namespace cdi {

namespace fs = std::filesystem;

namespace {

std::string ReadText(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Write-then-rename so readers never see a partial file.
void WriteAtomic(const fs::path &path, std::string_view bytes) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string NowUtc() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string RandomId() {
  std::random_device rd;
  std::uniform_int_distribution<std::uint64_t> dist;
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(dist(rd)));
  return buf;
}

bool ValidId(const std::string &id) {
  return !id.empty() && id.size() <= 64 &&
         std::all_of(id.begin(), id.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)); });
}

int HttpStatus(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound:
      return 404;
    case ErrorCode::kInvalidFeedback:
      return 422;
    case ErrorCode::kConflict:
    case ErrorCode::kInvalidState:
      return 409;
    case ErrorCode::kIo:
      return 500;
    default:
      return 400;
  }
}

void Reply(httplib::Response &res, int status, const Json &body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void ReplyError(httplib::Response &res, int status, std::string_view code, const std::string &message) {
  Reply(res, status, {{"error", code}, {"message", message}});
}

Json ParseBody(const httplib::Request &req) {
  if (req.body.empty()) return Json::object();
  try {
    Json j = Json::parse(req.body);
    if (!j.is_object()) throw Error(ErrorCode::kParse, "request body must be a JSON object");
    return j;
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::kParse, std::string("malformed JSON body: ") + e.what());
  }
}

struct Job {
  std::string id;
  std::string session_id;
  std::string request_id;
  std::string status = "queued";  // queued, running, succeeded, failed
  Json result = Json::object();
  std::string error;
};

Json JobView(const Job &job) {
  Json j = {{"job_id", job.id}, {"session_id", job.session_id}, {"status", job.status}};
  if (!job.request_id.empty()) j["request_id"] = job.request_id;
  for (const auto &[k, v] : job.result.items()) j[k] = v;
  if (!job.error.empty()) j["error"] = job.error;
  return j;
}

struct Slot {
  std::string id;
  fs::path dir;
  Json handle;

  std::mutex mu;  // guards everything below
  bool busy = false;  // an iteration is training
  std::optional<DiscoverySession> session;
  Json summary_view;  // published for readers while busy
  Json history_view;
};

Json HistoryView(const SessionState &state) {
  Json records = Json::array();
  for (const auto &r : state.history) records.push_back(ToJson(r));
  return records;
}

}  // namespace

std::string RegisterCorpus(const fs::path &store, std::string_view dataset_jsonl, std::string_view cdie_bytes) {
  const Corpus corpus = LoadCorpusFromMemory(dataset_jsonl, cdie_bytes);
  const std::string fingerprint = corpus.Fingerprint();
  const std::string id = fingerprint.substr(0, 16);
  const fs::path dir = store / "corpora" / id;
  fs::create_directories(dir);
  if (!fs::exists(dir / "meta.json")) {
    WriteAtomic(dir / "dataset.jsonl", dataset_jsonl);
    WriteAtomic(dir / "embeddings.cdie", cdie_bytes);
    const Json meta = {{"corpus_id", id},
                       {"fingerprint", fingerprint},
                       {"size", corpus.size()},
                       {"dim", corpus.dim()},
                       {"gold_intents", corpus.vocab().size()},
                       {"created_at", NowUtc()}};
    WriteAtomic(dir / "meta.json", meta.dump(2));
  }
  return id;
}

std::shared_ptr<const Corpus> LoadStoredCorpus(const fs::path &store, const std::string &corpus_id) {
  if (!ValidId(corpus_id)) throw Error(ErrorCode::kNotFound, "unknown corpus '" + corpus_id + "'");
  const fs::path dir = store / "corpora" / corpus_id;
  if (!fs::exists(dir / "meta.json")) throw Error(ErrorCode::kNotFound, "unknown corpus '" + corpus_id + "'");
  return std::make_shared<const Corpus>(LoadCorpus(dir / "dataset.jsonl", dir / "embeddings.cdie"));
}

class Service::Impl {
 public:
  explicit Impl(fs::path store) : store_(std::move(store)) {
    fs::create_directories(store_ / "corpora");
    fs::create_directories(store_ / "sessions");
    for (const auto &entry : fs::directory_iterator(store_ / "sessions")) {
      if (!entry.is_directory()) continue;
      const fs::path dir = entry.path();
      // A session whose init event never reached disk does not exist.
      if (!fs::exists(dir / "handle.json") || !fs::exists(dir / "events.jsonl") ||
          fs::file_size(dir / "events.jsonl") == 0)
        continue;
      auto slot = std::make_shared<Slot>();
      slot->id = dir.filename().string();
      slot->dir = dir;
      slot->handle = Json::parse(ReadText(dir / "handle.json"));
      slots_[slot->id] = slot;
    }
    Routes();
  }

  ~Impl() {
    Stop();
    std::vector<std::thread> threads;
    {
      std::lock_guard lk(jobs_mu_);
      threads.swap(threads_);
    }
    for (auto &t : threads) t.join();
  }

  int Bind(const std::string &host, int port) {
    if (port == 0) {
      const int bound = server_.bind_to_any_port(host);
      if (bound < 0) throw Error(ErrorCode::kIo, "cannot bind " + host);
      return bound;
    }
    if (!server_.bind_to_port(host, port))
      throw Error(ErrorCode::kIo, "cannot bind " + host + ":" + std::to_string(port));
    return port;
  }

  void Listen() { server_.listen_after_bind(); }
  void Stop() { server_.stop(); }

 private:
  using Handler = std::function<void(const httplib::Request &, httplib::Response &)>;

  // Converts library errors into JSON error responses.
  static httplib::Server::Handler Guard(Handler h) {
    return [h = std::move(h)](const httplib::Request &req, httplib::Response &res) {
      try {
        h(req, res);
      } catch (const FeedbackError &e) {
        Json violations = Json::array();
        bool unknown_cluster = false;
        for (const auto &v : e.violations()) {
          violations.push_back(ToJson(v));
          unknown_cluster |= v.kind == "unknown_cluster";
        }
        Reply(res, unknown_cluster ? 404 : 422,
              {{"error", "invalid_feedback"}, {"message", e.what()}, {"violations", std::move(violations)}});
      } catch (const Error &e) {
        ReplyError(res, HttpStatus(e.code()), ErrorCodeName(e.code()), e.what());
      } catch (const std::exception &e) {
        ReplyError(res, 500, "internal", e.what());
      }
    };
  }

  void Routes() {
    server_.set_error_handler([](const httplib::Request &, httplib::Response &res) {
      if (res.body.empty()) ReplyError(res, res.status, "http_error", "no such route");
    });
    server_.Get("/health", Guard([](const httplib::Request &, httplib::Response &res) {
                  Reply(res, 200, {{"status", "ok"}});
                }));
    server_.Post("/corpora", Guard([this](const auto &req, auto &res) { PostCorpus(req, res); }));
    server_.Get("/sessions", Guard([this](const auto &req, auto &res) { ListSessions(req, res); }));
    server_.Post("/sessions", Guard([this](const auto &req, auto &res) { CreateSession(req, res); }));
    server_.Get("/sessions/:id", Guard([this](const auto &req, auto &res) { GetSession(req, res); }));
    server_.Get("/sessions/:id/proposals", Guard([this](const auto &req, auto &res) { GetProposals(req, res); }));
    server_.Post("/sessions/:id/feedback", Guard([this](const auto &req, auto &res) { PostFeedback(req, res); }));
    server_.Post("/sessions/:id/iterate", Guard([this](const auto &req, auto &res) { PostIterate(req, res); }));
    server_.Post("/sessions/:id/finalize", Guard([this](const auto &req, auto &res) { PostFinalize(req, res); }));
    server_.Get("/sessions/:id/history", Guard([this](const auto &req, auto &res) { GetHistory(req, res); }));
    server_.Get("/jobs/:id", Guard([this](const auto &req, auto &res) { GetJob(req, res); }));
  }

  // ---- corpora ----------------------------------------------------------------

  void PostCorpus(const httplib::Request &req, httplib::Response &res) {
    auto field = [&](const char *name) -> std::string {
      if (!req.has_file(name)) throw Error(ErrorCode::kInvalidArgument, std::string("missing multipart field '") + name + "'");
      return req.get_file_value(name).content;
    };
    const std::string dataset = field("dataset");
    const std::string embeddings = field("embeddings");
    const std::string id = RegisterCorpus(store_, dataset, embeddings);
    const Json meta = Json::parse(ReadText(store_ / "corpora" / id / "meta.json"));
    Reply(res, 201, meta);
  }

  std::shared_ptr<const Corpus> GetCorpus(const std::string &id) {
    std::lock_guard lk(corpora_mu_);
    auto it = corpora_.find(id);
    if (it != corpora_.end()) return it->second;
    auto corpus = LoadStoredCorpus(store_, id);
    corpora_[id] = corpus;
    return corpus;
  }

  // ---- sessions ---------------------------------------------------------------

  std::shared_ptr<Slot> FindSlot(const std::string &id) {
    std::lock_guard lk(slots_mu_);
    auto it = slots_.find(id);
    if (it == slots_.end()) throw Error(ErrorCode::kNotFound, "unknown session '" + id + "'");
    return it->second;
  }

  // Replays the event log on first use after a restart. Caller holds slot.mu.
  DiscoverySession &Loaded(Slot &slot) {
    if (!slot.session) {
      const auto corpus = GetCorpus(slot.handle.at("corpus_id").get<std::string>());
      const auto events = EventLog::Read(slot.dir / "events.jsonl");
      slot.session = DiscoverySession::Replay(corpus, events, slot.dir / "events.jsonl");
    }
    return *slot.session;
  }

  Json Summary(Slot &slot, const SessionState &state) {
    Json j = slot.handle;
    j["session"] = SessionSummary(state);
    return j;
  }

  void ListSessions(const httplib::Request &, httplib::Response &res) {
    Json out = Json::array();
    std::lock_guard lk(slots_mu_);
    for (const auto &[id, slot] : slots_) out.push_back(slot->handle);
    Reply(res, 200, {{"sessions", std::move(out)}});
  }

  void CreateSession(const httplib::Request &req, httplib::Response &res) {
    const Json body = ParseBody(req);
    if (!body.contains("corpus_id") || !body["corpus_id"].is_string())
      throw Error(ErrorCode::kInvalidArgument, "corpus_id is required");
    const std::string corpus_id = body["corpus_id"].get<std::string>();
    const auto corpus = GetCorpus(corpus_id);
    DiscoveryConfig cfg;
    if (auto it = body.find("config"); it != body.end() && !it->is_null()) FromJson(*it, cfg);
    cfg.Validate();

    auto slot = std::make_shared<Slot>();
    {
      std::lock_guard lk(slots_mu_);
      do slot->id = RandomId();
      while (slots_.count(slot->id) || fs::exists(store_ / "sessions" / slot->id));
    }
    slot->dir = store_ / "sessions" / slot->id;
    slot->handle = {{"session_id", slot->id},
                    {"created_at", NowUtc()},
                    {"corpus_id", corpus_id},
                    {"corpus_fingerprint", corpus->Fingerprint()}};
    fs::create_directories(slot->dir);
    try {
      WriteAtomic(slot->dir / "handle.json", slot->handle.dump(2));
      slot->session = DiscoverySession::Create(corpus, cfg, slot->dir / "events.jsonl");
    } catch (...) {
      std::error_code ec;
      fs::remove_all(slot->dir, ec);
      throw;
    }
    {
      std::lock_guard lk(slots_mu_);
      slots_[slot->id] = slot;
    }
    Reply(res, 201, slot->handle);
  }

  void GetSession(const httplib::Request &req, httplib::Response &res) {
    auto slot = FindSlot(req.path_params.at("id"));
    std::lock_guard lk(slot->mu);
    if (slot->busy) return Reply(res, 200, slot->summary_view);
    Reply(res, 200, Summary(*slot, Loaded(*slot).state()));
  }

  void GetHistory(const httplib::Request &req, httplib::Response &res) {
    auto slot = FindSlot(req.path_params.at("id"));
    std::lock_guard lk(slot->mu);
    if (slot->busy) return Reply(res, 200, {{"history", slot->history_view}});
    Reply(res, 200, {{"history", HistoryView(Loaded(*slot).state())}});
  }

  void GetProposals(const httplib::Request &req, httplib::Response &res) {
    auto slot = FindSlot(req.path_params.at("id"));
    std::lock_guard lk(slot->mu);
    if (slot->busy) throw Error(ErrorCode::kConflict, "session is training; proposals are not available");
    DiscoverySession &s = Loaded(*slot);
    const auto &proposals = s.Propose();
    Json list = Json::array();
    for (const auto &p : proposals) list.push_back(ToJson(p));
    const auto &state = s.state();
    Reply(res, 200,
          {{"session_id", slot->id},
           {"iteration", state.iteration},
           {"k_t", state.k_t},
           {"gamma", state.iteration == 1 ? state.config.gamma_first : state.config.gamma_rest},
           {"status", StatusName(state.status)},
           {"proposals", std::move(list)}});
  }

  void PostFeedback(const httplib::Request &req, httplib::Response &res) {
    auto slot = FindSlot(req.path_params.at("id"));
    const Json body = ParseBody(req);
    const std::string request_id = body.value("request_id", "");
    const Feedback fb = FromJson<Feedback>(body);
    std::unique_lock lk(slot->mu, std::try_to_lock);
    if (!lk.owns_lock() || slot->busy)
      throw Error(ErrorCode::kConflict, "another mutation is in progress on this session");
    DiscoverySession &s = Loaded(*slot);
    if (s.SeenRequest(request_id)) {
      Json j = Summary(*slot, s.state());
      j["duplicate"] = true;
      return Reply(res, 200, j);
    }
    s.ApplyFeedback(fb, request_id);
    Reply(res, 200, Summary(*slot, s.state()));
  }

  void PostFinalize(const httplib::Request &req, httplib::Response &res) {
    auto slot = FindSlot(req.path_params.at("id"));
    const Json body = ParseBody(req);
    const std::string request_id = body.value("request_id", "");
    std::unique_lock lk(slot->mu, std::try_to_lock);
    if (!lk.owns_lock() || slot->busy)
      throw Error(ErrorCode::kConflict, "another mutation is in progress on this session");
    DiscoverySession &s = Loaded(*slot);
    if (!s.SeenRequest(request_id)) s.Finalize(request_id);
    Reply(res, 200, Summary(*slot, s.state()));
  }

  void PostIterate(const httplib::Request &req, httplib::Response &res) {
    auto slot = FindSlot(req.path_params.at("id"));
    const Json body = ParseBody(req);
    const std::string request_id = body.value("request_id", "");

    std::unique_lock lk(slot->mu, std::try_to_lock);
    if (!request_id.empty()) {
      std::lock_guard jl(jobs_mu_);
      auto it = job_by_request_.find(slot->id + "/" + request_id);
      if (it != job_by_request_.end()) return Reply(res, 202, JobView(*jobs_.at(it->second)));
    }
    if (!lk.owns_lock() || slot->busy)
      throw Error(ErrorCode::kConflict, "another mutation is in progress on this session");
    DiscoverySession &s = Loaded(*slot);

    auto job = std::make_shared<Job>();
    job->id = RandomId();
    job->session_id = slot->id;
    job->request_id = request_id;
    if (s.SeenRequest(request_id)) {
      // Applied before a restart; the job record itself was not persisted.
      job->status = "succeeded";
      job->result = {{"advanced", true}, {"replayed", true}, {"iteration", s.state().iteration}};
      Register(job);
      return Reply(res, 202, JobView(*job));
    }
    if (s.state().status != SessionStatus::kAwaitingFeedback)
      throw Error(ErrorCode::kInvalidState,
                  "session is " + std::string(StatusName(s.state().status)) + ", cannot iterate");

    slot->busy = true;
    slot->summary_view = Summary(*slot, s.state());
    slot->summary_view["session"]["status"] = StatusName(SessionStatus::kTraining);
    slot->history_view = HistoryView(s.state());
    Register(job);
    lk.unlock();

    std::lock_guard jl(jobs_mu_);
    threads_.emplace_back([this, slot, job] { RunIteration(slot, job); });
    Reply(res, 202, JobView(*job));
  }

  void Register(const std::shared_ptr<Job> &job) {
    std::lock_guard jl(jobs_mu_);
    jobs_[job->id] = job;
    if (!job->request_id.empty()) job_by_request_[job->session_id + "/" + job->request_id] = job->id;
  }

  // Runs with slot->busy set; readers use the published views meanwhile and
  // no other request touches slot->session.
  void RunIteration(std::shared_ptr<Slot> slot, std::shared_ptr<Job> job) {
    SetJob(*job, "running", {});
    Json result;
    std::string error;
    try {
      DiscoverySession &s = *slot->session;
      const AdvanceOutcome out = s.Advance(job->request_id);
      result["advanced"] = out.advanced;
      if (!out.warning.empty()) result["warning"] = out.warning;
      result["iteration"] = s.state().iteration;
      if (out.advanced) {
        const IterationRecord &rec = s.state().history.back();
        Json reports = Json::array();
        for (const auto &r : rec.reports) reports.push_back(ToJson(r));
        result["stage_reports"] = std::move(reports);
        result["record"] = ToJson(rec);
        WriteCheckpoint(*slot, s.state());
      }
    } catch (const std::exception &e) {
      error = e.what();
    }
    {
      std::lock_guard lk(slot->mu);
      slot->busy = false;
    }
    if (error.empty()) {
      SetJob(*job, "succeeded", std::move(result));
    } else {
      job->error = error;
      SetJob(*job, "failed", {});
    }
  }

  void WriteCheckpoint(const Slot &slot, const SessionState &state) {
    SaveCheckpoint(slot.dir / "checkpoint.cdim", state.params);
    Json summary = SessionSummary(state);
    summary["history"] = HistoryView(state);
    WriteAtomic(slot.dir / "summary.json", summary.dump(2));
  }

  void SetJob(Job &job, const char *status, Json result) {
    std::lock_guard jl(jobs_mu_);
    job.status = status;
    if (!result.is_null()) job.result = std::move(result);
  }

  void GetJob(const httplib::Request &req, httplib::Response &res) {
    std::lock_guard jl(jobs_mu_);
    auto it = jobs_.find(req.path_params.at("id"));
    if (it == jobs_.end()) throw Error(ErrorCode::kNotFound, "unknown job '" + req.path_params.at("id") + "'");
    Reply(res, 200, JobView(*it->second));
  }

  fs::path store_;
  httplib::Server server_;

  std::mutex corpora_mu_;
  std::map<std::string, std::shared_ptr<const cdi::Corpus>> corpora_;

  std::mutex slots_mu_;
  std::map<std::string, std::shared_ptr<Slot>> slots_;

  std::mutex jobs_mu_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::map<std::string, std::string> job_by_request_;
  std::vector<std::thread> threads_;
};

Service::Service(fs::path store) : impl_(std::make_unique<Impl>(std::move(store))) {}
Service::~Service() = default;
int Service::Bind(const std::string &host, int port) { return impl_->Bind(host, port); }
void Service::Listen() { impl_->Listen(); }
void Service::Stop() { impl_->Stop(); }

}  // namespace cdi
