// Copyright 2026 The Flowforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "flowforge/service.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdlib>
#include <cstdio>
#include <map>
#include <mutex>
#include <thread>

#include <httplib.h>

#include "flowforge/dataset.hpp"
#include "flowforge/evaluator.hpp"
#include "flowforge/json_io.hpp"
#include "flowforge/validate.hpp"
#include "yaml_support.hpp"

namespace flowforge {

namespace {

class ForwardContext : public Error {
 public:
  explicit ForwardContext(const std::string& message) : Error("ForwardContext", message) {}
};

class Unauthorized : public Error {
 public:
  Unauthorized() : Error("Unauthorized", "missing or wrong bearer token") {}
};

bool parse_bool(const std::string& text, const std::string& what) {
  std::string lower = text;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "1" || lower == "true" || lower == "yes" || lower == "on") return true;
  if (lower == "0" || lower == "false" || lower == "no" || lower == "off") return false;
  throw ConfigError(what + " must be a boolean, got '" + text + "'");
}

int parse_int(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const int value = std::stoi(text, &used);
    if (used == text.size()) return value;
  } catch (const std::exception&) {
  }
  throw ConfigError(what + " must be an integer, got '" + text + "'");
}

int status_for(const std::string& code) {
  static const std::map<std::string, int> statuses = {
      {"InvalidArgument", 422},  {"SyntaxError", 422},       {"UnknownKey", 422},
      {"DuplicateOrder", 422},   {"UnknownTable", 422},      {"EmptyCorpus", 422},
      {"InvalidMode", 422}, {"EmptySampleSet", 422}, {"RetrievalFailed", 422}, {"InvalidCorpusItem", 422},      {"NoTriggerClause", 422},   {"UnresolvedTable", 422},
      {"ConstraintViolation", 422}, {"BudgetExceeded", 422}, {"GenerationFailed", 422},
      {"UnknownKind", 404},      {"UnknownSession", 404},    {"UnknownTranscript", 404},
      {"InvalidPhase", 409},     {"ForwardContext", 409},    {"Unauthorized", 401},
      {"GeneratorFault", 502},   {"StaleIndex", 503},        {"CatalogSyntaxError", 500},
  };
  const auto it = statuses.find(code);
  return it == statuses.end() ? 500 : it->second;
}

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const std::string& code, const std::string& message,
                const std::string& location = {}) {
  send_json(res, status_for(code), {{"code", code}, {"message", message}, {"location", location}});
}

Json body_of(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  try {
    Json j = Json::parse(req.body);
    if (!j.is_object()) throw InvalidArgument("request body must be a JSON object");
    return j;
  } catch (const Json::exception& e) {
    throw InvalidArgument(std::string("request body is not valid JSON: ") + e.what());
  }
}

std::string required_text(const Json& body, const char* key) {
  const auto it = body.find(key);
  if (it == body.end() || !it->is_string()) throw InvalidArgument(std::string("missing string field '") + key + "'");
  return it->get<std::string>();
}

ArtifactKind kind_from_path(std::string text) {
  std::transform(text.begin(), text.end(), text.begin(), [](unsigned char c) { return std::toupper(c); });
  if (text == "STEPS") text = "STEP_NAME";
  if (text == "TABLES") text = "TABLE_NAME";
  if (text == "COLUMNS") text = "COLUMN_NAME";
  if (text == "VALUES") text = "COLUMN_VALUE";
  const auto kind = parse_artifact_kind(text);
  if (!kind) throw Error("UnknownKind", "unknown artifact kind '" + text + "'");
  return *kind;
}

std::string sse_frame(const SessionEvent& event) {
  return "id: " + std::to_string(event.seq) + "\nevent: " + event.type + "\ndata: " +
         event_to_json(event).dump() + "\n\n";
}

std::optional<std::uint64_t> last_event_id(const httplib::Request& req) {
  std::string text;
  if (req.has_header("Last-Event-ID")) {
    text = req.get_header_value("Last-Event-ID");
  } else if (req.has_param("last_event_id")) {
    text = req.get_param_value("last_event_id");
  }
  if (text.empty()) return std::nullopt;
  try {
    return std::stoull(text);
  } catch (const std::exception&) {
    throw InvalidArgument("Last-Event-ID must be a sequence number");
  }
}

}  // namespace

std::optional<std::string> process_env(const std::string& name) {
  const char* value = std::getenv(name.c_str());
  if (value == nullptr) return std::nullopt;
  return std::string(value);
}

ServiceConfig load_service_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env) {
  ServiceConfig config;
  std::map<std::string, std::string> values;
  if (file) {
    try {
      const YAML::Node root = yaml::load(read_file(*file));
      if (root && !root.IsNull()) {
        yaml::expect_map(root, "config");
        yaml::check_keys(root, {"catalog_dir", "corpus_dir", "generator", "k", "repair_mode",
                                "context_expansion", "listen", "auth_token", "ui_dir",
                                "event_log_dir", "transcript", "endpoint"});
        for (const auto& kv : root) values[kv.first.Scalar()] = yaml::scalar(kv.second, kv.first.Scalar());
      }
    } catch (const Error& e) {
      throw ConfigError(file->string() + ": " + e.what());
    }
  }
  static const std::pair<const char*, const char*> kEnv[] = {
      {"catalog_dir", "FLOWFORGE_CATALOG_DIR"}, {"corpus_dir", "FLOWFORGE_CORPUS_DIR"},
      {"generator", "FLOWFORGE_GENERATOR"},     {"k", "FLOWFORGE_K"},
      {"repair_mode", "FLOWFORGE_REPAIR_MODE"}, {"context_expansion", "FLOWFORGE_CONTEXT_EXPANSION"},
      {"listen", "FLOWFORGE_LISTEN"},           {"auth_token", "FLOWFORGE_AUTH_TOKEN"},
      {"ui_dir", "FLOWFORGE_UI_DIR"},           {"event_log_dir", "FLOWFORGE_EVENT_LOG_DIR"},
      {"transcript", "FLOWFORGE_TRANSCRIPT"},   {"endpoint", "FLOWFORGE_ENDPOINT"},
  };
  for (const auto& [key, var] : kEnv) {
    if (auto value = env(var)) values[key] = *value;
  }
  for (const auto& [key, value] : values) {
    if (key == "catalog_dir") config.catalog_dir = value;
    else if (key == "corpus_dir") config.corpus_dir = value;
    else if (key == "generator") config.generator_name = value;
    else if (key == "k") config.k = parse_int(value, "k");
    else if (key == "repair_mode") config.repair_mode = parse_bool(value, "repair_mode");
    else if (key == "context_expansion") config.context_expansion = parse_bool(value, "context_expansion");
    else if (key == "listen") config.listen_address = value;
    else if (key == "auth_token") config.auth_token = value.empty() ? std::nullopt : std::optional(value);
    else if (key == "ui_dir") config.ui_dir = value;
    else if (key == "event_log_dir") config.event_log_dir = value;
    else if (key == "transcript") config.transcript_path = value;
    else if (key == "endpoint") config.endpoint = value;
  }
  check_service_config(config);
  return config;
}

void check_service_config(const ServiceConfig& config) {
  if (!GeneratorRegistry::instance().contains(config.generator_name)) {
    throw ConfigError("generator '" + config.generator_name + "' is not registered");
  }
  if (config.k < 1) throw ConfigError("k must be at least 1");
  split_listen_address(config.listen_address);
}

std::pair<std::string, int> split_listen_address(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos) throw ConfigError("listen address must be host:port, got '" + address + "'");
  const int port = parse_int(address.substr(colon + 1), "listen port");
  if (port < 0 || port > 65535) throw ConfigError("listen port out of range");
  return {address.substr(0, colon), port};
}

struct Service::Impl {
  ServiceConfig config;
  std::unique_ptr<SessionManager> manager;
  httplib::Server server;
  std::thread thread;
  std::atomic<bool> stopping{false};
  std::mutex transcripts_mutex;
  std::map<std::string, std::string> transcripts;
  std::uint64_t next_transcript = 1;

  explicit Impl(ServiceConfig c) : config(std::move(c)) {
    check_service_config(config);
    Engine engine = make_engine(load_catalog_dir(config.catalog_dir));
    GeneratorConfig gen;
    gen.catalog = engine.catalog;
    gen.transcript_path = config.transcript_path;
    gen.endpoint = config.endpoint;
    OrchestrationConfig orchestration;
    orchestration.generator = GeneratorRegistry::instance().create(config.generator_name, gen);
    orchestration.k = config.k;
    orchestration.repair_mode = config.repair_mode;
    orchestration.context_expansion = config.context_expansion;
    orchestration.event_log_dir = config.event_log_dir;
    manager = std::make_unique<SessionManager>(std::move(engine), std::move(orchestration));
    server.new_task_queue = [] { return new httplib::ThreadPool(32); };
    routes();
  }

  std::string keep_transcript(std::string jsonl) {
    std::lock_guard lock(transcripts_mutex);
    char ref[16];
    std::snprintf(ref, sizeof ref, "t%06llu", static_cast<unsigned long long>(next_transcript++));
    transcripts.emplace(ref, std::move(jsonl));
    return ref;
  }

  bool authorized(const httplib::Request& req) const {
    if (!config.auth_token) return true;
    if (req.get_header_value("Authorization") == "Bearer " + *config.auth_token) return true;
    return req.has_param("access_token") && req.get_param_value("access_token") == *config.auth_token;
  }

  // Runs a handler and maps library errors to structured bodies.
  template <class F>
  httplib::Server::Handler guarded(F handler) {
    return [handler](const httplib::Request& req, httplib::Response& res) {
      try {
        handler(req, res);
      } catch (const SyntaxError& e) {
        send_error(res, e.code(), e.what(), std::to_string(e.line()) + ":" + std::to_string(e.column()));
      } catch (const GenerationFailed& e) {
        const bool passthrough = e.cause_code() == "GeneratorFault" || e.cause_code() == "StaleIndex";
        send_error(res, passthrough ? e.cause_code() : e.code(), e.what());
      } catch (const Error& e) {
        send_error(res, e.code(), e.what());
      } catch (const std::exception& e) {
        send_error(res, "InternalError", e.what());
      }
    };
  }

  void routes() {
    server.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
      if (req.path.rfind("/v1/", 0) == 0 && !authorized(req)) {
        const Unauthorized e;
        send_error(res, e.code(), e.what());
        return httplib::Server::HandlerResponse::Handled;
      }
      return httplib::Server::HandlerResponse::Unhandled;
    });
    if (!config.ui_dir.empty() && std::filesystem::is_directory(config.ui_dir)) {
      server.set_mount_point("/ui", config.ui_dir.string());
    }

    server.Get("/v1/health", guarded([this](const httplib::Request&, httplib::Response& res) {
      const Engine engine = manager->engine();
      send_json(res, 200, {{"status", "ok"},
                           {"catalog_digest", engine.catalog->version().digest},
                           {"generator", config.generator_name},
                           {"generators", GeneratorRegistry::instance().names()}});
    }));

    server.Post("/v1/createFlow", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const Json body = body_of(req);
      const std::string requirement = required_text(body, "requirement");
      if (requirement.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw InvalidArgument("requirement must not be empty");
      }
      const OutlineOutcome outcome = create_flow(manager->engine(), manager->config(), requirement);
      Json sites = Json::array();
      for (const auto& site : outcome.result.sites) sites.push_back(choices_to_json(site));
      const Json rows = outline_to_json(outcome.outline);
      send_json(res, 200, {{"outline", serialize_outline(outcome.outline)},
                           {"trigger", rows["trigger"]},
                           {"rows", rows["rows"]},
                           {"choices_offered", sites},
                           {"repairs", outcome.result.repairs},
                           {"transcript_ref", keep_transcript(transcript_to_jsonl(outcome.result.transcript))}});
    }));

    server.Post("/v1/populateInputs", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const Json body = body_of(req);
      const std::string requirement = required_text(body, "requirement");
      const Outline outline = parse_outline(required_text(body, "outline"));
      if (!body.contains("target_order") || !body["target_order"].is_number_integer()) {
        throw InvalidArgument("missing integer field 'target_order'");
      }
      const int target = body["target_order"].get<int>();
      if (target < 1 || target > static_cast<int>(outline.rows.size())) {
        throw InvalidArgument("target_order " + std::to_string(target) + " is not a step of the outline");
      }
      Workflow partial = workflow_from_outline(outline, requirement);
      bool outline_only = true;
      if (body.contains("populated_prefix") && !body["populated_prefix"].is_null()) {
        const Workflow prefix = parse_workflow(required_text(body, "populated_prefix"));
        for (const auto& step : prefix.steps) {
          if (step.order >= target) {
            throw ForwardContext("populated prefix holds step " + std::to_string(step.order) +
                                 ", not before target " + std::to_string(target));
          }
          const Step* row = partial.find_step(step.order);
          if (row == nullptr || row->name != step.name) {
            throw InvalidArgument("populated prefix step " + std::to_string(step.order) +
                                  " does not match the outline");
          }
          partial.steps[step.order - 1].inputs = step.inputs;
        }
        outline_only = prefix.steps.empty();
      }
      const StepOutcome outcome =
          populate_step(manager->engine(), manager->config(), partial, outline, target, outline_only);
      Json sites = Json::array();
      for (const auto& site : outcome.result.sites) sites.push_back(choices_to_json(site));
      send_json(res, 200, {{"step_inputs", serialize_input_list(outcome.inputs)},
                           {"choices_offered", sites},
                           {"repairs", outcome.result.repairs},
                           {"transcript_ref", keep_transcript(transcript_to_jsonl(outcome.result.transcript))}});
    }));

    server.Get(R"(/v1/transcripts/([A-Za-z0-9_]+))",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 std::lock_guard lock(transcripts_mutex);
                 const auto it = transcripts.find(req.matches[1]);
                 if (it == transcripts.end()) throw Error("UnknownTranscript", "no transcript " + req.matches[1].str());
                 res.set_content(it->second, "application/x-ndjson");
               }));

    server.Post("/v1/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const Json body = body_of(req);
      const std::string requirement = required_text(body, "requirement");
      const bool automatic = body.value("auto_continue", false);
      const auto session = manager->start_session_async(requirement, automatic);
      send_json(res, 201, {{"id", session->id()}, {"phase", session->snapshot().phase_label()}});
    }));

    server.Get("/v1/sessions", guarded([this](const httplib::Request&, httplib::Response& res) {
      Json list = Json::array();
      for (const auto& session : manager->sessions()) {
        const auto s = session->snapshot();
        list.push_back({{"id", s.id}, {"parent_id", s.parent_id}, {"phase", s.phase_label()},
                        {"superseded", s.superseded}});
      }
      send_json(res, 200, {{"sessions", list}});
    }));

    server.Get(R"(/v1/sessions/([A-Za-z0-9_]+))",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 send_json(res, 200, snapshot_to_json(manager->find(req.matches[1])->snapshot()));
               }));

    server.Get(R"(/v1/sessions/([A-Za-z0-9_]+)/events)",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const auto session = manager->find(req.matches[1]);
                 auto last = last_event_id(req);
                 const bool wait = !(req.has_param("wait") && req.get_param_value("wait") == "0");
                 res.set_header("Cache-Control", "no-cache");
                 res.set_chunked_content_provider(
                     "text/event-stream",
                     [this, session, last, wait](std::size_t, httplib::DataSink& sink) mutable {
                       const auto events =
                           wait ? session->wait_events(last, std::chrono::milliseconds(500)) : session->events_after(last);
                       for (const auto& event : events) {
                         const std::string frame = sse_frame(event);
                         if (!sink.write(frame.data(), frame.size())) return false;
                         last = event.seq;
                       }
                       if (!wait || stopping || (session->terminal() && session->events_after(last).empty())) {
                         sink.done();
                         return true;
                       }
                       if (events.empty()) {
                         static constexpr char kKeepAlive[] = ": keepalive\n\n";
                         if (!sink.write(kKeepAlive, sizeof kKeepAlive - 1)) return false;
                       }
                       return true;
                     });
               }));

    server.Post(R"(/v1/sessions/([A-Za-z0-9_]+)/continue)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const Json body = body_of(req);
                  std::optional<int> up_to;
                  if (body.contains("up_to") && !body["up_to"].is_null()) up_to = body["up_to"].get<int>();
                  manager->continue_session_async(req.matches[1], up_to);
                  send_json(res, 202, {{"id", req.matches[1].str()}, {"accepted", true}});
                }));

    server.Post(R"(/v1/sessions/([A-Za-z0-9_]+)/stop)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  manager->stop_session(req.matches[1]);
                  send_json(res, 200, snapshot_to_json(manager->find(req.matches[1])->snapshot()));
                }));

    server.Post(R"(/v1/sessions/([A-Za-z0-9_]+)/modify)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const Json body = body_of(req);
                  const std::string requirement = required_text(body, "requirement");
                  const auto fresh = manager->modify_requirement(req.matches[1], requirement);
                  manager->begin_async(fresh->id(), body.value("auto_continue", false));
                  send_json(res, 201, {{"id", fresh->id()}, {"parent_id", req.matches[1].str()}});
                }));

    server.Post(R"(/v1/sessions/([A-Za-z0-9_]+)/batch)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const Json body = body_of(req);
                  manager->batch_populate(req.matches[1], body.value("parallel", true));
                  send_json(res, 200, snapshot_to_json(manager->find(req.matches[1])->snapshot()));
                }));

    server.Get(R"(/v1/catalog/([A-Za-z_]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const ArtifactKind kind = kind_from_path(req.matches[1]);
      std::optional<std::string> scope;
      if (req.has_param("scope")) scope = req.get_param_value("scope");
      Json list = Json::array();
      for (const auto& doc : list_artifacts(*manager->engine().catalog, kind, scope)) {
        list.push_back(artifact_to_json(doc));
      }
      send_json(res, 200, {{"kind", std::string(artifact_kind_name(kind))},
                           {"scope", scope.value_or("")},
                           {"artifacts", list}});
    }));

    server.Post("/v1/evaluate", guarded([](const httplib::Request& req, httplib::Response& res) {
      const Json body = body_of(req);
      std::vector<EvaluationPair> pairs;
      if (body.contains("pairs")) {
        int n = 0;
        for (const auto& p : body["pairs"]) {
          pairs.push_back({p.value("id", "pair" + std::to_string(n++)),
                           parse_workflow(required_text(p, "expected")),
                           parse_workflow(required_text(p, "generated"))});
        }
      } else {
        pairs.push_back({body.value("id", "pair0"), parse_workflow(required_text(body, "expected")),
                         parse_workflow(required_text(body, "generated"))});
      }
      Json report = evaluation_to_json(evaluate_corpus(pairs));
      if (body.contains("mode")) {
        const TreeOptions options = parse_tree_mode(body["mode"].get<std::string>());
        Json scores = Json::array();
        for (const auto& p : pairs) scores.push_back(flow_similarity(p.expected, p.generated, options));
        report["mode"] = body["mode"];
        report["mode_scores"] = scores;
      }
      send_json(res, 200, report);
    }));

    server.Post("/v1/reload", guarded([this](const httplib::Request&, httplib::Response& res) {
      Engine engine = make_engine(load_catalog_dir(config.catalog_dir));
      const std::string digest = engine.catalog->version().digest;
      manager->swap_engine(std::move(engine));
      send_json(res, 200, {{"catalog_digest", digest}});
    }));

    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      if (res.status == 404) send_json(res, 404, {{"code", "NotFound"}, {"message", "no such route"}, {"location", ""}});
    });
  }
};

Service::Service(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

Service::~Service() { stop(); }

int Service::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw ConfigError("cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw ConfigError("cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void Service::run() { impl_->server.listen_after_bind(); }

int Service::start(const std::string& host, int port) {
  const int bound = bind(host, port);
  impl_->thread = std::thread([this] { run(); });
  impl_->server.wait_until_ready();
  return bound;
}

void Service::stop() {
  if (!impl_) return;
  impl_->stopping = true;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

SessionManager& Service::sessions() { return *impl_->manager; }

const ServiceConfig& Service::config() const { return impl_->config; }

}  // namespace flowforge
