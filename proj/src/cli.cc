// Copyright 2026 The Prefloop Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "prefloop/cli.h"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "prefloop/api.h"
#include "prefloop/error.h"
#include "prefloop/feature_repository.h"
#include "prefloop/http_backends.h"
#include "prefloop/http_server.h"
#include "prefloop/session.h"
#include "prefloop/simulation.h"

namespace prefloop {

using json = nlohmann::json;

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

json default_cli_config() {
  json cfg = session_config_to_json(SessionConfig{});
  cfg["repository"] = "";
  cfg["store_dir"] = ".prefloop/sessions";
  cfg["host"] = "127.0.0.1";
  cfg["port"] = 8080;
  return cfg;
}

std::string env_var_for(const std::string& dotted_key) {
  std::string out = kEnvPrefix;
  for (char c : dotted_key) {
    out += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return out;
}

namespace {

void collect_keys(const json& node, const std::string& prefix, std::vector<std::string>& out) {
  for (const auto& [key, value] : node.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (value.is_object()) {
      collect_keys(value, path, out);
    } else {
      out.push_back(path);
    }
  }
}

json::json_pointer pointer_for(const std::string& dotted_key) {
  std::string p;
  std::stringstream ss(dotted_key);
  for (std::string part; std::getline(ss, part, '.');) p += "/" + part;
  return json::json_pointer(p);
}

}  // namespace

std::vector<std::string> cli_config_keys() {
  std::vector<std::string> keys;
  collect_keys(default_cli_config(), "", keys);
  return keys;
}

json merge_cli_config(const std::optional<std::string>& config_path, const EnvLookup& env) {
  json cfg = default_cli_config();
  if (config_path) {
    std::ifstream in(*config_path);
    if (!in) throw Error(ErrorCode::kConfigError, "cannot read config file " + *config_path);
    json file;
    try {
      file = json::parse(in);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kConfigError, "config file " + *config_path + ": " + e.what());
    }
    if (!file.is_object()) throw Error(ErrorCode::kConfigError, "config file must hold an object");
    cfg.merge_patch(file);
  }
  for (const auto& key : cli_config_keys()) {
    auto value = env(env_var_for(key));
    if (!value) continue;
    json parsed = json::parse(*value, nullptr, false);
    if (parsed.is_discarded()) parsed = *value;
    // A string-typed key keeps the raw text, so "123" stays a string.
    if (cfg[pointer_for(key)].is_string()) parsed = *value;
    cfg[pointer_for(key)] = parsed;
  }
  return cfg;
}

namespace {

struct Options {
  std::optional<std::string> config_path;
  bool json_output = false;
  std::optional<uint64_t> seed;
  std::optional<std::string> backend;
  std::optional<int> candidates;
  std::optional<std::string> prompt;
  std::optional<std::string> store;

  std::string repo_target = "default";
  std::string session_id;
  std::vector<std::string> marks;

  std::string profile_path;
  int rounds = 10;
  int trials = 100;
  std::optional<double> noise;
  std::optional<double> mock_noise;
  std::optional<std::string> out_path;

  std::optional<std::string> host;
  std::optional<int> port;
};

class Runner {
 public:
  Runner(const Options& opt, CliStreams io, const EnvLookup& env)
      : opt_(opt), io_(io), env_(env) {}

  int repo_validate();
  int session_new();
  int session_show();
  int session_feedback();
  int session_next();
  int session_regenerate();
  int session_prefs();
  int session_close();
  int session_interactive();
  int sim_run();
  int serve();

 private:
  const json& config();
  std::shared_ptr<const FeatureRepository> repository();
  SessionConfig session_config(bool require_prompt);
  SessionManager& manager();

  void emit(const json& payload, const std::string& text) {
    if (opt_.json_output) {
      io_.out << payload.dump() << "\n";
    } else {
      io_.out << text;
    }
    io_.out.flush();
  }
  void show_candidates(const SessionRecord& s);
  void show_preferences(const PreferenceSnapshot& snap);

  const Options& opt_;
  CliStreams io_;
  const EnvLookup& env_;
  std::optional<json> config_;
  std::shared_ptr<const FeatureRepository> repo_;
  std::unique_ptr<SessionManager> manager_;
};

const json& Runner::config() {
  if (!config_) {
    json cfg = merge_cli_config(opt_.config_path, env_);
    if (opt_.seed) cfg["seed"] = *opt_.seed;
    if (opt_.backend) cfg["backend"]["kind"] = *opt_.backend;
    if (opt_.candidates) cfg["candidates_per_round"] = *opt_.candidates;
    if (opt_.prompt) cfg["initial_prompt"] = *opt_.prompt;
    if (opt_.store) cfg["store_dir"] = *opt_.store;
    if (opt_.host) cfg["host"] = *opt_.host;
    if (opt_.port) cfg["port"] = *opt_.port;
    config_ = std::move(cfg);
  }
  return *config_;
}

std::shared_ptr<const FeatureRepository> Runner::repository() {
  if (!repo_) {
    const std::string path = config().value("repository", std::string());
    if (path.empty()) {
      repo_ = std::shared_ptr<const FeatureRepository>(&default_repository(),
                                                       [](const FeatureRepository*) {});
    } else {
      repo_ = std::make_shared<const FeatureRepository>(load_repository_file(path));
    }
  }
  return repo_;
}

SessionConfig Runner::session_config(bool require_prompt) {
  json cfg = config();
  if (!require_prompt && cfg.value("initial_prompt", std::string()).empty()) {
    cfg["initial_prompt"] = "a photograph";
  }
  return session_config_from_json(cfg);
}

SessionManager& Runner::manager() {
  if (!manager_) {
    std::string dir;
    try {
      dir = config().at("store_dir").get<std::string>();
    } catch (const json::exception&) {
      throw Error(ErrorCode::kConfigError, "store_dir must be a string");
    }
    auto repo = repository();
    manager_ = std::make_unique<SessionManager>(
        repo, std::make_shared<DirectorySessionStore>(dir), default_backend_factory(repo));
  }
  return *manager_;
}

std::string feature_summary(const ImageFeatureProfile& p) {
  std::string out;
  auto append = [&out](const std::string& k, const std::string& v) {
    if (!out.empty()) out += ", ";
    out += k + "=" + v;
  };
  for (const auto& [k, v] : p.discrete_values) append(k, v);
  for (const auto& [k, v] : p.ordinal_values) append(k, v);
  return out;
}

void Runner::show_candidates(const SessionRecord& s) {
  std::ostringstream text;
  text << "session " << s.session_id << "  phase " << phase_name(s.phase) << "  round "
       << s.rounds.size() << "\n";
  for (std::size_t i = 0; i < s.current_candidates.size(); ++i) {
    const Candidate& c = s.current_candidates[i];
    text << "  [" << i + 1 << "] " << c.image.id << "  " << c.image.uri << "\n"
         << "      prompt: " << c.prompt.positive_prompt << "\n";
    if (!c.prompt.negative_prompt.empty()) {
      text << "      negative: " << c.prompt.negative_prompt << "\n";
    }
    text << "      features: " << feature_summary(c.profile) << "\n";
  }
  json payload = session_view(s);
  emit(payload, text.str());
}

void Runner::show_preferences(const PreferenceSnapshot& snap) {
  std::ostringstream text;
  char line[256];
  text << "rounds ingested: " << snap.rounds_ingested << "  pool size: " << snap.pool_size
       << "\n\ndiscrete features (top 3 odds ratios)\n";
  for (const auto& r : snap.discrete) {
    std::snprintf(line, sizeof(line), "  %-20s", r.feature.c_str());
    text << line;
    for (std::size_t i = 0; i < r.values.size() && i < 3; ++i) {
      std::snprintf(line, sizeof(line), "  %s %.3f", r.values[i].value.c_str(),
                    r.values[i].odds_ratio);
      text << line;
    }
    text << "\n";
  }
  text << "\nordinal features\n";
  for (const auto& r : snap.ordinal) {
    if (!r.effect) {
      std::snprintf(line, sizeof(line), "  %-20s  insufficient data\n", r.feature.c_str());
    } else {
      std::snprintf(line, sizeof(line), "  %-20s  d=%+.3f  liked~%s%s\n", r.feature.c_str(),
                    r.effect->d, r.liked_level.c_str(), r.emphasized ? "  [emphasized]" : "");
    }
    text << line;
  }
  if (!snap.pool_excerpt.empty()) {
    text << "\ncreative pool\n";
    for (const auto& e : snap.pool_excerpt) {
      text << "  " << pool_category_name(e.category) << ": " << e.text << "\n";
    }
  }
  emit(snap.to_json(), text.str());
}

int Runner::repo_validate() {
  const FeatureRepository* repo = &default_repository();
  std::optional<FeatureRepository> loaded;
  if (opt_.repo_target != "default") {
    loaded = load_repository_file(opt_.repo_target);
    repo = &*loaded;
  }
  const std::size_t n = repo->features().size();
  emit(json{{"ok", true},
            {"features", n},
            {"dimensions", repo->dimensions().size()},
            {"discrete", repo->count(FeatureKind::kDiscrete)},
            {"ordinal", repo->count(FeatureKind::kOrdinal)},
            {"freeform", repo->count(FeatureKind::kFreeForm)}},
       std::to_string(n) + " features OK\n");
  return kExitOk;
}

int Runner::session_new() {
  SessionConfig cfg = session_config(true);
  show_candidates(manager().create(cfg));
  return kExitOk;
}

int Runner::session_show() {
  show_candidates(manager().get(opt_.session_id));
  return kExitOk;
}

std::map<std::string, Annotation> parse_marks(const std::vector<std::string>& marks,
                                              const SessionRecord& s) {
  std::map<std::string, Annotation> out;
  for (const auto& mark : marks) {
    const auto eq = mark.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kParseError, "expected IMAGE=LABEL, got '" + mark + "'", mark);
    }
    std::string key = mark.substr(0, eq);
    std::string label = mark.substr(eq + 1);
    if (label == "l") label = "liked";
    if (label == "d") label = "disliked";
    if (label == "u") label = "unlabeled";
    auto a = parse_annotation(label);
    if (!a) throw Error(ErrorCode::kParseError, "unknown label '" + label + "'", key);
    if (!key.empty() && key.find_first_not_of("0123456789") == std::string::npos) {
      const std::size_t idx = std::stoul(key);
      if (idx >= 1 && idx <= s.current_candidates.size()) {
        key = s.current_candidates[idx - 1].image.id;
      }
    }
    out[key] = *a;
  }
  return out;
}

int Runner::session_feedback() {
  SessionManager& m = manager();
  SessionRecord s = m.get(opt_.session_id);
  s = m.submit_feedback(opt_.session_id, parse_marks(opt_.marks, s));
  emit(json{{"ok", true},
            {"session_id", s.session_id},
            {"phase", phase_name(s.phase)},
            {"round_index", s.rounds.size()},
            {"rounds_ingested", s.state.rounds_ingested()}},
       "recorded round " + std::to_string(s.rounds.size()) + " (" +
           std::to_string(s.state.rounds_ingested()) + " informative)\n");
  return kExitOk;
}

int Runner::session_next() {
  show_candidates(manager().advance(opt_.session_id));
  return kExitOk;
}

int Runner::session_regenerate() {
  show_candidates(manager().regenerate(opt_.session_id));
  return kExitOk;
}

int Runner::session_prefs() {
  show_preferences(manager().preferences(opt_.session_id));
  return kExitOk;
}

int Runner::session_close() {
  SessionRecord s = manager().close(opt_.session_id);
  emit(json{{"ok", true}, {"session_id", s.session_id}, {"phase", phase_name(s.phase)}},
       "closed " + s.session_id + "\n");
  return kExitOk;
}

int Runner::session_interactive() {
  SessionManager& m = manager();
  SessionRecord s = opt_.session_id.empty() ? m.create(session_config(true))
                                            : m.get(opt_.session_id);
  for (;;) {
    if (s.phase == Phase::kClosed) {
      io_.out << "session " << s.session_id << " is closed\n";
      return kExitOk;
    }
    if (s.phase == Phase::kGenerating) {
      try {
        s = m.advance(s.session_id);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kRoundLimitReached) throw;
        io_.out << "round limit reached; session closed\n";
        return kExitOk;
      }
    }
    show_candidates(s);
    io_.out << "marks (one of l/d/u per candidate), r=regenerate, p=preferences, c=close, "
               "q=quit\n> ";
    io_.out.flush();
    std::string line;
    if (!std::getline(io_.in, line)) return kExitOk;
    std::string marks;
    for (char ch : line) {
      if (!std::isspace(static_cast<unsigned char>(ch))) marks += ch;
    }
    if (marks == "q") return kExitOk;
    if (marks == "r") {
      s = m.regenerate(s.session_id);
    } else if (marks == "p") {
      show_preferences(m.preferences(s.session_id));
    } else if (marks == "c") {
      s = m.close(s.session_id);
    } else if (marks.size() == s.current_candidates.size() &&
               marks.find_first_not_of("ldu") == std::string::npos) {
      std::vector<std::string> pairs;
      for (std::size_t i = 0; i < marks.size(); ++i) {
        pairs.push_back(std::to_string(i + 1) + "=" + marks[i]);
      }
      s = m.submit_feedback(s.session_id, parse_marks(pairs, s));
    } else {
      io_.err << "expected " << s.current_candidates.size() << " marks from l/d/u or a command\n";
    }
  }
}

int Runner::sim_run() {
  auto repo = repository();
  std::ifstream in(opt_.profile_path);
  if (!in) throw Error(ErrorCode::kConfigError, "cannot read profile " + opt_.profile_path);
  json profile_json;
  try {
    profile_json = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParseError, "profile " + opt_.profile_path + ": " + e.what());
  }
  TargetProfile profile = target_profile_from_json(profile_json, *repo);
  if (opt_.noise) profile.noise_rate = *opt_.noise;
  validate_target_profile(profile, *repo);

  SessionConfig cfg = session_config(false);
  if (opt_.mock_noise) cfg.backend.p_noise = *opt_.mock_noise;
  ExperimentOptions options;
  options.rounds = opt_.rounds;
  options.trials = opt_.trials;
  const auto reports = run_experiment(repo, profile, cfg, options);
  const ExperimentSummary summary = summarize(reports);

  if (opt_.out_path) {
    json doc{{"profile", target_profile_to_json(profile)},
             {"session_config", session_config_to_json(cfg)},
             {"rounds", options.rounds},
             {"trials", options.trials},
             {"summary", summary.to_json()},
             {"reports", json::array()}};
    for (const auto& r : reports) doc["reports"].push_back(r.to_json());
    std::ofstream out(*opt_.out_path);
    out << doc.dump(2) << "\n";
    if (!out) throw Error(ErrorCode::kStoreError, "cannot write " + *opt_.out_path);
  }

  std::ostringstream text;
  char line[160];
  std::snprintf(line, sizeof(line), "trials %d  rounds %d  aggregate accuracy %.3f\n",
                summary.trials, options.rounds, summary.mean_aggregate_accuracy);
  text << line;
  std::snprintf(line, sizeof(line), "discrete top-1 accuracy %.3f\n", summary.mean_discrete_top1);
  text << line;
  for (const auto& [feature, rate] : summary.ordinal_pass_rate) {
    std::snprintf(line, sizeof(line), "ordinal %-20s sign %.3f  sign+emphasis %.3f\n",
                  feature.c_str(), summary.ordinal_sign_rate.at(feature), rate);
    text << line;
  }
  emit(summary.to_json(), text.str());
  return kExitOk;
}

int Runner::serve() {
  SessionManager& m = manager();
  const std::string host = config().value("host", std::string("127.0.0.1"));
  const int port = config().value("port", 8080);
  ApiServer server(m);
  const int bound = server.bind(host, port);
  emit(json{{"listening", host + ":" + std::to_string(bound)}},
       "listening on http://" + host + ":" + std::to_string(bound) + "\n");
  server.run();
  return kExitOk;
}

using Action = std::function<int(Runner&)>;

std::unique_ptr<CLI::App> build_app(Options& opt, Action& action) {
  auto app = std::make_unique<CLI::App>("Preference-driven image generation loop", "prefloop");
  app->require_subcommand(1);
  app->fallthrough();
  app->add_option("--config", opt.config_path, "JSON config file");
  app->add_flag("--json", opt.json_output, "Line-delimited JSON output");
  app->add_option("--seed", opt.seed, "Session seed");
  app->add_option("--backend", opt.backend, "Backend kind")->check(CLI::IsMember({"mock", "http"}));
  app->add_option("--candidates", opt.candidates, "Candidates per round");
  app->add_option("--prompt", opt.prompt, "Initial prompt");
  app->add_option("--store", opt.store, "Session store directory");

  auto leaf = [&action](CLI::App* parent, const std::string& name, const std::string& help,
                        int (Runner::*fn)()) {
    CLI::App* cmd = parent->add_subcommand(name, help);
    cmd->fallthrough();
    cmd->callback([&action, fn] { action = [fn](Runner& r) { return (r.*fn)(); }; });
    return cmd;
  };

  CLI::App* repo = app->add_subcommand("repo", "Feature repository tools");
  repo->require_subcommand(1);
  repo->fallthrough();
  leaf(repo, "validate", "Load and validate a repository", &Runner::repo_validate)
      ->add_option("target", opt.repo_target, "'default' or a JSON file");

  CLI::App* session = app->add_subcommand("session", "Session operations");
  session->require_subcommand(1);
  session->fallthrough();
  leaf(session, "new", "Create a session and show round 0", &Runner::session_new);
  leaf(session, "show", "Show a session", &Runner::session_show)
      ->add_option("id", opt.session_id)->required();
  CLI::App* fb = leaf(session, "feedback", "Annotate the current candidates",
                      &Runner::session_feedback);
  fb->add_option("id", opt.session_id)->required();
  fb->add_option("marks", opt.marks, "IMAGE=liked|disliked|unlabeled (IMAGE may be 1-based index)");
  leaf(session, "next", "Generate the next round", &Runner::session_next)
      ->add_option("id", opt.session_id)->required();
  leaf(session, "regenerate", "Replace the current candidates", &Runner::session_regenerate)
      ->add_option("id", opt.session_id)->required();
  leaf(session, "prefs", "Show the preference snapshot", &Runner::session_prefs)
      ->add_option("id", opt.session_id)->required();
  leaf(session, "close", "Close a session", &Runner::session_close)
      ->add_option("id", opt.session_id)->required();
  leaf(session, "interactive", "Drive a session from the terminal", &Runner::session_interactive)
      ->add_option("id", opt.session_id, "Existing session; omit to create one");

  CLI::App* sim = app->add_subcommand("sim", "Simulated users");
  sim->require_subcommand(1);
  sim->fallthrough();
  CLI::App* run = leaf(sim, "run", "Run a closed-loop experiment", &Runner::sim_run);
  run->add_option("--profile", opt.profile_path, "Target profile JSON")->required();
  run->add_option("--rounds", opt.rounds, "Feedback rounds per trial");
  run->add_option("--trials", opt.trials, "Independent trials");
  run->add_option("--noise", opt.noise, "Annotation flip probability");
  run->add_option("--mock-noise", opt.mock_noise, "Mock generator resampling probability");
  run->add_option("--out", opt.out_path, "Write the full report here");

  CLI::App* serve = leaf(app.get(), "serve", "Serve the HTTP API", &Runner::serve);
  serve->add_option("--host", opt.host);
  serve->add_option("--port", opt.port);
  return app;
}

void walk(const CLI::App* app, const std::string& prefix, std::vector<std::string>& out) {
  for (const CLI::App* sub : app->get_subcommands({})) {
    const std::string path = prefix.empty() ? sub->get_name() : prefix + " " + sub->get_name();
    if (sub->get_subcommands({}).empty()) {
      out.push_back(path);
    } else {
      walk(sub, path, out);
    }
  }
}

}  // namespace

std::vector<std::string> cli_commands() {
  Options opt;
  Action action;
  auto app = build_app(opt, action);
  std::vector<std::string> out;
  walk(app.get(), "", out);
  return out;
}

int run_cli(const std::vector<std::string>& args, CliStreams io, const EnvLookup& env) {
  Options opt;
  Action action;
  auto app = build_app(opt, action);
  std::vector<std::string> storage = {"prefloop"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  try {
    app->parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    io.out << app->help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    io.out << app->help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    io.err << "usage error: " << e.what() << "\n\n" << app->help();
    return kExitUsage;
  }
  if (!action) {
    io.err << app->help();
    return kExitUsage;
  }
  Runner runner(opt, io, env);
  try {
    return action(runner);
  } catch (const Error& e) {
    if (opt.json_output) {
      io.err << error_body(e).dump() << "\n";
    } else {
      io.err << "error: " << error_code_name(e.code()) << ": " << e.what() << "\n";
    }
    return kExitDomainError;
  } catch (const std::exception& e) {
    if (opt.json_output) {
      io.err << json{{"error", {{"code", "Internal"}, {"message", e.what()}}}}.dump() << "\n";
    } else {
      io.err << "error: " << e.what() << "\n";
    }
    return kExitDomainError;
  }
}

}  // namespace prefloop
