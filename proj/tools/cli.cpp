#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <ostream>
#include <random>
#include <sstream>

#include "combat/action.hpp"
#include "combat/aot.hpp"
#include "combat/arena.hpp"
#include "combat/cubench.hpp"
#include "combat/decoder.hpp"
#include "combat/error.hpp"
#include "combat/loss.hpp"
#include "combat/tracker.hpp"

namespace combatkit {

namespace {

using namespace combat;
using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

const std::map<std::string, DecodeMode> kModes{{"truncated", DecodeMode::kTruncated},
                                               {"full", DecodeMode::kFull}};

struct Options {
  std::string config;

  std::string dir;
  std::string in;
  std::string out;
  std::string actions_file;
  std::int64_t tap_threshold_ms = kDefaultTapThresholdMs;

  int stage = 3;
  int n = 20;
  int m = 10;
  int k_frames = 4;
  std::int64_t merge_window_ms = 50;
  double split_fraction = 0.95;
  std::string train_out;
  std::string val_out;

  std::uint64_t seed = 0;
  int points = 100;
  int dim = 64;
  double h = 1e-5;
  double tolerance = 1e-4;

  std::string mode_name = "truncated";
  DecodeMode mode = DecodeMode::kTruncated;
  int budget = kDefaultDecodeBudget;
  double tps = 0.0;

  int task = 1;
  std::string tasks = "all";
  std::string tasks_file;
  std::string policy = "scripted";
  int repeats = 10;
  int cycle_cap = 200;
  std::string export_dir;

  int episodes = 2;
  std::string items;
  std::string predictions;
  std::string format = "table";
};

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error(ErrorKind::kIoError, "cannot write " + p.string());
  f << text;
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream f(p);
  if (!f) throw Error(ErrorKind::kIoError, "cannot open " + p.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(f, line);) {
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

std::vector<TaskConfig> task_catalog(const Options& o) {
  return o.tasks_file.empty() ? builtin_tasks() : load_tasks(o.tasks_file);
}

const TaskConfig& find_task(const std::vector<TaskConfig>& tasks, int id) {
  for (const auto& t : tasks) {
    if (t.task_id == id) return t;
  }
  throw Error(ErrorKind::kInvalidArgument, "unknown task id " + std::to_string(id));
}

std::vector<TaskConfig> select_tasks(const Options& o) {
  auto all = task_catalog(o);
  if (o.tasks == "all") return all;
  std::vector<TaskConfig> picked;
  std::stringstream ss(o.tasks);
  for (std::string part; std::getline(ss, part, ',');) {
    try {
      picked.push_back(find_task(all, std::stoi(part)));
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::kInvalidArgument, "bad task list entry '" + part + "'");
    }
  }
  return picked;
}

PolicyFactory make_factory(const Options& o) {
  return o.policy == "random" ? random_policy_factory() : scripted_policy_factory(o.tps);
}

EpisodeOptions episode_options(const Options& o) {
  EpisodeOptions eo;
  eo.mode = o.mode;
  eo.decode_budget = o.budget;
  eo.cycle_cap = o.cycle_cap;
  return eo;
}

StageConfig stage_config(const Options& o) {
  StageConfig c;
  c.n = o.n;
  c.m = o.m;
  c.k_frames = o.k_frames;
  c.merge_window_ms = o.merge_window_ms;
  c.split_fraction = o.split_fraction;
  c.seed = o.seed;
  c.validate();
  return c;
}

// Sessions without recorded intervals are treated as active throughout.
TrackSession load_gated(const fs::path& dir) {
  auto s = import_session(dir);
  return s.active_intervals.empty() ? s : gate_session(s);
}

ExplanationContext context_for(const TrackSession& s) {
  ExplanationContext ctx;
  const auto it = s.meta.find("task_id");
  if (it == s.meta.end()) return ctx;
  for (const auto& t : builtin_tasks()) {
    if (std::to_string(t.task_id) == it->second) ctx.block_mode = t.mode == GameMode::kSSDT;
  }
  return ctx;
}

json timed_action_json(const TimedAction& a) {
  return {{"t_ms", a.t_ms}, {"action", render_event(a.action)}};
}

ActionEvent event_from_text(const std::string& text) {
  const auto seq = parse_action_sequence(text);
  if (seq.size() != 1) throw Error(ErrorKind::kParseError, "expected one action in '" + text + "'");
  return seq.front();
}

std::vector<TimedAction> read_actions(const fs::path& p) {
  std::vector<TimedAction> out;
  for (const auto& line : read_lines(p)) {
    try {
      const auto j = json::parse(line);
      out.push_back({event_from_text(j.at("action").get<std::string>()), j.at("t_ms").get<std::int64_t>()});
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kParseError, p.filename().string() + ": " + e.what());
    }
  }
  return out;
}

std::vector<AoTRecord> load_records(const Options& o) {
  return o.in.empty() ? bundled_stage3_dataset() : read_aot_jsonl(o.in);
}

// ---- track ----

void cmd_track_import(const Options& o, std::ostream& out) {
  const auto s = load_gated(o.dir);
  const auto c = coalesce_events(s.raw_events, o.tap_threshold_ms);
  const fs::path dest = o.out.empty() ? fs::path(o.dir) / "actions.jsonl" : fs::path(o.out);
  std::string body;
  for (const auto& a : c.actions) body += timed_action_json(a).dump() + "\n";
  write_text(dest, body);
  out << json{{"frames", s.frames.size()},
              {"events", s.raw_events.size()},
              {"actions", c.actions.size()},
              {"long_presses", c.long_presses},
              {"out", dest.string()}}
             .dump()
      << "\n";
}

void cmd_track_align(const Options& o, std::ostream& out) {
  const auto s = load_gated(o.dir);
  const fs::path src = o.actions_file.empty() ? fs::path(o.dir) / "actions.jsonl" : fs::path(o.actions_file);
  const auto r = align_actions_to_frames(read_actions(src), s.frames);
  const fs::path dest = o.out.empty() ? fs::path(o.dir) / "aligned.jsonl" : fs::path(o.out);
  std::string body;
  for (const auto& a : r.samples) {
    body += json{{"frame_index", a.frame_index}, {"action_t_ms", a.action_t_ms}, {"action", render_event(a.action)}}
                .dump() +
            "\n";
  }
  write_text(dest, body);
  out << json{{"aligned", r.samples.size()}, {"dropped", r.dropped.size()}, {"out", dest.string()}}.dump() << "\n";
}

void cmd_track_export(const Options& o, std::ostream& out) {
  const auto tasks = task_catalog(o);
  const auto& task = find_task(tasks, o.task);
  auto policy = make_factory(o)(task, o.seed);
  const auto report = run_episode(task, *policy, o.seed, episode_options(o));
  export_session(episode_to_session(report), o.out);
  out << json{{"task_id", task.task_id},
              {"seed", o.seed},
              {"outcome", outcome_name(report.outcome)},
              {"frames", report.frames.size()},
              {"actions", report.executed.size()},
              {"out", o.out}}
             .dump()
      << "\n";
}

// ---- aot ----

void cmd_aot_build(const Options& o, std::ostream& out) {
  if (o.stage < 1 || o.stage > 3) throw Error(ErrorKind::kInvalidStage, "stage must be 1, 2 or 3");
  const auto cfg = stage_config(o);
  const auto s = load_gated(o.dir);
  const auto ctx = context_for(s);
  const auto actions = coalesce_events(s.raw_events, o.tap_threshold_ms).actions;
  std::vector<AoTRecord> records;
  json summary{{"stage", o.stage}};
  if (o.stage == 1) {
    auto r = build_video_aot(s.frames, actions, cfg, ctx);
    records = std::move(r.records);
    summary["warnings"] = r.warnings;
  } else {
    const auto aligned = align_actions_to_frames(actions, s.frames);
    auto r = build_frames_aot(s.frames, aligned.samples, cfg, ctx);
    records = std::move(r.records);
    if (o.stage == 3) {
      for (auto& rec : records) rec = to_truncated_form(rec, cfg.sentinels);
    }
    summary["skipped"] = r.skipped.size();
    summary["dropped"] = aligned.dropped.size();
  }
  const fs::path dest =
      o.out.empty() ? fs::path(o.dir) / ("stage" + std::to_string(o.stage) + ".jsonl") : fs::path(o.out);
  write_aot_jsonl(records, dest);
  summary["records"] = records.size();
  summary["out"] = dest.string();
  out << summary.dump() << "\n";
}

void cmd_aot_split(const Options& o, std::ostream& out) {
  const auto cfg = stage_config(o);
  const auto records = read_aot_jsonl(o.in);
  const auto [train, val] = split_dataset(records, cfg);
  const fs::path in(o.in);
  const auto stem = (in.parent_path() / in.stem()).string();
  const fs::path train_p = o.train_out.empty() ? fs::path(stem + ".train.jsonl") : fs::path(o.train_out);
  const fs::path val_p = o.val_out.empty() ? fs::path(stem + ".val.jsonl") : fs::path(o.val_out);
  write_aot_jsonl(train, train_p);
  write_aot_jsonl(val, val_p);
  out << json{{"seed", o.seed},
              {"train", train.size()},
              {"val", val.size()},
              {"train_out", train_p.string()},
              {"val_out", val_p.string()}}
             .dump()
      << "\n";
}

void cmd_aot_stats(const Options& o, std::ostream& out) {
  const auto records = read_aot_jsonl(o.in);
  std::map<std::string, std::size_t> stages;
  std::size_t actions = 0, frames = 0;
  std::vector<AoTRecord> stage3;
  for (const auto& r : records) {
    ++stages[std::to_string(r.stage)];
    actions += r.actions.size();
    frames += r.frame_refs.size();
    if (r.stage == 3) stage3.push_back(r);
  }
  const double n = records.empty() ? 1.0 : static_cast<double>(records.size());
  json j{{"records", records.size()},
         {"stages", stages},
         {"mean_actions", static_cast<double>(actions) / n},
         {"mean_frames", static_cast<double>(frames) / n}};
  if (!stage3.empty()) {
    const auto t = token_savings_report(stage3);
    j["token_savings"] = {{"mean_full", t.mean_full}, {"mean_truncated", t.mean_truncated}, {"ratio", t.ratio}};
  }
  out << j.dump() << "\n";
}

// ---- loss ----

void cmd_loss_check(const Options& o, std::ostream& out) {
  if (o.points <= 0 || o.dim < 2) throw Error(ErrorKind::kInvalidArgument, "need points > 0 and dim >= 2");
  std::mt19937_64 rng(o.seed);
  double con_pull = 0.0, con_push = 0.0, align = 0.0;
  for (int i = 0; i < o.points; ++i) {
    EmbeddingPair pair{random_unit_vector(static_cast<std::size_t>(o.dim), rng),
                       random_unit_vector(static_cast<std::size_t>(o.dim), rng)};
    con_pull = std::max(con_pull, check_contrastive_gradient(pair, true, o.h).max_rel_error);
    con_push = std::max(con_push, check_contrastive_gradient(pair, false, o.h).max_rel_error);
    const auto probs = random_simplex_point(rng);
    const auto c = kPriorityOrder[rng() % kNumCategories];
    align = std::max(align, check_alignment_gradient(probs, c, o.h).max_rel_error);
  }
  const double worst = std::max({con_pull, con_push, align});
  out << json{{"seed", o.seed},
              {"points", o.points},
              {"dim", o.dim},
              {"h", o.h},
              {"max_rel_error_pull", con_pull},
              {"max_rel_error_push", con_push},
              {"max_rel_error_align", align},
              {"tolerance", o.tolerance},
              {"pass", worst < o.tolerance}}
             .dump()
      << "\n";
  if (!(worst < o.tolerance)) {
    throw Error(ErrorKind::kNumericFailure, "gradient check exceeded tolerance");
  }
}

// ---- decode ----

void cmd_decode_run(const Options& o, std::ostream& out) {
  const auto records = load_records(o);
  std::string body;
  for (std::size_t i = 0; i < records.size(); ++i) {
    std::unique_ptr<TokenStream> stream = std::make_unique<VectorTokenStream>(tokenize(records[i].serialized));
    if (o.tps > 0) stream = std::make_unique<PacedTokenStream>(std::move(stream), o.tps);
    const auto r = decode(*stream, o.mode, o.budget);
    json j{{"index", i},
           {"actions", render_action(r.actions)},
           {"stop_reason", stop_reason_name(r.stop_reason)},
           {"emitted", r.emitted_count},
           {"pulled", r.pulled_count}};
    if (o.tps > 0) j["wall_ms"] = r.wall_ms;
    body += j.dump() + "\n";
  }
  if (o.out.empty()) {
    out << body;
  } else {
    write_text(o.out, body);
    out << json{{"records", records.size()}, {"out", o.out}}.dump() << "\n";
  }
}

void cmd_decode_savings(const Options& o, std::ostream& out) {
  const auto records = load_records(o);
  const auto t = token_savings_report(records);
  out << json{{"records", records.size()},
              {"mean_full", t.mean_full},
              {"mean_truncated", t.mean_truncated},
              {"ratio", t.ratio},
              {"reference_full", kReferenceFullTokens},
              {"reference_truncated", kReferenceTruncatedTokens},
              {"reference_ratio", kReferenceTruncatedTokens / kReferenceFullTokens}}
             .dump()
      << "\n";
}

// ---- agent ----

void cmd_agent_run(const Options& o, std::ostream& out) {
  const auto tasks = task_catalog(o);
  const auto& task = find_task(tasks, o.task);
  auto policy = make_factory(o)(task, o.seed);
  const auto r = run_episode(task, *policy, o.seed, episode_options(o));
  if (!o.export_dir.empty()) export_session(episode_to_session(r), o.export_dir);
  json log = json::array();
  for (const auto& e : r.action_log) log.push_back({{"t_ms", e.t_ms}, {"text", e.text}});
  out << json{{"task_id", r.task_id},
              {"seed", r.seed},
              {"policy", o.policy},
              {"mode", decode_mode_name(r.mode)},
              {"success", r.success},
              {"outcome", outcome_name(r.outcome)},
              {"decision_cycles", r.decision_cycles},
              {"policy_calls", r.policy_calls},
              {"mean_modeled_latency_ms", r.mean_modeled_latency_ms},
              {"sim_duration_ms", r.sim_duration_ms},
              {"final_player_hp", r.final_player_hp},
              {"final_enemy_hp", r.final_enemy_hp},
              {"action_log", log}}
             .dump(2)
      << "\n";
}

void cmd_agent_suite(const Options& o, std::ostream& out) {
  const auto report =
      run_suite(select_tasks(o), make_factory(o), o.policy, o.repeats, o.seed, episode_options(o));
  const auto csv = suite_csv(report);
  if (!o.out.empty()) {
    const fs::path dir(o.out);
    write_text(dir / ("suite_" + o.policy + ".csv"), csv);
    write_text(dir / ("suite_" + o.policy + ".json"), suite_json(report));
  }
  out << csv;
}

// ---- bench ----

json stats_json(const DatasetStats& st) {
  json counts, fractions;
  for (std::size_t i = 0; i < kNumBenchCategories; ++i) {
    const auto c = static_cast<BenchCategory>(i);
    counts[std::string(bench_category_name(c))] = st.category_counts[i];
    fractions[std::string(bench_category_name(c))] = st.fraction(c);
  }
  json subtasks;
  for (std::size_t i = 0; i < kNumBenchSubtasks; ++i) {
    subtasks[std::string(bench_subtask_name(static_cast<BenchSubtask>(i)))] = st.subtask_counts[i];
  }
  json issues = json::array();
  for (const auto& i : st.issues) issues.push_back({{"line", i.line}, {"field", i.field}, {"message", i.message}});
  return {{"total", st.total}, {"categories", counts}, {"fractions", fractions}, {"subtasks", subtasks},
          {"issues", issues}};
}

void cmd_bench_validate(const Options& o, std::ostream& out) {
  const auto st = validate_dataset(o.in);
  out << stats_json(st).dump() << "\n";
  if (!st.ok()) {
    const auto& i = st.issues.front();
    throw Error(ErrorKind::kValidationError, "line " + std::to_string(i.line) + ": " + i.field + ": " + i.message);
  }
}

void cmd_bench_gen(const Options& o, std::ostream& out) {
  BenchGenConfig cfg;
  cfg.seed = o.seed;
  const auto pool = bench_transcripts(o.seed, o.episodes);
  const auto items = generate_synthetic(pool, cfg);
  write_bench_jsonl(items, o.out);
  const auto st = validate_dataset(o.out);
  auto j = stats_json(st);
  j["seed"] = o.seed;
  j["out"] = o.out;
  out << j.dump() << "\n";
}

void cmd_bench_score(const Options& o, std::ostream& out) {
  const auto r = score(load_bench(o.items), load_predictions(o.predictions));
  json j{{"acc_gathering", r.acc_gathering},
         {"acc_comprehension", r.acc_comprehension},
         {"acc_reasoning", r.acc_reasoning},
         {"macro_avg", r.macro_avg},
         {"micro_avg", r.micro_avg},
         {"missing", r.missing},
         {"unparseable", r.unparseable},
         {"extraneous", r.extraneous}};
  if (!o.out.empty()) {
    write_text(fs::path(o.out) / "bench_report.csv", bench_report_csv(r));
    write_text(fs::path(o.out) / "bench_report.json", j.dump(2) + "\n");
  }
  if (o.format == "csv") out << bench_report_csv(r);
  else if (o.format == "json") out << j.dump() << "\n";
  else out << bench_report_table(r);
}

// ---- report ----

void cmd_report(const Options& o, std::ostream& out) {
  const auto savings = token_savings_report(bundled_stage3_dataset());
  const auto tasks = select_tasks(o);
  const auto eo = episode_options(o);
  const auto scripted = run_suite(tasks, scripted_policy_factory(), "scripted", o.repeats, o.seed, eo);
  const auto random = run_suite(tasks, random_policy_factory(), "random", o.repeats, o.seed, eo);

  json j{{"seed", o.seed}, {"repeats", o.repeats}, {"mode", decode_mode_name(o.mode)}};
  j["weight_schedule"] = weight_schedule(kNumCategories);
  j["token_savings"] = {{"mean_full", savings.mean_full},
                        {"mean_truncated", savings.mean_truncated},
                        {"ratio", savings.ratio},
                        {"reference_ratio", kReferenceTruncatedTokens / kReferenceFullTokens}};
  std::string csv = "task_id,scripted_success_rate,random_success_rate,scripted_mean_cycles\n";
  json rows = json::array();
  for (std::size_t i = 0; i < scripted.tasks.size(); ++i) {
    const auto& s = scripted.tasks[i];
    const auto& r = random.tasks[i];
    char line[128];
    std::snprintf(line, sizeof line, "%d,%.4f,%.4f,%.2f\n", s.task_id, s.success_rate, r.success_rate, s.mean_cycles);
    csv += line;
    rows.push_back({{"task_id", s.task_id},
                    {"scripted_success_rate", s.success_rate},
                    {"random_success_rate", r.success_rate},
                    {"scripted_mean_cycles", s.mean_cycles}});
  }
  j["tasks"] = rows;
  if (!o.out.empty()) {
    write_text(fs::path(o.out) / "report.json", j.dump(2) + "\n");
    write_text(fs::path(o.out) / "report.csv", csv);
  }
  out << csv;
}

// Keys of the JSON config object override the matching long flags.
void apply_config(CLI::App& leaf, const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::kIoError, "cannot open config " + path);
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kParseError, "config " + path + ": " + e.what());
  }
  if (!j.is_object()) throw Error(ErrorKind::kParseError, "config " + path + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    auto* opt = leaf.get_option_no_throw("--" + key);
    if (opt == nullptr || key == "config") {
      throw CLI::ValidationError("--config", "unknown key '" + key + "' for " + leaf.get_name());
    }
    opt->clear();
    opt->add_result(value.is_string() ? value.get<std::string>() : value.dump());
    opt->run_callback();
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Combat agent toolkit: tracking, datasets, loss checks, decoding, arena and benchmark"};
  app.name("combatkit");
  app.require_subcommand(1);
  app.set_version_flag("--version", "combatkit 1.0");

  using Handler = void (*)(const Options&, std::ostream&);
  std::vector<std::pair<CLI::App*, Handler>> leaves;

  auto leaf = [&](CLI::App* parent, const std::string& name, const std::string& desc, Handler h) {
    auto* c = parent->add_subcommand(name, desc);
    c->add_option("--config", o.config, "JSON file whose keys override flags")->check(CLI::ExistingFile);
    leaves.emplace_back(c, h);
    return c;
  };
  auto group = [&](const std::string& name, const std::string& desc) {
    auto* g = app.add_subcommand(name, desc);
    g->require_subcommand(1);
    return g;
  };
  auto mode_opt = [&](CLI::App* c) {
    c->add_option("--mode", o.mode_name, "truncated or full")->check(CLI::IsMember({"truncated", "full"}));
  };
  auto seed_opt = [&](CLI::App* c, bool required) {
    auto* opt = c->add_option("--seed", o.seed, "Base RNG seed");
    if (required) opt->required();
  };
  auto policy_opt = [&](CLI::App* c) {
    c->add_option("--policy", o.policy, "scripted or random")->check(CLI::IsMember({"scripted", "random"}));
    c->add_option("--tps", o.tps, "Scripted policy pacing in tokens per second (0 = unpaced)");
    c->add_option("--tasks-file", o.tasks_file, "Task definitions JSON")->check(CLI::ExistingFile);
    c->add_option("--cycle-cap", o.cycle_cap, "Decision cycles before a timeout");
    c->add_option("--budget", o.budget, "Decode budget in pulled tokens");
    mode_opt(c);
  };
  auto stage_opts = [&](CLI::App* c) {
    c->add_option("--n", o.n, "Frames per stage-1 window");
    c->add_option("--m", o.m, "Stage-1 sampling rate (fps)");
    c->add_option("--k-frames", o.k_frames, "Stage-2 traceback length");
    c->add_option("--merge-window-ms", o.merge_window_ms, "Stage-2 decision merge window");
  };

  auto* track = group("track", "Session ingestion, alignment and simulator export");
  {
    auto* c = leaf(track, "import", "Coalesce a session's input events into actions", cmd_track_import);
    c->add_option("--dir", o.dir, "Session directory")->required()->check(CLI::ExistingDirectory);
    c->add_option("--out", o.out, "Actions JSONL (default DIR/actions.jsonl)");
    c->add_option("--tap-threshold-ms", o.tap_threshold_ms, "Longest press still treated as a tap");
  }
  {
    auto* c = leaf(track, "align", "Align imported actions to their next frame", cmd_track_align);
    c->add_option("--dir", o.dir, "Session directory")->required()->check(CLI::ExistingDirectory);
    c->add_option("--actions", o.actions_file, "Actions JSONL (default DIR/actions.jsonl)");
    c->add_option("--out", o.out, "Aligned JSONL (default DIR/aligned.jsonl)");
  }
  {
    auto* c = leaf(track, "export", "Record an arena episode as a session directory", cmd_track_export);
    c->add_option("--task", o.task, "Task id")->required();
    c->add_option("--out", o.out, "Output session directory")->required();
    seed_opt(c, true);
    policy_opt(c);
  }

  auto* aot = group("aot", "Action-of-thought dataset construction");
  {
    auto* c = leaf(aot, "build", "Build stage 1, 2 or 3 records from a session", cmd_aot_build);
    c->add_option("--stage", o.stage, "Stage (1, 2 or 3)")->required();
    c->add_option("--dir", o.dir, "Session directory")->required()->check(CLI::ExistingDirectory);
    c->add_option("--out", o.out, "Output JSONL (default DIR/stageN.jsonl)");
    c->add_option("--tap-threshold-ms", o.tap_threshold_ms, "Longest press still treated as a tap");
    stage_opts(c);
  }
  {
    auto* c = leaf(aot, "split", "Seeded train/validation split", cmd_aot_split);
    c->add_option("--in", o.in, "Records JSONL")->required()->check(CLI::ExistingFile);
    c->add_option("--fraction", o.split_fraction, "Training fraction");
    c->add_option("--train", o.train_out, "Training output");
    c->add_option("--val", o.val_out, "Validation output");
    seed_opt(c, true);
  }
  {
    auto* c = leaf(aot, "stats", "Record counts and token statistics", cmd_aot_stats);
    c->add_option("--in", o.in, "Records JSONL")->required()->check(CLI::ExistingFile);
  }

  auto* loss = group("loss", "Action-weighted loss utilities");
  {
    auto* c = leaf(loss, "check", "Finite-difference gradient check at random points", cmd_loss_check);
    c->add_option("--points", o.points, "Random points");
    c->add_option("--dim", o.dim, "Embedding dimension");
    c->add_option("--step", o.h, "Finite-difference step");
    c->add_option("--tolerance", o.tolerance, "Maximum relative error");
    seed_opt(c, false);
  }

  auto* dec = group("decode", "Streaming decode of serialized responses");
  {
    auto* c = leaf(dec, "run", "Decode every record of a dataset", cmd_decode_run);
    c->add_option("--in", o.in, "Records JSONL (default: bundled stage-3 set)")->check(CLI::ExistingFile);
    c->add_option("--out", o.out, "Write results here instead of stdout");
    c->add_option("--budget", o.budget, "Decode budget in pulled tokens");
    c->add_option("--tps", o.tps, "Pace the stream at this many tokens per second");
    mode_opt(c);
  }
  {
    auto* c = leaf(dec, "savings", "Mean full vs truncated response length", cmd_decode_savings);
    c->add_option("--in", o.in, "Records JSONL (default: bundled stage-3 set)")->check(CLI::ExistingFile);
  }

  auto* agent = group("agent", "Pause-infer-act episodes in the arena");
  {
    auto* c = leaf(agent, "run", "Run one episode", cmd_agent_run);
    c->add_option("--task", o.task, "Task id")->required();
    c->add_option("--export", o.export_dir, "Also export the episode as a session directory");
    seed_opt(c, true);
    policy_opt(c);
  }
  {
    auto* c = leaf(agent, "suite", "Run every selected task a number of times", cmd_agent_suite);
    c->add_option("--tasks", o.tasks, "'all' or a comma-separated list of task ids");
    c->add_option("--repeats", o.repeats, "Episodes per task")->check(CLI::PositiveNumber);
    c->add_option("--out", o.out, "Directory for suite_<policy>.csv and .json");
    seed_opt(c, true);
    policy_opt(c);
  }

  auto* bench = group("bench", "Combat-understanding benchmark");
  {
    auto* c = leaf(bench, "validate", "Schema check and category statistics", cmd_bench_validate);
    c->add_option("--in", o.in, "Benchmark JSONL")->required()->check(CLI::ExistingFile);
  }
  {
    auto* c = leaf(bench, "gen", "Generate a synthetic benchmark from arena transcripts", cmd_bench_gen);
    c->add_option("--out", o.out, "Output JSONL")->required();
    c->add_option("--episodes", o.episodes, "Episodes per task and policy")->check(CLI::PositiveNumber);
    seed_opt(c, false);
  }
  {
    auto* c = leaf(bench, "score", "Score predictions against a benchmark", cmd_bench_score);
    c->add_option("--items", o.items, "Benchmark JSONL")->required()->check(CLI::ExistingFile);
    c->add_option("--predictions", o.predictions, "Predictions JSONL")->required()->check(CLI::ExistingFile);
    c->add_option("--out", o.out, "Directory for bench_report.csv and .json");
    c->add_option("--format", o.format, "table, csv or json")->check(CLI::IsMember({"table", "csv", "json"}));
  }

  {
    auto* c = leaf(&app, "report", "Token savings plus scripted and random suites, CSV and JSON", cmd_report);
    c->add_option("--out", o.out, "Directory for report.csv and report.json");
    c->add_option("--tasks", o.tasks, "'all' or a comma-separated list of task ids");
    c->add_option("--repeats", o.repeats, "Episodes per task")->check(CLI::PositiveNumber);
    seed_opt(c, true);
    mode_opt(c);
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    for (const auto& [c, h] : leaves) {
      if (!c->parsed()) continue;
      if (!o.config.empty()) apply_config(*c, o.config);
      o.mode = kModes.at(o.mode_name);
      h(o, out);
      return 0;
    }
    throw CLI::CallForHelp();
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    return 2;
  } catch (const Error& e) {
    err << json{{"error", error_kind_name(e.kind())}, {"message", e.what()}}.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << json{{"error", "InternalError"}, {"message", e.what()}}.dump() << "\n";
    return 1;
  }
}

}  // namespace combatkit
