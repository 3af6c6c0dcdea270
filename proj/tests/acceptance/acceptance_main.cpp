// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "combat/action.hpp"
#include "combat/aot.hpp"
#include "combat/arena.hpp"
#include "combat/cubench.hpp"
#include "combat/decoder.hpp"
#include "combat/error.hpp"
#include "combat/loss.hpp"
#include "combat/tracker.hpp"

using namespace combat;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---- AC1 ----

Verdict weight_schedule_exactness() {
  const std::array<double, 10> published{0.1000, 0.0549, 0.0324, 0.0211, 0.0155,
                                         0.0126, 0.0112, 0.0105, 0.0102, 0.0100};
  const auto w = weight_schedule(10);
  double worst = 0.0;
  for (std::size_t i = 0; i < published.size(); ++i) worst = std::max(worst, std::abs(w[i] - published[i]));
  return {w.size() == 10 && worst <= 5e-5, fmt("max |w - published| = %.2e (tol 5e-5)", worst)};
}

// ---- AC2 ----

Verdict alignment_oracle() {
  std::mt19937_64 rng(2);
  std::size_t total_actions = 0, max_actions = 0;
  for (int stream = 0; stream < 1000; ++stream) {
    std::vector<FrameRecord> frames(1 + rng() % 400);
    std::int64_t t = static_cast<std::int64_t>(rng() % 50);
    for (std::size_t i = 0; i < frames.size(); ++i) {
      frames[i] = FrameRecord{static_cast<std::int64_t>(i + 1), t, ""};
      t += static_cast<std::int64_t>(rng() % 200);  // repeated timestamps allowed
    }
    const std::size_t n = stream % 100 == 0 ? 10000 : rng() % 2000;
    std::vector<TimedAction> actions(n);
    for (auto& a : actions) {
      a.action = ActionEvent::tap(ActionCategory::kLightAttack);
      a.t_ms = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(t + 300));
    }
    std::sort(actions.begin(), actions.end(), [](const auto& x, const auto& y) { return x.t_ms < y.t_ms; });
    total_actions += n;
    max_actions = std::max(max_actions, n);

    const auto r = align_actions_to_frames(actions, frames);
    std::size_t si = 0, di = 0;
    for (const auto& a : actions) {
      std::optional<std::int64_t> want;
      for (const auto& f : frames) {
        if (f.t_ms >= a.t_ms) {
          want = f.index;
          break;
        }
      }
      if (want) {
        if (si >= r.samples.size() || r.samples[si].frame_index != *want || r.samples[si].action_t_ms != a.t_ms) {
          return {false, fmt("stream %d: mismatch at action t=%lld", stream, static_cast<long long>(a.t_ms))};
        }
        ++si;
      } else {
        if (di >= r.dropped.size() || r.dropped[di].t_ms != a.t_ms) {
          return {false, fmt("stream %d: drop mismatch", stream)};
        }
        ++di;
      }
    }
    if (si != r.samples.size() || di != r.dropped.size()) return {false, fmt("stream %d: extra output", stream)};
    for (std::size_t i = 1; i < r.samples.size(); ++i) {
      if (r.samples[i - 1].frame_index > r.samples[i].frame_index) return {false, "monotonicity violated"};
    }
  }
  return {true, fmt("1000 streams, %zu actions (max %zu per stream) equal the linear scan", total_actions,
                    max_actions)};
}

// ---- AC3 ----

Verdict gradient_checks() {
  std::mt19937_64 rng(3);
  const double h = 1e-5;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    EmbeddingPair p{random_unit_vector(64, rng), random_unit_vector(64, rng)};
    // Off-unit-sphere points exercise the normalisation terms too.
    const double s = 0.5 + static_cast<double>(rng() % 1000) / 500.0;
    for (auto& x : p.a_eos) x *= s;
    worst = std::max(worst, check_contrastive_gradient(p, true, h).max_rel_error);
    worst = std::max(worst, check_contrastive_gradient(p, false, h).max_rel_error);
    const auto probs = random_simplex_point(rng);
    worst = std::max(worst, check_alignment_gradient(probs, kPriorityOrder[rng() % kNumCategories], h).max_rel_error);
  }
  return {worst < 1e-4, fmt("max relative error %.3e over 100 points, d=64 (tol 1e-4)", worst)};
}

// ---- AC4 ----

ActionSet random_set(std::mt19937_64& rng, int min_size) {
  std::vector<ActionCategory> cats(kPriorityOrder.begin(), kPriorityOrder.end());
  std::shuffle(cats.begin(), cats.end(), rng);
  const int n = min_size + static_cast<int>(rng() % static_cast<unsigned>(kNumCategories - min_size + 1));
  ActionSet s;
  for (int i = 0; i < n; ++i) {
    const auto c = cats[static_cast<std::size_t>(i)];
    s.add(is_hold_capable(c) && rng() % 2 ? ActionEvent::hold(c, 1 + static_cast<std::int64_t>(rng() % 3000))
                                          : ActionEvent::tap(c));
  }
  return s;
}

Verdict branch_behavior() {
  std::mt19937_64 rng(4);
  const auto schedule = PrioritySchedule::standard();
  const auto w = weight_schedule(kNumCategories);
  int matched = 0;
  for (int i = 0; i < 10000; ++i) {
    const ActionSet label = random_set(rng, 1);
    ActionPrediction pred;
    pred.probs = random_simplex_point(rng, i % 7 == 0 ? 0.0 : 1e-3);
    pred.output_set = random_set(rng, 0);
    EmbeddingPair pair{random_unit_vector(16, rng), random_unit_vector(16, rng)};
    const auto b = composite_loss(pair, pred, label, 0.25, schedule);

    int best = kNumCategories;
    for (const auto& e : label) best = std::min(best, priority_rank(e.category));
    const bool is_match = std::any_of(pred.output_set.begin(), pred.output_set.end(),
                                      [&](const ActionEvent& e) { return priority_rank(e.category) == best; });
    double dot = 0.0, nv = 0.0, na = 0.0;
    for (std::size_t k = 0; k < pair.v_eos.size(); ++k) {
      dot += pair.v_eos[k] * pair.a_eos[k];
      nv += pair.v_eos[k] * pair.v_eos[k];
      na += pair.a_eos[k] * pair.a_eos[k];
    }
    const double pull = 1.0 - dot / std::sqrt(nv * na);
    const double align = -std::log(std::max(pred.probs[static_cast<std::size_t>(best)], 1e-12));
    const double want = is_match ? pull : -pull + align;
    if (b.matched != is_match || priority_rank(b.c_star) != best) return {false, fmt("pair %d: wrong branch", i)};
    if (std::abs(b.l_act - want) > 1e-9 * std::max(1.0, std::abs(want))) {
      return {false, fmt("pair %d: L_act %.12f vs %.12f", i, b.l_act, want)};
    }
    if (b.alpha != w[static_cast<std::size_t>(best)]) return {false, fmt("pair %d: alpha mismatch", i)};
    matched += is_match;
  }
  return {true, fmt("10000 pairs (%d matched, %d mismatched) follow the branch rule", matched, 10000 - matched)};
}

// ---- AC5 ----

Verdict truncation_prefix() {
  const auto records = bundled_stage3_dataset();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto tokens = tokenize(records[i].serialized);
    VectorTokenStream ts(tokens), fs_(tokens);
    const auto t = decode(ts, DecodeMode::kTruncated);
    const auto f = decode(fs_, DecodeMode::kFull);
    const bool prefix = t.emitted_tokens.size() < f.emitted_tokens.size() &&
                        std::equal(t.emitted_tokens.begin(), t.emitted_tokens.end(), f.emitted_tokens.begin());
    if (t.actions != f.actions || t.actions != records[i].action_set() || !prefix) {
      return {false, fmt("record %zu: truncated/full disagree", i)};
    }
  }
  const auto s = token_savings_report(records);
  return {s.ratio < 0.45, fmt("%zu records; tokens %.2f -> %.2f, ratio %.3f (bar 0.45; reference %.2f/%.2f = %.3f)",
                              records.size(), s.mean_full, s.mean_truncated, s.ratio, kReferenceTruncatedTokens,
                              kReferenceFullTokens, kReferenceTruncatedTokens / kReferenceFullTokens)};
}

// ---- AC6 ----

Verdict latency_ratio() {
  const double tps = 1000.0;
  const auto records = bundled_stage3_dataset();
  double trunc_ms = 0.0, full_ms = 0.0;
  for (const auto& r : records) {
    for (auto mode : {DecodeMode::kTruncated, DecodeMode::kFull}) {
      PacedTokenStream s(std::make_unique<VectorTokenStream>(tokenize(r.serialized)), tps);
      const auto d = decode(s, mode);
      (mode == DecodeMode::kTruncated ? trunc_ms : full_ms) += d.wall_ms;
    }
  }
  const double n = static_cast<double>(records.size());
  const double ratio = trunc_ms / full_ms;

  // One policy call per decision cycle, with a paced scripted policy.
  const auto tasks = builtin_tasks();
  bool one_call = true;
  for (int id : {1, 11}) {
    const auto& task = tasks[static_cast<std::size_t>(id - 1)];
    auto policy = scripted_policy_factory(4000.0)(task, 5);
    const auto rep = run_episode(task, *policy, 5);
    one_call = one_call && rep.policy_calls == rep.decision_cycles && policy->call_count() == rep.decision_cycles;
  }
  return {ratio <= 0.6 && one_call,
          fmt("mean wall %.2f ms truncated vs %.2f ms full at %.0f tok/s, ratio %.3f (bar 0.6); one call per cycle: %s",
              trunc_ms / n, full_ms / n, tps, ratio, one_call ? "yes" : "no")};
}

// ---- AC7 ----

Verdict suite_protocol() {
  const auto tasks = builtin_tasks();
  const EpisodeOptions opts;
  const auto s1 = run_suite(tasks, scripted_policy_factory(), "scripted", 10, 0, opts);
  const auto r1 = run_suite(tasks, random_policy_factory(), "random", 10, 0, opts);
  const auto s2 = run_suite(tasks, scripted_policy_factory(), "scripted", 10, 0, opts);
  const auto r2 = run_suite(tasks, random_policy_factory(), "random", 10, 0, opts);
  const bool identical = suite_csv(s1) == suite_csv(s2) && suite_json(s1) == suite_json(s2) &&
                         suite_csv(r1) == suite_csv(r2) && suite_json(r1) == suite_json(r2);
  bool beats = true;
  std::string easy;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (tasks[i].difficulty != Difficulty::kEasy) continue;
    beats = beats && s1.tasks[i].success_rate > r1.tasks[i].success_rate;
    easy += fmt(" t%d %.1f>%.1f", tasks[i].task_id, s1.tasks[i].success_rate, r1.tasks[i].success_rate);
  }
  return {identical && beats && s1.episodes == 130,
          fmt("130 episodes per policy; easy tasks scripted vs random:%s; reruns byte-identical: %s", easy.c_str(),
              identical ? "yes" : "no")};
}

// ---- AC8 ----

Verdict bench_scoring() {
  const fs::path fixtures = COMBAT_FIXTURE_DIR;
  const auto items = load_bench(fixtures / "cubench_synthetic.jsonl");
  const auto r = score(items, load_predictions(fixtures / "table2_predictions.jsonl"));
  const auto two = [](double v) { return fmt("%.2f", v); };
  const bool row = two(r.acc_gathering) == "60.83" && two(r.acc_comprehension) == "60.29" &&
                   two(r.acc_reasoning) == "69.71" && two(r.macro_avg) == "63.61";

  const auto tmp = fs::temp_directory_path() / "combat_acceptance_bench.jsonl";
  write_bench_jsonl(generate_synthetic(bench_transcripts(0, 2)), tmp);
  const auto st = validate_dataset(tmp);
  fs::remove(tmp);
  const bool shape = st.ok() && st.category_counts[0] == 360 && st.category_counts[1] == 204 &&
                     st.category_counts[2] == 350;
  return {row && shape, fmt("scored %.2f/%.2f/%.2f -> macro %.2f (micro %.2f); generated %zu/%zu/%zu, %zu issues",
                            r.acc_gathering, r.acc_comprehension, r.acc_reasoning, r.macro_avg, r.micro_avg,
                            st.category_counts[0], st.category_counts[1], st.category_counts[2], st.issues.size())};
}

// ---- AC9 ----

ActionSet by_priority(std::vector<ActionEvent> events) {
  std::sort(events.begin(), events.end(),
            [](const auto& a, const auto& b) { return priority_rank(a.category) < priority_rank(b.category); });
  return ActionSet(std::move(events));
}

std::string pipeline_once(const TaskConfig& task, const PolicyFactory& factory, std::uint64_t seed,
                          std::size_t& actions_checked) {
  auto policy = factory(task, seed);
  const auto rep = run_episode(task, *policy, seed);
  if (rep.executed.empty()) return "episode executed no actions";

  const auto dir = fs::temp_directory_path() / ("combat_acceptance_e2e_" + std::to_string(task.task_id));
  fs::remove_all(dir);
  export_session(episode_to_session(rep, 1700000000000), dir);
  const auto session = gate_session(import_session(dir));
  fs::remove_all(dir);

  const auto actions = coalesce_events(session.raw_events).actions;
  const auto aligned = align_actions_to_frames(actions, session.frames);
  if (!aligned.dropped.empty()) return "alignment dropped actions";

  StageConfig cfg;
  cfg.m = 8;
  const ExplanationContext ctx{task.mode == GameMode::kSSDT};

  // Stage 1: the full windows together carry every executed action they
  // cover, in order. A trailing partial window is not emitted.
  const auto s1 = build_video_aot(session.frames, actions, cfg, ctx);
  std::vector<ActionEvent> stage1_events;
  for (const auto& r : s1.records) {
    const auto back = aot_record_from_json(aot_record_to_json(r));
    stage1_events.insert(stage1_events.end(), back.actions.begin(), back.actions.end());
  }
  const auto picked = resample_frames(session.frames, cfg.m);
  const std::size_t covered = s1.records.size() * static_cast<std::size_t>(cfg.n);
  const std::int64_t covered_end =
      covered < picked.size() ? picked[covered].t_ms : picked.back().t_ms + 1000 / cfg.m;
  std::vector<ActionEvent> executed;
  for (const auto& e : rep.executed) {
    if (e.t_ms < covered_end) executed.push_back(e.event);
  }
  if (s1.records.empty() || stage1_events != executed) return "stage-1 windows lost or reordered actions";

  // Stages 2 and 3, then replay through the truncated decoder.
  const auto s2 = build_frames_aot(session.frames, aligned.samples, cfg, ctx);
  if (!s2.skipped.empty()) return "stage-2 skipped samples";
  std::vector<AoTRecord> s3;
  for (const auto& r : s2.records) s3.push_back(aot_record_from_json(aot_record_to_json(to_truncated_form(r))));

  ReplayPolicy replay(s3, false);
  const std::vector<ObservationFrame> no_frames;
  std::vector<std::vector<ActionEvent>> expected(s3.size());
  for (std::size_t i = 0; i < s2.assignment.size(); ++i) {
    expected[*s2.assignment[i]].push_back(rep.executed[i].event);
  }
  for (std::size_t i = 0; i < s3.size(); ++i) {
    auto stream = replay.observe(no_frames);
    const auto d = decode(*stream, DecodeMode::kTruncated);
    if (d.stop_reason != StopReason::kTrunc) return "decode did not stop at the truncation sentinel";
    if (by_priority(d.actions.events()) != by_priority(expected[i])) {
      return fmt("record %zu decoded %s, executed %s", i, render_action(d.actions).c_str(),
                 render_action(by_priority(expected[i])).c_str());
    }
    actions_checked += d.actions.size();
  }
  if (replay.call_count() != static_cast<std::int64_t>(s3.size())) return "policy call count mismatch";
  if (actions_checked == 0) return "nothing decoded";
  return "";
}

Verdict end_to_end() {
  const auto tasks = builtin_tasks();
  std::size_t checked = 0;
  int episodes = 0;
  struct Case {
    int task;
    bool random;
    std::uint64_t seed;
  };
  for (const auto& c : {Case{1, false, 1}, Case{4, false, 2}, Case{11, false, 3}, Case{2, true, 4},
                        Case{12, true, 5}}) {
    const auto factory = c.random ? random_policy_factory() : scripted_policy_factory();
    std::size_t before = checked;
    const auto err = pipeline_once(tasks[static_cast<std::size_t>(c.task - 1)], factory, c.seed, checked);
    if (!err.empty()) return {false, fmt("task %d: %s", c.task, err.c_str())};
    if (checked == before) return {false, fmt("task %d: no actions", c.task)};
    ++episodes;
  }
  return {true, fmt("%d episodes, %zu executed actions recovered through export/align/AoT/replay/decode", episodes,
                    checked)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* id;
    const char* name;
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> criteria{
      {"AC1", "weight schedule exactness", weight_schedule_exactness},
      {"AC2", "alignment oracle", alignment_oracle},
      {"AC3", "loss gradient checks", gradient_checks},
      {"AC4", "loss branch behaviour", branch_behavior},
      {"AC5", "truncation prefix equivalence", truncation_prefix},
      {"AC6", "paced latency ratio", latency_ratio},
      {"AC7", "suite protocol", suite_protocol},
      {"AC8", "benchmark scoring", bench_scoring},
      {"AC9", "end-to-end pipeline", end_to_end},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = Clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("%s %s  %s: %s [%.2f s]\n", v.pass ? "PASS" : "FAIL", c.id, c.name, v.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return failed == 0 ? 0 : 1;
}
