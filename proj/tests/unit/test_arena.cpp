#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "combat/arena.hpp"
#include "combat/tracker.hpp"

using namespace combat;
using C = ActionCategory;

namespace {

TaskConfig still_task(GameMode mode = GameMode::kBMW) {
  TaskConfig t = builtin_tasks().front();
  t.mode = mode;
  t.enemy_speed_mps = 0.0;
  t.idle_ms = 100000;  // no strikes unless a test arranges one
  return t;
}

ArenaState close_quarters(GameMode mode = GameMode::kBMW) {
  ArenaState s = make_arena(still_task(mode), 1);
  s.player_pos = {0.0, 0.0};
  s.enemy_pos = {2.0, 0.0};
  return s;
}

// Enemy strikes 100 ms from now.
void arm_strike(ArenaState& s) {
  s.enemy_phase = EnemyPhase::kTelegraph;
  s.enemy_phase_ms = 100;
}

int count_log(const std::vector<LogEntry>& log, const std::string& needle) {
  return static_cast<int>(std::count_if(log.begin(), log.end(), [&](const LogEntry& e) {
    return e.text.find(needle) != std::string::npos;
  }));
}

ObservationFrame frame_at(std::int64_t t) {
  ObservationFrame f;
  f.t_ms = t;
  return f;
}

}  // namespace

TEST_CASE("sample_frames picks window indices 0, 4 and 8") {
  FrameBuffer buf;
  for (int i = 1; i <= 8; ++i) buf.push(frame_at(i));
  try {
    sample_frames(buf);
    FAIL("expected InsufficientHistory");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInsufficientHistory);
  }
  buf.push(frame_at(9));
  auto nine = sample_frames(buf);
  REQUIRE(nine.size() == 3);
  CHECK(nine[0].t_ms == 1);
  CHECK(nine[1].t_ms == 5);
  CHECK(nine[2].t_ms == 9);

  for (int i = 10; i <= 20; ++i) buf.push(frame_at(i));
  auto twenty = sample_frames(buf);
  CHECK(twenty[0].t_ms == 12);
  CHECK(twenty[1].t_ms == 16);
  CHECK(twenty[2].t_ms == 20);
}

TEST_CASE("frame buffer evicts the oldest frames") {
  FrameBuffer buf(10);
  for (int i = 0; i < 25; ++i) buf.push(frame_at(i));
  CHECK(buf.size() == 10);
  CHECK(buf.total_pushed() == 25);
  CHECK(buf.frames().front().t_ms == 15);
  CHECK(buf.frames().back().t_ms == 24);
  CHECK_THROWS_AS(FrameBuffer(8), Error);
}

TEST_CASE("8 FPS capture: 1125 sim-ms gives nine frames") {
  ArenaState s = make_arena(builtin_tasks().front(), 0);
  FrameBuffer buf;
  for (int i = 0; i < 1125; ++i) {
    advance(s, 1);
    if (s.sim_clock_ms % kFrameIntervalMs == 0) buf.push(render_observation(s));
  }
  CHECK(buf.size() == 9);
  CHECK(buf.frames().back().t_ms == 1125);
  const auto f = render_observation(s);
  CHECK(f.player_hp == s.player_hp);
  CHECK(f.enemy_hp == s.enemy_hp);
  CHECK(f.heal_charges == s.heal_charges);
}

TEST_CASE("step: dodge and block against a strike") {
  SUBCASE("no defence takes damage") {
    ArenaState s = close_quarters();
    arm_strike(s);
    s = step(s, ActionSet{}, 200);
    // 300 power * 600 / (600 + 600) = 150 of 1000
    CHECK(s.player_hp == doctest::Approx(0.85));
  }
  SUBCASE("dodge during the strike tick") {
    ArenaState s = close_quarters();
    arm_strike(s);
    s = step(s, ActionSet{ActionEvent::tap(C::kDodge)}, 200);
    CHECK(s.player_hp == 1.0);
    CHECK(count_log(s.action_log, "dodged") == 1);
  }
  SUBCASE("block in SSDT mode negates the strike without moving") {
    ArenaState s = close_quarters(GameMode::kSSDT);
    arm_strike(s);
    s = step(s, ActionSet{ActionEvent::tap(C::kDodge)}, 200);
    CHECK(s.player_hp == 1.0);
    CHECK(s.player_pos == Vec2{0.0, 0.0});
    CHECK(count_log(s.action_log, "blocked") == 1);
    CHECK(s.block_ms == 0);
  }
  SUBCASE("dt must be positive") {
    CHECK_THROWS_AS(step(close_quarters(), ActionSet{}, 0), Error);
  }
}

TEST_CASE("step: heal") {
  ArenaState s = close_quarters();
  s.player_hp = 0.5;
  s = step(s, ActionSet{ActionEvent::tap(C::kHeal)}, 600);
  CHECK(s.player_hp == doctest::Approx(0.8));
  CHECK(s.heal_charges == 2);

  s.heal_charges = 0;
  const double before = s.player_hp;
  s = step(s, ActionSet{ActionEvent::tap(C::kHeal)}, 600);
  CHECK(s.player_hp == before);
  CHECK(count_log(s.action_log, "no charges") == 1);
}

TEST_CASE("step: immobilize then light attacks land uninterrupted") {
  ArenaState s = close_quarters();
  s.enemy_phase = EnemyPhase::kTelegraph;
  s.enemy_phase_ms = 400;  // would strike mid-combo without the stun
  ActionSet combo{ActionEvent::tap(C::kImmobilize), ActionEvent::tap(C::kLightAttack)};
  s = step(s, combo, 600);
  CHECK(s.enemy_stunned_ms == 3000 - 600);
  CHECK_FALSE(render_observation(s).immobilize_ready);
  CHECK_FALSE(render_observation(s).enemy_telegraph.has_value());
  s = step(s, ActionSet{ActionEvent::tap(C::kLightAttack)}, 300);
  s = step(s, ActionSet{ActionEvent::tap(C::kLightAttack)}, 300);
  // Three hits of 100 against 1200 max hp, no strike in between.
  CHECK(s.enemy_hp == doctest::Approx(1.0 - 300.0 / 1200.0));
  CHECK(s.player_hp == 1.0);
  CHECK(count_log(s.action_log, "light attack hits") == 3);

  // The skill is on cooldown now.
  s = step(s, ActionSet{ActionEvent::tap(C::kImmobilize)}, 200);
  CHECK(count_log(s.action_log, "on cooldown") == 1);
}

TEST_CASE("step: a strike interrupts a light attack wind-up") {
  ArenaState s = close_quarters();
  arm_strike(s);
  s = step(s, ActionSet{ActionEvent::tap(C::kLightAttack)}, 300);
  CHECK(s.enemy_hp == 1.0);
  CHECK(count_log(s.action_log, "interrupted") == 1);
}

TEST_CASE("step: lock-on movement and sprint") {
  ArenaState s = make_arena(still_task(), 0);
  REQUIRE(distance(s.player_pos, s.enemy_pos) == doctest::Approx(6.0));
  s = step(s, ActionSet{ActionEvent::hold(C::kMoveForward, 1000)}, 1000);
  CHECK(distance(s.player_pos, s.enemy_pos) == doctest::Approx(3.0));
  s = step(s, ActionSet{ActionEvent::hold(C::kMoveBack, 500), ActionEvent::hold(C::kSprint, 500)}, 500);
  // 3 m/s * 1.8 * 0.5 s
  CHECK(distance(s.player_pos, s.enemy_pos) == doctest::Approx(5.7));
  // Strafing keeps roughly the same radius for short moves.
  const double before = distance(s.player_pos, s.enemy_pos);
  s = step(s, ActionSet{ActionEvent::hold(C::kMoveLeft, 100)}, 100);
  CHECK(distance(s.player_pos, s.enemy_pos) == doctest::Approx(before).epsilon(0.01));
  CHECK(s.player_pos.y > 0.0);
  // Never closer than the minimum separation.
  s = step(s, ActionSet{ActionEvent::hold(C::kMoveForward, 3000)}, 3000);
  CHECK(distance(s.player_pos, s.enemy_pos) >= s.rules.min_separation_m - 1e-9);
}

TEST_CASE("run_episode: scripted policy beats task 1") {
  const auto tasks = builtin_tasks();
  ScriptedPolicy p;
  auto rep = run_episode(tasks[0], p, 0);
  CHECK(rep.success);
  CHECK(rep.outcome == EpisodeOutcome::kVictory);
  CHECK(rep.policy_calls == rep.decision_cycles);
  CHECK(rep.decision_cycles > 0);
  CHECK(rep.final_enemy_hp == 0.0);
}

TEST_CASE("run_episode: determinism and pause correctness") {
  const auto task = builtin_tasks()[5];
  ScriptedPolicy a, b, c;
  auto r1 = run_episode(task, a, 42);
  auto r2 = run_episode(task, b, 42);
  CHECK(r1.executed == r2.executed);
  CHECK(r1.action_log == r2.action_log);
  CHECK(r1.frames == r2.frames);
  CHECK(r1.sim_duration_ms == r2.sim_duration_ms);

  EpisodeOptions full;
  full.mode = DecodeMode::kFull;
  auto r3 = run_episode(task, c, 42, full);
  CHECK(r3.executed == r1.executed);
  CHECK(r3.sim_duration_ms == r1.sim_duration_ms);
  CHECK(r3.mean_modeled_latency_ms > r1.mean_modeled_latency_ms);
}

TEST_CASE("run_episode: hp conservation and call accounting under random play") {
  const auto tasks = builtin_tasks();
  for (int i = 0; i < 13; ++i) {
    const auto& task = tasks[static_cast<std::size_t>(i)];
    RandomPolicy p(static_cast<std::uint64_t>(i) * 7 + 1, task.mode == GameMode::kSSDT);
    auto rep = run_episode(task, p, static_cast<std::uint64_t>(i));
    CHECK(rep.policy_calls == rep.decision_cycles);
    CHECK(rep.decision_cycles <= 200);
    for (std::size_t k = 1; k < rep.frames.size(); ++k) {
      const auto& prev = rep.frames[k - 1];
      const auto& cur = rep.frames[k];
      CHECK(cur.enemy_hp <= prev.enemy_hp);
      if (cur.player_hp > prev.player_hp) {
        const bool healed = std::any_of(rep.action_log.begin(), rep.action_log.end(), [&](const LogEntry& e) {
          return e.text == "healed" && e.t_ms >= prev.t_ms && e.t_ms <= cur.t_ms;
        });
        CHECK(healed);
      }
    }
    if (rep.outcome == EpisodeOutcome::kTimeout) CHECK(rep.decision_cycles == 200);
  }
}

TEST_CASE("scripted beats random on task 1 over 10 seeds") {
  const auto task = builtin_tasks()[0];
  int scripted = 0, random = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ScriptedPolicy sp;
    RandomPolicy rp(seed + 1000);
    scripted += run_episode(task, sp, seed).success ? 1 : 0;
    random += run_episode(task, rp, seed).success ? 1 : 0;
  }
  CHECK(scripted > random);
}

TEST_CASE("episode transcript exports as a track session") {
  const auto task = builtin_tasks()[2];
  RandomPolicy p(5);
  auto rep = run_episode(task, p, 9);
  auto session = episode_to_session(rep);
  REQUIRE_NOTHROW(validate_session(session));
  CHECK(session.frames.size() == rep.frames.size());
  CHECK(observation_from_json(session.frames.front().payload) == rep.frames.front());

  auto gated = gate_session(session);
  auto co = coalesce_events(gated.raw_events);
  REQUIRE(co.actions.size() == rep.executed.size());
  for (std::size_t i = 0; i < co.actions.size(); ++i) {
    CHECK(co.actions[i].t_ms == rep.executed[i].t_ms);
    CHECK(co.actions[i].action == rep.executed[i].event);
  }
  auto aligned = align_actions_to_frames(co.actions, gated.frames);
  CHECK(aligned.dropped.empty());
}

TEST_CASE("run_suite: 13 tasks x 10 repeats, reproducible bytes") {
  const auto tasks = builtin_tasks();
  auto a = run_suite(tasks, scripted_policy_factory(), "scripted", 10, 7);
  auto b = run_suite(tasks, scripted_policy_factory(), "scripted", 10, 7);
  CHECK(a.episodes == 130);
  CHECK(a.tasks.size() == 13);
  for (const auto& t : a.tasks) {
    CHECK(t.success_rate >= 0.0);
    CHECK(t.success_rate <= 1.0);
    CHECK(t.success_rate == static_cast<double>(t.successes) / t.repeats);
  }
  CHECK(suite_csv(a) == suite_csv(b));
  CHECK(suite_json(a) == suite_json(b));
  const auto csv = suite_csv(a);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 14);
  CHECK(csv.rfind("task_id,mode,repeats,success_rate,mean_latency_ms,mean_cycles\n", 0) == 0);
  CHECK_THROWS_AS(run_suite(tasks, scripted_policy_factory(), "scripted", 0, 7), Error);
}

TEST_CASE("task grid") {
  const auto tasks = builtin_tasks();
  REQUIRE(tasks.size() == 13);
  const Difficulty expected[] = {Difficulty::kEasy,   Difficulty::kEasy,     Difficulty::kEasy,
                                 Difficulty::kEasy,   Difficulty::kEasy,     Difficulty::kMiddle,
                                 Difficulty::kMiddle, Difficulty::kHard,     Difficulty::kVeryHard,
                                 Difficulty::kVeryHard, Difficulty::kEasy,   Difficulty::kMiddle,
                                 Difficulty::kHard};
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    CHECK(tasks[i].task_id == static_cast<int>(i) + 1);
    CHECK(tasks[i].difficulty == expected[i]);
    CHECK(tasks[i].mode == (i < 10 ? GameMode::kBMW : GameMode::kSSDT));
  }
  CHECK(tasks[8].name == "Defeat Wandering Wight");

  const auto shipped = load_tasks(std::string(COMBAT_DATA_DIR) + "/tasks.json");
  CHECK(tasks_to_json(shipped) == tasks_to_json(tasks));
  CHECK_THROWS_AS(load_tasks("/nonexistent/tasks.json"), Error);

  TaskConfig bad = tasks[0];
  bad.pattern.clear();
  CHECK_THROWS_AS(make_arena(bad, 0), Error);
}
