#include "combat/arena.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "combat/error.hpp"

namespace combat {

namespace {

using json = nlohmann::ordered_json;

Vec2 unit_towards(const Vec2& from, const Vec2& to) {
  const double dx = to.x - from.x;
  const double dy = to.y - from.y;
  const double n = std::hypot(dx, dy);
  if (n < 1e-9) return {1.0, 0.0};
  return {dx / n, dy / n};
}

double uniform01(ArenaRng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::int64_t draw_idle(ArenaState& s) {
  const double j = s.rules.idle_jitter;
  const double f = 1.0 - j + 2.0 * j * uniform01(s.rng);
  return std::max<std::int64_t>(1, std::llround(static_cast<double>(s.task.idle_ms) * f));
}

void log(ArenaState& s, std::string text) { s.action_log.push_back({s.sim_clock_ms, std::move(text)}); }

bool is_movement(ActionCategory c) {
  using C = ActionCategory;
  return c == C::kMoveForward || c == C::kMoveBack || c == C::kMoveLeft || c == C::kMoveRight;
}

Vec2 movement_direction(const ArenaState& s, ActionCategory c) {
  const Vec2 f = unit_towards(s.player_pos, s.enemy_pos);
  switch (c) {
    case ActionCategory::kMoveForward: return f;
    case ActionCategory::kMoveBack: return {-f.x, -f.y};
    case ActionCategory::kMoveLeft: return {-f.y, f.x};
    case ActionCategory::kMoveRight: return {f.y, -f.x};
    default: return {0.0, 0.0};
  }
}

void displace_player(ArenaState& s, const Vec2& dir, double metres) {
  s.player_pos.x += dir.x * metres;
  s.player_pos.y += dir.y * metres;
  const double d = distance(s.player_pos, s.enemy_pos);
  if (d < s.rules.min_separation_m) {
    const Vec2 away = unit_towards(s.enemy_pos, s.player_pos);
    s.player_pos = {s.enemy_pos.x + away.x * s.rules.min_separation_m,
                    s.enemy_pos.y + away.y * s.rules.min_separation_m};
  }
}

bool is_attack(ActionCategory c) {
  return c == ActionCategory::kLightAttack || c == ActionCategory::kHeavyAttack;
}

void damage_enemy(ArenaState& s, double amount, const char* what) {
  if (distance(s.player_pos, s.enemy_pos) > s.rules.player_range_m) {
    log(s, std::string(what) + " out of range");
    return;
  }
  s.enemy_hp = std::max(0.0, s.enemy_hp - amount / s.task.enemy_max_hp);
  char buf[96];
  std::snprintf(buf, sizeof buf, "%s hits for %.0f", what, amount);
  log(s, buf);
}

void begin_phase(ArenaState& s, Phase& p) {
  using C = ActionCategory;
  const auto& r = s.rules;
  const ActionEvent& e = p.event;
  switch (e.category) {
    case C::kHeal:
      if (s.heal_charges == 0) {
        p.noop = true;
        p.duration_ms = r.noop_ms;
        log(s, "heal with no charges left (no-op)");
      }
      break;
    case C::kImmobilize:
      if (s.immobilize_cooldown_ms > 0) {
        p.noop = true;
        p.duration_ms = r.noop_ms;
        log(s, "immobilize on cooldown (no-op)");
      } else {
        if (s.enemy_phase == EnemyPhase::kTelegraph) log(s, "enemy wind-up cancelled");
        s.enemy_stunned_ms = r.immobilize_stun_ms;
        s.enemy_phase = EnemyPhase::kIdle;
        s.enemy_phase_ms = 0;
        s.immobilize_cooldown_ms = r.immobilize_cooldown_ms;
        log(s, "enemy immobilized");
      }
      break;
    case C::kDodge:
      if (s.task.mode == GameMode::kSSDT) {
        s.block_ms = r.block_hold_ms;
        log(s, "block raised");
      } else {
        s.iframes_ms = r.iframe_ms;
        log(s, "dodge roll");
      }
      break;
    default: break;
  }
}

void end_phase(ArenaState& s, const Phase& p) {
  using C = ActionCategory;
  if (p.noop) return;
  const auto& r = s.rules;
  switch (p.event.category) {
    case C::kHeal:
      s.player_hp = std::min(1.0, s.player_hp + r.heal_fraction);
      --s.heal_charges;
      log(s, "healed");
      break;
    case C::kLightAttack:
      if (p.interrupted) log(s, "light attack interrupted");
      else damage_enemy(s, r.player_attack * r.light_multiplier, "light attack");
      break;
    case C::kHeavyAttack: {
      if (p.interrupted) {
        log(s, "heavy attack interrupted");
        break;
      }
      const auto held = std::min(p.event.duration_ms.value_or(0), r.heavy_max_hold_ms);
      damage_enemy(s, r.player_attack * r.heavy_multiplier * (1.0 + static_cast<double>(held) / 1000.0),
                   "heavy attack");
      break;
    }
    default: break;
  }
}

void tick_phase(ArenaState& s, Phase& p) {
  const auto c = p.event.category;
  if (is_movement(c)) {
    const double speed = s.rules.move_speed_mps * (p.sprint ? s.rules.sprint_multiplier : 1.0);
    displace_player(s, movement_direction(s, c), speed / 1000.0);
  } else if (c == ActionCategory::kDodge && s.task.mode == GameMode::kBMW) {
    const Vec2 away = unit_towards(s.enemy_pos, s.player_pos);
    displace_player(s, away, s.rules.roll_distance_m / static_cast<double>(s.rules.roll_phase_ms));
  }
}

void strike(ArenaState& s) {
  const EnemyAttack& a = s.current_attack();
  const auto& r = s.rules;
  if (s.iframes_ms > 0) {
    log(s, "enemy " + a.kind + " dodged");
    return;
  }
  if (s.block_ms > 0) {
    s.block_ms = 0;
    log(s, "enemy " + a.kind + " blocked");
    return;
  }
  if (distance(s.player_pos, s.enemy_pos) > a.reach_m) {
    log(s, "enemy " + a.kind + " out of reach");
    return;
  }
  const double dmg =
      s.task.enemy_power * a.power_scale * r.defense_scale / (r.defense_scale + r.player_defense);
  s.player_hp = std::max(0.0, s.player_hp - dmg / r.player_max_hp);
  char buf[96];
  std::snprintf(buf, sizeof buf, "enemy %s hits for %.0f", a.kind.c_str(), dmg);
  log(s, buf);
  if (a.fire) s.burning_ms = r.burn_ms;
  if (a.stagger) s.player_stun_ms = r.stagger_ms;
  if (!s.pending.empty() && s.pending.front().started && is_attack(s.pending.front().event.category)) {
    s.pending.front().interrupted = true;
  }
}

void tick_enemy(ArenaState& s) {
  if (s.enemy_stunned_ms > 0) {
    if (--s.enemy_stunned_ms == 0) {
      s.enemy_phase = EnemyPhase::kIdle;
      s.enemy_phase_ms = draw_idle(s);
    }
    return;
  }
  switch (s.enemy_phase) {
    case EnemyPhase::kIdle: {
      const double d = distance(s.player_pos, s.enemy_pos);
      if (d > s.rules.enemy_keep_distance_m) {
        const Vec2 dir = unit_towards(s.enemy_pos, s.player_pos);
        const double step = std::min(s.task.enemy_speed_mps / 1000.0, d - s.rules.enemy_keep_distance_m);
        s.enemy_pos.x += dir.x * step;
        s.enemy_pos.y += dir.y * step;
      }
      if (--s.enemy_phase_ms <= 0) {
        s.enemy_phase = EnemyPhase::kTelegraph;
        s.enemy_phase_ms = s.task.telegraph_ms;
        log(s, "enemy telegraphs " + s.current_attack().kind);
      }
      break;
    }
    case EnemyPhase::kTelegraph:
      if (--s.enemy_phase_ms <= 0) {
        strike(s);
        s.enemy_phase = EnemyPhase::kRecovery;
        s.enemy_phase_ms = s.task.recovery_ms;
      }
      break;
    case EnemyPhase::kRecovery:
      if (--s.enemy_phase_ms <= 0) {
        s.next_attack = (s.next_attack + 1) % s.task.pattern.size();
        s.enemy_phase = EnemyPhase::kIdle;
        s.enemy_phase_ms = draw_idle(s);
      }
      break;
  }
}

void tick(ArenaState& s) {
  if (s.finished()) return;
  const auto& r = s.rules;
  if (s.iframes_ms > 0) --s.iframes_ms;
  if (s.block_ms > 0) --s.block_ms;
  if (s.immobilize_cooldown_ms > 0) --s.immobilize_cooldown_ms;
  if (s.burning_ms > 0) {
    --s.burning_ms;
    s.player_hp = std::max(0.0, s.player_hp - r.burn_hp_per_s / 1000.0 / r.player_max_hp);
  }

  if (s.player_stun_ms > 0) {
    --s.player_stun_ms;
  } else if (!s.pending.empty()) {
    Phase& p = s.pending.front();
    if (!p.started) {
      p.started = true;
      if (!p.tail) {
        // Executed actions are stamped when their key goes down.
        s.executed.push_back({s.sim_clock_ms, p.event});
        if (p.sprint && s.pending_sprint) {
          s.executed.push_back({s.sim_clock_ms, *s.pending_sprint});
          s.pending_sprint.reset();
        }
        begin_phase(s, p);
      }
    }
    if (!p.noop) tick_phase(s, p);
    if (++p.elapsed_ms >= p.duration_ms) {
      const Phase done = p;
      s.pending.pop_front();
      end_phase(s, done);
    }
  }

  tick_enemy(s);
  ++s.sim_clock_ms;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string_view game_mode_name(GameMode m) { return m == GameMode::kBMW ? "BMW" : "SSDT"; }

std::string_view difficulty_name(Difficulty d) {
  switch (d) {
    case Difficulty::kEasy: return "easy";
    case Difficulty::kMiddle: return "middle";
    case Difficulty::kHard: return "hard";
    case Difficulty::kVeryHard: return "very_hard";
  }
  return "easy";
}

std::string_view outcome_name(EpisodeOutcome o) {
  switch (o) {
    case EpisodeOutcome::kVictory: return "victory";
    case EpisodeOutcome::kDefeat: return "defeat";
    case EpisodeOutcome::kTimeout: return "timeout";
  }
  return "timeout";
}

void TaskConfig::validate() const {
  auto bad = [this](const std::string& what) {
    return Error(ErrorKind::kInvalidArgument, "task " + std::to_string(task_id) + ": " + what);
  };
  if (task_id < 1) throw bad("task_id must be >= 1");
  if (!(enemy_max_hp > 0.0)) throw bad("enemy_max_hp must be > 0");
  if (!(enemy_power >= 0.0)) throw bad("enemy_power must be >= 0");
  if (!(enemy_speed_mps >= 0.0)) throw bad("enemy_speed_mps must be >= 0");
  if (idle_ms < 1 || telegraph_ms < 1 || recovery_ms < 1) throw bad("enemy timings must be >= 1 ms");
  if (pattern.empty()) throw bad("attack pattern is empty");
  for (const auto& a : pattern) {
    if (a.kind.empty() || !(a.reach_m > 0.0) || !(a.power_scale >= 0.0)) throw bad("bad attack entry");
  }
}

const EnemyAttack& ArenaState::current_attack() const { return task.pattern[next_attack]; }

ArenaState make_arena(const TaskConfig& task, std::uint64_t seed, const ArenaRules& rules) {
  task.validate();
  ArenaState s;
  s.task = task;
  s.rules = rules;
  s.rng_seed = seed;
  s.rng.seed(seed);
  s.player_pos = {0.0, 0.0};
  s.enemy_pos = {rules.start_distance_m, 0.0};
  s.heal_charges = rules.heal_charges;
  s.enemy_phase = EnemyPhase::kIdle;
  s.enemy_phase_ms = draw_idle(s) + rules.first_idle_bonus_ms;
  return s;
}

void queue_actions(ArenaState& s, std::span<const ActionEvent> commands) {
  s.pending.clear();
  const auto sprint_it = std::find_if(commands.begin(), commands.end(), [](const ActionEvent& e) {
    return e.category == ActionCategory::kSprint;
  });
  const bool has_move = std::any_of(commands.begin(), commands.end(),
                                    [](const ActionEvent& e) { return is_movement(e.category); });
  const bool merge_sprint = sprint_it != commands.end() && has_move;

  const auto& r = s.rules;
  std::int64_t movement_ms = 0;
  for (const auto& e : commands) {
    if (merge_sprint && e.category == ActionCategory::kSprint) continue;
    Phase p;
    p.event = e;
    p.sprint = merge_sprint && is_movement(e.category);
    const std::int64_t held = e.duration_ms.value_or(0);
    switch (e.category) {
      case ActionCategory::kHeal: p.duration_ms = r.heal_cast_ms; break;
      case ActionCategory::kImmobilize: p.duration_ms = r.skill_cast_ms; break;
      case ActionCategory::kDodge:
        p.duration_ms = s.task.mode == GameMode::kSSDT ? r.block_phase_ms : r.roll_phase_ms;
        break;
      case ActionCategory::kLightAttack: p.duration_ms = r.light_windup_ms; break;
      case ActionCategory::kHeavyAttack: p.duration_ms = held + r.heavy_windup_ms; break;
      default: p.duration_ms = e.mode == ActionMode::kHold ? held : r.tap_move_ms; break;
    }
    if (p.sprint) movement_ms += p.duration_ms;
    s.pending.push_back(std::move(p));
  }
  if (merge_sprint) {
    // The sprint key goes down with the first movement phase and must be
    // released before the set finishes.
    const std::int64_t sprint_ms = sprint_it->duration_ms.value_or(0);
    if (sprint_ms > movement_ms) {
      Phase tail;
      tail.event = *sprint_it;
      tail.duration_ms = sprint_ms - movement_ms;
      tail.noop = true;
      tail.tail = true;
      s.pending.push_back(std::move(tail));
    }
  }
  s.pending_sprint.reset();
  if (merge_sprint) s.pending_sprint = *sprint_it;
}

void advance(ArenaState& s, std::int64_t dt_ms) {
  if (dt_ms <= 0) throw Error(ErrorKind::kInvalidArgument, "dt_ms must be > 0");
  for (std::int64_t i = 0; i < dt_ms && !s.finished(); ++i) tick(s);
}

ArenaState step(ArenaState state, const ActionSet& commands, std::int64_t dt_ms) {
  if (dt_ms <= 0) throw Error(ErrorKind::kInvalidArgument, "dt_ms must be > 0");
  if (!commands.empty()) {
    std::vector<ActionEvent> evs(commands.begin(), commands.end());
    queue_actions(state, evs);
  }
  advance(state, dt_ms);
  return state;
}

ObservationFrame render_observation(const ArenaState& s) {
  ObservationFrame f;
  f.t_ms = s.sim_clock_ms;
  f.player_hp = std::clamp(s.player_hp, 0.0, 1.0);
  f.enemy_hp = std::clamp(s.enemy_hp, 0.0, 1.0);
  f.player_pos = s.player_pos;
  f.enemy_pos = s.enemy_pos;
  if (s.enemy_phase == EnemyPhase::kTelegraph && s.enemy_stunned_ms == 0) {
    f.enemy_telegraph = Windup{s.current_attack().kind, std::max<std::int64_t>(0, s.enemy_phase_ms)};
  }
  if (s.player_stun_ms > 0) f.player_status = PlayerStatus::kStunned;
  else if (s.burning_ms > 0) f.player_status = PlayerStatus::kBurning;
  f.heal_charges = s.heal_charges;
  f.immobilize_ready = s.immobilize_cooldown_ms == 0;
  f.enemy_stunned_ms = s.enemy_stunned_ms;
  return f;
}

FrameBuffer::FrameBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ < kSampleWindow) {
    throw Error(ErrorKind::kInvalidArgument, "frame buffer must hold at least 9 frames");
  }
}

void FrameBuffer::push(ObservationFrame f) {
  frames_.push_back(std::move(f));
  if (frames_.size() > capacity_) frames_.pop_front();
  ++total_;
}

std::vector<ObservationFrame> sample_frames(const FrameBuffer& buffer) {
  const auto& fs = buffer.frames();
  if (fs.size() < kSampleWindow) {
    throw Error(ErrorKind::kInsufficientHistory,
                "need 9 buffered frames, have " + std::to_string(fs.size()));
  }
  const std::size_t base = fs.size() - kSampleWindow;
  return {fs[base], fs[base + 4], fs[base + 8]};
}

EpisodeReport run_episode(const TaskConfig& task, Policy& policy, std::uint64_t seed,
                          const EpisodeOptions& options) {
  if (options.cycle_cap < 1) throw Error(ErrorKind::kInvalidArgument, "cycle cap must be >= 1");
  ArenaState s = make_arena(task, seed, options.rules);
  FrameBuffer buffer;
  EpisodeReport rep;
  rep.task_id = task.task_id;
  rep.seed = seed;
  rep.mode = options.mode;
  const auto calls_before = policy.call_count();

  auto tick_and_capture = [&] {
    advance(s, 1);
    if (s.sim_clock_ms % kFrameIntervalMs == 0) {
      auto f = render_observation(s);
      rep.frames.push_back(f);
      buffer.push(std::move(f));
    }
  };

  while (buffer.size() < kSampleWindow && !s.finished()) tick_and_capture();

  double wall_sum = 0.0, modeled_sum = 0.0;
  while (!s.finished()) {
    if (rep.decision_cycles >= options.cycle_cap) break;
    CycleRecord cyc;
    cyc.t_ms = s.sim_clock_ms;
    cyc.sampled = sample_frames(buffer);

    // The simulation is paused from here until the actions are queued.
    const auto t0 = std::chrono::steady_clock::now();
    auto stream = policy.observe(cyc.sampled);
    try {
      auto d = decode(*stream, options.mode, options.decode_budget);
      cyc.actions.assign(d.actions.begin(), d.actions.end());
      cyc.pulled_tokens = d.pulled_count;
    } catch (const ActionParseError& e) {
      log(s, std::string("unparseable response: ") + e.raw_text());
    }
    cyc.inference_wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    wall_sum += cyc.inference_wall_ms;
    modeled_sum += static_cast<double>(cyc.pulled_tokens) / options.nominal_tokens_per_second * 1000.0;
    ++rep.decision_cycles;

    queue_actions(s, cyc.actions);
    if (cyc.actions.empty()) {
      for (std::int64_t i = 0; i < kFrameIntervalMs && !s.finished(); ++i) tick_and_capture();
    }
    while (!s.idle() && !s.finished()) tick_and_capture();
    rep.cycles.push_back(std::move(cyc));
  }

  rep.sim_duration_ms = s.sim_clock_ms;
  if (s.enemy_hp <= 0.0) rep.outcome = EpisodeOutcome::kVictory;
  else if (s.player_hp <= 0.0) rep.outcome = EpisodeOutcome::kDefeat;
  else rep.outcome = EpisodeOutcome::kTimeout;
  rep.success = rep.outcome == EpisodeOutcome::kVictory;
  if (rep.outcome == EpisodeOutcome::kTimeout) log(s, "cycle cap reached (timeout)");

  // A closing frame on the capture grid so every executed action has a
  // frame at or after it.
  if (s.sim_clock_ms % kFrameIntervalMs != 0 || rep.frames.empty() ||
      rep.frames.back().t_ms != s.sim_clock_ms) {
    auto f = render_observation(s);
    f.t_ms = (s.sim_clock_ms / kFrameIntervalMs + 1) * kFrameIntervalMs;
    rep.frames.push_back(f);
  }

  rep.policy_calls = policy.call_count() - calls_before;
  if (rep.decision_cycles > 0) {
    rep.mean_inference_wall_ms = wall_sum / rep.decision_cycles;
    rep.mean_modeled_latency_ms = modeled_sum / rep.decision_cycles;
  }
  rep.final_player_hp = s.player_hp;
  rep.final_enemy_hp = s.enemy_hp;
  rep.action_log = std::move(s.action_log);
  rep.executed = std::move(s.executed);
  return rep;
}

TrackSession episode_to_session(const EpisodeReport& report, std::int64_t epoch_unix_ms) {
  TrackSession ts;
  ts.meta["epoch_unix_ms"] = std::to_string(epoch_unix_ms);
  ts.meta["task_id"] = std::to_string(report.task_id);
  ts.meta["seed"] = std::to_string(report.seed);
  ts.meta["mode"] = std::string(decode_mode_name(report.mode));
  ts.meta["outcome"] = std::string(outcome_name(report.outcome));
  for (std::size_t i = 0; i < report.frames.size(); ++i) {
    ts.frames.push_back({static_cast<std::int64_t>(i), report.frames[i].t_ms,
                         observation_to_json(report.frames[i])});
  }

  struct Keyed {
    std::int64_t t;
    std::size_t order;  // down = 2 * seq, up = 2 * seq + 1
    RawInputEvent ev;
  };
  std::vector<Keyed> keyed;
  std::int64_t last = report.frames.empty() ? 0 : report.frames.back().t_ms;
  for (std::size_t i = 0; i < report.executed.size(); ++i) {
    const auto& x = report.executed[i];
    const std::string key(binding(x.event.category));
    const std::int64_t up = x.t_ms + x.event.duration_ms.value_or(0);
    keyed.push_back({x.t_ms, 2 * i, make_raw_event(key, Edge::kDown, x.t_ms)});
    keyed.push_back({up, 2 * i + 1, make_raw_event(key, Edge::kUp, up)});
    last = std::max(last, up);
  }
  std::sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
    return a.t != b.t ? a.t < b.t : a.order < b.order;
  });
  for (auto& k : keyed) ts.raw_events.push_back(std::move(k.ev));
  ts.active_intervals.push_back({0, last});
  return ts;
}

PolicyFactory scripted_policy_factory(double tokens_per_second) {
  return [tokens_per_second](const TaskConfig& task, std::uint64_t) {
    ScriptedRules rules;
    rules.block_mode = task.mode == GameMode::kSSDT;
    auto p = std::make_unique<ScriptedPolicy>(rules);
    p->set_pacing(tokens_per_second);
    return std::unique_ptr<Policy>(std::move(p));
  };
}

PolicyFactory random_policy_factory() {
  return [](const TaskConfig& task, std::uint64_t seed) {
    return std::unique_ptr<Policy>(
        std::make_unique<RandomPolicy>(splitmix64(seed), task.mode == GameMode::kSSDT));
  };
}

std::uint64_t episode_seed(std::uint64_t base_seed, int task_id, int repeat) {
  return splitmix64(base_seed * 1000003ULL + static_cast<std::uint64_t>(task_id) * 1009ULL +
                    static_cast<std::uint64_t>(repeat));
}

SuiteReport run_suite(const std::vector<TaskConfig>& tasks, const PolicyFactory& factory,
                      const std::string& policy_name, int repeats, std::uint64_t base_seed,
                      const EpisodeOptions& options) {
  if (repeats < 1) throw Error(ErrorKind::kInvalidArgument, "repeats must be >= 1");
  SuiteReport out;
  out.seed = base_seed;
  out.policy = policy_name;
  for (const auto& task : tasks) {
    TaskSummary sum;
    sum.task_id = task.task_id;
    sum.mode = options.mode;
    sum.repeats = repeats;
    double latency = 0.0, cycles = 0.0;
    for (int r = 0; r < repeats; ++r) {
      const auto seed = episode_seed(base_seed, task.task_id, r);
      auto policy = factory(task, seed);
      const auto rep = run_episode(task, *policy, seed, options);
      if (rep.policy_calls != rep.decision_cycles) {
        throw Error(ErrorKind::kNumericFailure, "policy call accounting broke");
      }
      sum.successes += rep.success ? 1 : 0;
      latency += rep.mean_modeled_latency_ms;
      cycles += rep.decision_cycles;
      ++out.episodes;
    }
    sum.success_rate = static_cast<double>(sum.successes) / repeats;
    sum.mean_latency_ms = latency / repeats;
    sum.mean_cycles = cycles / repeats;
    out.tasks.push_back(sum);
  }
  return out;
}

std::string suite_csv(const SuiteReport& r) {
  std::ostringstream os;
  os << "task_id,mode,repeats,success_rate,mean_latency_ms,mean_cycles\n";
  for (const auto& t : r.tasks) {
    os << t.task_id << ',' << decode_mode_name(t.mode) << ',' << t.repeats << ','
       << fixed(t.success_rate, 4) << ',' << fixed(t.mean_latency_ms, 3) << ','
       << fixed(t.mean_cycles, 2) << '\n';
  }
  return os.str();
}

std::string suite_json(const SuiteReport& r) {
  json j;
  j["seed"] = r.seed;
  j["policy"] = r.policy;
  j["episodes"] = r.episodes;
  j["tasks"] = json::array();
  for (const auto& t : r.tasks) {
    j["tasks"].push_back({{"task_id", t.task_id},
                          {"mode", decode_mode_name(t.mode)},
                          {"repeats", t.repeats},
                          {"successes", t.successes},
                          {"success_rate", t.success_rate},
                          {"mean_latency_ms", t.mean_latency_ms},
                          {"mean_cycles", t.mean_cycles}});
  }
  return j.dump(2) + "\n";
}

std::vector<TaskConfig> builtin_tasks() {
  using D = Difficulty;
  const EnemyAttack slash{"slash", 1.0, 3.0, false, false};
  const EnemyAttack thrust{"thrust", 1.1, 3.5, false, false};
  const EnemyAttack sweep{"sweep", 0.9, 3.2, false, false};
  const EnemyAttack slam{"slam", 1.3, 2.8, false, true};
  const EnemyAttack fire{"fire", 0.8, 3.2, true, false};
  const EnemyAttack charge{"charge", 1.4, 6.0, false, true};
  const EnemyAttack lunge{"lunge", 1.2, 6.5, false, false};
  const EnemyAttack grab{"grab", 1.5, 2.6, false, true};

  auto make = [](int id, std::string name, GameMode mode, D diff, double hp, double power,
                 double speed, std::int64_t idle, std::int64_t tele, std::int64_t rec,
                 std::vector<EnemyAttack> pattern) {
    TaskConfig t;
    t.task_id = id;
    t.name = std::move(name);
    t.mode = mode;
    t.difficulty = diff;
    t.enemy_max_hp = hp;
    t.enemy_power = power;
    t.enemy_speed_mps = speed;
    t.idle_ms = idle;
    t.telegraph_ms = tele;
    t.recovery_ms = rec;
    t.pattern = std::move(pattern);
    return t;
  };
  const auto B = GameMode::kBMW;
  const auto S = GameMode::kSSDT;
  return {
      make(1, "Defeat WolfScout", B, D::kEasy, 1200, 300, 1.5, 1600, 1200, 700, {slash}),
      make(2, "Defeat WolfStalwart", B, D::kEasy, 1400, 320, 1.5, 1500, 1200, 700, {slash, thrust}),
      make(3, "Defeat WolfSwornsword", B, D::kEasy, 1400, 340, 1.5, 1500, 1100, 650, {slash, sweep}),
      make(4, "Defeat WolfSoldier", B, D::kEasy, 1500, 340, 1.5, 1400, 1100, 650, {thrust, slash}),
      make(5, "Defeat Croaky", B, D::kEasy, 1600, 360, 1.5, 1400, 1100, 600, {slam, sweep}),
      make(6, "Defeat Crow Diviner", B, D::kMiddle, 2400, 420, 2.0, 1200, 900, 550, {sweep, fire}),
      make(7, "Defeat Bandit Chief", B, D::kMiddle, 2600, 440, 2.0, 1150, 900, 500, {slash, thrust, slash}),
      make(8, "Defeat Bullguard", B, D::kHard, 3400, 520, 2.5, 1000, 750, 450, {charge, sweep}),
      make(9, "Defeat Wandering Wight", B, D::kVeryHard, 4800, 600, 2.5, 850, 650, 400, {grab, lunge, slam, lunge}),
      make(10, "Defeat Guangzhi", B, D::kVeryHard, 5000, 600, 2.5, 800, 600, 400, {fire, lunge, sweep, lunge}),
      make(11, "Defeat Katana", S, D::kEasy, 1600, 480, 1.5, 1300, 1200, 600, {slash, thrust}),
      make(12, "Defeat Hassou Stance", S, D::kMiddle, 2600, 560, 2.0, 1100, 900, 500, {slash, thrust}),
      make(13, "Defeat Shigenori Yamauchi", S, D::kHard, 3600, 620, 2.5, 950, 750, 450, {slash, charge, sweep}),
  };
}

std::string tasks_to_json(const std::vector<TaskConfig>& tasks) {
  json j;
  j["version"] = 1;
  j["tasks"] = json::array();
  for (const auto& t : tasks) {
    json pattern = json::array();
    for (const auto& a : t.pattern) {
      pattern.push_back({{"kind", a.kind},
                         {"power_scale", a.power_scale},
                         {"reach_m", a.reach_m},
                         {"fire", a.fire},
                         {"stagger", a.stagger}});
    }
    j["tasks"].push_back({{"task_id", t.task_id},
                          {"name", t.name},
                          {"game_mode", game_mode_name(t.mode)},
                          {"difficulty", difficulty_name(t.difficulty)},
                          {"enemy_max_hp", t.enemy_max_hp},
                          {"enemy_power", t.enemy_power},
                          {"enemy_speed_mps", t.enemy_speed_mps},
                          {"idle_ms", t.idle_ms},
                          {"telegraph_ms", t.telegraph_ms},
                          {"recovery_ms", t.recovery_ms},
                          {"pattern", pattern}});
  }
  return j.dump(2) + "\n";
}

std::vector<TaskConfig> load_tasks(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorKind::kIoError, "cannot open task config " + file.string());
  std::vector<TaskConfig> out;
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("version").get<int>() != 1) {
      throw Error(ErrorKind::kParseError, file.string() + ": unsupported task config version");
    }
    for (const auto& e : j.at("tasks")) {
      TaskConfig t;
      t.task_id = e.at("task_id").get<int>();
      t.name = e.at("name").get<std::string>();
      const auto mode = e.at("game_mode").get<std::string>();
      if (mode == "BMW") t.mode = GameMode::kBMW;
      else if (mode == "SSDT") t.mode = GameMode::kSSDT;
      else throw Error(ErrorKind::kParseError, file.string() + ": unknown game_mode " + mode);
      const auto diff = e.at("difficulty").get<std::string>();
      if (diff == "easy") t.difficulty = Difficulty::kEasy;
      else if (diff == "middle") t.difficulty = Difficulty::kMiddle;
      else if (diff == "hard") t.difficulty = Difficulty::kHard;
      else if (diff == "very_hard") t.difficulty = Difficulty::kVeryHard;
      else throw Error(ErrorKind::kParseError, file.string() + ": unknown difficulty " + diff);
      t.enemy_max_hp = e.at("enemy_max_hp").get<double>();
      t.enemy_power = e.at("enemy_power").get<double>();
      t.enemy_speed_mps = e.at("enemy_speed_mps").get<double>();
      t.idle_ms = e.at("idle_ms").get<std::int64_t>();
      t.telegraph_ms = e.at("telegraph_ms").get<std::int64_t>();
      t.recovery_ms = e.at("recovery_ms").get<std::int64_t>();
      for (const auto& a : e.at("pattern")) {
        t.pattern.push_back({a.at("kind").get<std::string>(), a.at("power_scale").get<double>(),
                             a.at("reach_m").get<double>(), a.at("fire").get<bool>(),
                             a.at("stagger").get<bool>()});
      }
      t.validate();
      out.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParseError, file.string() + ": " + e.what());
  }
  return out;
}

}  // namespace combat
