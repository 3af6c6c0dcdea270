#pragma once

// Deterministic one-on-one encounter, the 8 FPS recorder, and the
// pause-infer-act execution loop that drives a Policy against it.

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "combat/action.hpp"
#include "combat/decoder.hpp"
#include "combat/observation.hpp"
#include "combat/tracker.hpp"

namespace combat {

enum class GameMode : std::uint8_t { kBMW, kSSDT };
enum class Difficulty : std::uint8_t { kEasy, kMiddle, kHard, kVeryHard };

std::string_view game_mode_name(GameMode m);
std::string_view difficulty_name(Difficulty d);

struct EnemyAttack {
  std::string kind;
  double power_scale = 1.0;
  double reach_m = 3.0;
  bool fire = false;     // sets the player burning
  bool stagger = false;  // stuns the player briefly
};

struct TaskConfig {
  int task_id = 1;
  std::string name;
  GameMode mode = GameMode::kBMW;
  Difficulty difficulty = Difficulty::kEasy;
  double enemy_max_hp = 1500.0;
  double enemy_power = 300.0;  // attack attribute before the defence scaling
  double enemy_speed_mps = 1.5;
  std::int64_t idle_ms = 1500;
  std::int64_t telegraph_ms = 1200;
  std::int64_t recovery_ms = 600;
  std::vector<EnemyAttack> pattern;

  // Throws kInvalidArgument on an out-of-range field.
  void validate() const;
};

// Combat constants. Player attack 100 and defence 600 are the published
// character settings; everything else is this simulator's choice.
struct ArenaRules {
  double player_attack = 100.0;
  double player_defense = 600.0;
  double player_max_hp = 1000.0;
  double defense_scale = 600.0;  // damage taken = power * scale / (scale + defense)
  double move_speed_mps = 3.0;
  double sprint_multiplier = 1.8;
  double player_range_m = 2.5;
  double min_separation_m = 0.8;
  double start_distance_m = 6.0;
  double enemy_keep_distance_m = 1.8;
  std::int64_t iframe_ms = 400;
  std::int64_t roll_phase_ms = 500;  // i-frames cover the start of the roll
  double roll_distance_m = 2.5;
  std::int64_t block_phase_ms = 300;
  std::int64_t block_hold_ms = 600;
  double heal_fraction = 0.3;
  int heal_charges = 3;
  std::int64_t heal_cast_ms = 500;
  std::int64_t immobilize_stun_ms = 3000;
  std::int64_t immobilize_cooldown_ms = 20000;
  std::int64_t skill_cast_ms = 300;
  std::int64_t light_windup_ms = 300;
  double light_multiplier = 1.0;
  std::int64_t heavy_windup_ms = 500;
  double heavy_multiplier = 1.5;  // heavy = attack * multiplier * (1 + held_s)
  std::int64_t heavy_max_hold_ms = 2000;
  std::int64_t tap_move_ms = 100;
  std::int64_t noop_ms = 100;
  std::int64_t burn_ms = 3000;
  double burn_hp_per_s = 20.0;
  std::int64_t stagger_ms = 400;
  std::int64_t first_idle_bonus_ms = 1500;
  double idle_jitter = 0.3;  // idle time drawn from idle_ms * [1 - j, 1 + j]
};

enum class EnemyPhase : std::uint8_t { kIdle, kTelegraph, kRecovery };

struct LogEntry {
  std::int64_t t_ms = 0;
  std::string text;
  bool operator==(const LogEntry&) const = default;
};

struct ExecutedAction {
  std::int64_t t_ms = 0;  // key-down instant
  ActionEvent event;
  bool operator==(const ExecutedAction&) const = default;
};

// One queued execution phase of the current action set.
struct Phase {
  ActionEvent event;
  std::int64_t duration_ms = 0;
  std::int64_t elapsed_ms = 0;
  bool started = false;
  bool sprint = false;
  bool interrupted = false;
  bool noop = false;
  bool tail = false;  // keeps a merged sprint key down past the movement
};

using ArenaRng = std::linear_congruential_engine<std::uint64_t, 6364136223846793005ULL,
                                                 1442695040888963407ULL, 0ULL>;

struct ArenaState {
  TaskConfig task;
  ArenaRules rules;
  std::uint64_t rng_seed = 0;
  ArenaRng rng;
  std::int64_t sim_clock_ms = 0;

  double player_hp = 1.0;
  double enemy_hp = 1.0;
  Vec2 player_pos;
  Vec2 enemy_pos;
  int heal_charges = 0;
  std::int64_t immobilize_cooldown_ms = 0;
  std::int64_t iframes_ms = 0;
  std::int64_t block_ms = 0;  // block stays up until a strike or timeout
  std::int64_t burning_ms = 0;
  std::int64_t player_stun_ms = 0;
  std::int64_t enemy_stunned_ms = 0;

  EnemyPhase enemy_phase = EnemyPhase::kIdle;
  std::int64_t enemy_phase_ms = 0;  // remaining in the current enemy phase
  std::size_t next_attack = 0;

  std::deque<Phase> pending;
  std::optional<ActionEvent> pending_sprint;  // stamped with the first movement phase
  std::vector<LogEntry> action_log;
  std::vector<ExecutedAction> executed;

  bool finished() const { return enemy_hp <= 0.0 || player_hp <= 0.0; }
  bool idle() const { return pending.empty(); }
  const EnemyAttack& current_attack() const;
};

ArenaState make_arena(const TaskConfig& task, std::uint64_t seed, const ArenaRules& rules = {});

// Queues commands (replacing any unfinished set) and advances dt_ms in 1 ms
// ticks. Throws kInvalidArgument for dt_ms <= 0.
ArenaState step(ArenaState state, const ActionSet& commands, std::int64_t dt_ms);
// In-place forms used by the episode loop.
void queue_actions(ArenaState& state, std::span<const ActionEvent> commands);
void advance(ArenaState& state, std::int64_t dt_ms);

ObservationFrame render_observation(const ArenaState& state);

inline constexpr std::int64_t kFrameIntervalMs = 125;  // 8 FPS
inline constexpr std::size_t kSampleWindow = 9;

class FrameBuffer {
 public:
  explicit FrameBuffer(std::size_t capacity = 32);
  void push(ObservationFrame f);
  std::size_t size() const { return frames_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::int64_t total_pushed() const { return total_; }
  const std::deque<ObservationFrame>& frames() const { return frames_; }

 private:
  std::size_t capacity_;
  std::deque<ObservationFrame> frames_;
  std::int64_t total_ = 0;
};

// Window indices {0, 4, 8} of the newest nine frames, oldest first.
// Throws kInsufficientHistory with fewer than nine frames.
std::vector<ObservationFrame> sample_frames(const FrameBuffer& buffer);

enum class EpisodeOutcome : std::uint8_t { kVictory, kDefeat, kTimeout };
std::string_view outcome_name(EpisodeOutcome o);

struct CycleRecord {
  std::int64_t t_ms = 0;
  std::vector<ObservationFrame> sampled;
  std::vector<ActionEvent> actions;
  std::size_t pulled_tokens = 0;
  double inference_wall_ms = 0.0;
};

struct EpisodeOptions {
  DecodeMode mode = DecodeMode::kTruncated;
  int cycle_cap = 200;
  int decode_budget = kDefaultDecodeBudget;
  double nominal_tokens_per_second = 40.0;  // modelled latency for reports
  ArenaRules rules;
};

struct EpisodeReport {
  int task_id = 0;
  std::uint64_t seed = 0;
  DecodeMode mode = DecodeMode::kTruncated;
  bool success = false;
  EpisodeOutcome outcome = EpisodeOutcome::kTimeout;
  int decision_cycles = 0;
  std::int64_t policy_calls = 0;
  double mean_inference_wall_ms = 0.0;
  double mean_modeled_latency_ms = 0.0;
  std::int64_t sim_duration_ms = 0;
  double final_player_hp = 0.0;
  double final_enemy_hp = 0.0;
  std::vector<LogEntry> action_log;
  std::vector<ExecutedAction> executed;
  std::vector<ObservationFrame> frames;  // every captured frame
  std::vector<CycleRecord> cycles;
};

// Unparseable responses count as an empty action set for that cycle.
EpisodeReport run_episode(const TaskConfig& task, Policy& policy, std::uint64_t seed,
                          const EpisodeOptions& options = {});

// Frames become FrameRecords with observation JSON payloads; each executed
// action becomes a key-down/key-up pair (taps release at the same instant).
TrackSession episode_to_session(const EpisodeReport& report, std::int64_t epoch_unix_ms = 0);

using PolicyFactory = std::function<std::unique_ptr<Policy>(const TaskConfig&, std::uint64_t seed)>;
PolicyFactory scripted_policy_factory(double tokens_per_second = 0.0);
PolicyFactory random_policy_factory();

struct TaskSummary {
  int task_id = 0;
  DecodeMode mode = DecodeMode::kTruncated;
  int repeats = 0;
  int successes = 0;
  double success_rate = 0.0;
  double mean_latency_ms = 0.0;  // modelled
  double mean_cycles = 0.0;
};

struct SuiteReport {
  std::uint64_t seed = 0;
  std::string policy;
  std::vector<TaskSummary> tasks;
  std::int64_t episodes = 0;
};

std::uint64_t episode_seed(std::uint64_t base_seed, int task_id, int repeat);

SuiteReport run_suite(const std::vector<TaskConfig>& tasks, const PolicyFactory& factory,
                      const std::string& policy_name, int repeats, std::uint64_t base_seed,
                      const EpisodeOptions& options = {});

std::string suite_csv(const SuiteReport& r);
std::string suite_json(const SuiteReport& r);

std::vector<TaskConfig> builtin_tasks();
std::vector<TaskConfig> load_tasks(const std::filesystem::path& file);
std::string tasks_to_json(const std::vector<TaskConfig>& tasks);

}  // namespace combat
