#pragma once

// Combat-understanding benchmark: JSONL schema validation, answer
// normalization, macro-averaged scoring and synthetic item generation from
// arena transcripts.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "combat/decoder.hpp"
#include "combat/observation.hpp"

namespace combat {

enum class BenchCategory : std::uint8_t { kGathering, kComprehension, kReasoning };
inline constexpr std::size_t kNumBenchCategories = 3;

enum class BenchSubtask : std::uint8_t {
  kEnemyHealth,
  kOwnHealth,
  kOwnAbnormal,
  kActionIntention,
  kCurrentState,
  kOptionA,
  kOptionB,
  kOptionC,
};
inline constexpr std::size_t kNumBenchSubtasks = 8;

std::string_view bench_category_name(BenchCategory c);
std::optional<BenchCategory> bench_category_from_name(std::string_view s);
std::string_view bench_subtask_name(BenchSubtask t);
std::optional<BenchSubtask> bench_subtask_from_name(std::string_view s);
BenchCategory category_of(BenchSubtask t);
const std::string& prompt_for(BenchSubtask t);

struct BenchItem {
  std::string id;
  BenchCategory category = BenchCategory::kGathering;
  BenchSubtask subtask = BenchSubtask::kEnemyHealth;
  std::vector<std::int64_t> frame_refs;
  std::string question;
  std::vector<std::string> choices;
  std::string gold;

  bool binary() const { return category != BenchCategory::kReasoning; }
  bool operator==(const BenchItem&) const = default;
};

std::string bench_item_to_json(const BenchItem& item);
void write_bench_jsonl(const std::vector<BenchItem>& items, const std::filesystem::path& file);

struct ValidationIssue {
  std::size_t line = 0;
  std::string field;
  std::string message;
};

struct DatasetStats {
  std::array<std::size_t, kNumBenchCategories> category_counts{};
  std::array<std::size_t, kNumBenchSubtasks> subtask_counts{};
  std::size_t total = 0;
  std::vector<ValidationIssue> issues;

  double fraction(BenchCategory c) const;
  bool ok() const { return issues.empty(); }
};

// Every schema violation is listed with its 1-based line number.
DatasetStats validate_dataset(const std::filesystem::path& file);
// Throws kValidationError ("line N: field: message") on the first violation.
std::vector<BenchItem> load_bench(const std::filesystem::path& file);

enum class AnswerKind : std::uint8_t { kBinary, kChoice };

// Canonical "Yes"/"No" or "A"/"B"/"C"; nullopt means Unparseable.
std::optional<std::string> normalize_answer(std::string_view raw, AnswerKind kind);

struct Prediction {
  std::string id;
  std::string raw_answer;
};

std::vector<Prediction> load_predictions(const std::filesystem::path& file);

struct Tally {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const { return total == 0 ? 0.0 : 100.0 * static_cast<double>(correct) / total; }
};

struct BenchReport {
  double acc_gathering = 0.0;
  double acc_comprehension = 0.0;
  double acc_reasoning = 0.0;
  double macro_avg = 0.0;  // mean over non-empty categories
  double micro_avg = 0.0;
  std::array<Tally, kNumBenchCategories> categories{};
  std::array<Tally, kNumBenchSubtasks> subtasks{};
  std::size_t missing = 0;
  std::size_t unparseable = 0;
  std::size_t extraneous = 0;  // predictions for unknown ids
};

// Missing and unparseable answers score as incorrect. Throws
// kValidationError on duplicate prediction ids.
BenchReport score(const std::vector<BenchItem>& items, const std::vector<Prediction>& predictions);

std::string bench_report_csv(const BenchReport& r);
std::string bench_report_table(const BenchReport& r);

struct BenchGenConfig {
  std::uint64_t seed = 0;
  double high_hp = 0.5;  // health at or above this is "high"
  std::size_t window = 4;
  std::array<std::size_t, kNumBenchSubtasks> targets{217, 107, 36, 123, 81, 50, 150, 150};
  ScriptedRules rules;
};

// Frames of all transcripts concatenated; frame_refs index into this pool.
struct FramePool {
  std::vector<ObservationFrame> frames;
  std::vector<std::size_t> transcript_start;  // first pool index of each transcript

  void add_transcript(const std::vector<ObservationFrame>& frames);
};

// Re-derives the gold answer of an item from the referenced frames.
std::string derive_gold(const BenchItem& item, const FramePool& pool, const BenchGenConfig& cfg = {});

// Throws kGenerationShortfall naming the subtask that ran out of candidates.
std::vector<BenchItem> generate_synthetic(const FramePool& pool, const BenchGenConfig& cfg = {});

// Scripted and random episodes over the built-in tasks.
FramePool bench_transcripts(std::uint64_t seed, int episodes_per_task);

}  // namespace combat
