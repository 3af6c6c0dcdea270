#pragma once

// Action-of-thought dataset construction: video-level windows (stage 1),
// frame-level traceback samples (stage 2) and the truncated response
// layout (stage 3), plus explanation templates and the train/val split.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "combat/action.hpp"
#include "combat/tracker.hpp"

namespace combat {

struct Sentinels {
  std::string trunc = "⟨TRUNC⟩";
  std::string eos = "⟨EOS⟩";
  std::string image = "⟨IMG⟩";
};

struct StageConfig {
  int n = 20;         // frames per stage-1 window
  int m = 10;         // stage-1 sampling rate (fps)
  int k_frames = 4;   // stage-2 traceback length
  double split_fraction = 0.95;
  std::uint64_t seed = 0;
  std::int64_t merge_window_ms = 50;
  Sentinels sentinels;

  // Throws kInvalidArgument when a field is out of range.
  void validate() const;
};

struct AoTRecord {
  int stage = 2;
  std::vector<std::int64_t> frame_refs;
  std::string question;
  // Chronological; categories are unique for stages 2 and 3.
  std::vector<ActionEvent> actions;
  std::string explanation;
  std::string serialized;

  ActionSet action_set() const { return ActionSet(actions); }
  bool operator==(const AoTRecord&) const = default;
};

struct ExplanationContext {
  // Block-style defence (the dodge key blocks instead of rolling).
  bool block_mode = false;
};

inline constexpr std::string_view kNoActionExplanation = "no action";

// Per-category templates, one sentence group per distinct category, joined
// in priority order. Empty input yields "".
std::string render_explanation(std::span<const ActionEvent> events,
                               const ExplanationContext& ctx = {});

std::string question_for_stage(int stage, std::size_t num_frames, const Sentinels& s = {});

// Stage 1/2: "[explanation] [action] <EOS>".
// Stage 3:   "[action] <TRUNC> [explanation] <EOS>" (explanation group omitted if empty).
std::string serialize_response(int stage, std::span<const ActionEvent> actions,
                               const std::string& explanation, const Sentinels& s = {});
// The bracketed action clause of a serialized response, without brackets.
std::string extract_action_clause(const std::string& serialized, int stage,
                                  const Sentinels& s = {});

// Picks frames on a fixed m-fps grid anchored at the first frame.
std::vector<FrameRecord> resample_frames(const std::vector<FrameRecord>& frames, int fps);

struct VideoAotResult {
  std::vector<AoTRecord> records;
  std::vector<std::string> warnings;
};

// Non-overlapping windows of n resampled frames; each record lists every
// action stamped inside its window, chronologically.
VideoAotResult build_video_aot(const std::vector<FrameRecord>& frames,
                               const std::vector<TimedAction>& actions, const StageConfig& cfg,
                               const ExplanationContext& ctx = {});

struct FramesAotResult {
  std::vector<AoTRecord> records;
  std::vector<AlignedSample> skipped;
  // For every input sample: the record it landed in, or nullopt if skipped.
  std::vector<std::optional<std::size_t>> assignment;
};

// One record per decision instant: samples within merge_window_ms of the
// first one (and with distinct categories) share a record whose frames are
// the k_frames most recent with t_f <= the instant. Short history => skipped.
FramesAotResult build_frames_aot(const std::vector<FrameRecord>& frames,
                                 const std::vector<AlignedSample>& samples,
                                 const StageConfig& cfg, const ExplanationContext& ctx = {});

// Stage 2 -> stage 3. Stage 3 input is returned unchanged; stage 1 is rejected.
AoTRecord to_truncated_form(const AoTRecord& record, const Sentinels& s = {});

std::pair<std::vector<AoTRecord>, std::vector<AoTRecord>> split_dataset(
    const std::vector<AoTRecord>& records, const StageConfig& cfg);

std::string aot_record_to_json(const AoTRecord& r);
AoTRecord aot_record_from_json(const std::string& line, const Sentinels& s = {});
void write_aot_jsonl(const std::vector<AoTRecord>& records, const std::filesystem::path& file);
std::vector<AoTRecord> read_aot_jsonl(const std::filesystem::path& file, const Sentinels& s = {});

// Stage-3 records covering the explanation templates and the combined
// action sets the built-in policies emit.
std::vector<AoTRecord> bundled_stage3_dataset(const Sentinels& s = {});

}  // namespace combat
