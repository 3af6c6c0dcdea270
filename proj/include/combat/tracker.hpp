#pragma once

// Input/frame stream ingestion, press/release coalescing, activity gating,
// nearest-future-frame alignment and the on-disk session format.

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "combat/action.hpp"

namespace combat {

enum class Device : std::uint8_t { kKeyboard, kMouse };
enum class Edge : std::uint8_t { kDown, kUp };

struct RawInputEvent {
  Device device = Device::kKeyboard;
  std::string binding;
  Edge edge = Edge::kDown;
  std::int64_t t_ms = 0;

  bool operator==(const RawInputEvent&) const = default;
};

struct FrameRecord {
  std::int64_t index = 1;
  std::int64_t t_ms = 0;
  // Image path, or a serialized observation for simulator sessions.
  std::string payload;

  bool operator==(const FrameRecord&) const = default;
};

struct Interval {
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;

  bool contains(std::int64_t t) const { return t >= start_ms && t <= end_ms; }
  bool operator==(const Interval&) const = default;
};

struct TrackSession {
  std::vector<FrameRecord> frames;
  std::vector<RawInputEvent> raw_events;
  std::vector<Interval> active_intervals;
  std::map<std::string, std::string> meta;

  bool operator==(const TrackSession&) const = default;
};

struct TimedAction {
  ActionEvent action;
  std::int64_t t_ms = 0;

  bool operator==(const TimedAction&) const = default;
};

struct AlignedSample {
  ActionEvent action;
  std::int64_t action_t_ms = 0;
  std::int64_t frame_index = 0;

  bool operator==(const AlignedSample&) const = default;
};

struct AlignmentResult {
  std::vector<AlignedSample> samples;
  std::vector<TimedAction> dropped;
};

inline constexpr std::int64_t kDefaultTapThresholdMs = 200;

struct CoalesceResult {
  std::vector<TimedAction> actions;
  // Tap-only presses held longer than the threshold (still emitted as taps).
  std::size_t long_presses = 0;
};

// Pairs each down edge with its release (per binding, innermost first) and
// emits one action stamped at the down edge, ordered by press time.
// Throws kDanglingPress, kOrphanRelease, kUnknownAction, kOrderingViolation.
CoalesceResult coalesce_events(const std::vector<RawInputEvent>& raw,
                               std::int64_t tap_threshold_ms = kDefaultTapThresholdMs);

// Maps every action to the first frame with t_f >= t_a. Actions later than
// the last frame are reported in `dropped`. Throws kNoFrames.
AlignmentResult align_actions_to_frames(const std::vector<TimedAction>& actions,
                                        const std::vector<FrameRecord>& frames);

// Drops frames and events outside the closed active intervals.
TrackSession gate_session(const TrackSession& session);

// Throws kOrderingViolation if a stream is out of order or intervals overlap.
void validate_session(const TrackSession& session);

// Writes session.meta, frames.jsonl, events.jsonl and intervals.jsonl.
void export_session(const TrackSession& session, const std::filesystem::path& dir);
TrackSession import_session(const std::filesystem::path& dir);

// ISO 8601 extended format with millisecond precision, UTC ("...T..:..:..123Z").
std::string iso8601_ms(std::int64_t unix_ms);
// Session epoch from meta key "epoch_unix_ms" (0 when absent).
std::int64_t session_epoch_ms(const TrackSession& session);

RawInputEvent make_raw_event(std::string binding, Edge edge, std::int64_t t_ms);

// Thread-safe ingestion: one producer may append frames while another appends
// input events. Each stream must be timestamp-monotone on its own.
class SessionRecorder {
 public:
  explicit SessionRecorder(std::map<std::string, std::string> meta = {});

  void append_frame(std::int64_t t_ms, std::string payload);
  void append_event(RawInputEvent event);
  void open_interval(std::int64_t t_ms);
  void close_interval(std::int64_t t_ms);

  TrackSession snapshot() const;

 private:
  mutable std::mutex frames_mu_;
  mutable std::mutex events_mu_;
  mutable std::mutex intervals_mu_;
  std::vector<FrameRecord> frames_;
  std::vector<RawInputEvent> events_;
  std::vector<Interval> intervals_;
  bool interval_open_ = false;
  std::map<std::string, std::string> meta_;
};

}  // namespace combat
