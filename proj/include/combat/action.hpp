#pragma once

// Action vocabulary, priority schedule and the action-clause text format.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace combat {

// Declaration order is the priority order: rank 0 is the most important.
enum class ActionCategory : std::uint8_t {
  kHeal = 0,
  kImmobilize,
  kDodge,
  kLightAttack,
  kMoveRight,
  kMoveBack,
  kMoveLeft,
  kMoveForward,
  kSprint,
  kHeavyAttack,
};

inline constexpr int kNumCategories = 10;

inline constexpr std::array<ActionCategory, kNumCategories> kPriorityOrder = {
    ActionCategory::kHeal,        ActionCategory::kImmobilize,
    ActionCategory::kDodge,       ActionCategory::kLightAttack,
    ActionCategory::kMoveRight,   ActionCategory::kMoveBack,
    ActionCategory::kMoveLeft,    ActionCategory::kMoveForward,
    ActionCategory::kSprint,      ActionCategory::kHeavyAttack,
};

constexpr int priority_rank(ActionCategory c) { return static_cast<int>(c); }

// Physical key or mouse button, spelled as in the action grammar.
std::string_view binding(ActionCategory c);
std::optional<ActionCategory> category_from_binding(std::string_view b);
std::string_view category_name(ActionCategory c);
bool is_hold_capable(ActionCategory c);
bool is_mouse(ActionCategory c);

enum class ActionMode : std::uint8_t { kTap, kHold };

struct ActionEvent {
  ActionCategory category = ActionCategory::kLightAttack;
  ActionMode mode = ActionMode::kTap;
  // Milliseconds; set iff mode == kHold.
  std::optional<std::int64_t> duration_ms;

  static ActionEvent tap(ActionCategory c);
  static ActionEvent hold(ActionCategory c, std::int64_t duration_ms);

  bool operator==(const ActionEvent&) const = default;
};

// Throws kInvalidMode / kBadDuration / kMissingDuration on a malformed event.
void validate_event(const ActionEvent& e);

// Ordered events for one decision cycle; categories are unique.
class ActionSet {
 public:
  ActionSet() = default;
  ActionSet(std::initializer_list<ActionEvent> events);
  explicit ActionSet(std::vector<ActionEvent> events);

  // Throws kDuplicateCategory if the category is already present.
  void add(const ActionEvent& e);
  bool contains(ActionCategory c) const;

  const std::vector<ActionEvent>& events() const { return events_; }
  std::size_t size() const { return events_.size(); }
  bool empty() const { return events_.empty(); }
  auto begin() const { return events_.begin(); }
  auto end() const { return events_.end(); }

  bool operator==(const ActionSet&) const = default;

 private:
  std::vector<ActionEvent> events_;
};

// Exponential priority weights 2^(k-i-1), min-max normalised onto
// [0.01, 0.1]. k == 1 yields {0.1}. Throws kInvalidArity for k == 0.
std::vector<double> weight_schedule(int k);

struct PrioritySchedule {
  std::vector<ActionCategory> order;
  std::vector<double> weights;

  static PrioritySchedule standard();
  double weight_of(ActionCategory c) const;
};

struct MatchResult {
  ActionCategory c_star;
  bool matched;
};

// Highest-priority category of `label`, and whether `output` contains it.
// Throws kEmptyLabel when label is empty.
MatchResult priority_match(const ActionSet& label, const ActionSet& output);

// Clause grammar:
//   set    := "no action" | clause {"," clause}
//   clause := "press" binding | "hold" binding "for" number "seconds"
// Case-insensitive; one pair of surrounding brackets is tolerated.
ActionSet parse_action_text(std::string_view text);
// Same grammar, but repeated categories are allowed (chronological lists).
std::vector<ActionEvent> parse_action_sequence(std::string_view text);

std::string render_action(std::span<const ActionEvent> events);
inline std::string render_action(const ActionSet& set) {
  return render_action(std::span<const ActionEvent>(set.events()));
}
std::string render_event(const ActionEvent& e);
// Seconds with up to 3 decimals, trailing zeros trimmed ("2", "1.25").
std::string format_seconds(std::int64_t ms);

}  // namespace combat
