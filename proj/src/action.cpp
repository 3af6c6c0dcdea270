#include "combat/action.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "combat/error.hpp"
#include "text_util.hpp"

namespace combat {

std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "InvalidArgument";
    case ErrorKind::kInvalidArity: return "InvalidArity";
    case ErrorKind::kEmptyLabel: return "EmptyLabel";
    case ErrorKind::kUnknownAction: return "UnknownAction";
    case ErrorKind::kMissingDuration: return "MissingDuration";
    case ErrorKind::kBadDuration: return "BadDuration";
    case ErrorKind::kInvalidMode: return "InvalidMode";
    case ErrorKind::kDuplicateCategory: return "DuplicateCategory";
    case ErrorKind::kDanglingPress: return "DanglingPress";
    case ErrorKind::kOrphanRelease: return "OrphanRelease";
    case ErrorKind::kNoFrames: return "NoFrames";
    case ErrorKind::kParseError: return "ParseError";
    case ErrorKind::kOrderingViolation: return "OrderingViolation";
    case ErrorKind::kInvalidStage: return "InvalidStage";
    case ErrorKind::kDegenerateEmbedding: return "DegenerateEmbedding";
    case ErrorKind::kNumericFailure: return "NumericFailure";
    case ErrorKind::kActionParseError: return "ActionParseError";
    case ErrorKind::kObservationSchemaError: return "ObservationSchemaError";
    case ErrorKind::kReplayExhausted: return "ReplayExhausted";
    case ErrorKind::kEmptyDataset: return "EmptyDataset";
    case ErrorKind::kInsufficientHistory: return "InsufficientHistory";
    case ErrorKind::kValidationError: return "ValidationError";
    case ErrorKind::kGenerationShortfall: return "GenerationShortfall";
    case ErrorKind::kIoError: return "IoError";
  }
  return "Unknown";
}

namespace {

struct CategoryInfo {
  std::string_view binding;
  std::string_view name;
  bool hold_capable;
  bool mouse;
};

constexpr std::array<CategoryInfo, kNumCategories> kInfo = {{
    {"r", "heal", false, false},
    {"1", "immobilize", false, false},
    {"space", "dodge", false, false},
    {"left mouse button", "light_attack", false, true},
    {"d", "move_right", true, false},
    {"s", "move_back", true, false},
    {"a", "move_left", true, false},
    {"w", "move_forward", true, false},
    {"shift", "sprint", true, false},
    {"right mouse button", "heavy_attack", true, true},
}};

const CategoryInfo& info(ActionCategory c) {
  return kInfo[static_cast<std::size_t>(c)];
}

ActionEvent parse_clause(std::string_view clause) {
  std::vector<std::string> words = detail::split_ws(clause);
  if (words.empty()) {
    throw Error(ErrorKind::kUnknownAction, "empty action clause");
  }
  const std::string& verb = words.front();
  if (verb == "press") {
    std::string b = detail::join(words.begin() + 1, words.end(), " ");
    auto c = category_from_binding(b);
    if (!c) throw Error(ErrorKind::kUnknownAction, "unknown binding: '" + b + "'");
    return ActionEvent::tap(*c);
  }
  if (verb != "hold") {
    throw Error(ErrorKind::kUnknownAction, "unknown action verb: '" + verb + "'");
  }
  auto for_it = std::find(words.begin() + 1, words.end(), "for");
  std::string b = detail::join(words.begin() + 1, for_it, " ");
  auto c = category_from_binding(b);
  if (!c) throw Error(ErrorKind::kUnknownAction, "unknown binding: '" + b + "'");
  if (for_it == words.end() || std::distance(for_it, words.end()) != 3 ||
      (*(for_it + 2) != "seconds" && *(for_it + 2) != "second")) {
    throw Error(ErrorKind::kMissingDuration, "hold without duration: '" +
                                                 std::string(clause) + "'");
  }
  const std::string& num = *(for_it + 1);
  double seconds = 0.0;
  auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), seconds);
  if (ec != std::errc() || ptr != num.data() + num.size() || !std::isfinite(seconds)) {
    throw Error(ErrorKind::kMissingDuration, "unreadable duration: '" + num + "'");
  }
  const auto ms = static_cast<std::int64_t>(std::llround(seconds * 1000.0));
  if (seconds <= 0.0 || ms <= 0) {
    throw Error(ErrorKind::kBadDuration, "duration must be positive: '" + num + "'");
  }
  if (!is_hold_capable(*c)) {
    throw Error(ErrorKind::kInvalidMode,
                std::string(binding(*c)) + " cannot be held");
  }
  return ActionEvent::hold(*c, ms);
}

}  // namespace

std::string_view binding(ActionCategory c) { return info(c).binding; }
std::string_view category_name(ActionCategory c) { return info(c).name; }
bool is_hold_capable(ActionCategory c) { return info(c).hold_capable; }
bool is_mouse(ActionCategory c) { return info(c).mouse; }

std::optional<ActionCategory> category_from_binding(std::string_view b) {
  for (ActionCategory c : kPriorityOrder) {
    if (info(c).binding == b) return c;
  }
  return std::nullopt;
}

ActionEvent ActionEvent::tap(ActionCategory c) {
  return ActionEvent{c, ActionMode::kTap, std::nullopt};
}

ActionEvent ActionEvent::hold(ActionCategory c, std::int64_t duration_ms) {
  ActionEvent e{c, ActionMode::kHold, duration_ms};
  validate_event(e);
  return e;
}

void validate_event(const ActionEvent& e) {
  if (e.mode == ActionMode::kTap) {
    if (e.duration_ms) {
      throw Error(ErrorKind::kInvalidMode, "tap events carry no duration");
    }
    return;
  }
  if (!is_hold_capable(e.category)) {
    throw Error(ErrorKind::kInvalidMode,
                std::string(binding(e.category)) + " cannot be held");
  }
  if (!e.duration_ms) throw Error(ErrorKind::kMissingDuration, "hold without duration");
  if (*e.duration_ms <= 0) throw Error(ErrorKind::kBadDuration, "duration must be positive");
}

ActionSet::ActionSet(std::initializer_list<ActionEvent> events) {
  for (const auto& e : events) add(e);
}

ActionSet::ActionSet(std::vector<ActionEvent> events) {
  events_.reserve(events.size());
  for (const auto& e : events) add(e);
}

void ActionSet::add(const ActionEvent& e) {
  validate_event(e);
  if (contains(e.category)) {
    throw Error(ErrorKind::kDuplicateCategory,
                "category already in set: " + std::string(category_name(e.category)));
  }
  events_.push_back(e);
}

bool ActionSet::contains(ActionCategory c) const {
  return std::any_of(events_.begin(), events_.end(),
                     [c](const ActionEvent& e) { return e.category == c; });
}

std::vector<double> weight_schedule(int k) {
  if (k <= 0) throw Error(ErrorKind::kInvalidArity, "weight_schedule needs k >= 1");
  constexpr double kLo = 0.01;
  constexpr double kHi = 0.1;
  if (k == 1) return {kHi};
  // raw_i = 2^(k-i-1): max 2^(k-1) at i=0, min 1 at i=k-1.
  const double raw_max = std::ldexp(1.0, k - 1);
  std::vector<double> w(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const double raw = std::ldexp(1.0, k - i - 1);
    w[static_cast<std::size_t>(i)] = kLo + (kHi - kLo) * (raw - 1.0) / (raw_max - 1.0);
  }
  w.back() = kLo;
  w.front() = kHi;
  return w;
}

PrioritySchedule PrioritySchedule::standard() {
  return PrioritySchedule{{kPriorityOrder.begin(), kPriorityOrder.end()},
                          weight_schedule(kNumCategories)};
}

double PrioritySchedule::weight_of(ActionCategory c) const {
  auto it = std::find(order.begin(), order.end(), c);
  if (it == order.end() || order.size() != weights.size()) {
    throw Error(ErrorKind::kInvalidArgument, "category missing from schedule");
  }
  return weights[static_cast<std::size_t>(it - order.begin())];
}

MatchResult priority_match(const ActionSet& label, const ActionSet& output) {
  if (label.empty()) throw Error(ErrorKind::kEmptyLabel, "label action set is empty");
  ActionCategory best = label.events().front().category;
  for (const auto& e : label) {
    if (priority_rank(e.category) < priority_rank(best)) best = e.category;
  }
  return MatchResult{best, output.contains(best)};
}

std::vector<ActionEvent> parse_action_sequence(std::string_view text) {
  std::string lowered = detail::to_lower(detail::trim(text));
  std::string_view body = lowered;
  if (body.size() >= 2 && body.front() == '[' && body.back() == ']') {
    body = detail::trim(body.substr(1, body.size() - 2));
  }
  if (detail::split_ws(body) == std::vector<std::string>{"no", "action"}) return {};

  std::vector<ActionEvent> out;
  std::size_t start = 0;
  while (start <= body.size()) {
    std::size_t comma = body.find(',', start);
    if (comma == std::string_view::npos) comma = body.size();
    out.push_back(parse_clause(body.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

ActionSet parse_action_text(std::string_view text) {
  return ActionSet(parse_action_sequence(text));
}

std::string format_seconds(std::int64_t ms) {
  char buf[48];
  const char* sign = ms < 0 ? "-" : "";
  const std::int64_t a = ms < 0 ? -ms : ms;
  std::snprintf(buf, sizeof buf, "%s%lld.%03lld", sign, static_cast<long long>(a / 1000),
                static_cast<long long>(a % 1000));
  std::string s = buf;
  while (s.back() == '0') s.pop_back();
  if (s.back() == '.') s.pop_back();
  return s;
}

std::string render_event(const ActionEvent& e) {
  if (e.mode == ActionMode::kTap) return "press " + std::string(binding(e.category));
  return "hold " + std::string(binding(e.category)) + " for " +
         format_seconds(e.duration_ms.value_or(0)) + " seconds";
}

std::string render_action(std::span<const ActionEvent> events) {
  if (events.empty()) return "no action";
  std::string out;
  for (const auto& e : events) {
    if (!out.empty()) out += ", ";
    out += render_event(e);
  }
  return out;
}

}  // namespace combat
