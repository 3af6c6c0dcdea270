#include "combat/aot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <random>

#include "combat/error.hpp"
#include "text_util.hpp"

namespace combat {

namespace {

struct Template {
  ActionCategory category;
  std::string_view text;  // "{for}" becomes " for N seconds" (holds) or " briefly" (taps)
};

constexpr std::array<Template, kNumCategories> kTemplates = {{
    {ActionCategory::kHeal,
     "The character's health is low (indicated by the white bar in the bottom left). The "
     "character needs to restore health and should create distance from enemies before "
     "healing."},
    {ActionCategory::kImmobilize,
     "The game character's immobilization skill is currently available. This skill can "
     "briefly freeze the enemy. It should be followed up with quick consecutive light "
     "attacks."},
    {ActionCategory::kDodge,
     "The enemy is about to attack the game character. The game character needs to "
     "dodge(or block in SSDT) to avoid enemy attacks and prevent damage."},
    {ActionCategory::kLightAttack,
     "The enemy is not currently attacking, so the game character should take the "
     "opportunity to execute a light attack. Consecutive uses (up to 5 times) can trigger "
     "combo moves, but they may be interrupted by enemies."},
    {ActionCategory::kMoveRight, "The game character moves right{for}."},
    {ActionCategory::kMoveBack, "The game character moves backward{for}."},
    {ActionCategory::kMoveLeft, "The game character moves left{for}."},
    {ActionCategory::kMoveForward, "The game character moves forward{for}."},
    {ActionCategory::kSprint, "The game character sprints{for}."},
    {ActionCategory::kHeavyAttack,
     "The enemy is not currently attacking, so the game character can charge heavy "
     "attack{for}. Longer charge time increases damage but leaves vulnerable to "
     "interruption."},
}};

constexpr std::string_view kBlockText =
    "The enemy is about to attack the game character. The game character needs to block "
    "to avoid enemy attacks and prevent damage.";

std::string instantiate(const ActionEvent& e, const ExplanationContext& ctx) {
  if (e.category == ActionCategory::kDodge && ctx.block_mode) return std::string(kBlockText);
  std::string text(kTemplates[static_cast<std::size_t>(e.category)].text);
  const auto pos = text.find("{for}");
  if (pos != std::string::npos) {
    const std::string dur = e.duration_ms ? " for " + format_seconds(*e.duration_ms) + " seconds"
                                          : std::string(" briefly");
    text.replace(pos, 5, dur);
  }
  return text;
}

AoTRecord make_record(int stage, std::vector<std::int64_t> frame_refs,
                      std::vector<ActionEvent> actions, const Sentinels& s,
                      const ExplanationContext& ctx) {
  AoTRecord r;
  r.stage = stage;
  r.question = question_for_stage(stage, frame_refs.size(), s);
  r.frame_refs = std::move(frame_refs);
  r.actions = std::move(actions);
  r.explanation = r.actions.empty() ? std::string(kNoActionExplanation)
                                    : render_explanation(r.actions, ctx);
  r.serialized = serialize_response(stage, r.actions, r.explanation, s);
  return r;
}

}  // namespace

void StageConfig::validate() const {
  if (n < 1 || m < 1 || k_frames < 1) {
    throw Error(ErrorKind::kInvalidArgument, "n, m and k_frames must be >= 1");
  }
  if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "split_fraction must lie in (0, 1)");
  }
  if (merge_window_ms < 0) throw Error(ErrorKind::kInvalidArgument, "merge window must be >= 0");
}

std::string render_explanation(std::span<const ActionEvent> events, const ExplanationContext& ctx) {
  std::array<const ActionEvent*, kNumCategories> first{};
  for (const auto& e : events) {
    auto& slot = first[static_cast<std::size_t>(e.category)];
    if (!slot) slot = &e;
  }
  std::string out;
  for (const ActionEvent* e : first) {
    if (!e) continue;
    if (!out.empty()) out += ' ';
    out += instantiate(*e, ctx);
  }
  return out;
}

std::string question_for_stage(int stage, std::size_t num_frames, const Sentinels& s) {
  std::string q;
  for (std::size_t i = 0; i < num_frames; ++i) q += s.image + " ";
  if (stage == 1) return q + "Please predict the actions performed in the video.";
  return q + "Please predict the next actions based on the frame sequence.";
}

std::string serialize_response(int stage, std::span<const ActionEvent> actions,
                               const std::string& explanation, const Sentinels& s) {
  const std::string action = "[" + render_action(actions) + "]";
  const std::string expl = explanation.empty() ? "" : "[" + explanation + "] ";
  if (stage == 3) return action + " " + s.trunc + " " + expl + s.eos;
  if (stage == 1 || stage == 2) return expl + action + " " + s.eos;
  throw Error(ErrorKind::kInvalidStage, "stage must be 1, 2 or 3");
}

std::string extract_action_clause(const std::string& serialized, int stage, const Sentinels& s) {
  std::size_t open = std::string::npos;
  std::size_t close = std::string::npos;
  if (stage == 3) {
    open = serialized.find('[');
    close = open == std::string::npos ? open : serialized.find(']', open);
    const auto trunc = serialized.find(s.trunc);
    if (trunc != std::string::npos && close != std::string::npos && close > trunc) {
      close = std::string::npos;
    }
  } else {
    close = serialized.rfind(']');
    open = close == std::string::npos ? close : serialized.rfind('[', close);
  }
  if (open == std::string::npos || close == std::string::npos) {
    throw Error(ErrorKind::kParseError, "no bracketed action clause in response");
  }
  return serialized.substr(open + 1, close - open - 1);
}

std::vector<FrameRecord> resample_frames(const std::vector<FrameRecord>& frames, int fps) {
  if (fps < 1) throw Error(ErrorKind::kInvalidArgument, "fps must be >= 1");
  std::vector<FrameRecord> out;
  if (frames.empty()) return out;
  const double period = 1000.0 / fps;
  const std::int64_t t0 = frames.front().t_ms;
  double next_slot = static_cast<double>(t0);
  for (const auto& f : frames) {
    const double rel = static_cast<double>(f.t_ms);
    if (rel + 1e-9 < next_slot) continue;
    out.push_back(f);
    const double slots = std::floor((rel - static_cast<double>(t0)) / period + 1e-9);
    next_slot = static_cast<double>(t0) + (slots + 1.0) * period;
  }
  return out;
}

VideoAotResult build_video_aot(const std::vector<FrameRecord>& frames,
                               const std::vector<TimedAction>& actions, const StageConfig& cfg,
                               const ExplanationContext& ctx) {
  cfg.validate();
  VideoAotResult result;
  const auto picked = resample_frames(frames, cfg.m);
  const std::size_t n = static_cast<std::size_t>(cfg.n);
  if (picked.size() < n) {
    result.warnings.push_back("EmptyDataset: " + std::to_string(picked.size()) +
                              " frames at " + std::to_string(cfg.m) + " fps, need " +
                              std::to_string(n));
    return result;
  }
  std::vector<TimedAction> sorted = actions;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const TimedAction& a, const TimedAction& b) { return a.t_ms < b.t_ms; });

  const std::int64_t period = std::max<std::int64_t>(1, 1000 / cfg.m);
  const std::size_t windows = picked.size() / n;
  for (std::size_t w = 0; w < windows; ++w) {
    const std::size_t first = w * n;
    const std::int64_t start = picked[first].t_ms;
    const std::int64_t end = first + n < picked.size() ? picked[first + n].t_ms
                                                       : picked[first + n - 1].t_ms + period;
    std::vector<std::int64_t> refs;
    for (std::size_t i = first; i < first + n; ++i) refs.push_back(picked[i].index);
    std::vector<ActionEvent> in_window;
    for (const auto& a : sorted) {
      if (a.t_ms >= start && a.t_ms < end) in_window.push_back(a.action);
    }
    result.records.push_back(make_record(1, std::move(refs), std::move(in_window),
                                         cfg.sentinels, ctx));
  }
  return result;
}

FramesAotResult build_frames_aot(const std::vector<FrameRecord>& frames,
                                 const std::vector<AlignedSample>& samples,
                                 const StageConfig& cfg, const ExplanationContext& ctx) {
  cfg.validate();
  FramesAotResult result;
  result.assignment.assign(samples.size(), std::nullopt);

  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return samples[a].action_t_ms < samples[b].action_t_ms;
  });

  const std::size_t k = static_cast<std::size_t>(cfg.k_frames);
  std::size_t pos = 0;
  while (pos < order.size()) {
    const std::int64_t anchor = samples[order[pos]].action_t_ms;
    std::vector<std::size_t> group{order[pos]};
    std::array<bool, kNumCategories> seen{};
    seen[static_cast<std::size_t>(samples[order[pos]].action.category)] = true;
    std::size_t next = pos + 1;
    while (next < order.size()) {
      const auto& s = samples[order[next]];
      const auto cat = static_cast<std::size_t>(s.action.category);
      if (s.action_t_ms - anchor > cfg.merge_window_ms || seen[cat]) break;
      seen[cat] = true;
      group.push_back(order[next]);
      ++next;
    }
    pos = next;

    // Frames at or before the decision instant.
    auto upper = std::upper_bound(frames.begin(), frames.end(), anchor,
                                  [](std::int64_t t, const FrameRecord& f) { return t < f.t_ms; });
    const auto available = static_cast<std::size_t>(upper - frames.begin());
    if (available < k) {
      for (std::size_t idx : group) result.skipped.push_back(samples[idx]);
      continue;
    }
    std::vector<std::int64_t> refs;
    for (auto it = upper - static_cast<std::ptrdiff_t>(k); it != upper; ++it) refs.push_back(it->index);
    std::vector<ActionEvent> acts;
    for (std::size_t idx : group) acts.push_back(samples[idx].action);
    for (std::size_t idx : group) result.assignment[idx] = result.records.size();
    result.records.push_back(make_record(2, std::move(refs), std::move(acts), cfg.sentinels, ctx));
  }
  return result;
}

AoTRecord to_truncated_form(const AoTRecord& record, const Sentinels& s) {
  if (record.stage == 3) return record;
  if (record.stage != 2) {
    throw Error(ErrorKind::kInvalidStage, "only stage-2 records can be truncated");
  }
  AoTRecord out = record;
  out.stage = 3;
  out.question = question_for_stage(3, out.frame_refs.size(), s);
  out.serialized = serialize_response(3, out.actions, out.explanation, s);
  return out;
}

std::pair<std::vector<AoTRecord>, std::vector<AoTRecord>> split_dataset(
    const std::vector<AoTRecord>& records, const StageConfig& cfg) {
  cfg.validate();
  std::vector<std::size_t> idx(records.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  // Fisher-Yates on raw engine output keeps the permutation identical across
  // standard libraries (std::shuffle's distribution use is unspecified).
  std::mt19937_64 rng(cfg.seed);
  for (std::size_t i = idx.size(); i > 1; --i) {
    std::swap(idx[i - 1], idx[rng() % i]);
  }
  const auto n_val = static_cast<std::size_t>(
      std::llround((1.0 - cfg.split_fraction) * static_cast<double>(records.size())));
  std::vector<AoTRecord> train, val;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    (i < n_val ? val : train).push_back(records[idx[i]]);
  }
  return {std::move(train), std::move(val)};
}

std::string aot_record_to_json(const AoTRecord& r) {
  nlohmann::ordered_json j;
  j["stage"] = r.stage;
  j["frame_refs"] = r.frame_refs;
  j["question"] = r.question;
  j["action_text"] = render_action(r.actions);
  j["explanation"] = r.explanation;
  j["serialized"] = r.serialized;
  return j.dump();
}

AoTRecord aot_record_from_json(const std::string& line, const Sentinels& s) {
  AoTRecord r;
  try {
    const auto j = nlohmann::json::parse(line);
    r.stage = j.at("stage").get<int>();
    r.frame_refs = j.at("frame_refs").get<std::vector<std::int64_t>>();
    r.question = j.at("question").get<std::string>();
    r.explanation = j.at("explanation").get<std::string>();
    r.serialized = j.at("serialized").get<std::string>();
    if (r.stage < 1 || r.stage > 3) throw Error(ErrorKind::kParseError, "stage out of range");
    r.actions = parse_action_sequence(j.at("action_text").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParseError, e.what());
  }
  if (parse_action_sequence(extract_action_clause(r.serialized, r.stage, s)) != r.actions) {
    throw Error(ErrorKind::kParseError, "action_text disagrees with serialized response");
  }
  return r;
}

void write_aot_jsonl(const std::vector<AoTRecord>& records, const std::filesystem::path& file) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIoError, "cannot write " + file.string());
  for (const auto& r : records) out << aot_record_to_json(r) << '\n';
}

std::vector<AoTRecord> read_aot_jsonl(const std::filesystem::path& file, const Sentinels& s) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorKind::kIoError, "cannot open " + file.string());
  std::vector<AoTRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    try {
      out.push_back(aot_record_from_json(line, s));
    } catch (const Error& e) {
      throw Error(e.kind(), file.filename().string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<AoTRecord> bundled_stage3_dataset(const Sentinels& s) {
  using C = ActionCategory;
  const std::vector<std::vector<ActionEvent>> catalogue = {
      {ActionEvent::tap(C::kHeal)},
      {ActionEvent::tap(C::kImmobilize)},
      {ActionEvent::tap(C::kDodge)},
      {ActionEvent::tap(C::kLightAttack)},
      {ActionEvent::hold(C::kMoveRight, 1000)},
      {ActionEvent::hold(C::kMoveBack, 1000)},
      {ActionEvent::hold(C::kMoveLeft, 1000)},
      {ActionEvent::hold(C::kMoveForward, 1000)},
      {ActionEvent::hold(C::kSprint, 1500)},
      {ActionEvent::hold(C::kHeavyAttack, 1000)},
      {ActionEvent::hold(C::kHeavyAttack, 2000)},
      {ActionEvent::hold(C::kMoveBack, 500), ActionEvent::tap(C::kHeal)},
      {ActionEvent::tap(C::kImmobilize), ActionEvent::tap(C::kLightAttack)},
      {ActionEvent::hold(C::kMoveLeft, 500), ActionEvent::tap(C::kDodge)},
      {ActionEvent::hold(C::kMoveForward, 1250), ActionEvent::hold(C::kSprint, 1250)},
      {ActionEvent::hold(C::kMoveForward, 750)},
      {},
  };
  std::vector<AoTRecord> out;
  for (const auto& acts : catalogue) {
    out.push_back(make_record(3, {1, 2, 3, 4}, acts, s, ExplanationContext{}));
  }
  return out;
}

}  // namespace combat
