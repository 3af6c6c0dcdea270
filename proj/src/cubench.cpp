#include "combat/cubench.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <random>
#include <set>
#include <sstream>

#include "combat/arena.hpp"
#include "combat/error.hpp"

namespace combat {

namespace {

using json = nlohmann::ordered_json;

constexpr std::array<std::string_view, kNumBenchCategories> kCategoryNames{
    "gathering", "comprehension", "reasoning"};

constexpr std::array<std::string_view, kNumBenchSubtasks> kSubtaskNames{
    "gathering_enemy_health", "gathering_own_health",     "gathering_own_abnormal_status",
    "understanding_action_intention", "understanding_current_state", "option_a_restore_health",
    "option_b_dodge_attack",  "option_c_attack_enemy"};

const std::string kBinaryLead =
    "Select the best answer to the following single-choice question based on the game-screenshot "
    "image. Respond with only the letter (Yes or No) of the correct option.";

const std::array<std::string, kNumBenchSubtasks> kPrompts{
    kBinaryLead + " Is the enemy's health high in the game?  Yes/No. The best answer is:",
    kBinaryLead + "Is the health of the game character you control high in the game? Yes/No. The best answer is:",
    kBinaryLead + " Is the game character in an abnormal state? (Such as being on fire) Yes/No. The best answer is:",
    kBinaryLead + "Carefully observe the enemy's movements. Will the enemy attack next or is it attacking now? "
                  "Yes/No. The best answer is:",
    kBinaryLead + "Is the enemy in a stunned state? (When the enemy is in a stunned state, they cannot attack "
                  "for a period of time and can only be attacked. For example, the enemy is knocked down or "
                  "immobilized by the spell.) Yes/No. The best answer is:",
    std::string(),
    std::string(),
    std::string(),
};

const std::string kReasoningPrompt =
    "Select the best answer to the following single-choice question based on the game-screenshot "
    "image. Respond with only the letter (A, B, or C) of the correct option.Carefully observe the "
    "enemy's actions. As the game character, please reason which of the following actions is most "
    "suitable for your next move (ensure your health is prioritized while depleting the enemy's "
    "health). A. Restore health of the game character. B. Dodge to avoid enemy attacks and prevent "
    "damage. C. Attack the enemy. The best answer is:";

const std::vector<std::string> kBinaryChoices{"Yes", "No"};
const std::vector<std::string> kLetterChoices{"A", "B", "C"};

std::size_t idx(BenchCategory c) { return static_cast<std::size_t>(c); }
std::size_t idx(BenchSubtask t) { return static_cast<std::size_t>(t); }

std::vector<std::string> word_tokens(std::string_view raw) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : raw) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      cur += ch;
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

ValidationIssue issue(std::size_t line, std::string field, std::string msg) {
  return {line, std::move(field), std::move(msg)};
}

// Parses one JSONL line, appending every violation found.
std::optional<BenchItem> parse_item(const std::string& text, std::size_t line,
                                    std::vector<ValidationIssue>& issues) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    issues.push_back(issue(line, "<line>", std::string("invalid JSON: ") + e.what()));
    return std::nullopt;
  }
  if (!j.is_object()) {
    issues.push_back(issue(line, "<line>", "not a JSON object"));
    return std::nullopt;
  }
  const std::size_t before = issues.size();
  BenchItem item;
  auto str_field = [&](const char* name) -> std::optional<std::string> {
    if (!j.contains(name) || !j[name].is_string() || j[name].get<std::string>().empty()) {
      issues.push_back(issue(line, name, "missing or not a non-empty string"));
      return std::nullopt;
    }
    return j[name].get<std::string>();
  };
  if (auto v = str_field("id")) item.id = *v;
  if (auto v = str_field("category")) {
    if (auto c = bench_category_from_name(*v)) item.category = *c;
    else issues.push_back(issue(line, "category", "unknown category '" + *v + "'"));
  }
  if (auto v = str_field("subtask")) {
    if (auto t = bench_subtask_from_name(*v)) item.subtask = *t;
    else issues.push_back(issue(line, "subtask", "unknown subtask '" + *v + "'"));
  }
  if (auto v = str_field("question")) item.question = *v;
  if (auto v = str_field("gold")) item.gold = *v;

  if (!j.contains("frame_refs") || !j["frame_refs"].is_array()) {
    issues.push_back(issue(line, "frame_refs", "missing or not an array"));
  } else {
    for (const auto& f : j["frame_refs"]) {
      if (!f.is_number_integer() || f.get<std::int64_t>() < 0) {
        issues.push_back(issue(line, "frame_refs", "entries must be non-negative integers"));
        break;
      }
      item.frame_refs.push_back(f.get<std::int64_t>());
    }
    if (item.frame_refs.empty() || item.frame_refs.size() > 4) {
      issues.push_back(issue(line, "frame_refs", "must list 1 to 4 frames"));
    }
  }
  if (!j.contains("choices") || !j["choices"].is_array()) {
    issues.push_back(issue(line, "choices", "missing or not an array"));
  } else {
    for (const auto& c : j["choices"]) {
      if (!c.is_string()) {
        issues.push_back(issue(line, "choices", "entries must be strings"));
        break;
      }
      item.choices.push_back(c.get<std::string>());
    }
  }
  if (issues.size() != before) return std::nullopt;

  if (category_of(item.subtask) != item.category) {
    issues.push_back(issue(line, "subtask", "subtask does not belong to category"));
  }
  if (item.binary() && item.choices != kBinaryChoices) {
    issues.push_back(issue(line, "choices", "binary items must offer exactly [Yes, No]"));
  }
  if (!item.binary() && item.choices != kLetterChoices) {
    issues.push_back(issue(line, "choices", "reasoning items must offer exactly [A, B, C]"));
  }
  if (std::find(item.choices.begin(), item.choices.end(), item.gold) == item.choices.end()) {
    issues.push_back(issue(line, "gold", "gold answer is not one of the choices"));
  }
  if (!item.binary()) {
    const std::string want = kLetterChoices[idx(item.subtask) - idx(BenchSubtask::kOptionA)];
    if (item.category == BenchCategory::kReasoning && item.gold != want) {
      issues.push_back(issue(line, "gold", "reasoning subtask implies gold " + want));
    }
  }
  if (issues.size() != before) return std::nullopt;
  return item;
}

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

bool high(double hp, const BenchGenConfig& cfg) { return hp >= cfg.high_hp; }

std::string yes_no(bool b) { return b ? "Yes" : "No"; }

}  // namespace

std::string_view bench_category_name(BenchCategory c) { return kCategoryNames[idx(c)]; }

std::optional<BenchCategory> bench_category_from_name(std::string_view s) {
  for (std::size_t i = 0; i < kNumBenchCategories; ++i) {
    if (kCategoryNames[i] == s) return static_cast<BenchCategory>(i);
  }
  return std::nullopt;
}

std::string_view bench_subtask_name(BenchSubtask t) { return kSubtaskNames[idx(t)]; }

std::optional<BenchSubtask> bench_subtask_from_name(std::string_view s) {
  for (std::size_t i = 0; i < kNumBenchSubtasks; ++i) {
    if (kSubtaskNames[i] == s) return static_cast<BenchSubtask>(i);
  }
  return std::nullopt;
}

BenchCategory category_of(BenchSubtask t) {
  if (idx(t) <= idx(BenchSubtask::kOwnAbnormal)) return BenchCategory::kGathering;
  if (idx(t) <= idx(BenchSubtask::kCurrentState)) return BenchCategory::kComprehension;
  return BenchCategory::kReasoning;
}

const std::string& prompt_for(BenchSubtask t) {
  if (category_of(t) == BenchCategory::kReasoning) return kReasoningPrompt;
  return kPrompts[idx(t)];
}

std::string bench_item_to_json(const BenchItem& item) {
  json j;
  j["id"] = item.id;
  j["category"] = bench_category_name(item.category);
  j["subtask"] = bench_subtask_name(item.subtask);
  j["frame_refs"] = item.frame_refs;
  j["question"] = item.question;
  j["choices"] = item.choices;
  j["gold"] = item.gold;
  return j.dump();
}

void write_bench_jsonl(const std::vector<BenchItem>& items, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIoError, "cannot write " + file.string());
  for (const auto& it : items) out << bench_item_to_json(it) << '\n';
}

double DatasetStats::fraction(BenchCategory c) const {
  return total == 0 ? 0.0 : static_cast<double>(category_counts[idx(c)]) / static_cast<double>(total);
}

DatasetStats validate_dataset(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorKind::kIoError, "cannot open " + file.string());
  DatasetStats st;
  std::set<std::string> ids;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.empty()) continue;
    auto item = parse_item(text, line, st.issues);
    if (!item) continue;
    if (!ids.insert(item->id).second) {
      st.issues.push_back(issue(line, "id", "duplicate id '" + item->id + "'"));
      continue;
    }
    ++st.total;
    ++st.category_counts[idx(item->category)];
    ++st.subtask_counts[idx(item->subtask)];
  }
  return st;
}

std::vector<BenchItem> load_bench(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorKind::kIoError, "cannot open " + file.string());
  std::vector<BenchItem> items;
  std::set<std::string> ids;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.empty()) continue;
    std::vector<ValidationIssue> issues;
    auto item = parse_item(text, line, issues);
    if (item && !ids.insert(item->id).second) {
      issues.push_back(issue(line, "id", "duplicate id '" + item->id + "'"));
    }
    if (!issues.empty()) {
      const auto& i = issues.front();
      throw Error(ErrorKind::kValidationError,
                  file.filename().string() + ": line " + std::to_string(i.line) + ": " + i.field + ": " + i.message);
    }
    items.push_back(std::move(*item));
  }
  return items;
}

std::optional<std::string> normalize_answer(std::string_view raw, AnswerKind kind) {
  const auto toks = word_tokens(raw);
  if (kind == AnswerKind::kBinary) {
    for (const auto& t : toks) {
      const auto l = lower(t);
      if (l == "yes") return "Yes";
      if (l == "no") return "No";
    }
    return std::nullopt;
  }
  // Uppercase letters first, so an article such as "a" does not win over
  // the actual option letter.
  for (const auto& t : toks) {
    if (t == "A" || t == "B" || t == "C") return t;
  }
  for (const auto& t : toks) {
    const auto l = lower(t);
    if (l == "a" || l == "b" || l == "c") return std::string(1, static_cast<char>(std::toupper(l[0])));
  }
  return std::nullopt;
}

std::vector<Prediction> load_predictions(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorKind::kIoError, "cannot open " + file.string());
  std::vector<Prediction> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.empty()) continue;
    try {
      const auto j = json::parse(text);
      out.push_back({j.at("id").get<std::string>(), j.at("raw_answer").get<std::string>()});
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kValidationError, file.filename().string() + ": line " +
                                                   std::to_string(line) + ": " + e.what());
    }
  }
  return out;
}

BenchReport score(const std::vector<BenchItem>& items, const std::vector<Prediction>& predictions) {
  std::map<std::string, const Prediction*> by_id;
  for (const auto& p : predictions) {
    if (!by_id.emplace(p.id, &p).second) {
      throw Error(ErrorKind::kValidationError, "duplicate prediction for id '" + p.id + "'");
    }
  }
  BenchReport r;
  std::size_t matched = 0;
  for (const auto& item : items) {
    auto& cat = r.categories[idx(item.category)];
    auto& sub = r.subtasks[idx(item.subtask)];
    ++cat.total;
    ++sub.total;
    const auto it = by_id.find(item.id);
    if (it == by_id.end()) {
      ++r.missing;
      continue;
    }
    ++matched;
    const auto ans = normalize_answer(it->second->raw_answer,
                                      item.binary() ? AnswerKind::kBinary : AnswerKind::kChoice);
    if (!ans) {
      ++r.unparseable;
      continue;
    }
    if (*ans == item.gold) {
      ++cat.correct;
      ++sub.correct;
    }
  }
  r.extraneous = by_id.size() - matched;
  r.acc_gathering = r.categories[0].accuracy();
  r.acc_comprehension = r.categories[1].accuracy();
  r.acc_reasoning = r.categories[2].accuracy();
  double sum = 0.0;
  int nonempty = 0;
  std::size_t correct = 0, total = 0;
  for (const auto& c : r.categories) {
    correct += c.correct;
    total += c.total;
    if (c.total == 0) continue;
    sum += c.accuracy();
    ++nonempty;
  }
  r.macro_avg = nonempty == 0 ? 0.0 : sum / nonempty;
  r.micro_avg = total == 0 ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(total);
  return r;
}

std::string bench_report_csv(const BenchReport& r) {
  std::ostringstream os;
  os << "scope,name,correct,total,accuracy\n";
  for (std::size_t i = 0; i < kNumBenchCategories; ++i) {
    const auto& t = r.categories[i];
    os << "category," << kCategoryNames[i] << ',' << t.correct << ',' << t.total << ',' << fmt2(t.accuracy()) << '\n';
  }
  for (std::size_t i = 0; i < kNumBenchSubtasks; ++i) {
    const auto& t = r.subtasks[i];
    os << "subtask," << kSubtaskNames[i] << ',' << t.correct << ',' << t.total << ',' << fmt2(t.accuracy()) << '\n';
  }
  os << "summary,macro_avg,,," << fmt2(r.macro_avg) << '\n';
  os << "summary,micro_avg,,," << fmt2(r.micro_avg) << '\n';
  os << "summary,missing,," << r.missing << ",\n";
  os << "summary,unparseable,," << r.unparseable << ",\n";
  return os.str();
}

std::string bench_report_table(const BenchReport& r) {
  char buf[160];
  std::string out;
  std::snprintf(buf, sizeof buf, "%-14s %-14s %-14s %-8s\n", "Gathering", "Comprehension", "Reasoning", "Avg.");
  out += buf;
  std::snprintf(buf, sizeof buf, "%-14s %-14s %-14s %-8s\n", fmt2(r.acc_gathering).c_str(),
                fmt2(r.acc_comprehension).c_str(), fmt2(r.acc_reasoning).c_str(), fmt2(r.macro_avg).c_str());
  out += buf;
  for (std::size_t i = 0; i < kNumBenchSubtasks; ++i) {
    const auto& t = r.subtasks[i];
    std::snprintf(buf, sizeof buf, "  %-32s %4zu / %-4zu %6s\n", std::string(kSubtaskNames[i]).c_str(),
                  t.correct, t.total, fmt2(t.accuracy()).c_str());
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "missing %zu, unparseable %zu\n", r.missing, r.unparseable);
  out += buf;
  return out;
}

void FramePool::add_transcript(const std::vector<ObservationFrame>& fs) {
  transcript_start.push_back(frames.size());
  frames.insert(frames.end(), fs.begin(), fs.end());
}

std::string derive_gold(const BenchItem& item, const FramePool& pool, const BenchGenConfig& cfg) {
  if (item.frame_refs.empty()) throw Error(ErrorKind::kValidationError, item.id + ": no frames");
  for (auto ref : item.frame_refs) {
    if (ref < 0 || static_cast<std::size_t>(ref) >= pool.frames.size()) {
      throw Error(ErrorKind::kValidationError, item.id + ": frame_ref outside the pool");
    }
  }
  const ObservationFrame& newest = pool.frames[static_cast<std::size_t>(item.frame_refs.back())];
  switch (item.subtask) {
    case BenchSubtask::kEnemyHealth: return yes_no(high(newest.enemy_hp, cfg));
    case BenchSubtask::kOwnHealth: return yes_no(high(newest.player_hp, cfg));
    case BenchSubtask::kOwnAbnormal: return yes_no(newest.player_status != PlayerStatus::kNormal);
    case BenchSubtask::kActionIntention: return yes_no(newest.enemy_telegraph.has_value());
    case BenchSubtask::kCurrentState: return yes_no(newest.enemy_stunned_ms > 0);
    default: break;
  }
  switch (scripted_decision(newest, cfg.rules).rule) {
    case ScriptedRule::kRestore: return "A";
    case ScriptedRule::kEvade: return "B";
    default: return "C";
  }
}

std::vector<BenchItem> generate_synthetic(const FramePool& pool, const BenchGenConfig& cfg) {
  if (cfg.window < 2 || cfg.window > 4) {
    throw Error(ErrorKind::kInvalidArgument, "multi-image window must hold 2 to 4 frames");
  }
  // Candidate windows never straddle two transcripts.
  std::vector<std::size_t> ends;  // newest frame index of each full window
  std::vector<std::size_t> singles;
  for (std::size_t t = 0; t < pool.transcript_start.size(); ++t) {
    const std::size_t begin = pool.transcript_start[t];
    const std::size_t end = t + 1 < pool.transcript_start.size() ? pool.transcript_start[t + 1] : pool.frames.size();
    for (std::size_t i = begin; i < end; ++i) {
      singles.push_back(i);
      if (i + 1 >= begin + cfg.window) ends.push_back(i);
    }
  }

  std::mt19937_64 rng(cfg.seed);
  auto shuffle = [&rng](std::vector<std::size_t>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng() % i]);
  };

  std::vector<BenchItem> items;
  for (std::size_t s = 0; s < kNumBenchSubtasks; ++s) {
    const auto sub = static_cast<BenchSubtask>(s);
    const auto cat = category_of(sub);
    const bool single = cat == BenchCategory::kGathering;
    const std::size_t want = cfg.targets[s];
    if (want == 0) continue;

    auto make = [&](std::size_t newest) {
      BenchItem it;
      it.category = cat;
      it.subtask = sub;
      const std::size_t n = single ? 1 : cfg.window;
      for (std::size_t k = 0; k < n; ++k) it.frame_refs.push_back(static_cast<std::int64_t>(newest + 1 + k - n));
      it.question = prompt_for(sub);
      it.choices = it.binary() ? kBinaryChoices : kLetterChoices;
      it.gold = derive_gold(it, pool, cfg);
      return it;
    };

    std::vector<std::size_t> cand = single ? singles : ends;
    shuffle(cand);
    std::vector<BenchItem> chosen;
    if (cat == BenchCategory::kReasoning) {
      const std::string letter = kLetterChoices[s - idx(BenchSubtask::kOptionA)];
      for (std::size_t c : cand) {
        if (chosen.size() == want) break;
        auto it = make(c);
        if (it.gold == letter) chosen.push_back(std::move(it));
      }
    } else {
      // Alternate Yes and No while both are available.
      std::vector<BenchItem> yes, no;
      for (std::size_t c : cand) {
        auto it = make(c);
        (it.gold == "Yes" ? yes : no).push_back(std::move(it));
        if (yes.size() >= want && no.size() >= want) break;
      }
      std::size_t y = 0, n = 0;
      while (chosen.size() < want && (y < yes.size() || n < no.size())) {
        const bool take_yes = (chosen.size() % 2 == 0 && y < yes.size()) || n >= no.size();
        chosen.push_back(std::move(take_yes ? yes[y++] : no[n++]));
      }
    }
    if (chosen.size() < want) {
      throw Error(ErrorKind::kGenerationShortfall,
                  std::string(bench_subtask_name(sub)) + ": wanted " + std::to_string(want) + ", found " +
                      std::to_string(chosen.size()));
    }
    for (std::size_t k = 0; k < chosen.size(); ++k) {
      char id[64];
      std::snprintf(id, sizeof id, "%s-%04zu", std::string(bench_subtask_name(sub)).c_str(), k + 1);
      chosen[k].id = id;
      items.push_back(std::move(chosen[k]));
    }
  }
  for (const auto& it : items) {
    if (derive_gold(it, pool, cfg) != it.gold) {
      throw Error(ErrorKind::kValidationError, it.id + ": gold answer does not re-derive");
    }
  }
  return items;
}

FramePool bench_transcripts(std::uint64_t seed, int episodes_per_task) {
  FramePool pool;
  const auto tasks = builtin_tasks();
  const auto scripted = scripted_policy_factory();
  const auto random = random_policy_factory();
  for (const auto& task : tasks) {
    for (int r = 0; r < episodes_per_task; ++r) {
      const auto s = episode_seed(seed, task.task_id, r);
      for (const auto* factory : {&scripted, &random}) {
        auto policy = (*factory)(task, s);
        pool.add_transcript(run_episode(task, *policy, s).frames);
      }
    }
  }
  return pool;
}

}  // namespace combat
