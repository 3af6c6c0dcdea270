#include "combat/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "text_util.hpp"

namespace combat {

std::vector<std::string> tokenize(const std::string& text) { return detail::split_ws(text); }

std::optional<std::string> VectorTokenStream::next() {
  if (pos_ >= tokens_.size()) return std::nullopt;
  return tokens_[pos_++];
}

PacedTokenStream::PacedTokenStream(std::unique_ptr<TokenStream> inner, double tokens_per_second)
    : inner_(std::move(inner)) {
  if (!(tokens_per_second > 0.0) || !std::isfinite(tokens_per_second)) {
    throw Error(ErrorKind::kInvalidArgument, "tokens_per_second must be > 0");
  }
  period_ = std::chrono::nanoseconds(static_cast<std::int64_t>(std::llround(1e9 / tokens_per_second)));
}

std::optional<std::string> PacedTokenStream::next() {
  if (!start_) start_ = std::chrono::steady_clock::now();
  auto tok = inner_->next();
  if (!tok) return std::nullopt;
  ++delivered_;
  std::this_thread::sleep_until(*start_ + delivered_ * period_);
  return tok;
}

void TokenChannel::push(std::string token) {
  {
    std::lock_guard lock(mu_);
    queue_.push_back(std::move(token));
  }
  cv_.notify_one();
}

void TokenChannel::close() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

std::optional<std::string> TokenChannel::next() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [this] { return !queue_.empty() || closed_; });
  if (queue_.empty()) return std::nullopt;
  std::string tok = std::move(queue_.front());
  queue_.pop_front();
  return tok;
}

std::string_view decode_mode_name(DecodeMode m) {
  return m == DecodeMode::kTruncated ? "truncated" : "full";
}

std::optional<DecodeMode> decode_mode_from_name(std::string_view name) {
  if (name == "truncated") return DecodeMode::kTruncated;
  if (name == "full") return DecodeMode::kFull;
  return std::nullopt;
}

std::string_view stop_reason_name(StopReason r) {
  switch (r) {
    case StopReason::kTrunc: return "trunc";
    case StopReason::kEos: return "eos";
    case StopReason::kBudget: return "budget";
    case StopReason::kStreamEnd: return "stream_end";
  }
  return "eos";
}

DecodeResult decode(TokenStream& stream, DecodeMode mode, int budget, const Sentinels& s) {
  if (budget < 1) throw Error(ErrorKind::kInvalidArgument, "decode budget must be >= 1");
  const auto start = std::chrono::steady_clock::now();

  DecodeResult r;
  bool seen_trunc = false;
  std::vector<std::string> clause_tokens;  // before TRUNC, sentinels excluded
  std::vector<std::string> text_tokens;    // all non-sentinel emitted tokens
  for (;;) {
    if (r.pulled_count >= static_cast<std::size_t>(budget)) {
      r.stop_reason = StopReason::kBudget;
      break;
    }
    auto tok = stream.next();
    if (!tok) {
      r.stop_reason = StopReason::kStreamEnd;
      break;
    }
    ++r.pulled_count;
    if (*tok == s.trunc) {
      if (mode == DecodeMode::kTruncated) {
        seen_trunc = true;
        r.stop_reason = StopReason::kTrunc;
        break;
      }
      seen_trunc = true;
      r.emitted_tokens.push_back(std::move(*tok));
      continue;
    }
    if (*tok == s.eos) {
      r.emitted_tokens.push_back(std::move(*tok));
      r.stop_reason = StopReason::kEos;
      break;
    }
    if (!seen_trunc) clause_tokens.push_back(*tok);
    text_tokens.push_back(*tok);
    r.emitted_tokens.push_back(std::move(*tok));
  }
  r.emitted_count = r.emitted_tokens.size();

  std::string clause;
  if (seen_trunc) {
    clause = detail::join(clause_tokens.begin(), clause_tokens.end(), " ");
  } else {
    const std::string text = detail::join(text_tokens.begin(), text_tokens.end(), " ");
    const auto open = text.find('[');
    const auto close = open == std::string::npos ? open : text.find(']', open);
    if (close == std::string::npos) {
      throw ActionParseError(text, r.stop_reason, "no complete bracketed action clause");
    }
    clause = text.substr(open, close - open + 1);
  }
  try {
    r.actions = parse_action_text(clause);
  } catch (const Error& e) {
    throw ActionParseError(clause, r.stop_reason, e.what());
  }
  r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return r;
}

std::unique_ptr<TokenStream> Policy::observe(std::span<const ObservationFrame> frames) {
  ++calls_;
  std::unique_ptr<TokenStream> stream = std::make_unique<VectorTokenStream>(respond(frames));
  if (tokens_per_second_ > 0.0) {
    stream = std::make_unique<PacedTokenStream>(std::move(stream), tokens_per_second_);
  }
  return stream;
}

namespace {

std::vector<std::string> stage3_tokens(const std::vector<ActionEvent>& actions, bool block_mode,
                                       const Sentinels& s) {
  const std::string expl = render_explanation(actions, ExplanationContext{block_mode});
  return tokenize(serialize_response(3, actions, expl, s));
}

}  // namespace

ScriptedDecision scripted_decision(const ObservationFrame& f, const ScriptedRules& rules) {
  using C = ActionCategory;
  const double dist = distance(f.player_pos, f.enemy_pos);
  if (f.enemy_telegraph) return {ScriptedRule::kEvade, {ActionEvent::tap(C::kDodge)}};
  if (f.player_hp < rules.low_hp && f.heal_charges > 0) {
    return {ScriptedRule::kRestore,
            {ActionEvent::hold(C::kMoveBack, rules.retreat_ms), ActionEvent::tap(C::kHeal)}};
  }
  if (dist > rules.attack_range_m) {
    // Close to half a metre inside the attack range.
    const double gap = dist - (rules.attack_range_m - 0.5);
    const bool sprint = dist > rules.sprint_distance_m;
    const double speed = rules.move_speed_mps * (sprint ? rules.sprint_multiplier : 1.0);
    const auto ms = std::clamp<std::int64_t>(std::llround(gap / speed * 1000.0), 100, 3000);
    std::vector<ActionEvent> acts{ActionEvent::hold(C::kMoveForward, ms)};
    if (sprint) acts.push_back(ActionEvent::hold(C::kSprint, ms));
    return {ScriptedRule::kApproach, std::move(acts)};
  }
  if (f.immobilize_ready && f.enemy_stunned_ms == 0) {
    return {ScriptedRule::kImmobilize,
            {ActionEvent::tap(C::kImmobilize), ActionEvent::tap(C::kLightAttack)}};
  }
  if (f.enemy_stunned_ms >= rules.heavy_stun_ms) {
    return {ScriptedRule::kHeavy, {ActionEvent::hold(C::kHeavyAttack, 1000)}};
  }
  return {ScriptedRule::kAttack, {ActionEvent::tap(C::kLightAttack)}};
}

std::vector<std::string> ScriptedPolicy::respond(std::span<const ObservationFrame> frames) {
  if (frames.empty()) throw Error(ErrorKind::kObservationSchemaError, "no observation frames");
  for (const auto& f : frames) validate_observation(f);
  auto d = scripted_decision(frames.back(), rules_);
  return stage3_tokens(d.actions, rules_.block_mode, sentinels_);
}

std::vector<std::string> RandomPolicy::respond(std::span<const ObservationFrame>) {
  const int count = 1 + static_cast<int>(rng_() % 2);
  std::vector<ActionEvent> acts;
  while (static_cast<int>(acts.size()) < count) {
    const auto c = static_cast<ActionCategory>(rng_() % kNumCategories);
    const bool dup = std::any_of(acts.begin(), acts.end(),
                                 [c](const ActionEvent& e) { return e.category == c; });
    if (dup) continue;
    if (is_hold_capable(c) && rng_() % 2 == 0) {
      acts.push_back(ActionEvent::hold(c, 250 * static_cast<std::int64_t>(1 + rng_() % 6)));
    } else {
      acts.push_back(ActionEvent::tap(c));
    }
  }
  return stage3_tokens(acts, block_mode_, sentinels_);
}

ReplayPolicy::ReplayPolicy(std::vector<AoTRecord> records, bool wrap)
    : records_(std::move(records)), wrap_(wrap) {
  if (records_.empty()) throw Error(ErrorKind::kEmptyDataset, "replay policy needs at least one record");
}

std::vector<std::string> ReplayPolicy::respond(std::span<const ObservationFrame>) {
  if (next_ >= records_.size()) {
    if (!wrap_) {
      throw Error(ErrorKind::kReplayExhausted,
                  "replay dataset exhausted after " + std::to_string(records_.size()) + " records");
    }
    next_ = 0;
  }
  return tokenize(records_[next_++].serialized);
}

TokenSavings token_savings_report(std::span<const AoTRecord> records, const Sentinels& s) {
  if (records.empty()) throw Error(ErrorKind::kEmptyDataset, "token savings over an empty dataset");
  double full = 0.0, truncated = 0.0;
  for (const auto& r : records) {
    bool before = true;
    for (const auto& tok : tokenize(r.serialized)) {
      if (tok == s.trunc) {
        before = false;
        continue;
      }
      if (tok == s.eos || tok == s.image) continue;
      full += 1.0;
      if (before) truncated += 1.0;
    }
  }
  const double n = static_cast<double>(records.size());
  TokenSavings out{full / n, truncated / n, 0.0};
  out.ratio = full > 0.0 ? truncated / full : 1.0;
  return out;
}

}  // namespace combat
