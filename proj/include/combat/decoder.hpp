#pragma once

// Pull-based token streams, truncated/full decoding, and the policy seam the
// arena talks to. Tokens are whitespace-delimited strings.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "combat/action.hpp"
#include "combat/aot.hpp"
#include "combat/error.hpp"
#include "combat/observation.hpp"

namespace combat {

std::vector<std::string> tokenize(const std::string& text);

class TokenStream {
 public:
  virtual ~TokenStream() = default;
  // nullopt once the stream is finished.
  virtual std::optional<std::string> next() = 0;
};

class VectorTokenStream final : public TokenStream {
 public:
  explicit VectorTokenStream(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {}
  std::optional<std::string> next() override;
  std::size_t pulled() const { return pos_; }

 private:
  std::vector<std::string> tokens_;
  std::size_t pos_ = 0;
};

// Delivers token i no earlier than start + (i + 1) / tokens_per_second, where
// start is the first pull. Sleeps against absolute deadlines so per-token
// scheduling jitter does not accumulate.
class PacedTokenStream final : public TokenStream {
 public:
  PacedTokenStream(std::unique_ptr<TokenStream> inner, double tokens_per_second);
  std::optional<std::string> next() override;

 private:
  std::unique_ptr<TokenStream> inner_;
  std::chrono::nanoseconds period_;
  std::optional<std::chrono::steady_clock::time_point> start_;
  std::int64_t delivered_ = 0;
};

// Blocking single-producer/single-consumer channel. The producer calls push()
// and finally close(); next() blocks until a token or close arrives.
class TokenChannel final : public TokenStream {
 public:
  void push(std::string token);
  void close();
  std::optional<std::string> next() override;

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::string> queue_;
  bool closed_ = false;
};

enum class DecodeMode : std::uint8_t { kTruncated, kFull };
// kStreamEnd: the stream finished before any stop sentinel or the budget.
enum class StopReason : std::uint8_t { kTrunc, kEos, kBudget, kStreamEnd };

std::string_view decode_mode_name(DecodeMode m);
std::optional<DecodeMode> decode_mode_from_name(std::string_view name);
std::string_view stop_reason_name(StopReason r);

inline constexpr int kDefaultDecodeBudget = 256;

struct DecodeResult {
  std::vector<std::string> emitted_tokens;
  ActionSet actions;
  StopReason stop_reason = StopReason::kEos;
  std::size_t emitted_count = 0;
  std::size_t pulled_count = 0;  // includes a consumed TRUNC sentinel
  double wall_ms = 0.0;
};

class ActionParseError : public Error {
 public:
  ActionParseError(std::string raw_text, StopReason stop, const std::string& detail)
      : Error(ErrorKind::kActionParseError,
              "cannot parse action clause '" + raw_text + "': " + detail),
        raw_text_(std::move(raw_text)),
        stop_(stop) {}
  const std::string& raw_text() const { return raw_text_; }
  StopReason stop_reason() const { return stop_; }

 private:
  std::string raw_text_;
  StopReason stop_;
};

// Truncated mode stops at the first TRUNC (not emitted), or EOS, or budget.
// Full mode stops at EOS (emitted) or budget. The action clause is the text
// before TRUNC when one was seen, otherwise the first bracketed group.
DecodeResult decode(TokenStream& stream, DecodeMode mode, int budget = kDefaultDecodeBudget,
                    const Sentinels& s = {});

class Policy {
 public:
  virtual ~Policy() = default;

  std::unique_ptr<TokenStream> observe(std::span<const ObservationFrame> frames);
  std::int64_t call_count() const { return calls_; }

  // 0 disables pacing.
  void set_pacing(double tokens_per_second) { tokens_per_second_ = tokens_per_second; }
  double pacing() const { return tokens_per_second_; }

 protected:
  virtual std::vector<std::string> respond(std::span<const ObservationFrame> frames) = 0;

 private:
  std::int64_t calls_ = 0;
  double tokens_per_second_ = 0.0;
};

struct ScriptedRules {
  double low_hp = 0.3;
  double attack_range_m = 2.5;
  double move_speed_mps = 3.0;
  double sprint_distance_m = 6.0;
  double sprint_multiplier = 1.8;
  std::int64_t retreat_ms = 500;
  std::int64_t heavy_stun_ms = 1600;  // heavy swing when the stun outlasts this
  bool block_mode = false;
};

enum class ScriptedRule : std::uint8_t { kRestore, kEvade, kImmobilize, kApproach, kHeavy, kAttack };

struct ScriptedDecision {
  ScriptedRule rule = ScriptedRule::kAttack;
  std::vector<ActionEvent> actions;
};

// The rule table, evaluated on the newest frame. Shared with the benchmark
// generator so reasoning gold answers agree with the policy.
ScriptedDecision scripted_decision(const ObservationFrame& newest, const ScriptedRules& rules = {});

class ScriptedPolicy final : public Policy {
 public:
  explicit ScriptedPolicy(ScriptedRules rules = {}, Sentinels s = {})
      : rules_(rules), sentinels_(std::move(s)) {}
  const ScriptedRules& rules() const { return rules_; }

 protected:
  std::vector<std::string> respond(std::span<const ObservationFrame> frames) override;

 private:
  ScriptedRules rules_;
  Sentinels sentinels_;
};

// Uniformly random non-empty action sets of 1..2 categories.
class RandomPolicy final : public Policy {
 public:
  explicit RandomPolicy(std::uint64_t seed, bool block_mode = false, Sentinels s = {})
      : rng_(seed), block_mode_(block_mode), sentinels_(std::move(s)) {}

 protected:
  std::vector<std::string> respond(std::span<const ObservationFrame> frames) override;

 private:
  std::mt19937_64 rng_;
  bool block_mode_;
  Sentinels sentinels_;
};

// Emits each record's serialized tokens in order; ignores observations.
class ReplayPolicy final : public Policy {
 public:
  ReplayPolicy(std::vector<AoTRecord> records, bool wrap);

 protected:
  std::vector<std::string> respond(std::span<const ObservationFrame> frames) override;

 private:
  std::vector<AoTRecord> records_;
  bool wrap_;
  std::size_t next_ = 0;
};

struct TokenSavings {
  double mean_full = 0.0;
  double mean_truncated = 0.0;
  double ratio = 0.0;
};

// Whitespace tokens, sentinels excluded: everything vs. the text before TRUNC.
TokenSavings token_savings_report(std::span<const AoTRecord> records, const Sentinels& s = {});

// Reference counts from the published AoT token-length table.
inline constexpr double kReferenceFullTokens = 116.57;
inline constexpr double kReferenceTruncatedTokens = 43.10;

}  // namespace combat
