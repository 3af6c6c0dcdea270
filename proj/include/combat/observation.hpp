#pragma once

// Structured observation frame: the decision-relevant features of one
// captured frame of the simulated encounter.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace combat {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Vec2&) const = default;
};

double distance(const Vec2& a, const Vec2& b);

struct Windup {
  std::string kind;  // attack name from the enemy program
  std::int64_t remaining_ms = 0;

  bool operator==(const Windup&) const = default;
};

enum class PlayerStatus : std::uint8_t { kNormal, kBurning, kStunned };

struct ObservationFrame {
  std::int64_t t_ms = 0;
  double player_hp = 1.0;  // [0, 1]
  double enemy_hp = 1.0;   // [0, 1]
  Vec2 player_pos;
  Vec2 enemy_pos;
  std::optional<Windup> enemy_telegraph;
  PlayerStatus player_status = PlayerStatus::kNormal;
  int heal_charges = 0;
  bool immobilize_ready = false;
  std::int64_t enemy_stunned_ms = 0;

  bool operator==(const ObservationFrame&) const = default;
};

std::string_view player_status_name(PlayerStatus s);

// Compact JSON object; doubles are written with round-trip precision.
std::string observation_to_json(const ObservationFrame& f);
// Throws kObservationSchemaError on a missing or mistyped field.
ObservationFrame observation_from_json(const std::string& text);

// Throws kObservationSchemaError when a feature is out of range.
void validate_observation(const ObservationFrame& f);

}  // namespace combat
