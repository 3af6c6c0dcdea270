#include "combat/observation.hpp"

#include <cmath>
#include <json.hpp>

#include "combat/error.hpp"

namespace combat {

double distance(const Vec2& a, const Vec2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

std::string_view player_status_name(PlayerStatus s) {
  switch (s) {
    case PlayerStatus::kNormal: return "normal";
    case PlayerStatus::kBurning: return "burning";
    case PlayerStatus::kStunned: return "stunned";
  }
  return "normal";
}

std::string observation_to_json(const ObservationFrame& f) {
  nlohmann::ordered_json j;
  j["t_ms"] = f.t_ms;
  j["player_hp"] = f.player_hp;
  j["enemy_hp"] = f.enemy_hp;
  j["player_pos"] = {f.player_pos.x, f.player_pos.y};
  j["enemy_pos"] = {f.enemy_pos.x, f.enemy_pos.y};
  if (f.enemy_telegraph) {
    j["enemy_telegraph"] = {{"kind", f.enemy_telegraph->kind},
                            {"remaining_ms", f.enemy_telegraph->remaining_ms}};
  } else {
    j["enemy_telegraph"] = nullptr;
  }
  j["player_status"] = player_status_name(f.player_status);
  j["heal_charges"] = f.heal_charges;
  j["immobilize_ready"] = f.immobilize_ready;
  j["enemy_stunned_ms"] = f.enemy_stunned_ms;
  return j.dump();
}

ObservationFrame observation_from_json(const std::string& text) {
  ObservationFrame f;
  try {
    const auto j = nlohmann::json::parse(text);
    f.t_ms = j.at("t_ms").get<std::int64_t>();
    f.player_hp = j.at("player_hp").get<double>();
    f.enemy_hp = j.at("enemy_hp").get<double>();
    const auto& pp = j.at("player_pos");
    const auto& ep = j.at("enemy_pos");
    f.player_pos = {pp.at(0).get<double>(), pp.at(1).get<double>()};
    f.enemy_pos = {ep.at(0).get<double>(), ep.at(1).get<double>()};
    const auto& tel = j.at("enemy_telegraph");
    if (!tel.is_null()) {
      f.enemy_telegraph = Windup{tel.at("kind").get<std::string>(),
                                 tel.at("remaining_ms").get<std::int64_t>()};
    }
    const auto status = j.at("player_status").get<std::string>();
    if (status == "normal") f.player_status = PlayerStatus::kNormal;
    else if (status == "burning") f.player_status = PlayerStatus::kBurning;
    else if (status == "stunned") f.player_status = PlayerStatus::kStunned;
    else throw Error(ErrorKind::kObservationSchemaError, "unknown player_status '" + status + "'");
    f.heal_charges = j.at("heal_charges").get<int>();
    f.immobilize_ready = j.at("immobilize_ready").get<bool>();
    f.enemy_stunned_ms = j.at("enemy_stunned_ms").get<std::int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kObservationSchemaError, e.what());
  }
  validate_observation(f);
  return f;
}

void validate_observation(const ObservationFrame& f) {
  auto bad = [](const std::string& what) {
    return Error(ErrorKind::kObservationSchemaError, "observation field out of range: " + what);
  };
  if (!(f.player_hp >= 0.0 && f.player_hp <= 1.0)) throw bad("player_hp");
  if (!(f.enemy_hp >= 0.0 && f.enemy_hp <= 1.0)) throw bad("enemy_hp");
  if (!std::isfinite(f.player_pos.x) || !std::isfinite(f.player_pos.y)) throw bad("player_pos");
  if (!std::isfinite(f.enemy_pos.x) || !std::isfinite(f.enemy_pos.y)) throw bad("enemy_pos");
  if (f.enemy_telegraph && f.enemy_telegraph->remaining_ms < 0) throw bad("telegraph remaining_ms");
  if (f.heal_charges < 0) throw bad("heal_charges");
  if (f.enemy_stunned_ms < 0) throw bad("enemy_stunned_ms");
}

}  // namespace combat
