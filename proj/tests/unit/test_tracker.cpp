#include <doctest.h>

#include <filesystem>
#include <set>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "combat/error.hpp"
#include "combat/tracker.hpp"

using namespace combat;
namespace fs = std::filesystem;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected combat::Error");
  return ErrorKind::kInvalidArgument;
}

std::vector<FrameRecord> frames_at(std::vector<std::int64_t> ts) {
  std::vector<FrameRecord> out;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    out.push_back(FrameRecord{static_cast<std::int64_t>(i + 1), ts[i], ""});
  }
  return out;
}

TimedAction tap_at(std::int64_t t) { return TimedAction{ActionEvent::tap(ActionCategory::kDodge), t}; }

// Linear scan over every frame: the first one not earlier than the action.
std::optional<std::int64_t> brute_align(std::int64_t t, const std::vector<FrameRecord>& frames) {
  for (const auto& f : frames) {
    if (f.t_ms >= t) return f.index;
  }
  return std::nullopt;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("combat_tracker_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("coalesce_events examples") {
  SUBCASE("heavy attack hold") {
    auto r = coalesce_events({make_raw_event("right mouse button", Edge::kDown, 1000),
                              make_raw_event("right mouse button", Edge::kUp, 2234)});
    REQUIRE(r.actions.size() == 1);
    CHECK(r.actions[0].action == ActionEvent::hold(ActionCategory::kHeavyAttack, 1234));
    CHECK(r.actions[0].t_ms == 1000);
  }
  SUBCASE("dodge tap") {
    auto r = coalesce_events({make_raw_event("space", Edge::kDown, 500),
                              make_raw_event("space", Edge::kUp, 550)});
    REQUIRE(r.actions.size() == 1);
    CHECK(r.actions[0].action == ActionEvent::tap(ActionCategory::kDodge));
    CHECK(r.actions[0].t_ms == 500);
    CHECK(r.long_presses == 0);
  }
  SUBCASE("overlapping holds keep separate durations") {
    auto r = coalesce_events({make_raw_event("w", Edge::kDown, 0),
                              make_raw_event("shift", Edge::kDown, 100),
                              make_raw_event("w", Edge::kUp, 3000),
                              make_raw_event("shift", Edge::kUp, 3000)});
    REQUIRE(r.actions.size() == 2);
    CHECK(r.actions[0] == TimedAction{ActionEvent::hold(ActionCategory::kMoveForward, 3000), 0});
    CHECK(r.actions[1] == TimedAction{ActionEvent::hold(ActionCategory::kSprint, 2900), 100});
  }
  SUBCASE("long press on a tap-only key stays a tap") {
    auto r = coalesce_events({make_raw_event("r", Edge::kDown, 0), make_raw_event("r", Edge::kUp, 900)});
    CHECK(r.actions[0].action == ActionEvent::tap(ActionCategory::kHeal));
    CHECK(r.long_presses == 1);
  }
}

TEST_CASE("coalesce_events errors") {
  CHECK(kind_of([] { coalesce_events({make_raw_event("w", Edge::kDown, 0)}); }) ==
        ErrorKind::kDanglingPress);
  CHECK(kind_of([] { coalesce_events({make_raw_event("w", Edge::kUp, 0)}); }) ==
        ErrorKind::kOrphanRelease);
  CHECK(kind_of([] {
          coalesce_events({make_raw_event("q", Edge::kDown, 0), make_raw_event("q", Edge::kUp, 5)});
        }) == ErrorKind::kUnknownAction);
  CHECK(kind_of([] {
          coalesce_events({make_raw_event("w", Edge::kDown, 10), make_raw_event("w", Edge::kUp, 5)});
        }) == ErrorKind::kOrderingViolation);
}

TEST_CASE("coalesce_events matches a per-binding stack oracle and preserves counts") {
  std::mt19937_64 rng(3);
  const std::vector<std::string> keys = {"w", "a", "s", "d", "shift", "right mouse button", "space"};
  for (int iter = 0; iter < 300; ++iter) {
    // Random well-formed stream: nested presses per binding.
    std::vector<RawInputEvent> raw;
    std::map<std::string, std::vector<std::int64_t>> open;
    std::vector<std::tuple<std::string, std::int64_t, std::int64_t>> expected;  // binding, down, up
    std::int64_t t = 0;
    const int steps = 2 + static_cast<int>(rng() % 60);
    for (int s = 0; s < steps; ++s) {
      t += static_cast<std::int64_t>(rng() % 40);
      const std::string& k = keys[rng() % keys.size()];
      if (!open[k].empty() && rng() % 2 == 0) {
        expected.emplace_back(k, open[k].back(), t);
        open[k].pop_back();
        raw.push_back(make_raw_event(k, Edge::kUp, t));
      } else {
        open[k].push_back(t);
        raw.push_back(make_raw_event(k, Edge::kDown, t));
      }
    }
    for (auto& [k, st] : open) {
      while (!st.empty()) {
        t += 1 + static_cast<std::int64_t>(rng() % 10);
        expected.emplace_back(k, st.back(), t);
        st.pop_back();
        raw.push_back(make_raw_event(k, Edge::kUp, t));
      }
    }
    auto r = coalesce_events(raw);
    CHECK(r.actions.size() == expected.size());
    std::size_t downs = 0;
    for (const auto& e : raw) downs += e.edge == Edge::kDown;
    CHECK(r.actions.size() == downs);

    // Every (binding, down, duration) triple of the oracle shows up.
    std::multiset<std::tuple<int, std::int64_t, std::int64_t>> want, got;
    for (auto& [k, d, u] : expected) {
      auto c = *category_from_binding(k);
      const std::int64_t held = is_hold_capable(c) && u > d ? u - d : -1;
      want.emplace(priority_rank(c), d, held);
    }
    for (const auto& a : r.actions) {
      got.emplace(priority_rank(a.action.category), a.t_ms, a.action.duration_ms.value_or(-1));
    }
    CHECK(want == got);
    for (std::size_t i = 1; i < r.actions.size(); ++i) CHECK(r.actions[i - 1].t_ms <= r.actions[i].t_ms);
  }
}

TEST_CASE("align_actions_to_frames examples") {
  auto frames = frames_at({0, 100, 200, 300});
  auto r = align_actions_to_frames({tap_at(150), tap_at(200)}, frames);
  REQUIRE(r.samples.size() == 2);
  CHECK(r.samples[0].frame_index == 3);
  CHECK(r.samples[1].frame_index == 3);

  auto short_frames = frames_at({0, 100});
  auto d = align_actions_to_frames({tap_at(350)}, short_frames);
  CHECK(d.samples.empty());
  REQUIRE(d.dropped.size() == 1);
  CHECK(d.dropped[0].t_ms == 350);

  // Ties resolve to the lowest index.
  auto tied = frames_at({0, 100, 100, 100, 200});
  CHECK(align_actions_to_frames({tap_at(50)}, tied).samples[0].frame_index == 2);

  CHECK(kind_of([] { align_actions_to_frames({tap_at(0)}, {}); }) == ErrorKind::kNoFrames);
}

TEST_CASE("alignment equals brute-force scan and is monotone") {
  std::mt19937_64 rng(17);
  for (int iter = 0; iter < 200; ++iter) {
    std::vector<std::int64_t> ft(1 + rng() % 50);
    for (auto& t : ft) t = static_cast<std::int64_t>(rng() % 2000);
    std::sort(ft.begin(), ft.end());
    auto frames = frames_at(ft);
    std::vector<TimedAction> actions(rng() % 50);
    for (auto& a : actions) a = tap_at(static_cast<std::int64_t>(rng() % 2200));
    std::sort(actions.begin(), actions.end(),
              [](const TimedAction& x, const TimedAction& y) { return x.t_ms < y.t_ms; });

    auto r = align_actions_to_frames(actions, frames);
    std::size_t si = 0, di = 0;
    for (const auto& a : actions) {
      auto want = brute_align(a.t_ms, frames);
      if (want) {
        REQUIRE(si < r.samples.size());
        CHECK(r.samples[si].frame_index == *want);
        CHECK(r.samples[si].action_t_ms == a.t_ms);
        ++si;
      } else {
        REQUIRE(di < r.dropped.size());
        CHECK(r.dropped[di].t_ms == a.t_ms);
        ++di;
      }
    }
    CHECK(si == r.samples.size());
    CHECK(di == r.dropped.size());
    for (std::size_t i = 1; i < r.samples.size(); ++i) {
      CHECK(r.samples[i - 1].frame_index <= r.samples[i].frame_index);
    }
  }
}

TEST_CASE("gate_session") {
  TrackSession s;
  s.active_intervals = {{0, 1000}};
  s.raw_events = {make_raw_event("space", Edge::kDown, 1000), make_raw_event("space", Edge::kUp, 1500)};
  auto g = gate_session(s);
  REQUIRE(g.raw_events.size() == 1);
  CHECK(g.raw_events[0].t_ms == 1000);

  TrackSession f;
  f.active_intervals = {{0, 500}, {800, 900}};
  f.frames = frames_at({100, 600, 850});
  auto gf = gate_session(f);
  REQUIRE(gf.frames.size() == 2);
  CHECK(gf.frames[0].t_ms == 100);
  CHECK(gf.frames[1].t_ms == 850);

  TrackSession none;
  none.frames = frames_at({1, 2, 3});
  CHECK(gate_session(none).frames.empty());
}

TEST_CASE("gate_session is idempotent and matches interval membership") {
  std::mt19937_64 rng(5);
  for (int iter = 0; iter < 200; ++iter) {
    TrackSession s;
    std::int64_t t = 0;
    for (int i = 0; i < 4; ++i) {
      t += 1 + static_cast<std::int64_t>(rng() % 300);
      const std::int64_t start = t;
      t += static_cast<std::int64_t>(rng() % 300);
      s.active_intervals.push_back({start, t});
    }
    std::vector<std::int64_t> ft(rng() % 40);
    for (auto& x : ft) x = static_cast<std::int64_t>(rng() % 1500);
    std::sort(ft.begin(), ft.end());
    s.frames = frames_at(ft);
    auto once = gate_session(s);
    CHECK(gate_session(once) == once);
    std::size_t expect = 0;
    for (auto x : ft) {
      for (const auto& iv : s.active_intervals) {
        if (x >= iv.start_ms && x <= iv.end_ms) {
          ++expect;
          break;
        }
      }
    }
    CHECK(once.frames.size() == expect);
  }
}

TEST_CASE("iso8601 timestamps") {
  CHECK(iso8601_ms(0) == "1970-01-01T00:00:00.000Z");
  CHECK(iso8601_ms(1234) == "1970-01-01T00:00:01.234Z");
  CHECK(iso8601_ms(1735689600123) == "2025-01-01T00:00:00.123Z");
}

TEST_CASE("session export/import round trip") {
  SUBCASE("empty session") {
    auto dir = temp_dir("empty");
    TrackSession s;
    export_session(s, dir);
    CHECK(import_session(dir) == s);
  }
  SUBCASE("golden three-frame session is byte-stable") {
    TrackSession s;
    s.meta = {{"epoch_unix_ms", "1735689600000"}, {"source", "fixture"}};
    s.frames = {{1, 0, "frames/000001.png"}, {2, 125, "frames/000002.png"}, {3, 250, "frames/000003.png"}};
    s.raw_events = {make_raw_event("space", Edge::kDown, 40), make_raw_event("space", Edge::kUp, 90)};
    s.active_intervals = {{0, 250}};
    auto dir = temp_dir("golden");
    export_session(s, dir);
    auto golden = fs::path(COMBAT_FIXTURE_DIR) / "session_golden";
    for (const char* name : {"session.meta", "frames.jsonl", "events.jsonl", "intervals.jsonl"}) {
      CHECK_MESSAGE(slurp(dir / name) == slurp(golden / name), name);
    }
    auto back = import_session(dir);
    CHECK(back == s);
    auto dir2 = temp_dir("golden2");
    export_session(back, dir2);
    for (const char* name : {"session.meta", "frames.jsonl", "events.jsonl", "intervals.jsonl"}) {
      CHECK(slurp(dir2 / name) == slurp(dir / name));
    }
  }
  SUBCASE("decreasing timestamps are rejected") {
    auto dir = temp_dir("bad_order");
    export_session(TrackSession{}, dir);
    std::ofstream(dir / "frames.jsonl")
        << R"({"index":1,"t_ms":100,"iso":"x","payload":""})" "\n"
        << R"({"index":2,"t_ms":50,"iso":"x","payload":""})" "\n";
    CHECK(kind_of([&] { import_session(dir); }) == ErrorKind::kOrderingViolation);
  }
  SUBCASE("malformed lines report a parse error") {
    auto dir = temp_dir("bad_json");
    export_session(TrackSession{}, dir);
    std::ofstream(dir / "events.jsonl") << R"({"t_ms":1,"device":"keyboard","binding":"w","edge":"down"})"
                                        << "\n{oops\n";
    try {
      import_session(dir);
      FAIL("expected ParseError");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kParseError);
      CHECK(std::string(e.what()).find("events.jsonl:2") != std::string::npos);
    }
  }
}

TEST_CASE("SessionRecorder accepts two concurrent producers") {
  SessionRecorder rec(std::map<std::string, std::string>{{"source", "test"}});
  rec.open_interval(0);
  std::thread frames([&] {
    for (int i = 0; i < 2000; ++i) rec.append_frame(i * 5, "");
  });
  std::thread events([&] {
    for (int i = 0; i < 1000; ++i) {
      rec.append_event(make_raw_event("w", Edge::kDown, i * 10));
      rec.append_event(make_raw_event("w", Edge::kUp, i * 10 + 5));
    }
  });
  frames.join();
  events.join();
  rec.close_interval(10000);
  auto s = rec.snapshot();
  CHECK(s.frames.size() == 2000);
  CHECK(s.raw_events.size() == 2000);
  CHECK_NOTHROW(validate_session(s));
  CHECK(coalesce_events(s.raw_events).actions.size() == 1000);
  CHECK(kind_of([&] { rec.append_frame(0, ""); }) == ErrorKind::kOrderingViolation);
}
