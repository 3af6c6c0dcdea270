#include "combat/tracker.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <unordered_map>

#include "combat/error.hpp"
#include "text_util.hpp"

namespace combat {

namespace {

using ordered_json = nlohmann::ordered_json;

struct OpenPress {
  std::int64_t t_ms;
  std::size_t seq;
};

std::string_view device_name(Device d) { return d == Device::kMouse ? "mouse" : "keyboard"; }
std::string_view edge_name(Edge e) { return e == Edge::kUp ? "up" : "down"; }

Error parse_error(const std::filesystem::path& file, std::size_t line, const std::string& what) {
  return Error(ErrorKind::kParseError,
               file.filename().string() + ":" + std::to_string(line) + ": " + what);
}

std::vector<std::string> read_lines(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorKind::kIoError, "cannot open " + file.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

template <typename Fn>
void for_each_json_line(const std::filesystem::path& file, Fn&& fn) {
  const auto lines = read_lines(file);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (detail::trim(lines[i]).empty()) continue;
    const std::size_t lineno = i + 1;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(lines[i]);
    } catch (const nlohmann::json::parse_error& e) {
      throw parse_error(file, lineno, "invalid JSON");
    }
    if (!j.is_object()) throw parse_error(file, lineno, "expected a JSON object");
    try {
      fn(j, lineno);
    } catch (const nlohmann::json::exception& e) {
      throw parse_error(file, lineno, e.what());
    }
  }
}

std::int64_t get_int(const nlohmann::json& j, const char* key) {
  return j.at(key).get<std::int64_t>();
}

void write_file(const std::filesystem::path& file, const std::string& content) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIoError, "cannot write " + file.string());
  out << content;
}

}  // namespace

RawInputEvent make_raw_event(std::string b, Edge edge, std::int64_t t_ms) {
  auto c = category_from_binding(b);
  const Device dev = (c && is_mouse(*c)) ? Device::kMouse : Device::kKeyboard;
  return RawInputEvent{dev, std::move(b), edge, t_ms};
}

CoalesceResult coalesce_events(const std::vector<RawInputEvent>& raw,
                               std::int64_t tap_threshold_ms) {
  struct Pending {
    std::int64_t t_ms;
    std::size_t seq;
    ActionEvent action;
  };
  std::unordered_map<std::string, std::vector<OpenPress>> open;
  std::vector<Pending> done;
  CoalesceResult result;

  for (std::size_t i = 0; i < raw.size(); ++i) {
    const RawInputEvent& ev = raw[i];
    if (i > 0 && ev.t_ms < raw[i - 1].t_ms) {
      throw Error(ErrorKind::kOrderingViolation, "input events out of order at position " +
                                                     std::to_string(i));
    }
    auto c = category_from_binding(ev.binding);
    if (!c) throw Error(ErrorKind::kUnknownAction, "unknown binding: '" + ev.binding + "'");
    auto& stack = open[ev.binding];
    if (ev.edge == Edge::kDown) {
      stack.push_back(OpenPress{ev.t_ms, i});
      continue;
    }
    if (stack.empty()) {
      throw Error(ErrorKind::kOrphanRelease, "release without press: " + ev.binding + " at " +
                                                 std::to_string(ev.t_ms));
    }
    const OpenPress press = stack.back();
    stack.pop_back();
    const std::int64_t held = ev.t_ms - press.t_ms;
    ActionEvent action;
    if (!is_hold_capable(*c)) {
      if (held > tap_threshold_ms) ++result.long_presses;
      action = ActionEvent::tap(*c);
    } else if (held > 0) {
      action = ActionEvent::hold(*c, held);
    } else {
      action = ActionEvent::tap(*c);
    }
    done.push_back(Pending{press.t_ms, press.seq, action});
  }
  for (const auto& [b, stack] : open) {
    if (!stack.empty()) {
      throw Error(ErrorKind::kDanglingPress, "press never released: " + b + " at " +
                                                 std::to_string(stack.back().t_ms));
    }
  }
  std::sort(done.begin(), done.end(), [](const Pending& a, const Pending& b) {
    return a.t_ms != b.t_ms ? a.t_ms < b.t_ms : a.seq < b.seq;
  });
  result.actions.reserve(done.size());
  for (const auto& p : done) result.actions.push_back(TimedAction{p.action, p.t_ms});
  return result;
}

AlignmentResult align_actions_to_frames(const std::vector<TimedAction>& actions,
                                        const std::vector<FrameRecord>& frames) {
  if (frames.empty()) throw Error(ErrorKind::kNoFrames, "cannot align against zero frames");
  AlignmentResult out;
  out.samples.reserve(actions.size());
  for (const auto& a : actions) {
    // First frame with t_f >= t_a; equal timestamps resolve to the lowest index.
    auto it = std::lower_bound(frames.begin(), frames.end(), a.t_ms,
                               [](const FrameRecord& f, std::int64_t t) { return f.t_ms < t; });
    if (it == frames.end()) {
      out.dropped.push_back(a);
    } else {
      out.samples.push_back(AlignedSample{a.action, a.t_ms, it->index});
    }
  }
  return out;
}

TrackSession gate_session(const TrackSession& session) {
  auto active = [&](std::int64_t t) {
    return std::any_of(session.active_intervals.begin(), session.active_intervals.end(),
                       [t](const Interval& iv) { return iv.contains(t); });
  };
  TrackSession out;
  out.meta = session.meta;
  out.active_intervals = session.active_intervals;
  std::copy_if(session.frames.begin(), session.frames.end(), std::back_inserter(out.frames),
               [&](const FrameRecord& f) { return active(f.t_ms); });
  std::copy_if(session.raw_events.begin(), session.raw_events.end(),
               std::back_inserter(out.raw_events),
               [&](const RawInputEvent& e) { return active(e.t_ms); });
  return out;
}

void validate_session(const TrackSession& s) {
  for (std::size_t i = 0; i < s.frames.size(); ++i) {
    if (s.frames[i].t_ms < 0) throw Error(ErrorKind::kOrderingViolation, "negative frame time");
    if (i == 0) continue;
    if (s.frames[i].index <= s.frames[i - 1].index) {
      throw Error(ErrorKind::kOrderingViolation,
                  "frame indices not increasing at frame " + std::to_string(s.frames[i].index));
    }
    if (s.frames[i].t_ms < s.frames[i - 1].t_ms) {
      throw Error(ErrorKind::kOrderingViolation,
                  "frame timestamps decreasing at frame " + std::to_string(s.frames[i].index));
    }
  }
  for (std::size_t i = 0; i < s.raw_events.size(); ++i) {
    if (s.raw_events[i].t_ms < 0) throw Error(ErrorKind::kOrderingViolation, "negative event time");
    if (i > 0 && s.raw_events[i].t_ms < s.raw_events[i - 1].t_ms) {
      throw Error(ErrorKind::kOrderingViolation,
                  "event timestamps decreasing at event " + std::to_string(i));
    }
  }
  for (std::size_t i = 0; i < s.active_intervals.size(); ++i) {
    const Interval& iv = s.active_intervals[i];
    if (iv.end_ms < iv.start_ms) throw Error(ErrorKind::kOrderingViolation, "interval ends before it starts");
    if (i > 0 && iv.start_ms <= s.active_intervals[i - 1].end_ms) {
      throw Error(ErrorKind::kOrderingViolation, "intervals overlap or are unsorted");
    }
  }
}

std::string iso8601_ms(std::int64_t unix_ms) {
  using namespace std::chrono;
  const sys_time<milliseconds> tp{milliseconds{unix_ms}};
  const auto day = floor<days>(tp);
  const year_month_day ymd{day};
  const hh_mm_ss hms{tp - day};
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02lld.%03lldZ",
                static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()), static_cast<long>(hms.hours().count()),
                static_cast<long>(hms.minutes().count()),
                static_cast<long long>(hms.seconds().count()),
                static_cast<long long>(hms.subseconds().count()));
  return buf;
}

std::int64_t session_epoch_ms(const TrackSession& session) {
  auto it = session.meta.find("epoch_unix_ms");
  if (it == session.meta.end()) return 0;
  try {
    return std::stoll(it->second);
  } catch (const std::exception&) {
    throw Error(ErrorKind::kParseError, "session.meta: epoch_unix_ms is not an integer");
  }
}

void export_session(const TrackSession& s, const std::filesystem::path& dir) {
  validate_session(s);
  std::filesystem::create_directories(dir);
  const std::int64_t epoch = session_epoch_ms(s);

  std::string meta;
  for (const auto& [k, v] : s.meta) {
    if (k.empty() || k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw Error(ErrorKind::kInvalidArgument, "meta key/value not representable: '" + k + "'");
    }
    meta += k + "=" + v + "\n";
  }
  write_file(dir / "session.meta", meta);

  std::string frames;
  for (const auto& f : s.frames) {
    ordered_json j;
    j["index"] = f.index;
    j["t_ms"] = f.t_ms;
    j["iso"] = iso8601_ms(epoch + f.t_ms);
    j["payload"] = f.payload;
    frames += j.dump() + "\n";
  }
  write_file(dir / "frames.jsonl", frames);

  std::string events;
  for (const auto& e : s.raw_events) {
    ordered_json j;
    j["t_ms"] = e.t_ms;
    j["iso"] = iso8601_ms(epoch + e.t_ms);
    j["device"] = device_name(e.device);
    j["binding"] = e.binding;
    j["edge"] = edge_name(e.edge);
    events += j.dump() + "\n";
  }
  write_file(dir / "events.jsonl", events);

  std::string intervals;
  for (const auto& iv : s.active_intervals) {
    ordered_json j;
    j["start_ms"] = iv.start_ms;
    j["end_ms"] = iv.end_ms;
    j["start_iso"] = iso8601_ms(epoch + iv.start_ms);
    j["end_iso"] = iso8601_ms(epoch + iv.end_ms);
    intervals += j.dump() + "\n";
  }
  write_file(dir / "intervals.jsonl", intervals);
}

TrackSession import_session(const std::filesystem::path& dir) {
  TrackSession s;

  const auto meta_file = dir / "session.meta";
  const auto meta_lines = read_lines(meta_file);
  for (std::size_t i = 0; i < meta_lines.size(); ++i) {
    if (detail::trim(meta_lines[i]).empty()) continue;
    const auto eq = meta_lines[i].find('=');
    if (eq == std::string::npos || eq == 0) throw parse_error(meta_file, i + 1, "expected key=value");
    s.meta[meta_lines[i].substr(0, eq)] = meta_lines[i].substr(eq + 1);
  }

  for_each_json_line(dir / "frames.jsonl", [&](const nlohmann::json& j, std::size_t) {
    s.frames.push_back(FrameRecord{get_int(j, "index"), get_int(j, "t_ms"),
                                   j.at("payload").get<std::string>()});
  });

  const auto events_file = dir / "events.jsonl";
  for_each_json_line(events_file, [&](const nlohmann::json& j, std::size_t line) {
    RawInputEvent e;
    e.t_ms = get_int(j, "t_ms");
    const auto dev = j.at("device").get<std::string>();
    const auto edge = j.at("edge").get<std::string>();
    if (dev != "keyboard" && dev != "mouse") throw parse_error(events_file, line, "bad device");
    if (edge != "down" && edge != "up") throw parse_error(events_file, line, "bad edge");
    e.device = dev == "mouse" ? Device::kMouse : Device::kKeyboard;
    e.edge = edge == "up" ? Edge::kUp : Edge::kDown;
    e.binding = j.at("binding").get<std::string>();
    s.raw_events.push_back(std::move(e));
  });

  for_each_json_line(dir / "intervals.jsonl", [&](const nlohmann::json& j, std::size_t) {
    s.active_intervals.push_back(Interval{get_int(j, "start_ms"), get_int(j, "end_ms")});
  });

  validate_session(s);
  return s;
}

SessionRecorder::SessionRecorder(std::map<std::string, std::string> meta)
    : meta_(std::move(meta)) {}

void SessionRecorder::append_frame(std::int64_t t_ms, std::string payload) {
  std::lock_guard lock(frames_mu_);
  if (!frames_.empty() && t_ms < frames_.back().t_ms) {
    throw Error(ErrorKind::kOrderingViolation, "frame stream went back in time");
  }
  const std::int64_t index = frames_.empty() ? 1 : frames_.back().index + 1;
  frames_.push_back(FrameRecord{index, t_ms, std::move(payload)});
}

void SessionRecorder::append_event(RawInputEvent event) {
  std::lock_guard lock(events_mu_);
  if (!events_.empty() && event.t_ms < events_.back().t_ms) {
    throw Error(ErrorKind::kOrderingViolation, "event stream went back in time");
  }
  events_.push_back(std::move(event));
}

void SessionRecorder::open_interval(std::int64_t t_ms) {
  std::lock_guard lock(intervals_mu_);
  if (interval_open_) return;
  if (!intervals_.empty() && t_ms <= intervals_.back().end_ms) {
    throw Error(ErrorKind::kOrderingViolation, "interval opened inside the previous one");
  }
  intervals_.push_back(Interval{t_ms, t_ms});
  interval_open_ = true;
}

void SessionRecorder::close_interval(std::int64_t t_ms) {
  std::lock_guard lock(intervals_mu_);
  if (!interval_open_) return;
  if (t_ms < intervals_.back().start_ms) {
    throw Error(ErrorKind::kOrderingViolation, "interval closed before it opened");
  }
  intervals_.back().end_ms = t_ms;
  interval_open_ = false;
}

TrackSession SessionRecorder::snapshot() const {
  TrackSession s;
  {
    std::lock_guard lock(frames_mu_);
    s.frames = frames_;
  }
  {
    std::lock_guard lock(events_mu_);
    s.raw_events = events_;
  }
  {
    std::lock_guard lock(intervals_mu_);
    s.active_intervals = intervals_;
  }
  s.meta = meta_;
  return s;
}

}  // namespace combat
