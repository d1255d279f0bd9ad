#pragma once

#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "slim_hbbft/outbox.hpp"
#include "slim_hbbft/types.hpp"

namespace slim_hbbft {

enum class TraceEventType { Send, Deliver, Local };

/// One totally ordered event. For sends `party` is the sender and `peer` the
/// recipient; for delivers the other way round; local events belong to `party`.
struct TraceEvent {
  TraceEventType type = TraceEventType::Local;
  std::uint64_t step = 0;
  std::uint16_t party = 0;
  std::uint16_t peer = 0;
  std::uint64_t msg_id = 0;
  MessageKind kind = MessageKind::CoinShare;
  Epoch epoch = 0;
  std::uint32_t tag = 0;
  std::uint64_t bytes = 0;
  std::string digest;
  std::optional<LocalEvent> local;

  std::string type_name() const {
    switch (type) {
      case TraceEventType::Send: return "send";
      case TraceEventType::Deliver: return "deliver";
      case TraceEventType::Local: return to_string(local->kind);
    }
    return "unknown";
  }

  bool is(LocalEventKind k) const { return type == TraceEventType::Local && local->kind == k; }
};

struct TraceMeta {
  std::uint32_t n = 0;
  std::uint32_t f = 0;
  std::uint32_t kappa = 0;
  std::uint32_t sec_param = 0;
  std::uint32_t batch_size = 0;
  std::uint32_t payload_bytes = 0;
  std::uint32_t promotion_steps = 1;
  std::uint32_t epochs = 0;
  std::uint64_t seed = 0;
  std::string scheduler;
  std::vector<std::string> roles;  // "honest" or the Byzantine behavior, per party
  std::uint64_t max_steps = 0;
  std::uint64_t steps = 0;
  bool timed_out = false;

  bool honest(std::uint16_t p) const { return p < roles.size() && roles[p] == "honest"; }
};

struct Trace {
  TraceMeta meta;
  std::vector<TraceEvent> events;

  void record_send(std::uint64_t step, PartyId to, std::uint64_t id, const Message& m) {
    TraceEvent e;
    e.type = TraceEventType::Send;
    e.step = step;
    e.party = m.sender.index;
    e.peer = to.index;
    e.msg_id = id;
    e.kind = m.kind;
    e.epoch = m.epoch;
    e.tag = m.tag;
    e.bytes = m.wire_size();
    e.digest = m.digest().short_hex();
    events.push_back(std::move(e));
  }

  void record_deliver(std::uint64_t step, PartyId to, std::uint64_t id, const Message& m) {
    TraceEvent e;
    e.type = TraceEventType::Deliver;
    e.step = step;
    e.party = to.index;
    e.peer = m.sender.index;
    e.msg_id = id;
    e.kind = m.kind;
    e.epoch = m.epoch;
    e.tag = m.tag;
    e.bytes = m.wire_size();
    events.push_back(std::move(e));
  }

  void record_local(std::uint64_t step, PartyId party, LocalEvent l) {
    TraceEvent e;
    e.type = TraceEventType::Local;
    e.step = step;
    e.party = party.index;
    e.epoch = l.epoch;
    e.local = std::move(l);
    events.push_back(std::move(e));
  }

  std::string to_jsonl() const;
  static Trace from_jsonl(std::string_view text);
  Digest digest() const { return sha256(as_bytes(to_jsonl())); }
};

namespace detail {

inline nlohmann::json meta_to_json(const TraceMeta& m) {
  return {{"type", "meta"},     {"n", m.n},
          {"f", m.f},           {"kappa", m.kappa},
          {"sec_param", m.sec_param}, {"batch_size", m.batch_size},
          {"payload_bytes", m.payload_bytes}, {"promotion_steps", m.promotion_steps},
          {"epochs", m.epochs}, {"seed", m.seed},
          {"scheduler", m.scheduler}, {"roles", m.roles},
          {"max_steps", m.max_steps}, {"steps", m.steps},
          {"timed_out", m.timed_out}};
}

inline TraceMeta meta_from_json(const nlohmann::json& j) {
  TraceMeta m;
  m.n = j.at("n");
  m.f = j.at("f");
  m.kappa = j.at("kappa");
  m.sec_param = j.at("sec_param");
  m.batch_size = j.at("batch_size");
  m.payload_bytes = j.at("payload_bytes");
  m.promotion_steps = j.at("promotion_steps");
  m.epochs = j.at("epochs");
  m.seed = j.at("seed");
  m.scheduler = j.at("scheduler");
  m.roles = j.at("roles").get<std::vector<std::string>>();
  m.max_steps = j.at("max_steps");
  m.steps = j.at("steps");
  m.timed_out = j.at("timed_out");
  return m;
}

inline nlohmann::json event_to_json(std::size_t i, const TraceEvent& e) {
  nlohmann::json j{{"i", i}, {"step", e.step}, {"type", e.type_name()}, {"party", e.party}, {"epoch", e.epoch}};
  if (e.type != TraceEventType::Local) {
    j["peer"] = e.peer;
    j["msg_id"] = e.msg_id;
    j["kind"] = std::string(to_string(e.kind));
    j["tag"] = e.tag;
    j["bytes"] = e.bytes;
    if (!e.digest.empty()) j["digest"] = e.digest;
    return j;
  }
  const LocalEvent& l = *e.local;
  if (l.j >= 0) j["j"] = l.j;
  if (l.bit >= 0) j["bit"] = l.bit;
  if (l.round) j["round"] = l.round;
  if (l.tag) j["tag"] = l.tag;
  if (l.peer) j["peer"] = l.peer->index;
  if (l.msg_kind) j["kind"] = std::string(to_string(*l.msg_kind));
  if (!l.ref.empty()) j["ref"] = l.ref;
  if (!l.note.empty()) j["note"] = l.note;
  if (!l.set.empty()) j["set"] = l.set;
  if (!l.refs.empty()) j["refs"] = l.refs;
  return j;
}

inline MessageKind kind_from_json(const nlohmann::json& j) {
  auto k = message_kind_from_string(j.get<std::string>());
  if (!k) throw Error(ErrorCode::TraceMalformed, "unknown message kind in trace");
  return *k;
}

inline TraceEvent event_from_json(const nlohmann::json& j) {
  TraceEvent e;
  std::string type = j.at("type");
  e.step = j.at("step");
  e.party = j.at("party");
  e.epoch = j.at("epoch");
  if (type == "send" || type == "deliver") {
    e.type = type == "send" ? TraceEventType::Send : TraceEventType::Deliver;
    e.peer = j.at("peer");
    e.msg_id = j.at("msg_id");
    e.kind = kind_from_json(j.at("kind"));
    e.tag = j.at("tag");
    e.bytes = j.at("bytes");
    e.digest = j.value("digest", "");
    return e;
  }
  std::optional<LocalEventKind> kind;
  for (int k = 0; k <= static_cast<int>(LocalEventKind::Drop); ++k) {
    if (type == to_string(static_cast<LocalEventKind>(k))) kind = static_cast<LocalEventKind>(k);
  }
  if (!kind) throw Error(ErrorCode::TraceMalformed, "unknown trace event type '" + type + "'");
  LocalEvent l{*kind};
  l.epoch = e.epoch;
  l.j = j.value("j", -1);
  l.bit = j.value("bit", -1);
  l.round = j.value("round", 0u);
  l.tag = j.value("tag", 0u);
  if (j.contains("peer")) l.peer = PartyId{j.at("peer").get<std::uint16_t>()};
  if (j.contains("kind")) l.msg_kind = kind_from_json(j.at("kind"));
  l.ref = j.value("ref", "");
  l.note = j.value("note", "");
  if (j.contains("set")) l.set = j.at("set").get<std::vector<std::int32_t>>();
  if (j.contains("refs")) l.refs = j.at("refs").get<std::vector<std::string>>();
  e.type = TraceEventType::Local;
  e.tag = l.tag;
  e.local = std::move(l);
  return e;
}

}  // namespace detail

/// Canonical export: a meta line, then one JSON object per event (sorted keys).
inline std::string Trace::to_jsonl() const {
  std::string out = detail::meta_to_json(meta).dump();
  out += '\n';
  for (std::size_t i = 0; i < events.size(); ++i) {
    out += detail::event_to_json(i, events[i]).dump();
    out += '\n';
  }
  return out;
}

inline Trace Trace::from_jsonl(std::string_view text) {
  Trace t;
  std::istringstream in{std::string(text)};
  std::string line;
  bool have_meta = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      if (!have_meta) {
        if (j.value("type", "") != "meta") throw Error(ErrorCode::TraceMalformed, "trace must start with a meta line");
        t.meta = detail::meta_from_json(j);
        have_meta = true;
        continue;
      }
      if (j.at("i").get<std::size_t>() != t.events.size()) {
        throw Error(ErrorCode::TraceMalformed, "event index out of sequence");
      }
      t.events.push_back(detail::event_from_json(j));
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::TraceMalformed, "line " + std::to_string(lineno) + ": " + ex.what());
    }
  }
  if (!have_meta) throw Error(ErrorCode::TraceMalformed, "empty trace");
  return t;
}

}  // namespace slim_hbbft
