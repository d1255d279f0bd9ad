#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "slim_hbbft/types.hpp"

namespace slim_hbbft {

struct Envelope {
  PartyId to;
  Message msg;
};

enum class LocalEventKind {
  Committee,        // committee learned; `set` = ordered committee
  Hold,             // first receipt of proposal content (j, ref = value digest)
  Proof,            // a delivery proof accepted or formed (tag = ppb tag, ref = value digest)
  Ack,              // PPB_ACK issued (tag = ppb tag, peer = proposer, ref = value digest)
  Input,            // ABA input (j, bit); note "upgrade" for 0->1
  Decide,           // ABA decision (j, bit, round)
  SuggestQuorum,    // n-f distinct suggesters reached
  DecShareRelease,  // decryption shares released (set = S)
  DeliverBlock,     // block delivered (set = S, ref = block digest)
  Drop,             // inbound message discarded (note = reason)
};

inline const char* to_string(LocalEventKind k) {
  switch (k) {
    case LocalEventKind::Committee: return "committee";
    case LocalEventKind::Hold: return "hold";
    case LocalEventKind::Proof: return "proof";
    case LocalEventKind::Ack: return "ack";
    case LocalEventKind::Input: return "input";
    case LocalEventKind::Decide: return "decide";
    case LocalEventKind::SuggestQuorum: return "suggest_quorum";
    case LocalEventKind::DecShareRelease: return "dec_share_release";
    case LocalEventKind::DeliverBlock: return "deliver_block";
    case LocalEventKind::Drop: return "drop";
  }
  return "unknown";
}

struct LocalEvent {
  explicit LocalEvent(LocalEventKind k) : kind(k) {}

  LocalEventKind kind;
  Epoch epoch = 0;
  std::int32_t j = -1;
  std::int32_t bit = -1;
  std::uint32_t round = 0;
  std::uint32_t tag = 0;
  std::optional<PartyId> peer;
  std::optional<MessageKind> msg_kind;
  std::string ref;
  std::string note;
  std::vector<std::int32_t> set;
  std::vector<std::string> refs;
};

/// Collects everything a handler wants to emit for one inbound event.
/// `order` keeps the interleaving of messages and local events.
struct Outbox {
  struct Item {
    bool is_message;
    std::size_t index;
  };

  std::vector<Envelope> messages;
  std::vector<LocalEvent> events;
  std::vector<Item> order;

  void send(PartyId to, Message msg) {
    order.push_back({true, messages.size()});
    messages.push_back({to, std::move(msg)});
  }

  void multicast(std::uint32_t n, const Message& msg) {
    for (std::uint32_t i = 0; i < n; ++i) send(PartyId{static_cast<std::uint16_t>(i)}, msg);
  }

  void drop(const Message& msg, std::string reason) {
    LocalEvent e{LocalEventKind::Drop};
    e.epoch = msg.epoch;
    e.peer = msg.sender;
    e.msg_kind = msg.kind;
    e.tag = msg.tag;
    e.note = std::move(reason);
    emit(std::move(e));
  }

  void emit(LocalEvent e) {
    order.push_back({false, events.size()});
    events.push_back(std::move(e));
  }

  std::size_t count(MessageKind kind) const {
    std::size_t c = 0;
    for (const auto& m : messages) c += m.msg.kind == kind;
    return c;
  }

  std::size_t drops() const {
    std::size_t c = 0;
    for (const auto& e : events) c += e.kind == LocalEventKind::Drop;
    return c;
  }
};

}  // namespace slim_hbbft
