#pragma once

// Brute-force reference for ticket selection, written directly from the
// selection rules and kept independent of the indexed implementation.

#include <optional>
#include <tuple>
#include <vector>

#include "vc/protocol/types.hpp"
#include "vc/scheduler/config.hpp"

namespace vc::oracle {

inline std::optional<protocol::TicketId> oracle_next_ticket(const std::vector<protocol::Ticket>& tickets,
                                                            const sched::SchedulerConfig& cfg, TimestampMs now) {
  using protocol::TicketStatus;
  std::optional<std::tuple<TimestampMs, TimestampMs, std::uint64_t>> best;
  for (const auto& t : tickets) {
    if (t.status == TicketStatus::completed || t.status == TicketStatus::failed) continue;
    TimestampMs vct;
    if (t.distributions.empty() || t.status == TicketStatus::pending) {
      vct = t.created_at;  // never handed out, or returned by an error report
    } else {
      vct = t.distributions.back().at + cfg.redistribution_timeout;
    }
    if (vct > now) continue;
    if (!t.distributions.empty() && now - t.distributions.back().at < cfg.min_redistribution_interval) continue;
    auto key = std::make_tuple(vct, t.created_at, t.ticket_id.value);
    if (!best || key < *best) best = key;
  }
  if (best) return protocol::TicketId{std::get<2>(*best)};

  for (const auto& t : tickets) {
    if (t.status != TicketStatus::distributed) continue;
    const TimestampMs last = t.distributions.back().at;
    if (now - last < cfg.min_redistribution_interval) continue;
    auto key = std::make_tuple(last, t.created_at, t.ticket_id.value);
    if (!best || key < *best) best = key;
  }
  if (best) return protocol::TicketId{std::get<2>(*best)};
  return std::nullopt;
}

}  // namespace vc::oracle
