#pragma once

#include <array>
#include <span>

#include "meshtcp/cc_core.hpp"

namespace meshtcp {

enum class SegmentKind { Data, Ack };

inline constexpr int kMaxSackBlocks = 3;

// A simulated packet. DATA carries `seq`; ACK carries the cumulative `ack`
// (next expected segment) and, for SACK receivers, up to three intervals.
struct Segment {
  SegmentKind kind = SegmentKind::Data;
  int flow_id = 0;
  SeqNo seq = 0;
  SeqNo ack = 0;
  int size_bytes = 0;
  // Time the sender handed this copy to the network.
  double sent_time = 0.0;
  // 1 for the first transmission of `seq`, 2 for the first retransmission...
  int tx_number = 1;
  std::array<SackBlock, kMaxSackBlocks> sack{};
  int sack_count = 0;

  std::span<const SackBlock> sack_blocks() const {
    return {sack.data(), static_cast<std::size_t>(sack_count)};
  }
  bool is_data() const { return kind == SegmentKind::Data; }
};

}  // namespace meshtcp
