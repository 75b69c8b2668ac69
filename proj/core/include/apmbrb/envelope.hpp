// Copyright 2026 The apmbrb Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>

#include "apmbrb/wire.hpp"

namespace apmbrb {

// Simulator wire unit. Immutable after submission; broadcasts share one body.
struct Envelope {
  NodeId src = 0;
  NodeId dst = 0;
  std::shared_ptr<const WireBody> body;
  std::uint64_t accounted_bits = 0;
  std::uint64_t payload_bits = 0;  // the |m| portion of accounted_bits
  // Cost attribution: the broadcast instance this traffic belongs to.
  NodeId attr_sender = 0;
  Round attr_round = 0;
  TrafficPurpose purpose = TrafficPurpose::kNone;
  std::uint64_t enqueue_step = 0;
};

}  // namespace apmbrb
