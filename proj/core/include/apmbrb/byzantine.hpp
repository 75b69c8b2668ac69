// Copyright 2026 The apmbrb Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "apmbrb/sim.hpp"

namespace apmbrb {

// Byzantine behaviors are separate implementations composed around a
// receiver-only honest node for their committee-member duties (signing first
// received, serving queries). Honest code carries no fault hooks.
std::unique_ptr<Agent> make_apm_byzantine(FaultKind kind, NodeId id, ProtocolOptions opts,
                                          std::shared_ptr<const CryptoProvider> provider,
                                          const std::vector<NodeId>& selective_targets,
                                          const std::uint64_t* clock);

}  // namespace apmbrb
