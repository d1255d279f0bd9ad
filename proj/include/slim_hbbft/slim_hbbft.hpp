#pragma once

#include "slim_hbbft/error.hpp"
#include "slim_hbbft/bytes.hpp"
#include "slim_hbbft/types.hpp"
#include "slim_hbbft/crypto.hpp"
#include "slim_hbbft/outbox.hpp"
#include "slim_hbbft/committee.hpp"
#include "slim_hbbft/provable_broadcast.hpp"
#include "slim_hbbft/aba.hpp"
#include "slim_hbbft/acs.hpp"
#include "slim_hbbft/trace.hpp"
#include "slim_hbbft/sim.hpp"
#include "slim_hbbft/harness.hpp"
