#pragma once

#include "tim/config.hpp"
#include "tim/domain.hpp"
#include "tim/errors.hpp"
#include "tim/metrics.hpp"
#include "tim/mobility.hpp"
#include "tim/netsim.hpp"
#include "tim/protocol.hpp"
#include "tim/relay.hpp"
#include "tim/scenarios.hpp"
#include "tim/script.hpp"
#include "tim/trace.hpp"
