#pragma once

#include "turbomem/affinity.hpp"
#include "turbomem/baselines.hpp"
#include "turbomem/bench.hpp"
#include "turbomem/config.hpp"
#include "turbomem/counters.hpp"
#include "turbomem/error.hpp"
#include "turbomem/handler.hpp"
#include "turbomem/memory_region.hpp"
#include "turbomem/object_pool.hpp"
#include "turbomem/pool.hpp"
#include "turbomem/report.hpp"
#include "turbomem/slot.hpp"
#include "turbomem/stats.hpp"
#include "turbomem/treiber_stack.hpp"
