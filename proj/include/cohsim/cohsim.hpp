#pragma once

#include "cohsim/address_space.hpp"
#include "cohsim/cache.hpp"
#include "cohsim/coherence.hpp"
#include "cohsim/config_file.hpp"
#include "cohsim/csv.hpp"
#include "cohsim/engine.hpp"
#include "cohsim/harness.hpp"
#include "cohsim/memory_system.hpp"
#include "cohsim/monitors.hpp"
#include "cohsim/policies.hpp"
#include "cohsim/rl.hpp"
#include "cohsim/rng.hpp"
#include "cohsim/sensing.hpp"
#include "cohsim/soc.hpp"
#include "cohsim/traffic.hpp"
#include "cohsim/workload.hpp"
