#pragma once

#include "asl/platform.hpp"
#include "asl/spin.hpp"
#include "asl/locks.hpp"
#include "asl/reorderable.hpp"
#include "asl/runtime.hpp"
#include "asl/config.hpp"
#include "asl/model.hpp"
#include "asl/harness/recorder.hpp"
#include "asl/harness/report.hpp"
#include "asl/harness/bench.hpp"
#include "asl/harness/scenarios.hpp"
