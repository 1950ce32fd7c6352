// SPDX-License-Identifier: MIT
//
// Umbrella header: the whole library in one include.

#pragma once

#include "snapforge/angular_basis.hpp"
#include "snapforge/common.hpp"
#include "snapforge/complex.hpp"
#include "snapforge/exec_variants.hpp"
#include "snapforge/halfint_index.hpp"
#include "snapforge/harness.hpp"
#include "snapforge/layout.hpp"
#include "snapforge/oracle.hpp"
#include "snapforge/pipeline.hpp"
#include "snapforge/rng.hpp"
#include "snapforge/snap_core.hpp"
#include "snapforge/thread_pool.hpp"
#include "snapforge/tolerances.hpp"
