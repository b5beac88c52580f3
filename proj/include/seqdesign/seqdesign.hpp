#pragma once

// Umbrella header: pulls in the whole library.

#include "seqdesign/version.hpp"
#include "seqdesign/rng.hpp"
#include "seqdesign/stats.hpp"
#include "seqdesign/model.hpp"
#include "seqdesign/estimator_kind.hpp"
#include "seqdesign/dgp.hpp"
#include "seqdesign/estimators.hpp"
#include "seqdesign/diagnostics.hpp"
#include "seqdesign/harness.hpp"
#include "seqdesign/io.hpp"
