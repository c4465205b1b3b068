#pragma once

// Exact weighted model counting and sampling for two-variable logic with
// counting quantifiers and cardinality constraints.

#include "wfoms/configuration.hpp"
#include "wfoms/evaluate.hpp"
#include "wfoms/formula.hpp"
#include "wfoms/normalizer.hpp"
#include "wfoms/oracle.hpp"
#include "wfoms/parser.hpp"
#include "wfoms/polynomial.hpp"
#include "wfoms/presets.hpp"
#include "wfoms/rational.hpp"
#include "wfoms/rng.hpp"
#include "wfoms/sampler.hpp"
#include "wfoms/stats.hpp"
#include "wfoms/structure.hpp"
#include "wfoms/types.hpp"
#include "wfoms/wfomc.hpp"
