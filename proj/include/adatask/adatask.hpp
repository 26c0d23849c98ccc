/// @file adatask.hpp
/// Umbrella header.

#pragma once

#include "adatask/csv.hpp"
#include "adatask/episode.hpp"
#include "adatask/harness.hpp"
#include "adatask/learner.hpp"
#include "adatask/potentials.hpp"
#include "adatask/rng.hpp"
#include "adatask/samplers.hpp"
#include "adatask/stats.hpp"
#include "adatask/synthdata.hpp"
