#pragma once

#include "ewars/units.hpp"
#include "ewars/gas_dynamics.hpp"
#include "ewars/search.hpp"
#include "ewars/estimator.hpp"
#include "ewars/chamber_sim.hpp"
#include "ewars/io.hpp"
#include "ewars/config.hpp"
#include "ewars/pipeline.hpp"
