#pragma once

#include "ionsim/analysis.hpp"
#include "ionsim/atom_model.hpp"
#include "ionsim/budget.hpp"
#include "ionsim/collection.hpp"
#include "ionsim/config.hpp"
#include "ionsim/error.hpp"
#include "ionsim/lindblad.hpp"
#include "ionsim/montecarlo.hpp"
#include "ionsim/protocol.hpp"
#include "ionsim/readout.hpp"
#include "ionsim/records_io.hpp"
#include "ionsim/rng.hpp"
#include "ionsim/spectrometer.hpp"
#include "ionsim/units.hpp"
