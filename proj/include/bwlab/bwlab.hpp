#pragma once

#include "bwlab/csv.hpp"
#include "bwlab/experiment.hpp"
#include "bwlab/igi.hpp"
#include "bwlab/metrics.hpp"
#include "bwlab/noise.hpp"
#include "bwlab/path.hpp"
#include "bwlab/pathchirp.hpp"
#include "bwlab/pathload.hpp"
#include "bwlab/probe.hpp"
#include "bwlab/rng.hpp"
#include "bwlab/sim_driver.hpp"
#include "bwlab/simnet.hpp"
#include "bwlab/spruce.hpp"
#include "bwlab/sweep.hpp"
#include "bwlab/uncertainty.hpp"
#include "bwlab/units.hpp"
