#pragma once

#include "rads/detector.hpp"
#include "rads/errors.hpp"
#include "rads/eval.hpp"
#include "rads/ingest.hpp"
#include "rads/modelstore.hpp"
#include "rads/occ.hpp"
#include "rads/rng.hpp"
#include "rads/simulator.hpp"
#include "rads/timeseries.hpp"
#include "rads/wtsa.hpp"
