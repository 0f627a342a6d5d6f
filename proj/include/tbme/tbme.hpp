#pragma once

#include "tbme/chart.hpp"
#include "tbme/csv.hpp"
#include "tbme/dataset.hpp"
#include "tbme/fne.hpp"
#include "tbme/gmm.hpp"
#include "tbme/harness.hpp"
#include "tbme/hull.hpp"
#include "tbme/json_io.hpp"
#include "tbme/metrics.hpp"
#include "tbme/moppca.hpp"
#include "tbme/rng.hpp"
#include "tbme/svg.hpp"
