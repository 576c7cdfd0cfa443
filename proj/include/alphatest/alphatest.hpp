#pragma once

#include "alphatest/benchmarks.hpp"
#include "alphatest/csv_io.hpp"
#include "alphatest/design_config.hpp"
#include "alphatest/empirical.hpp"
#include "alphatest/error.hpp"
#include "alphatest/linalg.hpp"
#include "alphatest/mc_lab.hpp"
#include "alphatest/model.hpp"
#include "alphatest/null_sim.hpp"
#include "alphatest/parallel.hpp"
#include "alphatest/pipeline.hpp"
#include "alphatest/precision.hpp"
#include "alphatest/random.hpp"
#include "alphatest/report.hpp"
#include "alphatest/statistics.hpp"
#include "alphatest/version.hpp"
