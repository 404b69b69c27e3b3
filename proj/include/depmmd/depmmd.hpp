#pragma once

#include "depmmd/analysis.hpp"
#include "depmmd/bench.hpp"
#include "depmmd/common.hpp"
#include "depmmd/coreset_io.hpp"
#include "depmmd/data.hpp"
#include "depmmd/fit.hpp"
#include "depmmd/gram.hpp"
#include "depmmd/kernel.hpp"
#include "depmmd/manifest.hpp"
#include "depmmd/mmd.hpp"
#include "depmmd/parallel.hpp"
#include "depmmd/rng.hpp"
#include "depmmd/simplex.hpp"
#include "depmmd/synthetic.hpp"
