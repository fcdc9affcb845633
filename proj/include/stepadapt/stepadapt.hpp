#pragma once

#include "stepadapt/analysis.hpp"
#include "stepadapt/config.hpp"
#include "stepadapt/engine.hpp"
#include "stepadapt/errors.hpp"
#include "stepadapt/noise.hpp"
#include "stepadapt/problem.hpp"
#include "stepadapt/random.hpp"
#include "stepadapt/rate.hpp"
#include "stepadapt/stepsize.hpp"
