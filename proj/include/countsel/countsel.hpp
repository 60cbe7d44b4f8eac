#pragma once

#include "countsel/errors.hpp"
#include "countsel/io.hpp"
#include "countsel/model.hpp"
#include "countsel/montecarlo.hpp"
#include "countsel/optimize.hpp"
#include "countsel/parallel.hpp"
#include "countsel/presets.hpp"
#include "countsel/qmle.hpp"
#include "countsel/rng.hpp"
#include "countsel/select.hpp"
#include "countsel/simulate.hpp"
