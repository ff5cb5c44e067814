#pragma once

// Umbrella header for the APGW survival modelling toolkit.

#include "apgw/distribution.hpp"
#include "apgw/errors.hpp"
#include "apgw/inference.hpp"
#include "apgw/io.hpp"
#include "apgw/likelihood.hpp"
#include "apgw/model.hpp"
#include "apgw/optimizer.hpp"
#include "apgw/rng.hpp"
#include "apgw/simulate.hpp"
