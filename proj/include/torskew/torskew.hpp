#pragma once

#include "torskew/bessel.hpp"
#include "torskew/base_density.hpp"
#include "torskew/characterize.hpp"
#include "torskew/errors.hpp"
#include "torskew/estimation.hpp"
#include "torskew/fisher.hpp"
#include "torskew/json_io.hpp"
#include "torskew/skew.hpp"
#include "torskew/torus.hpp"
