#ifndef GEOSYNTH_GEOSYNTH_HPP
#define GEOSYNTH_GEOSYNTH_HPP

#include "geosynth/covariance.hpp"
#include "geosynth/errors.hpp"
#include "geosynth/evaluation.hpp"
#include "geosynth/geodata.hpp"
#include "geosynth/mcmc.hpp"
#include "geosynth/random.hpp"
#include "geosynth/risk.hpp"
#include "geosynth/simharness.hpp"
#include "geosynth/synthesis.hpp"

#endif  // GEOSYNTH_GEOSYNTH_HPP
