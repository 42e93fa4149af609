#pragma once

#include "stairs/errors.hpp"
#include "stairs/rng.hpp"
#include "stairs/sampling.hpp"
#include "stairs/mcm.hpp"
#include "stairs/hermite.hpp"
#include "stairs/perceptron.hpp"
#include "stairs/ode.hpp"
#include "stairs/two_layer.hpp"
#include "stairs/diagnostics.hpp"
#include "stairs/io.hpp"
#include "stairs/experiments.hpp"
#include "stairs/config.hpp"
