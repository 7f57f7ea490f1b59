#pragma once

#include "hazfit/cohort.hpp"
#include "hazfit/experiments.hpp"
#include "hazfit/inference.hpp"
#include "hazfit/io.hpp"
#include "hazfit/models.hpp"
#include "hazfit/quadrature.hpp"
#include "hazfit/regression.hpp"
#include "hazfit/rng.hpp"
#include "hazfit/selection.hpp"
