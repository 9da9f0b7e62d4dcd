#pragma once

#include "gprcap/dataset.hpp"
#include "gprcap/errors.hpp"
#include "gprcap/evaluation.hpp"
#include "gprcap/forecaster.hpp"
#include "gprcap/gpr.hpp"
#include "gprcap/io.hpp"
#include "gprcap/kernels.hpp"
#include "gprcap/matrix.hpp"
#include "gprcap/metrics.hpp"
