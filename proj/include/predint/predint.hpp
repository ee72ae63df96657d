#pragma once

// Umbrella header: the whole library.

#include "predint/boot.hpp"
#include "predint/coverage.hpp"
#include "predint/dist.hpp"
#include "predint/errors.hpp"
#include "predint/fit.hpp"
#include "predint/npar.hpp"
#include "predint/predict_core.hpp"
#include "predint/predict_disc.hpp"
#include "predint/predict_fid.hpp"
#include "predint/predict_ls.hpp"
#include "predint/rng.hpp"
#include "predint/sample.hpp"
#include "predint/special.hpp"
