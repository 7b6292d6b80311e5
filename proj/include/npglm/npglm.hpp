#pragma once

// Convenience include for the whole library.

#include "npglm/data.hpp"
#include "npglm/dp.hpp"
#include "npglm/errors.hpp"
#include "npglm/gibbs.hpp"
#include "npglm/gp.hpp"
#include "npglm/io.hpp"
#include "npglm/model.hpp"
#include "npglm/npglm_version.hpp"
#include "npglm/rand_kernels.hpp"
#include "npglm/rng.hpp"
#include "npglm/sha256.hpp"
#include "npglm/simulate.hpp"
#include "npglm/summaries.hpp"
