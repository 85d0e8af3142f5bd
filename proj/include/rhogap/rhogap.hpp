#pragma once

#include "rhogap/bounds.hpp"
#include "rhogap/config.hpp"
#include "rhogap/control.hpp"
#include "rhogap/errors.hpp"
#include "rhogap/experiment.hpp"
#include "rhogap/fit.hpp"
#include "rhogap/gp.hpp"
#include "rhogap/io.hpp"
#include "rhogap/kernels.hpp"
#include "rhogap/lipschitz.hpp"
#include "rhogap/parallel.hpp"
#include "rhogap/quality.hpp"
#include "rhogap/sim.hpp"
#include "rhogap/types.hpp"
