#pragma once

#include "ocb/error.hpp"
#include "ocb/esta.hpp"
#include "ocb/harness.hpp"
#include "ocb/mathkit.hpp"
#include "ocb/potential.hpp"
#include "ocb/scales.hpp"
#include "ocb/tdse.hpp"
#include "ocb/trajectory.hpp"
