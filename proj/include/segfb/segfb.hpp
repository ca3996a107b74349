#pragma once

// Umbrella header.

#include "segfb/errors.hpp"
#include "segfb/point.hpp"
#include "segfb/profiles.hpp"
#include "segfb/grid.hpp"
#include "segfb/field_io.hpp"
#include "segfb/interface.hpp"
#include "segfb/solver.hpp"
#include "segfb/almgren.hpp"
#include "segfb/blowup.hpp"
#include "segfb/linearized.hpp"
#include "segfb/flatness.hpp"
#include "segfb/spectral.hpp"
#include "segfb/report.hpp"
#include "segfb/acceptance.hpp"
