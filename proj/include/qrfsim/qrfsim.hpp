#pragma once

#include "qrfsim/clocks.hpp"
#include "qrfsim/error.hpp"
#include "qrfsim/format.hpp"
#include "qrfsim/geodesic.hpp"
#include "qrfsim/grid.hpp"
#include "qrfsim/linalg.hpp"
#include "qrfsim/model_compare.hpp"
#include "qrfsim/parallel.hpp"
#include "qrfsim/phase.hpp"
#include "qrfsim/potential.hpp"
#include "qrfsim/quadrature.hpp"
#include "qrfsim/report.hpp"
#include "qrfsim/rotation.hpp"
#include "qrfsim/scenario.hpp"
#include "qrfsim/semiclassical.hpp"
#include "qrfsim/state.hpp"
#include "qrfsim/transforms.hpp"
#include "qrfsim/units.hpp"
#include "qrfsim/validity.hpp"
