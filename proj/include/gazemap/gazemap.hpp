#pragma once

#include "gazemap/bench.hpp"
#include "gazemap/config.hpp"
#include "gazemap/density.hpp"
#include "gazemap/error.hpp"
#include "gazemap/export.hpp"
#include "gazemap/fixation_log.hpp"
#include "gazemap/gaze.hpp"
#include "gazemap/geometry.hpp"
#include "gazemap/image.hpp"
#include "gazemap/math.hpp"
#include "gazemap/raster.hpp"
#include "gazemap/render.hpp"
#include "gazemap/scene_io.hpp"
