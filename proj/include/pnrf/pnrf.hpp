#pragma once

// Physics-guided sparse-view radiance fields: umbrella include.

#include "pnrf/adam.hpp"
#include "pnrf/camera.hpp"
#include "pnrf/checkpoint.hpp"
#include "pnrf/config.hpp"
#include "pnrf/constraints.hpp"
#include "pnrf/dataset.hpp"
#include "pnrf/encoding.hpp"
#include "pnrf/field.hpp"
#include "pnrf/geometry.hpp"
#include "pnrf/image.hpp"
#include "pnrf/metrics.hpp"
#include "pnrf/render.hpp"
#include "pnrf/rng.hpp"
#include "pnrf/tape.hpp"
#include "pnrf/tensor.hpp"
#include "pnrf/toy_scene.hpp"
#include "pnrf/train.hpp"
#include "pnrf/util.hpp"
