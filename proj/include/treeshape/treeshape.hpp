#pragma once

#include "treeshape/clustering.hpp"
#include "treeshape/error.hpp"
#include "treeshape/hungarian.hpp"
#include "treeshape/metric.hpp"
#include "treeshape/parallel.hpp"
#include "treeshape/registration.hpp"
#include "treeshape/render.hpp"
#include "treeshape/srvf.hpp"
#include "treeshape/statistics.hpp"
#include "treeshape/tree_io.hpp"
#include "treeshape/tree_model.hpp"
