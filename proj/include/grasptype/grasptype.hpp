#pragma once

#include "grasptype/core.hpp"
#include "grasptype/perception.hpp"
#include "grasptype/cloud_io.hpp"
#include "grasptype/logistic.hpp"
#include "grasptype/gmm.hpp"
#include "grasptype/model.hpp"
#include "grasptype/box_lbfgs.hpp"
#include "grasptype/inference.hpp"
#include "grasptype/heuristic.hpp"
#include "grasptype/synthetic.hpp"
