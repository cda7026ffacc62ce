// Umbrella header.
#ifndef LC2ST_LC2ST_HPP
#define LC2ST_LC2ST_HPP

#include "lc2st/core/dataset.hpp"
#include "lc2st/core/error.hpp"
#include "lc2st/core/io.hpp"
#include "lc2st/core/parallel.hpp"
#include "lc2st/core/rng.hpp"
#include "lc2st/core/stats.hpp"
#include "lc2st/core/types.hpp"

#include "lc2st/tasks/distort.hpp"
#include "lc2st/tasks/gaussian.hpp"
#include "lc2st/tasks/registry.hpp"
#include "lc2st/tasks/task.hpp"
#include "lc2st/tasks/two_moons.hpp"

#include "lc2st/classifiers/calibration.hpp"
#include "lc2st/classifiers/classifier.hpp"
#include "lc2st/classifiers/factory.hpp"
#include "lc2st/classifiers/mlp.hpp"
#include "lc2st/classifiers/qda.hpp"

#include "lc2st/flows/flow.hpp"
#include "lc2st/flows/train.hpp"

#include "lc2st/c2st/diagnostics.hpp"
#include "lc2st/c2st/lc2st.hpp"
#include "lc2st/c2st/oracle.hpp"
#include "lc2st/c2st/result.hpp"
#include "lc2st/c2st/statistics.hpp"

#include "lc2st/harness/plan.hpp"
#include "lc2st/harness/studies.hpp"
#include "lc2st/harness/sweep.hpp"

#endif
