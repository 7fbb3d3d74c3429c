#pragma once

// Umbrella header for the decision-scored point cloud registration
// toolkit.

#include "decreg/bench.hpp"
#include "decreg/compatibility.hpp"
#include "decreg/correspondence.hpp"
#include "decreg/dataset.hpp"
#include "decreg/defaults.hpp"
#include "decreg/errors.hpp"
#include "decreg/external_scorer.hpp"
#include "decreg/geometry.hpp"
#include "decreg/hypotheses.hpp"
#include "decreg/io.hpp"
#include "decreg/kdtree.hpp"
#include "decreg/metrics.hpp"
#include "decreg/parallel.hpp"
#include "decreg/pipeline.hpp"
#include "decreg/random.hpp"
#include "decreg/report.hpp"
#include "decreg/scoring.hpp"
#include "decreg/synthetic.hpp"
