#pragma once

#include "caseflow/boosting.hpp"
#include "caseflow/csv.hpp"
#include "caseflow/discretion.hpp"
#include "caseflow/encoding.hpp"
#include "caseflow/error.hpp"
#include "caseflow/intervention.hpp"
#include "caseflow/metrics.hpp"
#include "caseflow/pipeline.hpp"
#include "caseflow/random.hpp"
#include "caseflow/records.hpp"
#include "caseflow/resampling.hpp"
#include "caseflow/rules.hpp"
#include "caseflow/schema.hpp"
#include "caseflow/scoring.hpp"
#include "caseflow/svg.hpp"
#include "caseflow/synthgen.hpp"
#include "caseflow/tree.hpp"
#include "caseflow/tree_io.hpp"
