#pragma once

#include "refscan/baselines.hpp"
#include "refscan/codefeat.hpp"
#include "refscan/corpus.hpp"
#include "refscan/ensemble.hpp"
#include "refscan/error.hpp"
#include "refscan/evaluation.hpp"
#include "refscan/explain.hpp"
#include "refscan/io.hpp"
#include "refscan/labeling.hpp"
#include "refscan/model.hpp"
#include "refscan/pipeline.hpp"
#include "refscan/procfeat.hpp"
#include "refscan/sampling.hpp"
#include "refscan/search.hpp"
#include "refscan/textfeat.hpp"
#include "refscan/workflow.hpp"
