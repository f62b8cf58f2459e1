#pragma once

#include "pdtopics/common.hpp"
#include "pdtopics/corpus.hpp"
#include "pdtopics/graph.hpp"
#include "pdtopics/influence.hpp"
#include "pdtopics/metrics.hpp"
#include "pdtopics/mining.hpp"
#include "pdtopics/pipeline.hpp"
#include "pdtopics/solver.hpp"
#include "pdtopics/text.hpp"
