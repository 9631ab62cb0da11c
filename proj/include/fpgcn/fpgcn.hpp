#pragma once

#include "fpgcn/common.hpp"
#include "fpgcn/datasets.hpp"
#include "fpgcn/embed.hpp"
#include "fpgcn/evaluation.hpp"
#include "fpgcn/featurize.hpp"
#include "fpgcn/gcn.hpp"
#include "fpgcn/graphs.hpp"
#include "fpgcn/matrix.hpp"
#include "fpgcn/mir.hpp"
#include "fpgcn/pipeline.hpp"
#include "fpgcn/reports.hpp"
