#pragma once

#include "osr/embedding_data.hpp"
#include "osr/error.hpp"
#include "osr/evaluate.hpp"
#include "osr/grid_search.hpp"
#include "osr/metrics.hpp"
#include "osr/model_io.hpp"
#include "osr/openmax.hpp"
#include "osr/prediction.hpp"
#include "osr/softmax.hpp"
#include "osr/synth.hpp"
#include "osr/weibull.hpp"
