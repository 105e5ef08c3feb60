#pragma once

#include "convboost/boost.hpp"
#include "convboost/channels.hpp"
#include "convboost/detector.hpp"
#include "convboost/error.hpp"
#include "convboost/eval.hpp"
#include "convboost/geometry.hpp"
#include "convboost/image.hpp"
#include "convboost/io/cfbk.hpp"
#include "convboost/io/manifest.hpp"
#include "convboost/io/metadata.hpp"
#include "convboost/io/model_io.hpp"
#include "convboost/io/pnm.hpp"
#include "convboost/io/proposals.hpp"
#include "convboost/io/report.hpp"
#include "convboost/io/voc.hpp"
#include "convboost/log.hpp"
#include "convboost/parallel.hpp"
#include "convboost/pipeline.hpp"
#include "convboost/random.hpp"
#include "convboost/regress.hpp"
#include "convboost/sampler.hpp"
#include "convboost/synth.hpp"
#include "convboost/window_scorer.hpp"
