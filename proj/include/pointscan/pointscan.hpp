#pragma once

#include "pointscan/bench/scaling.hpp"
#include "pointscan/core/error.hpp"
#include "pointscan/core/gradcheck.hpp"
#include "pointscan/core/ops.hpp"
#include "pointscan/core/rng.hpp"
#include "pointscan/core/tensor.hpp"
#include "pointscan/encoder/group_encoder.hpp"
#include "pointscan/geometry/cloud.hpp"
#include "pointscan/geometry/curves.hpp"
#include "pointscan/geometry/ordering.hpp"
#include "pointscan/importance/importance.hpp"
#include "pointscan/io/augment.hpp"
#include "pointscan/io/dataset.hpp"
#include "pointscan/io/formats.hpp"
#include "pointscan/io/synthetic.hpp"
#include "pointscan/mixer/mamba.hpp"
#include "pointscan/mixer/selective_scan.hpp"
#include "pointscan/nn/layers.hpp"
#include "pointscan/nn/params.hpp"
#include "pointscan/pipeline/checkpoint.hpp"
#include "pointscan/pipeline/config.hpp"
#include "pointscan/pipeline/model.hpp"
#include "pointscan/pipeline/optim.hpp"
#include "pointscan/pipeline/train.hpp"
