#pragma once

// Umbrella header for the whole library.

#include "pilae/activation.hpp"
#include "pilae/baseline.hpp"
#include "pilae/dataset.hpp"
#include "pilae/error.hpp"
#include "pilae/layer.hpp"
#include "pilae/matrix.hpp"
#include "pilae/model_io.hpp"
#include "pilae/pinv.hpp"
#include "pilae/pipeline.hpp"
#include "pilae/readout.hpp"
#include "pilae/report.hpp"
#include "pilae/stack.hpp"
#include "pilae/svd.hpp"
#include "pilae/width_regression.hpp"
