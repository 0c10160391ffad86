#pragma once

#include "dwa/checkpoint.hpp"
#include "dwa/conv.hpp"
#include "dwa/dataset.hpp"
#include "dwa/dwa_layer.hpp"
#include "dwa/error.hpp"
#include "dwa/gradcheck.hpp"
#include "dwa/loss.hpp"
#include "dwa/manifest.hpp"
#include "dwa/metrics.hpp"
#include "dwa/models.hpp"
#include "dwa/ops.hpp"
#include "dwa/optim.hpp"
#include "dwa/png_io.hpp"
#include "dwa/random.hpp"
#include "dwa/resample.hpp"
#include "dwa/selfcheck.hpp"
#include "dwa/synthetic.hpp"
#include "dwa/tensor.hpp"
#include "dwa/train.hpp"
#include "dwa/wavelet.hpp"
