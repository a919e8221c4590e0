// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "core/activation.hpp"
#include "core/attention.hpp"
#include "core/conv.hpp"
#include "core/grad_check.hpp"
#include "core/loss.hpp"
#include "core/pixel_shuffle.hpp"
#include "core/rng.hpp"
#include "core/stats.hpp"
#include "core/tensor.hpp"
#include "data/bicubic.hpp"
#include "data/checkpoint.hpp"
#include "data/svt.hpp"
#include "data/synth.hpp"
#include "diffusion.hpp"
#include "errors.hpp"
#include "metrics.hpp"
#include "nets/model.hpp"
#include "pipeline.hpp"
#include "sfa.hpp"
#include "tfa.hpp"
#include "tubelet.hpp"
