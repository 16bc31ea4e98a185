#pragma once

#include "deeplk/core.hpp"
#include "deeplk/evalkit.hpp"
#include "deeplk/features.hpp"
#include "deeplk/iclk.hpp"
#include "deeplk/image.hpp"
#include "deeplk/image_io.hpp"
#include "deeplk/loss.hpp"
#include "deeplk/tracker.hpp"
#include "deeplk/training.hpp"
#include "deeplk/warp.hpp"
