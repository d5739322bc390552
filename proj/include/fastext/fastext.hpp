#pragma once

#include "fastext/codec.hpp"
#include "fastext/corpus.hpp"
#include "fastext/detector.hpp"
#include "fastext/error.hpp"
#include "fastext/eval.hpp"
#include "fastext/geometry.hpp"
#include "fastext/image.hpp"
#include "fastext/linker.hpp"
#include "fastext/loss.hpp"
#include "fastext/model.hpp"
#include "fastext/scale_maps.hpp"
#include "fastext/tensor.hpp"
#include "fastext/text_io.hpp"
#include "fastext/weight_file.hpp"
