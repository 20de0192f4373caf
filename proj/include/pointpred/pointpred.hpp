#pragma once

#include "pointpred/errors.hpp"
#include "pointpred/random.hpp"
#include "pointpred/encoding.hpp"
#include "pointpred/encoding_io.hpp"
#include "pointpred/infotheory.hpp"
#include "pointpred/homogeneity.hpp"
#include "pointpred/graph.hpp"
#include "pointpred/cssr.hpp"
#include "pointpred/esn.hpp"
#include "pointpred/synth.hpp"
#include "pointpred/evaluation.hpp"
