#pragma once

#include "jumpmeans/asymptotics.hpp"
#include "jumpmeans/common.hpp"
#include "jumpmeans/core.hpp"
#include "jumpmeans/eval.hpp"
#include "jumpmeans/io.hpp"
#include "jumpmeans/nonparametric.hpp"
#include "jumpmeans/parametric.hpp"
#include "jumpmeans/rng.hpp"
#include "jumpmeans/simulate.hpp"
#include "jumpmeans/viterbi.hpp"
