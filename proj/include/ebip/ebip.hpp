#pragma once

#include "ebip/config.hpp"
#include "ebip/contraction.hpp"
#include "ebip/empirical_bayes.hpp"
#include "ebip/error.hpp"
#include "ebip/instance.hpp"
#include "ebip/linear_op.hpp"
#include "ebip/operators.hpp"
#include "ebip/posterior.hpp"
#include "ebip/random.hpp"
#include "ebip/report.hpp"
#include "ebip/sequence.hpp"
#include "ebip/spectrum.hpp"
#include "ebip/torus.hpp"
