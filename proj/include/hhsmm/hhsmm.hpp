#ifndef HHSMM_HHSMM_HPP
#define HHSMM_HHSMM_HPP

#include "hhsmm/common.hpp"
#include "hhsmm/special_functions.hpp"
#include "hhsmm/data.hpp"
#include "hhsmm/sojourn.hpp"
#include "hhsmm/bspline.hpp"
#include "hhsmm/emission.hpp"
#include "hhsmm/emission_mixmvn.hpp"
#include "hhsmm/emission_spline.hpp"
#include "hhsmm/emission_regress.hpp"
#include "hhsmm/model.hpp"
#include "hhsmm/simulate.hpp"
#include "hhsmm/inference.hpp"
#include "hhsmm/fit.hpp"
#include "hhsmm/decode.hpp"
#include "hhsmm/rul.hpp"
#include "hhsmm/initialize.hpp"

#endif  // HHSMM_HHSMM_HPP
