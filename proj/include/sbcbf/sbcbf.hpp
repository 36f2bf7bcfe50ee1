#pragma once

#include "sbcbf/barrier.hpp"
#include "sbcbf/distance.hpp"
#include "sbcbf/dynamics.hpp"
#include "sbcbf/errors.hpp"
#include "sbcbf/geometry.hpp"
#include "sbcbf/linalg.hpp"
#include "sbcbf/qp.hpp"
#include "sbcbf/safety_filter.hpp"
#include "sbcbf/scenario.hpp"
#include "sbcbf/tracking.hpp"
