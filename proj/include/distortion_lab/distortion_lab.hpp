#pragma once

#include "distortion_lab/core.hpp"
#include "distortion_lab/quadrature.hpp"
#include "distortion_lab/growth.hpp"
#include "distortion_lab/growth_json.hpp"
#include "distortion_lab/field.hpp"
#include "distortion_lab/functional.hpp"
#include "distortion_lab/construct.hpp"
#include "distortion_lab/criteria.hpp"
#include "distortion_lab/grid_io.hpp"
#include "distortion_lab/report_io.hpp"
