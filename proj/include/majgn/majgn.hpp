#pragma once

#include "majgn/error.hpp"
#include "majgn/operator.hpp"
#include "majgn/quadrature.hpp"
#include "majgn/majorant.hpp"
#include "majgn/problem.hpp"
#include "majgn/residual.hpp"
#include "majgn/solver.hpp"
#include "majgn/problem_suite.hpp"
#include "majgn/verification.hpp"
#include "majgn/io.hpp"
#include "majgn/config.hpp"
