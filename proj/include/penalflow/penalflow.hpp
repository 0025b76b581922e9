#pragma once

#include "penalflow/errors.hpp"
#include "penalflow/geometry.hpp"
#include "penalflow/predicates.hpp"
#include "penalflow/delaunay.hpp"
#include "penalflow/mesh.hpp"
#include "penalflow/quadrature.hpp"
#include "penalflow/basis.hpp"
#include "penalflow/spaces.hpp"
#include "penalflow/problem.hpp"
#include "penalflow/assembly.hpp"
#include "penalflow/linear_solver.hpp"
#include "penalflow/solver.hpp"
#include "penalflow/metrics.hpp"
#include "penalflow/study.hpp"
#include "penalflow/config.hpp"
#include "penalflow/io.hpp"
