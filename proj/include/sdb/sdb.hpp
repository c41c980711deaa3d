#pragma once

#include "sdb/analysis.hpp"
#include "sdb/assembly.hpp"
#include "sdb/error.hpp"
#include "sdb/fe_basis.hpp"
#include "sdb/linear_solver.hpp"
#include "sdb/mesh.hpp"
#include "sdb/problem.hpp"
#include "sdb/space.hpp"
#include "sdb/stabilization.hpp"
#include "sdb/study.hpp"
#include "sdb/timestepper.hpp"
