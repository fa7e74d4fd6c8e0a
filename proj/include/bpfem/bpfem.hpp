#pragma once

#include "bpfem/analysis.hpp"
#include "bpfem/bounds.hpp"
#include "bpfem/core.hpp"
#include "bpfem/experiment.hpp"
#include "bpfem/fe_space.hpp"
#include "bpfem/forms.hpp"
#include "bpfem/linalg.hpp"
#include "bpfem/mesh.hpp"
#include "bpfem/problems.hpp"
#include "bpfem/quadrature.hpp"
#include "bpfem/stepper.hpp"
