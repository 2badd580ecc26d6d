#pragma once

#include "vmsd/errors.hpp"
#include "vmsd/mesh.hpp"
#include "vmsd/quadrature.hpp"
#include "vmsd/basis.hpp"
#include "vmsd/tensor.hpp"
#include "vmsd/fespace.hpp"
#include "vmsd/moments.hpp"
#include "vmsd/maxwell.hpp"
#include "vmsd/vlasov.hpp"
#include "vmsd/coupling.hpp"
#include "vmsd/riesz.hpp"
#include "vmsd/estimator.hpp"
#include "vmsd/dual_oracle.hpp"
