#pragma once

#include "tvsbl/mm_outer.hpp"

namespace tvsbl {

// Unregularized MMV SBL baseline. EM update
//   gamma_i <- (1/L) sum_l mu_{l,i}^2 + [Sigma_{x|y}]_{ii}
// run with the same stopping rule and floor as tv_sbl. The cost trace (no
// regularizer) is non-increasing along the iterates.
SolveReport msbl_em(const Dictionary& dict, const MeasurementSet& data,
                    const SolverOptions& opts = {});

}  // namespace tvsbl
