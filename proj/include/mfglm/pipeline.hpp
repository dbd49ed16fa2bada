#pragma once

#include "mfglm/mem.hpp"
#include "mfglm/pace.hpp"
#include "mfglm/sample.hpp"
#include "mfglm/sofr.hpp"

namespace mfglm::pipeline {

/// Settings shared by every two-stage fit.
struct Options {
    int D = 3;        // MP_MEM window
    int K_n = 15;     // spline basis size
    int degree = 3;
    mem::ReconstructOptions reconstruct;
    pace::FpcaOptions fpca;
};

/// Stage one for any method. Oracle needs sample.X.
mem::ReconstructedCovariate reconstruct(const MultiLevelSample& sample, mem::Method method, const Options& options);

/// Stage one then stage two.
sofr::SofrFit fit(const MultiLevelSample& sample, mem::Method method, const Options& options);

}  // namespace mfglm::pipeline
