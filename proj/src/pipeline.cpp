#include "mfglm/pipeline.hpp"

namespace mfglm::pipeline {

mem::ReconstructedCovariate reconstruct(const MultiLevelSample& sample, mem::Method method, const Options& options) {
    switch (method) {
    case mem::Method::UP_MEM: return mem::up_mem(sample.W, sample.weights, options.reconstruct);
    case mem::Method::MP_MEM: return mem::mp_mem(sample.W, options.D, sample.weights, options.reconstruct);
    case mem::Method::PACE: return pace::pace_reconstruct(sample.W, sample.grid, options.fpca);
    case mem::Method::Average: return mem::average_reconstruct(sample.W);
    case mem::Method::Naive: return mem::naive_reconstruct(sample.W);
    case mem::Method::Oracle:
        if (!sample.X) throw DataError("the oracle method needs the latent curves, which this data set does not carry");
        return mem::oracle_passthrough(*sample.X);
    }
    throw InvalidArgument("reconstruct: unknown method");
}

sofr::SofrFit fit(const MultiLevelSample& sample, mem::Method method, const Options& options) {
    const auto rc = reconstruct(sample, method, options);
    return sofr::estimate(rc, sample.Z, sample.Y, sample.grid, options.K_n, sample.weights, sample.covariate_names,
                          options.degree);
}

}  // namespace mfglm::pipeline
