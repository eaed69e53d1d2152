#pragma once

// Reference algorithms FedPower is measured against: the single-machine
// power method, its synchronous distributed form, and three one-shot
// divide-and-conquer estimators.

#include <cstdint>
#include <functional>

#include "fedpower/data.hpp"
#include "fedpower/linalg.hpp"

namespace fedpower {

/// Called with (t, Z_t) after every iteration.
using IterateObserver = std::function<void(int, const Matrix&)>;

/// Power iteration Y = M Z, Z = orth(Y) for T steps from the seeded Z_0
/// shared with the FedPower engine.
OrthonormalBasis power_method(const Matrix& m, Index r, int iterations,
                              std::uint64_t seed, const IterateObserver& observe = {});

/// Synchronous distributed power method: every step aggregates
/// Y = sum_i p_i M_i Z on the server and broadcasts orth(Y).
OrthonormalBasis distributed_power(const ShardedDataset& data, Index r, int iterations,
                                   std::uint64_t seed, const IterateObserver& observe = {});

/// Unweighted distributed averaging: top-k eigenpairs of
/// (1/m) sum_i V_i V_i^T, with V_i the local top-k eigenvectors.
SvdResult uda(const ShardedDataset& data, Index k);

/// Weighted distributed averaging: as uda with V_i S_i V_i^T.
SvdResult wda(const ShardedDataset& data, Index k);

/// The server-side averaged matrix used by uda/wda (exposed for tests).
Matrix averaged_local_projector(const ShardedDataset& data, Index k, bool weighted);

/// Distributed randomized SVD with sketch width r = k + floor((d - k) / 4).
/// Returns the leading k triplets (u is n x k, v is d x k).
SvdResult dr_svd(const ShardedDataset& data, Index k, std::uint64_t seed);

struct DrSvdFactors {
  OrthonormalBasis q;  // n x r range basis of A A^T A Omega
  Matrix b;            // r x d, sum_i Q_i^T A_i
};

/// The intermediate range basis and projected matrix of dr_svd.
DrSvdFactors dr_svd_factors(const ShardedDataset& data, Index k, std::uint64_t seed);

/// r = k + floor((d - k) / 4).
Index dr_svd_sketch_width(Index d, Index k);

}  // namespace fedpower
