#include "fedpower/baselines.hpp"

#include "fedpower/rng.hpp"

namespace fedpower {

namespace {

Matrix initial_basis(Index d, Index r, std::uint64_t seed) {
  if (r < 1 || r > d) throw InvalidArgument("iteration rank must lie in [1, d]");
  return orth(gaussian_matrix(d, r, seed, {StreamSite::init, 0, 0})).matrix();
}

}  // namespace

OrthonormalBasis power_method(const Matrix& m, Index r, int iterations,
                              std::uint64_t seed, const IterateObserver& observe) {
  if (m.rows() != m.cols()) throw DimensionMismatch("power_method needs a square matrix");
  if (iterations < 0) throw InvalidArgument("iterations must be >= 0");
  Matrix z = initial_basis(m.rows(), r, seed);
  for (int t = 1; t <= iterations; ++t) {
    z = orth(m * z).matrix();
    if (observe) observe(t, z);
  }
  return OrthonormalBasis::adopt(std::move(z));
}

OrthonormalBasis distributed_power(const ShardedDataset& data, Index r, int iterations,
                                   std::uint64_t seed, const IterateObserver& observe) {
  if (iterations < 0) throw InvalidArgument("iterations must be >= 0");
  const auto grams = data.local_grams();
  const auto& p = data.weights();
  Matrix z = initial_basis(data.cols(), r, seed);
  for (int t = 1; t <= iterations; ++t) {
    Matrix y = Matrix::Zero(z.rows(), z.cols());
    for (std::size_t i = 0; i < grams.size(); ++i) y += p[i] * (grams[i] * z);
    z = orth(y).matrix();
    if (observe) observe(t, z);
  }
  return OrthonormalBasis::adopt(std::move(z));
}

Matrix averaged_local_projector(const ShardedDataset& data, Index k, bool weighted) {
  if (k < 1 || k > data.cols()) throw InvalidArgument("k must lie in [1, d]");
  const Index d = data.cols();
  Matrix avg = Matrix::Zero(d, d);
  for (const auto& mi : data.local_grams()) {
    const SvdResult local = svd(mi).truncated(k);
    const Matrix& v = local.u.matrix();
    if (weighted) {
      avg += v * local.singular_values.asDiagonal() * v.transpose();
    } else {
      avg += v * v.transpose();
    }
  }
  avg /= double(data.workers());
  // Symmetrize away rounding so the eigensolver sees an exactly symmetric input.
  return (avg + avg.transpose()) / 2.0;
}

SvdResult uda(const ShardedDataset& data, Index k) {
  return svd(averaged_local_projector(data, k, false)).truncated(k);
}

SvdResult wda(const ShardedDataset& data, Index k) {
  return svd(averaged_local_projector(data, k, true)).truncated(k);
}

Index dr_svd_sketch_width(Index d, Index k) { return k + (d - k) / 4; }

DrSvdFactors dr_svd_factors(const ShardedDataset& data, Index k, std::uint64_t seed) {
  const Index d = data.cols();
  if (k < 1 || k > d) throw InvalidArgument("k must lie in [1, d]");
  const Index r = dr_svd_sketch_width(d, k);
  if (data.rows() < r) throw InvalidArgument("dr_svd needs n >= r");

  // The server sees the stacked matrix here, as the method prescribes.
  const Matrix a = data.assembled();
  const Matrix omega = gaussian_matrix(d, r, seed, {StreamSite::sketch, 0, 0});
  const Matrix y = a * (a.transpose() * (a * omega));
  OrthonormalBasis q = orth(y, RankPolicy::complete);

  Matrix b = Matrix::Zero(r, d);
  Index row = 0;
  for (const auto& shard : data.shards()) {
    b += q.matrix().middleRows(row, shard.rows()).transpose() * shard;
    row += shard.rows();
  }
  return {std::move(q), std::move(b)};
}

SvdResult dr_svd(const ShardedDataset& data, Index k, std::uint64_t seed) {
  const DrSvdFactors f = dr_svd_factors(data, k, seed);
  const SvdResult small = svd(f.b);
  const Matrix u = f.q.matrix() * small.u.matrix();
  return {OrthonormalBasis::adopt(u.leftCols(k), 1e-9), small.singular_values.head(k),
          small.v.leading(k)};
}

}  // namespace fedpower
