#include <doctest.h>

#include <cmath>
#include <random>

#include "fedpower/baselines.hpp"
#include "fedpower/error.hpp"
#include "fedpower/rng.hpp"
#include "oracles.hpp"

using namespace fedpower;

namespace {

// Gram matrix V diag(lambda) V^T realised as a shard of d rows.
Matrix shard_with_spectrum(const Matrix& v, const Vector& lambda) {
  const double rows = double(v.rows());
  return std::sqrt(rows) * lambda.cwiseSqrt().asDiagonal() * v.transpose();
}

}  // namespace

TEST_SUITE("power method") {
  TEST_CASE("identity is a fixed point") {
    Matrix z0;
    const OrthonormalBasis z = power_method(Matrix::Identity(6, 6), 2, 10, 3,
                                            [&](int t, const Matrix& zt) {
                                              if (t == 1) z0 = zt;
                                            });
    CHECK(oracle::projection_distance(z.matrix(), z0) <= 1e-12);
  }

  TEST_CASE("two-eigenvalue decay") {
    Matrix m = Matrix::Zero(2, 2);
    m.diagonal() << 9, 1;
    const OrthonormalBasis z = power_method(m, 1, 30, 5);
    CHECK(sin_theta_k(z, OrthonormalBasis::canonical(2, 1)) <= std::pow(1.0 / 9, 30) + 1e-12);
  }

  TEST_CASE("constructed spectrum with gap two") {
    std::mt19937_64 gen(61);
    const Matrix v = oracle::random_orthonormal(10, 10, gen);
    Vector lambda(10);
    lambda << 8, 7, 6, 3, 2, 1.5, 1, 0.5, 0.25, 0.1;  // lambda_4 / lambda_3 = 1/2
    const Matrix m = v * lambda.asDiagonal() * v.transpose();
    const OrthonormalBasis z = power_method(m, 3, 100, 7);
    CHECK(sin_theta_k(z, OrthonormalBasis::adopt(v.leftCols(3))) <= 1e-10);
  }

  TEST_CASE("matches a textbook power iteration") {
    std::mt19937_64 gen(62);
    const Matrix a = oracle::gaussian(30, 8, gen);
    const Matrix m = a.transpose() * a;
    const OrthonormalBasis z = power_method(m, 3, 15, 11);
    const Matrix z0 = gaussian_matrix(8, 3, 11, {StreamSite::init, 0, 0});
    CHECK(oracle::projection_distance(z.matrix(), oracle::power_iterate(m, z0, 15)) <= 1e-10);
  }

  TEST_CASE("errors") {
    CHECK_THROWS_AS(power_method(Matrix::Identity(3, 2), 1, 1, 0), DimensionMismatch);
    CHECK_THROWS_AS(power_method(Matrix::Identity(3, 3), 4, 1, 0), InvalidArgument);
    CHECK_THROWS_AS(power_method(Matrix::Zero(3, 3), 1, 1, 0), RankDeficient);
  }
}

TEST_SUITE("distributed power method") {
  TEST_CASE("single shard is the power method") {
    std::mt19937_64 gen(63);
    const Matrix a = oracle::gaussian(40, 7, gen);
    const ShardedDataset data = partition(a, 1, PartitionMode::contiguous);
    CHECK(distributed_power(data, 3, 20, 4).matrix() ==
          power_method(data.global_gram(), 3, 20, 4).matrix());
  }

  TEST_CASE("replicated shards equal the power method") {
    std::mt19937_64 gen(64);
    const Matrix rows = oracle::gaussian(15, 6, gen);
    const ShardedDataset data({rows, rows, rows});
    const Matrix m = gram(rows);
    std::vector<Matrix> a, b;
    distributed_power(data, 2, 25, 8, [&](int, const Matrix& z) { a.push_back(z); });
    power_method(m, 2, 25, 8, [&](int, const Matrix& z) { b.push_back(z); });
    for (std::size_t t = 0; t < a.size(); ++t) CHECK((a[t] - b[t]).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_SUITE("averaging baselines") {
  TEST_CASE("single shard recovers the local subspace") {
    std::mt19937_64 gen(65);
    const Matrix a = oracle::gaussian(50, 8, gen);
    const ShardedDataset data = partition(a, 1, PartitionMode::contiguous);
    const OrthonormalBasis local = svd(gram(a)).u.leading(3);
    CHECK(projection_distance(uda(data, 3).u, local) <= 1e-10);
    const SvdResult w = wda(data, 3);
    CHECK(projection_distance(w.u, local) <= 1e-10);
    const Vector expect = svd(gram(a)).singular_values.head(3);
    CHECK((w.singular_values - expect).cwiseAbs().maxCoeff() <= 1e-12);
  }

  TEST_CASE("identical shards recover the shared subspace") {
    std::mt19937_64 gen(66);
    const Matrix rows = oracle::gaussian(12, 5, gen);
    const ShardedDataset data({rows, rows, rows, rows});
    const OrthonormalBasis local = svd(gram(rows)).u.leading(2);
    CHECK(projection_distance(uda(data, 2).u, local) <= 1e-10);
    CHECK(projection_distance(wda(data, 2).u, local) <= 1e-10);
  }

  TEST_CASE("common eigenvectors with different eigenvalues") {
    std::mt19937_64 gen(67);
    const Matrix v = oracle::random_orthonormal(6, 6, gen);
    Vector l1(6), l2(6), l3(6);
    l1 << 9, 5, 4, 1, 0.5, 0.1;
    l2 << 3, 2.5, 2, 0.2, 0.1, 0.05;
    l3 << 20, 6, 1.5, 1, 0.9, 0.2;
    const ShardedDataset data(
        {shard_with_spectrum(v, l1), shard_with_spectrum(v, l2), shard_with_spectrum(v, l3)});
    const SvdResult u = uda(data, 3);
    const SvdResult w = wda(data, 3);
    CHECK(projection_distance(u.u, w.u) <= 1e-9);
    CHECK(projection_distance(u.u, OrthonormalBasis::adopt(v.leftCols(3))) <= 1e-9);
  }

  TEST_CASE("averaged matrices are symmetric PSD") {
    std::mt19937_64 gen(68);
    const ShardedDataset data = partition(oracle::gaussian(90, 9, gen), 6,
                                          PartitionMode::shuffled, 1);
    for (bool weighted : {false, true}) {
      const Matrix avg = averaged_local_projector(data, 3, weighted);
      CHECK((avg - avg.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
      Eigen::SelfAdjointEigenSolver<Matrix> es(avg);
      CHECK(es.eigenvalues().minCoeff() >= -1e-12);
    }
  }
}

TEST_SUITE("randomized SVD") {
  TEST_CASE("sketch width") {
    CHECK(dr_svd_sketch_width(40, 5) == 13);
    CHECK(dr_svd_sketch_width(13, 5) == 7);
    CHECK(dr_svd_sketch_width(5, 5) == 5);
  }

  TEST_CASE("exact low rank input is recovered") {
    const Matrix a = synth({300, 40, {10, 8, 6, 4, 2}, 71});
    const ShardedDataset data = partition(a, 6, PartitionMode::contiguous);
    const SvdResult s = dr_svd(data, 5, 72);
    const OrthonormalBasis truth = svd(a).v.leading(5);
    CHECK(projection_distance(s.v, truth) <= 1e-9);
    CHECK(s.singular_values(0) == doctest::Approx(10.0).epsilon(1e-9));
    for (Index i = 0; i < s.singular_values.size(); ++i) {
      CHECK(s.singular_values(i) >= 0.0);
      if (i > 0) CHECK(s.singular_values(i) <= s.singular_values(i - 1));
    }
  }

  TEST_CASE("factor identities") {
    std::mt19937_64 gen(73);
    const Matrix a = oracle::gaussian(120, 20, gen);
    const ShardedDataset data = partition(a, 5, PartitionMode::shuffled, 3);
    const DrSvdFactors f = dr_svd_factors(data, 4, 9);
    CHECK(f.q.rank() == dr_svd_sketch_width(20, 4));
    CHECK(OrthonormalBasis::orthonormality_error(f.q.matrix()) <= 1e-10);
    const Matrix dense = f.q.matrix().transpose() * data.assembled();
    CHECK((f.b - dense).cwiseAbs().maxCoeff() <= 1e-12);
  }

  TEST_CASE("too few rows") {
    const ShardedDataset data({Matrix::Random(3, 20)});
    CHECK_THROWS_AS(dr_svd(data, 4, 1), InvalidArgument);
  }
}
