#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <zlib.h>

#include "fedpower/data.hpp"
#include "fedpower/error.hpp"
#include "oracles.hpp"

using namespace fedpower;

namespace {

std::vector<std::vector<double>> rows_of(const Matrix& a) {
  std::vector<std::vector<double>> out;
  for (Index i = 0; i < a.rows(); ++i) {
    std::vector<double> r(a.cols());
    for (Index j = 0; j < a.cols(); ++j) r[j] = a(i, j);
    out.push_back(std::move(r));
  }
  return out;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("fedpower_test_" + name);
}

}  // namespace

TEST_SUITE("libsvm") {
  TEST_CASE("sparse row with explicit width") {
    const LabeledMatrix m = parse_libsvm_text("1 1:0.5 3:-1.2\n", 3);
    REQUIRE(m.features.rows() == 1);
    CHECK(m.features(0, 0) == 0.5);
    CHECK(m.features(0, 1) == 0.0);
    CHECK(m.features(0, 2) == -1.2);
    CHECK(m.labels == std::vector<double>{1.0});
  }

  TEST_CASE("row without features") {
    const LabeledMatrix m = parse_libsvm_text("0\n", 2);
    CHECK(m.features == Matrix::Zero(1, 2));
  }

  TEST_CASE("width inferred from the largest index") {
    const LabeledMatrix m = parse_libsvm_text("+1 2:1\n-1 5:2 7:3\n\n");
    CHECK(m.features.rows() == 2);
    CHECK(m.features.cols() == 7);
    CHECK(m.labels == std::vector<double>{1.0, -1.0});
  }

  TEST_CASE("malformed input reports line and byte offset") {
    try {
      parse_libsvm_text("1 1:0.5\n1 2:abc\n", 3, "bad.txt");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      const std::string what = e.what();
      CHECK(what.find("bad.txt:2") != std::string::npos);
      CHECK(what.find("byte") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_libsvm_text("1 3:1 2:1\n", 3), ParseError);
    CHECK_THROWS_AS(parse_libsvm_text("1 0:1\n", 3), ParseError);
    CHECK_THROWS_AS(parse_libsvm_text("1 2:1 2:1\n", 3), ParseError);
    CHECK_THROWS_AS(parse_libsvm_text("x 1:1\n", 3), ParseError);
  }

  TEST_CASE("explicit width exceeded") {
    CHECK_THROWS_AS(parse_libsvm_text("1 4:1\n", 3), IndexOutOfRange);
  }

  TEST_CASE("write then parse round trip is exact") {
    std::mt19937_64 gen(21);
    Matrix a = oracle::gaussian(20, 6, gen);
    a(3, 2) = 0.0;
    a(7, 0) = 1e-300;
    std::vector<double> labels(20);
    for (int i = 0; i < 20; ++i) labels[i] = i % 3 - 1.0;
    std::ostringstream os;
    write_libsvm(os, a, labels);
    const LabeledMatrix back = parse_libsvm_text(os.str(), 6);
    CHECK(back.features == a);
    CHECK(back.labels == labels);
  }

  TEST_CASE("plain and gzip files") {
    const std::string text = "2 1:1.5 2:-3\n-1 3:4\n";
    const auto plain = temp_file("plain.txt");
    std::ofstream(plain) << text;
    const auto gz = temp_file("packed.txt.gz");
    gzFile f = gzopen(gz.string().c_str(), "wb");
    REQUIRE(f != nullptr);
    gzwrite(f, text.data(), unsigned(text.size()));
    gzclose(f);
    const LabeledMatrix a = parse_libsvm(plain, 3);
    const LabeledMatrix b = parse_libsvm(gz, 3);
    CHECK(a.features == b.features);
    CHECK(a.labels == b.labels);
    CHECK(a.features(1, 2) == 4.0);
    std::filesystem::remove(plain);
    std::filesystem::remove(gz);
    CHECK_THROWS_AS(parse_libsvm(temp_file("missing.txt")), IoError);
  }

  TEST_CASE("bundled housing data has the expected shape") {
    const LabeledMatrix h = parse_libsvm(std::filesystem::path(FEDPOWER_DATA_DIR) / "housing", 13);
    CHECK(h.features.rows() == 506);
    CHECK(h.features.cols() == 13);
  }
}

TEST_SUITE("scaling") {
  TEST_CASE("examples") {
    Matrix a(2, 3);
    a << -5, 0, 0, 5, 10, 0;
    Matrix expect(2, 3);
    expect << -1, 0, 0, 1, 1, 0;
    CHECK(scale_features(a) == expect);
  }

  TEST_CASE("idempotent and bounded") {
    std::mt19937_64 gen(22);
    const Matrix a = 7.0 * oracle::gaussian(30, 5, gen);
    const Matrix s = scale_features(a);
    CHECK(s.cwiseAbs().maxCoeff() <= 1.0);
    CHECK(scale_features(s) == s);
  }
}

TEST_SUITE("partition") {
  TEST_CASE("remainder rows go to the first shards") {
    const Matrix a = Matrix::Random(10, 2);
    const ShardedDataset d = partition(a, 3, PartitionMode::contiguous);
    CHECK(d.shard(0).rows() == 4);
    CHECK(d.shard(1).rows() == 3);
    CHECK(d.shard(2).rows() == 3);
    CHECK(d.rows() == 10);
    CHECK(d.assembled() == a);
  }

  TEST_CASE("single shard is the input") {
    const Matrix a = Matrix::Random(5, 3);
    CHECK(partition(a, 1, PartitionMode::contiguous).shard(0) == a);
  }

  TEST_CASE("shuffled partition is seeded and preserves rows") {
    std::mt19937_64 gen(23);
    const Matrix a = oracle::gaussian(37, 4, gen);
    const ShardedDataset x = partition(a, 5, PartitionMode::shuffled, 9);
    const ShardedDataset y = partition(a, 5, PartitionMode::shuffled, 9);
    const ShardedDataset z = partition(a, 5, PartitionMode::shuffled, 10);
    CHECK(x.assembled() == y.assembled());
    CHECK(x.assembled() != z.assembled());
    CHECK(x.assembled() != a);
    auto lhs = rows_of(x.assembled());
    auto rhs = rows_of(a);
    std::sort(lhs.begin(), lhs.end());
    std::sort(rhs.begin(), rhs.end());
    CHECK(lhs == rhs);
  }

  TEST_CASE("weights and global Gram") {
    std::mt19937_64 gen(24);
    const Matrix a = oracle::gaussian(53, 6, gen);
    const ShardedDataset d = partition(a, 7, PartitionMode::shuffled, 1);
    double sum = 0.0;
    for (double p : d.weights()) sum += p;
    CHECK(std::abs(sum - 1.0) <= 1e-12);
    CHECK(d.min_shard_rows() == 7);
    CHECK(d.max_weight() == doctest::Approx(8.0 / 53));
    CHECK((d.global_gram() - a.transpose() * a / 53.0).cwiseAbs().maxCoeff() <= 1e-12);
  }

  TEST_CASE("too many shards") {
    CHECK_THROWS_AS(partition(Matrix::Ones(3, 2), 4, PartitionMode::contiguous), TooManyShards);
    CHECK_THROWS_AS(partition(Matrix::Ones(3, 2), 0, PartitionMode::contiguous), TooManyShards);
  }

  TEST_CASE("dataset validation") {
    CHECK_THROWS(ShardedDataset({}));
    CHECK_THROWS(ShardedDataset({Matrix::Ones(2, 3), Matrix::Ones(2, 2)}));
    CHECK_THROWS(ShardedDataset({Matrix::Ones(2, 3), Matrix(0, 3)}));
  }

  TEST_CASE("sort rows by a column is stable") {
    Matrix a(4, 2);
    a << 3, 0, 1, 1, 3, 2, 0, 3;
    const Matrix s = sort_rows_by(a, 0);
    Matrix expect(4, 2);
    expect << 0, 3, 1, 1, 3, 0, 3, 2;
    CHECK(s == expect);
  }
}

TEST_SUITE("synthetic") {
  TEST_CASE("prescribed spectrum") {
    const Matrix a = synth({6, 4, {3, 2, 1}, 5});
    Eigen::JacobiSVD<Matrix> check(a);
    const Vector sv = check.singularValues();
    CHECK(std::abs(sv(0) - 3) <= 1e-9 * 3);
    CHECK(std::abs(sv(1) - 2) <= 1e-9 * 3);
    CHECK(std::abs(sv(2) - 1) <= 1e-9 * 3);
    CHECK(sv(3) <= 1e-9 * 3);
  }

  TEST_CASE("rank one") {
    Eigen::JacobiSVD<Matrix> check(synth({8, 5, {1}, 6}));
    CHECK(check.singularValues()(0) == doctest::Approx(1.0));
    CHECK(check.singularValues()(1) <= 1e-10);
  }

  TEST_CASE("deterministic per seed") {
    CHECK(synth({10, 4, {2, 1}, 1}) == synth({10, 4, {2, 1}, 1}));
    CHECK(synth({10, 4, {2, 1}, 1}) != synth({10, 4, {2, 1}, 2}));
  }

  TEST_CASE("invalid specs") {
    CHECK_THROWS(synth({3, 2, {3, 2, 1}, 0}));
    CHECK_THROWS(synth({5, 5, {1, 2}, 0}));
    CHECK_THROWS(synth({5, 5, {1, -1}, 0}));
  }
}
