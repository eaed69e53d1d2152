#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fedpower/linalg.hpp"

namespace fedpower {

/// Row shards A_1..A_m of a global n x d matrix with weights p_i = s_i / n.
class ShardedDataset {
 public:
  explicit ShardedDataset(std::vector<Matrix> shards);

  Index rows() const noexcept { return n_; }
  Index cols() const noexcept { return d_; }
  std::size_t workers() const noexcept { return shards_.size(); }

  const std::vector<Matrix>& shards() const noexcept { return shards_; }
  const Matrix& shard(std::size_t i) const { return shards_.at(i); }
  const std::vector<double>& weights() const noexcept { return weights_; }
  std::size_t min_shard_rows() const noexcept;
  double max_weight() const noexcept;

  /// M_i = A_i^T A_i / s_i for every shard.
  std::vector<Matrix> local_grams() const;
  /// M = sum_i p_i M_i, summed in worker order (equals A^T A / n).
  Matrix global_gram() const;
  /// The shards stacked back into one n x d matrix.
  Matrix assembled() const;

 private:
  std::vector<Matrix> shards_;
  std::vector<double> weights_;
  Index n_ = 0;
  Index d_ = 0;
};

struct LabeledMatrix {
  Matrix features;
  std::vector<double> labels;
};

/// Parse LIBSVM text (`label idx:val ...`, 1-based strictly increasing
/// indices) into a dense matrix. Without `dim` the width is the largest
/// index seen. Files ending in `.gz` are decompressed transparently.
LabeledMatrix parse_libsvm(const std::filesystem::path& path,
                           std::optional<Index> dim = std::nullopt);
LabeledMatrix parse_libsvm(std::istream& in, std::optional<Index> dim = std::nullopt,
                           std::string_view source = "<stream>");
LabeledMatrix parse_libsvm_text(std::string_view text,
                                std::optional<Index> dim = std::nullopt,
                                std::string_view source = "<text>");

/// Write rows in LIBSVM format with shortest round-trip number formatting,
/// omitting zeros.
void write_libsvm(std::ostream& out, const Matrix& a, std::span<const double> labels);

/// Divide each column by its largest absolute value; zero columns stay zero.
Matrix scale_features(const Matrix& a);

/// Stable sort of rows by the value in `column`, ascending.
Matrix sort_rows_by(const Matrix& a, Index column);

enum class PartitionMode { contiguous, shuffled };

/// Split rows into m shards; the first n mod m shards get one extra row.
/// Shuffled mode permutes rows with a seeded Fisher-Yates pass first.
ShardedDataset partition(const Matrix& a, std::size_t m, PartitionMode mode,
                         std::uint64_t seed = 0);

struct SyntheticSpec {
  Index n = 0;
  Index d = 0;
  std::vector<double> singular_values;  // descending, positive
  std::uint64_t seed = 0;
};

/// A = U diag(sv) V^T with U, V orthonormalized Gaussian draws.
Matrix synth(const SyntheticSpec& spec);

}  // namespace fedpower
