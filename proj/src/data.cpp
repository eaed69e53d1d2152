#include "fedpower/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "fedpower/rng.hpp"

namespace fedpower {

// ---------------------------------------------------------------------------
// ShardedDataset

ShardedDataset::ShardedDataset(std::vector<Matrix> shards) : shards_(std::move(shards)) {
  if (shards_.empty()) throw InvalidArgument("dataset needs at least one shard");
  d_ = shards_.front().cols();
  for (std::size_t i = 0; i < shards_.size(); ++i) {
    if (shards_[i].rows() < 1) {
      throw InvalidArgument("shard " + std::to_string(i) + " is empty");
    }
    if (shards_[i].cols() != d_) {
      throw DimensionMismatch("shard " + std::to_string(i) + " has " +
                              std::to_string(shards_[i].cols()) + " columns, expected " +
                              std::to_string(d_));
    }
    n_ += shards_[i].rows();
  }
  weights_.reserve(shards_.size());
  for (const auto& s : shards_) weights_.push_back(double(s.rows()) / double(n_));
}

std::size_t ShardedDataset::min_shard_rows() const noexcept {
  Index s = shards_.front().rows();
  for (const auto& a : shards_) s = std::min(s, a.rows());
  return std::size_t(s);
}

double ShardedDataset::max_weight() const noexcept {
  return *std::max_element(weights_.begin(), weights_.end());
}

std::vector<Matrix> ShardedDataset::local_grams() const {
  std::vector<Matrix> out;
  out.reserve(shards_.size());
  for (const auto& a : shards_) out.push_back(gram(a));
  return out;
}

Matrix ShardedDataset::global_gram() const {
  Matrix m = Matrix::Zero(d_, d_);
  for (std::size_t i = 0; i < shards_.size(); ++i) m += weights_[i] * gram(shards_[i]);
  return m;
}

Matrix ShardedDataset::assembled() const {
  Matrix a(n_, d_);
  Index row = 0;
  for (const auto& s : shards_) {
    a.middleRows(row, s.rows()) = s;
    row += s.rows();
  }
  return a;
}

// ---------------------------------------------------------------------------
// LIBSVM

namespace {

std::string read_file(const std::filesystem::path& path) {
  if (path.extension() == ".gz") {
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open " + path.string());
    std::string out;
    char buf[1 << 16];
    int got;
    while ((got = gzread(f, buf, sizeof buf)) > 0) out.append(buf, std::size_t(got));
    const bool failed = got < 0;
    gzclose(f);
    if (failed) throw IoError("gzip stream error in " + path.string());
    return out;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r'; }

// from_chars does not accept a leading '+', which LIBSVM labels often carry.
std::from_chars_result parse_double(const char* b, const char* e, double& out) {
  if (b != e && *b == '+' && b + 1 != e && *(b + 1) != '-') ++b;
  return std::from_chars(b, e, out);
}

struct Entry {
  Index column;  // 0-based
  double value;
};

}  // namespace

LabeledMatrix parse_libsvm_text(std::string_view text, std::optional<Index> dim,
                                std::string_view source) {
  if (dim && *dim < 0) throw InvalidArgument("negative feature dimension");
  std::vector<std::vector<Entry>> rows;
  std::vector<double> labels;
  Index max_index = 0;

  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    ++line_no;
    const std::size_t line_start = pos;
    std::size_t line_end = text.find('\n', pos);
    if (line_end == std::string_view::npos) line_end = text.size();
    pos = line_end + 1;

    auto fail = [&](std::size_t at, const std::string& what) -> ParseError {
      std::ostringstream os;
      os << source << ":" << line_no << ": byte " << at << ": " << what;
      return ParseError(os.str());
    };

    std::size_t i = line_start;
    auto skip_space = [&] {
      while (i < line_end && is_space(text[i])) ++i;
    };
    skip_space();
    if (i == line_end) continue;  // blank line

    double label = 0.0;
    {
      const char* b = text.data() + i;
      const char* e = text.data() + line_end;
      auto [p, ec] = parse_double(b, e, label);
      if (ec != std::errc() || (p != e && !is_space(*p))) throw fail(i, "bad label");
      i = std::size_t(p - text.data());
    }

    std::vector<Entry> entries;
    long long prev = 0;
    for (skip_space(); i < line_end; skip_space()) {
      const char* b = text.data() + i;
      const char* e = text.data() + line_end;
      long long idx = 0;
      auto [p, ec] = std::from_chars(b, e, idx);
      if (ec != std::errc() || p == e || *p != ':') throw fail(i, "expected index:value");
      if (idx < 1) throw fail(i, "feature index must be >= 1");
      if (idx <= prev) throw fail(i, "feature indices must be strictly increasing");
      if (dim && idx > *dim) {
        std::ostringstream os;
        os << source << ":" << line_no << ": byte " << i << ": index " << idx
           << " exceeds dimension " << *dim;
        throw IndexOutOfRange(os.str());
      }
      const std::size_t value_at = std::size_t(p + 1 - text.data());
      double value = 0.0;
      auto [q, ec2] = parse_double(p + 1, e, value);
      if (ec2 != std::errc() || (q != e && !is_space(*q))) throw fail(value_at, "bad value");
      if (!std::isfinite(value)) throw fail(value_at, "non-finite value");
      entries.push_back({Index(idx - 1), value});
      prev = idx;
      max_index = std::max<Index>(max_index, Index(idx));
      i = std::size_t(q - text.data());
    }
    rows.push_back(std::move(entries));
    labels.push_back(label);
  }

  const Index d = dim ? *dim : max_index;
  LabeledMatrix out{Matrix::Zero(Index(rows.size()), d), std::move(labels)};
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (const auto& e : rows[r]) out.features(Index(r), e.column) = e.value;
  }
  return out;
}

LabeledMatrix parse_libsvm(std::istream& in, std::optional<Index> dim,
                           std::string_view source) {
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_libsvm_text(ss.str(), dim, source);
}

LabeledMatrix parse_libsvm(const std::filesystem::path& path, std::optional<Index> dim) {
  return parse_libsvm_text(read_file(path), dim, path.string());
}

namespace {

void put_number(std::ostream& out, double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.write(buf, p - buf);
}

}  // namespace

void write_libsvm(std::ostream& out, const Matrix& a, std::span<const double> labels) {
  if (labels.size() != std::size_t(a.rows())) {
    throw DimensionMismatch("label count does not match row count");
  }
  for (Index r = 0; r < a.rows(); ++r) {
    put_number(out, labels[std::size_t(r)]);
    for (Index c = 0; c < a.cols(); ++c) {
      if (a(r, c) == 0.0) continue;
      out << ' ' << (c + 1) << ':';
      put_number(out, a(r, c));
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Preprocessing

Matrix scale_features(const Matrix& a) {
  Matrix out = a;
  if (out.rows() == 0) return out;
  for (Index c = 0; c < out.cols(); ++c) {
    const double m = out.col(c).cwiseAbs().maxCoeff();
    if (m > 0.0) out.col(c) /= m;
  }
  return out;
}

Matrix sort_rows_by(const Matrix& a, Index column) {
  if (column < 0 || column >= a.cols()) throw IndexOutOfRange("sort column out of range");
  std::vector<Index> order(std::size_t(a.rows()));
  std::iota(order.begin(), order.end(), Index(0));
  std::stable_sort(order.begin(), order.end(),
                   [&](Index x, Index y) { return a(x, column) < a(y, column); });
  Matrix out(a.rows(), a.cols());
  for (Index r = 0; r < a.rows(); ++r) out.row(r) = a.row(order[std::size_t(r)]);
  return out;
}

ShardedDataset partition(const Matrix& a, std::size_t m, PartitionMode mode,
                         std::uint64_t seed) {
  const auto n = std::size_t(a.rows());
  if (m == 0 || m > n) {
    throw TooManyShards("cannot split " + std::to_string(n) + " rows into " +
                        std::to_string(m) + " shards");
  }
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index(0));
  if (mode == PartitionMode::shuffled) {
    NoiseStream stream(seed, {StreamSite::partition, 0, 0});
    for (std::size_t i = n; i > 1; --i) {
      const auto j = std::size_t(stream.below(i));
      std::swap(order[i - 1], order[j]);
    }
  }
  const std::size_t base = n / m;
  const std::size_t extra = n % m;
  std::vector<Matrix> shards;
  shards.reserve(m);
  std::size_t row = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t s = base + (i < extra ? 1 : 0);
    Matrix shard(Index(s), a.cols());
    for (std::size_t r = 0; r < s; ++r) shard.row(Index(r)) = a.row(order[row + r]);
    row += s;
    shards.push_back(std::move(shard));
  }
  return ShardedDataset(std::move(shards));
}

Matrix synth(const SyntheticSpec& spec) {
  const auto q = Index(spec.singular_values.size());
  if (spec.n < 1 || spec.d < 1) throw InvalidArgument("synthetic matrix needs n, d >= 1");
  if (q < 1 || q > std::min(spec.n, spec.d)) {
    throw InvalidArgument("synthetic spectrum length must lie in [1, min(n, d)]");
  }
  for (Index j = 0; j < q; ++j) {
    const double s = spec.singular_values[std::size_t(j)];
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw InvalidArgument("synthetic singular values must be positive and finite");
    }
    if (j > 0 && s > spec.singular_values[std::size_t(j - 1)]) {
      throw InvalidArgument("synthetic singular values must be non-increasing");
    }
  }
  const auto u = orth(gaussian_matrix(spec.n, q, spec.seed, {StreamSite::synth_left, 0, 0}));
  const auto v = orth(gaussian_matrix(spec.d, q, spec.seed, {StreamSite::synth_right, 0, 0}));
  const Vector s = Eigen::Map<const Vector>(spec.singular_values.data(), q);
  return u.matrix() * s.asDiagonal() * v.matrix().transpose();
}

}  // namespace fedpower
