#include "fedpower/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <istream>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "fedpower/baselines.hpp"
#include "fedpower/error.hpp"
#include "fedpower/rng.hpp"

namespace fedpower {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// JSON helpers

void check_keys(const json& obj, std::string_view where,
                std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw ConfigError(std::string(where) + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown key '" + key + "' in " + std::string(where));
    }
  }
}

template <class T>
T get_as(const json& obj, const char* key, std::string_view where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string(where) + "." + key + ": " + e.what());
  }
}

template <class T>
T get_or(const json& obj, const char* key, T fallback, std::string_view where) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  return get_as<T>(obj, key, where);
}

double parse_epsilon(const json& v, std::string_view where) {
  if (v.is_null()) return kInfinity;
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "infinity" || s == "Infinity") return kInfinity;
    throw ConfigError(std::string(where) + ": expected a number or \"inf\", got '" + s + "'");
  }
  if (!v.is_number()) throw ConfigError(std::string(where) + ": expected a number");
  return v.get<double>();
}

json epsilon_json(double e) { return std::isinf(e) ? json("inf") : json(e); }

int positive_int(const json& obj, const char* key, std::string_view where) {
  const auto v = get_as<long long>(obj, key, where);
  if (v < 1 || v > std::numeric_limits<int>::max()) {
    throw ConfigError(std::string(where) + "." + key + " must be a positive integer");
  }
  return int(v);
}

ScheduleKind parse_schedule(const json& s) {
  check_keys(s, "schedule", {"kind", "p", "steps"});
  const auto kind = get_as<std::string>(s, "kind", "schedule");
  if (kind == "fixed") return FixedPeriod{positive_int(s, "p", "schedule")};
  if (kind == "decaying") return DecayingPeriod{positive_int(s, "p", "schedule")};
  if (kind == "explicit") return ExplicitSteps{get_as<std::vector<int>>(s, "steps", "schedule")};
  throw ConfigError("schedule.kind must be fixed, decaying or explicit");
}

json schedule_json(const ScheduleKind& kind) {
  return std::visit(
      [](const auto& s) -> json {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, FixedPeriod>) return {{"kind", "fixed"}, {"p", s.period}};
        if constexpr (std::is_same_v<S, DecayingPeriod>)
          return {{"kind", "decaying"}, {"p", s.initial_period}};
        if constexpr (std::is_same_v<S, ExplicitSteps>)
          return {{"kind", "explicit"}, {"steps", s.steps}};
      },
      kind);
}

Alignment parse_alignment(const std::string& s) {
  if (s == "opt") return Alignment::opt;
  if (s == "sign_fix" || s == "signfix") return Alignment::sign_fix;
  if (s == "none" || s == "vanilla") return Alignment::none;
  throw ConfigError("alignment must be opt, sign_fix or none");
}

const char* alignment_name(Alignment a) {
  switch (a) {
    case Alignment::opt: return "opt";
    case Alignment::sign_fix: return "sign_fix";
    case Alignment::none: return "none";
  }
  return "?";
}

SamplingScheme parse_scheme(const std::string& s) {
  if (s == "with_replacement" || s == "s1" || s == "scheme1") return SamplingScheme::with_replacement;
  if (s == "without_replacement" || s == "s2" || s == "scheme2")
    return SamplingScheme::without_replacement;
  throw ConfigError("participation.scheme must be with_replacement or without_replacement");
}

// ---------------------------------------------------------------------------
// Repeat fan-out. Each index writes only its own slot, so results do not
// depend on the thread count.

template <class F>
void for_each_index(std::size_t count, std::size_t threads, F&& body) {
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(count, 1));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < threads; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            body(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

double final_error(const RunTrace& trace) {
  if (trace.records.empty()) throw InvalidArgument("run produced no records");
  return trace.records.back().sin_theta_k;
}

double min_error(const RunTrace& trace, int window) {
  double best = kInfinity;
  for (const auto& rec : trace.records) {
    if (rec.t <= window) best = std::min(best, rec.sin_theta_k);
  }
  return best;
}

OrthonormalBasis reference_from(const Matrix& global, Index k) {
  return svd(gram(global)).u.leading(k);
}

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += (c == '\n' ? ' ' : c);
  }
  return out + '"';
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_field(std::string_view s, std::size_t line_no) {
  if (s == "inf") return kInfinity;
  if (s == "-inf") return -kInfinity;
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ParseError("trace line " + std::to_string(line_no) + ": bad number '" +
                     std::string(s) + "'");
  }
  return v;
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// Configuration

ExperimentConfig parse_config(const json& doc) {
  check_keys(doc, "config",
             {"dataset", "workers", "partition", "k", "r", "iterations", "schedule",
              "alignment", "privacy", "participation", "repeat", "seed", "out", "threads",
              "record_every_step", "record_wall_time", "min_window"});
  ExperimentConfig cfg;

  const json& ds = doc.at("dataset");
  check_keys(ds, "dataset", {"libsvm", "dim", "synthetic", "scale", "sort_by_column"});
  if (ds.contains("libsvm") == ds.contains("synthetic")) {
    throw ConfigError("dataset needs exactly one of 'libsvm' or 'synthetic'");
  }
  if (ds.contains("libsvm")) {
    cfg.dataset.libsvm = get_as<std::string>(ds, "libsvm", "dataset");
    if (ds.contains("dim")) cfg.dataset.libsvm_dim = positive_int(ds, "dim", "dataset");
    cfg.dataset.scale = get_or<bool>(ds, "scale", true, "dataset");
  } else {
    const json& sy = ds.at("synthetic");
    check_keys(sy, "dataset.synthetic", {"n", "d", "singular_values", "seed"});
    SyntheticSpec spec;
    spec.n = positive_int(sy, "n", "dataset.synthetic");
    spec.d = positive_int(sy, "d", "dataset.synthetic");
    spec.singular_values =
        get_as<std::vector<double>>(sy, "singular_values", "dataset.synthetic");
    spec.seed = get_or<std::uint64_t>(sy, "seed", 0, "dataset.synthetic");
    cfg.dataset.synthetic = std::move(spec);
    cfg.dataset.scale = get_or<bool>(ds, "scale", false, "dataset");
  }
  if (ds.contains("sort_by_column") && !ds.at("sort_by_column").is_null()) {
    const auto c = get_as<long long>(ds, "sort_by_column", "dataset");
    if (c < 0) throw ConfigError("dataset.sort_by_column must be >= 0");
    cfg.dataset.sort_by_column = Index(c);
  }

  cfg.workers = std::size_t(positive_int(doc, "workers", "config"));
  const auto part = get_or<std::string>(doc, "partition", "shuffled", "config");
  if (part == "shuffled") {
    cfg.partition = PartitionMode::shuffled;
  } else if (part == "contiguous") {
    cfg.partition = PartitionMode::contiguous;
  } else {
    throw ConfigError("partition must be shuffled or contiguous");
  }

  RunConfig& run = cfg.run;
  run.k = positive_int(doc, "k", "config");
  run.r = doc.contains("r") ? positive_int(doc, "r", "config") : run.k;
  if (run.r < run.k) throw ConfigError("r must be >= k");
  run.iterations = positive_int(doc, "iterations", "config");
  if (doc.contains("schedule")) run.schedule = parse_schedule(doc.at("schedule"));
  run.alignment = parse_alignment(get_or<std::string>(doc, "alignment", "sign_fix", "config"));

  if (doc.contains("privacy") && !doc.at("privacy").is_null()) {
    const json& pv = doc.at("privacy");
    check_keys(pv, "privacy", {"epsilon", "delta", "epsilon_local", "epsilon_server"});
    run.privacy.epsilon = parse_epsilon(pv.value("epsilon", json()), "privacy.epsilon");
    run.privacy.delta = get_or<double>(pv, "delta", 1e-5, "privacy");
    if (pv.contains("epsilon_local") || pv.contains("epsilon_server")) {
      if (pv.contains("epsilon") && !pv.at("epsilon").is_null()) {
        throw ConfigError("privacy: give either epsilon or epsilon_local/epsilon_server");
      }
      run.privacy.split = EpsilonSplit{
          parse_epsilon(pv.value("epsilon_local", json()), "privacy.epsilon_local"),
          parse_epsilon(pv.value("epsilon_server", json()), "privacy.epsilon_server")};
    }
  }

  if (doc.contains("participation") && !doc.at("participation").is_null()) {
    const json& pp = doc.at("participation");
    check_keys(pp, "participation", {"mode", "participants", "scheme"});
    const auto mode = get_or<std::string>(pp, "mode", "full", "participation");
    if (mode == "full") {
      run.participation = FullParticipation{};
    } else if (mode == "partial") {
      run.participation = PartialParticipation{
          std::size_t(positive_int(pp, "participants", "participation")),
          parse_scheme(get_or<std::string>(pp, "scheme", "without_replacement",
                                           "participation"))};
    } else {
      throw ConfigError("participation.mode must be full or partial");
    }
  }

  cfg.repeat = std::size_t(doc.contains("repeat") ? positive_int(doc, "repeat", "config") : 1);
  run.seed = get_or<std::uint64_t>(doc, "seed", 0, "config");
  cfg.out = get_or<std::string>(doc, "out", "", "config");
  run.threads = std::size_t(doc.contains("threads") ? positive_int(doc, "threads", "config") : 1);
  run.record_every_step = get_or<bool>(doc, "record_every_step", false, "config");
  run.record_wall_time = get_or<bool>(doc, "record_wall_time", false, "config");
  if (doc.contains("min_window") && !doc.at("min_window").is_null()) {
    cfg.min_window = positive_int(doc, "min_window", "config");
  }
  return cfg;
}

json to_json(const ExperimentConfig& cfg) {
  json ds;
  if (cfg.dataset.libsvm) {
    ds["libsvm"] = cfg.dataset.libsvm->generic_string();
    if (cfg.dataset.libsvm_dim) ds["dim"] = *cfg.dataset.libsvm_dim;
  }
  if (cfg.dataset.synthetic) {
    const auto& s = *cfg.dataset.synthetic;
    ds["synthetic"] = {{"n", s.n}, {"d", s.d}, {"singular_values", s.singular_values},
                       {"seed", s.seed}};
  }
  ds["scale"] = cfg.dataset.scale;
  if (cfg.dataset.sort_by_column) ds["sort_by_column"] = *cfg.dataset.sort_by_column;

  const RunConfig& run = cfg.run;
  json privacy = {{"delta", run.privacy.delta}};
  if (run.privacy.split) {
    privacy["epsilon_local"] = epsilon_json(run.privacy.split->local);
    privacy["epsilon_server"] = epsilon_json(run.privacy.split->server);
  } else {
    privacy["epsilon"] = epsilon_json(run.privacy.epsilon);
  }
  json participation = std::visit(
      [](const auto& p) -> json {
        if constexpr (std::is_same_v<std::decay_t<decltype(p)>, FullParticipation>) {
          return {{"mode", "full"}};
        } else {
          return {{"mode", "partial"},
                  {"participants", p.participants},
                  {"scheme", p.scheme == SamplingScheme::with_replacement
                                 ? "with_replacement"
                                 : "without_replacement"}};
        }
      },
      run.participation);

  json doc = {{"dataset", ds},
              {"workers", cfg.workers},
              {"partition", cfg.partition == PartitionMode::shuffled ? "shuffled" : "contiguous"},
              {"k", run.k},
              {"r", run.r},
              {"iterations", run.iterations},
              {"schedule", schedule_json(run.schedule)},
              {"alignment", alignment_name(run.alignment)},
              {"privacy", privacy},
              {"participation", participation},
              {"repeat", cfg.repeat},
              {"seed", run.seed},
              {"threads", run.threads},
              {"record_every_step", run.record_every_step},
              {"record_wall_time", run.record_wall_time}};
  if (cfg.min_window) doc["min_window"] = *cfg.min_window;
  if (!cfg.out.empty()) doc["out"] = cfg.out.generic_string();
  return doc;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  ExperimentConfig cfg = parse_config(doc);
  if (cfg.dataset.libsvm && cfg.dataset.libsvm->is_relative()) {
    cfg.dataset.libsvm = path.parent_path() / *cfg.dataset.libsvm;
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Data

Matrix load_matrix(const DatasetSource& source) {
  Matrix a;
  if (source.libsvm) {
    a = parse_libsvm(*source.libsvm, source.libsvm_dim).features;
  } else if (source.synthetic) {
    a = synth(*source.synthetic);
  } else {
    throw ConfigError("dataset has no source");
  }
  if (source.scale) a = scale_features(a);
  if (source.sort_by_column) {
    if (*source.sort_by_column >= a.cols()) {
      throw IndexOutOfRange("sort_by_column " + std::to_string(*source.sort_by_column) +
                            " is outside the " + std::to_string(a.cols()) + " columns");
    }
    a = sort_rows_by(a, *source.sort_by_column);
  }
  return a;
}

std::uint64_t repeat_seed(std::uint64_t root, std::size_t j) {
  return derive_seed(root, {StreamSite::repeat, 0, std::uint32_t(j)});
}

std::pair<double, double> mean_std(std::span<const double> xs) {
  if (xs.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= double(xs.size());
  if (xs.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / double(xs.size() - 1))};
}

// ---------------------------------------------------------------------------
// Experiments

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const Matrix global = load_matrix(cfg.dataset);
  return run_experiment(cfg, global, reference_from(global, cfg.run.k));
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const Matrix& global,
                                const OrthonormalBasis& reference) {
  ExperimentResult result;
  result.config = cfg;
  const std::size_t repeats = cfg.repeat;
  result.seeds.resize(repeats);
  for (std::size_t j = 0; j < repeats; ++j) result.seeds[j] = repeat_seed(cfg.run.seed, j);

  std::vector<std::optional<RunTrace>> traces(repeats);
  const bool fan_out = repeats > 1 && cfg.run.threads > 1;
  for_each_index(repeats, fan_out ? cfg.run.threads : 1, [&](std::size_t j) {
    RunConfig run = cfg.run;
    run.seed = result.seeds[j];
    if (fan_out) run.threads = 1;
    const ShardedDataset data = partition(global, cfg.workers, cfg.partition, run.seed);
    traces[j] = fedpower::run(data, run, reference);
  });

  const int window = cfg.min_window.value_or(std::min(kDefaultMinWindow, cfg.run.iterations));
  std::vector<double> finals, mins;
  for (auto& t : traces) {
    finals.push_back(final_error(*t));
    mins.push_back(min_error(*t, window));
    result.traces.push_back(std::move(*t));
  }
  std::tie(result.summary.final_mean, result.summary.final_std) = mean_std(finals);
  std::tie(result.summary.min_mean, result.summary.min_std) = mean_std(mins);
  return result;
}

namespace {

// Where the output goes is not part of what was computed.
std::string header_config(const ExperimentConfig& cfg) {
  json doc = to_json(cfg);
  doc.erase("out");
  return doc.dump();
}

}  // namespace

void write_trace_csv(std::ostream& out, const ExperimentResult& result) {
  out << "# fedpower trace\n";
  out << "# schema_version=" << kTraceSchemaVersion << '\n';
  out << "# config=" << header_config(result.config) << '\n';
  out << "# seed=" << result.config.run.seed << '\n';
  out << "# streams=" << stream_derivation_note() << '\n';
  out << kTraceColumns << '\n';
  for (std::size_t j = 0; j < result.traces.size(); ++j) {
    out << "# repeat=" << j << " seed=" << result.seeds[j] << '\n';
    for (const auto& r : result.traces[j].records) {
      out << r.t << ',' << r.comm_count << ',' << format_number(r.eps_spent) << ','
          << format_number(r.delta_spent) << ',' << format_number(r.sin_theta_k) << ','
          << format_number(r.rho_t) << ',' << format_number(r.eta) << ','
          << format_number(r.wall_ms) << '\n';
    }
  }
  const Summary& s = result.summary;
  out << "# summary repeats=" << result.traces.size()
      << " final_sin_theta_k_mean=" << format_number(s.final_mean)
      << " final_sin_theta_k_std=" << format_number(s.final_std)
      << " min_sin_theta_k_mean=" << format_number(s.min_mean)
      << " min_sin_theta_k_std=" << format_number(s.min_std) << '\n';
}

std::vector<std::vector<RunRecord>> parse_trace_csv(std::istream& in) {
  std::vector<std::vector<RunRecord>> repeats;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (line.rfind("# repeat=", 0) == 0) repeats.emplace_back();
      continue;
    }
    if (!header_seen) {
      if (line != kTraceColumns) {
        throw ParseError("trace line " + std::to_string(line_no) + ": unexpected header");
      }
      header_seen = true;
      continue;
    }
    const auto f = split_commas(line);
    if (f.size() != 8) {
      throw ParseError("trace line " + std::to_string(line_no) + ": expected 8 fields");
    }
    if (repeats.empty()) repeats.emplace_back();
    RunRecord r;
    r.t = int(parse_field(f[0], line_no));
    r.comm_count = std::size_t(parse_field(f[1], line_no));
    r.eps_spent = parse_field(f[2], line_no);
    r.delta_spent = parse_field(f[3], line_no);
    r.sin_theta_k = parse_field(f[4], line_no);
    r.rho_t = parse_field(f[5], line_no);
    r.eta = parse_field(f[6], line_no);
    r.wall_ms = parse_field(f[7], line_no);
    repeats.back().push_back(r);
  }
  if (!header_seen) throw ParseError("trace has no header row");
  return repeats;
}

std::vector<ComparisonRow> compare_baselines(const ExperimentConfig& cfg) {
  const Matrix global = load_matrix(cfg.dataset);
  const Index k = cfg.run.k;
  const OrthonormalBasis reference = reference_from(global, k);

  const std::vector<std::string> names = {"FedPower-OPT", "FedPower-SignFix",
                                          "FedPower-vanilla", "UDA", "WDA", "DR-SVD"};
  const std::size_t repeats = cfg.repeat;
  std::vector<std::vector<double>> errors(names.size(), std::vector<double>(repeats));

  const bool fan_out = repeats > 1 && cfg.run.threads > 1;
  for_each_index(repeats, fan_out ? cfg.run.threads : 1, [&](std::size_t j) {
    const std::uint64_t seed = repeat_seed(cfg.run.seed, j);
    const ShardedDataset data = partition(global, cfg.workers, cfg.partition, seed);
    const Alignment rules[] = {Alignment::opt, Alignment::sign_fix, Alignment::none};
    for (std::size_t a = 0; a < 3; ++a) {
      RunConfig run = cfg.run;
      run.seed = seed;
      run.alignment = rules[a];
      if (fan_out) run.threads = 1;
      errors[a][j] = sin_theta_k(fedpower::run(data, run, reference).z_bar,
                                 reference);
    }
    errors[3][j] = sin_theta_k(uda(data, k).u, reference);
    errors[4][j] = sin_theta_k(wda(data, k).u, reference);
    errors[5][j] = sin_theta_k(dr_svd(data, k, seed).v, reference);
  });

  std::vector<ComparisonRow> rows;
  for (std::size_t a = 0; a < names.size(); ++a) {
    ComparisonRow row;
    row.algorithm = names[a];
    std::tie(row.mean, row.std) = mean_std(errors[a]);
    row.errors = std::move(errors[a]);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_comparison_csv(std::ostream& out, const ExperimentConfig& cfg,
                          std::span<const ComparisonRow> rows) {
  out << "# fedpower comparison\n";
  out << "# schema_version=" << kTraceSchemaVersion << '\n';
  out << "# config=" << header_config(cfg) << '\n';
  out << "algorithm,mean_sin_theta_k,std_sin_theta_k,repeats\n";
  for (const auto& row : rows) {
    out << row.algorithm << ',' << format_number(row.mean) << ',' << format_number(row.std)
        << ',' << row.errors.size() << '\n';
  }
}

std::vector<SweepEntry> privacy_sweep(const ExperimentConfig& cfg,
                                      std::span<const double> epsilons) {
  const Matrix global = load_matrix(cfg.dataset);
  const OrthonormalBasis reference = reference_from(global, cfg.run.k);
  const std::size_t rounds = build_schedule(cfg.run.schedule, cfg.run.iterations).size();

  std::vector<SweepEntry> entries;
  for (double eps : epsilons) {
    SweepEntry entry;
    entry.epsilon = eps;
    ExperimentConfig c = cfg;
    if (c.run.privacy.split) {
      c.run.privacy.split->local = eps;
    } else {
      c.run.privacy.epsilon = eps;
    }
    try {
      PrivacyConfig p = c.run.privacy;
      p.rounds = rounds;
      validate(p);
      entry.total = account(p);
      entry.result = run_experiment(c, global, reference);
    } catch (const Error& e) {
      entry.status = e.kind();
      entry.message = e.what();
    }
    entries.push_back(std::move(entry));
  }
  return entries;
}

void write_sweep_csv(std::ostream& out, const ExperimentConfig& cfg,
                     std::span<const SweepEntry> entries) {
  out << "# fedpower privacy sweep\n";
  out << "# schema_version=" << kTraceSchemaVersion << '\n';
  out << "# config=" << header_config(cfg) << '\n';
  out << "epsilon,status,eps_total,delta_total,final_sin_theta_k_mean,"
         "final_sin_theta_k_std,min_sin_theta_k_mean,min_sin_theta_k_std,message\n";
  for (const auto& e : entries) {
    out << format_number(e.epsilon) << ',' << e.status << ',' << format_number(e.total.epsilon)
        << ',' << format_number(e.total.delta) << ',';
    if (e.result) {
      const Summary& s = e.result->summary;
      out << format_number(s.final_mean) << ',' << format_number(s.final_std) << ','
          << format_number(s.min_mean) << ',' << format_number(s.min_std);
    } else {
      out << ",,,";
    }
    out << ',' << (e.message.empty() ? "" : csv_quote(e.message)) << '\n';
  }
}

json inspect_dataset(const ExperimentConfig& cfg) {
  const Matrix global = load_matrix(cfg.dataset);
  const ShardedDataset data = partition(global, cfg.workers, cfg.partition, cfg.run.seed);
  std::vector<Index> sizes;
  for (const auto& s : data.shards()) sizes.push_back(s.rows());
  const SvdResult spec = svd(data.global_gram());
  std::vector<double> eig(spec.singular_values.data(),
                          spec.singular_values.data() + spec.singular_values.size());

  json out = {{"rows", data.rows()},
              {"cols", data.cols()},
              {"workers", data.workers()},
              {"min_shard_rows", data.min_shard_rows()},
              {"max_shard_rows", *std::max_element(sizes.begin(), sizes.end())},
              {"max_weight", data.max_weight()},
              {"eta", local_approx_eta(data)},
              {"eigenvalues", eig}};
  const Index k = cfg.run.k;
  const Index r = cfg.run.r;
  if (k < Index(eig.size()) && eig[k - 1] > 0) out["ratio_k"] = eig[k] / eig[k - 1];
  if (r < Index(eig.size()) && eig[k - 1] > 0) out["ratio_r"] = eig[r] / eig[k - 1];
  return out;
}

}  // namespace fedpower
