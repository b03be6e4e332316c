#include "spkm/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "spkm/dealer.hpp"
#include "spkm/errors.hpp"

namespace spkm {

using nlohmann::json;

// ---- synthetic data ----

std::size_t SyntheticSpec::split_at() const {
  if (split) return split;
  return mode == Partition::Vertical ? (d + 1) / 2 : (n + 1) / 2;
}

void SyntheticSpec::validate() const {
  if (n == 0 || d == 0 || k_true == 0) throw std::invalid_argument("n, d and k must be positive");
  if (!(sparsity >= 0.0 && sparsity < 1.0)) throw std::invalid_argument("sparsity must be in [0, 1)");
  if (!(cluster_std >= 0.0)) throw std::invalid_argument("cluster std must be non-negative");
  if (outliers > n) throw std::invalid_argument("more outliers than samples");
  const std::size_t s = split_at();
  if (mode == Partition::Vertical && (d < 2 || s == 0 || s >= d)) {
    throw std::invalid_argument("vertical split needs 0 < d_a < d");
  }
  if (mode == Partition::Horizontal && (n < 2 || s == 0 || s >= n)) {
    throw std::invalid_argument("horizontal split needs 0 < n_a < n");
  }
}

Dataset gen_dataset(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, spec.cluster_std);
  std::uniform_int_distribution<std::size_t> pick(0, spec.k_true - 1);
  // Clipping below at 1e-6 keeps non-forced entries nonzero, so the zero
  // fraction is exactly the injected sparsity.
  auto clip = [](double v) { return std::clamp(v, 1e-6, 1.0); };

  Dataset ds;
  ds.n = spec.n;
  ds.d = spec.d;
  std::vector<double> centers(spec.k_true * spec.d);
  for (auto& c : centers) c = unit(rng);

  std::vector<std::size_t> order(spec.n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> is_outlier(spec.n, false);
  for (std::size_t i = 0; i < spec.outliers; ++i) is_outlier[order[i]] = true;

  ds.x.resize(spec.n * spec.d);
  ds.labels.resize(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    if (is_outlier[i]) {
      ds.labels[i] = -1;
      for (std::size_t c = 0; c < spec.d; ++c) ds.x[i * spec.d + c] = clip(unit(rng));
      continue;
    }
    const std::size_t j = pick(rng);
    ds.labels[i] = static_cast<int>(j);
    for (std::size_t c = 0; c < spec.d; ++c) ds.x[i * spec.d + c] = clip(centers[j * spec.d + c] + noise(rng));
  }
  if (spec.sparsity > 0) {
    std::bernoulli_distribution zero(spec.sparsity);
    for (auto& v : ds.x)
      if (zero(rng)) v = 0.0;
  }
  return ds;
}

PartitionSpec partition_of(const SyntheticSpec& spec) {
  PartitionSpec p;
  p.mode = spec.mode;
  const std::size_t s = spec.split_at();
  if (spec.mode == Partition::Vertical) {
    p.n_a = p.n_b = spec.n;
    p.d_a = s;
    p.d_b = spec.d - s;
  } else {
    p.n_a = s;
    p.n_b = spec.n - s;
    p.d_a = p.d_b = spec.d;
  }
  return p;
}

std::vector<double> party_block(const Dataset& ds, const PartitionSpec& part, Role r) {
  std::vector<double> out;
  if (part.mode == Partition::Vertical) {
    const std::size_t c0 = r == Role::A ? 0 : part.d_a, w = part.cols_of(r);
    out.reserve(ds.n * w);
    for (std::size_t i = 0; i < ds.n; ++i)
      for (std::size_t c = 0; c < w; ++c) out.push_back(ds.x[i * ds.d + c0 + c]);
  } else {
    const std::size_t r0 = r == Role::A ? 0 : part.n_a, h = part.rows_of(r);
    out.assign(ds.x.begin() + static_cast<std::ptrdiff_t>(r0 * ds.d),
               ds.x.begin() + static_cast<std::ptrdiff_t>((r0 + h) * ds.d));
  }
  return out;
}

void write_csv(const std::string& path, const std::vector<double>& values, std::size_t rows, std::size_t cols) {
  if (values.size() != rows * cols) throw ShapeError("write_csv: shape does not match values");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  char buf[32];
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", values[r * cols + c]);
      if (c) out << ',';
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::vector<double> read_csv(const std::string& path, std::size_t& rows, std::size_t& cols) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<double> out;
  rows = cols = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::size_t count = 0;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      std::size_t used = 0;
      double v = 0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw std::runtime_error(path + ": not a number: '" + cell + "'");
      }
      out.push_back(v);
      ++count;
    }
    if (rows == 0) cols = count;
    if (count != cols) throw std::runtime_error(path + ": ragged row " + std::to_string(rows + 1));
    ++rows;
  }
  return out;
}

std::vector<int> read_labels(const std::string& path) {
  std::size_t rows = 0, cols = 0;
  const auto v = read_csv(path, rows, cols);
  if (cols > 1) throw std::runtime_error(path + ": labels must be one column");
  std::vector<int> out;
  for (double x : v) out.push_back(static_cast<int>(x));
  return out;
}

void write_dataset(const SyntheticSpec& spec, const Dataset& ds, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const PartitionSpec part = partition_of(spec);
  const std::filesystem::path base(dir);
  write_csv((base / "party_a.csv").string(), party_block(ds, part, Role::A), part.rows_of(Role::A),
            part.cols_of(Role::A));
  write_csv((base / "party_b.csv").string(), party_block(ds, part, Role::B), part.rows_of(Role::B),
            part.cols_of(Role::B));
  std::vector<double> labels(ds.labels.begin(), ds.labels.end());
  write_csv((base / "labels.csv").string(), labels, ds.n, 1);
}

// ---- run configuration ----

namespace {

Seed parse_seed(const json& v) {
  if (v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0)) return seed_from_u64(v.get<u64>());
  if (v.is_string()) return seed_from_hex(v.get<std::string>());
  throw std::invalid_argument("seed must be 32 hex digits or an unsigned integer");
}

Role parse_role(const std::string& s) {
  if (s == "A" || s == "a") return Role::A;
  if (s == "B" || s == "b") return Role::B;
  throw std::invalid_argument("role must be A or B");
}

}  // namespace

RunConfig parse_run_config(const json& j, RunConfig c) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  KMeansConfig& k = c.kmeans;
  for (const auto& [key, v] : j.items()) {
    if (key == "k") k.k = v.get<std::size_t>();
    else if (key == "max_iters") k.max_iters = v.get<std::size_t>();
    else if (key == "epsilon") k.epsilon = v.get<double>();
    else if (key == "init") k.init = parse_init(v.get<std::string>());
    else if (key == "partition") c.part.mode = parse_partition(v.get<std::string>());
    else if (key == "sparse") k.sparse = v.get<bool>();
    else if (key == "fixed_point") {
      if (v.contains("l")) k.fp.l = v.at("l").get<unsigned>();
      if (v.contains("f")) k.fp.f = v.at("f").get<unsigned>();
    } else if (key == "reciprocal_iters") k.reciprocal_iters = v.get<std::size_t>();
    else if (key == "overprovision") k.overprovision = v.get<double>();
    else if (key == "open_results") k.open_results = v.get<bool>();
    else if (key == "debug_open_trajectory") k.debug_open_trajectory = v.get<bool>();
    else if (key == "he_key_bits") k.he_key_bits = v.get<unsigned>();
    else if (key == "allow_test_keys") k.allow_test_keys = v.get<bool>();
    else if (key == "explicit_centroids") k.explicit_centroids = v.get<std::vector<double>>();
    else if (key == "seed") c.seed = parse_seed(v);
    else if (key == "role") c.role = parse_role(v.get<std::string>());
    else if (key == "peer") c.peer = Endpoint::parse(v.get<std::string>());
    else if (key == "triple_store") c.triple_store = v.get<std::string>();
    else if (key == "data") c.data = v.get<std::string>();
    else if (key == "report") c.report = v.get<std::string>();
    else if (key == "label") c.label = v.get<std::string>();
    else if (key == "normalize") c.normalize = v.get<bool>();
    else if (key == "shape") {
      c.part.n_a = v.at("n_a").get<std::size_t>();
      c.part.n_b = v.at("n_b").get<std::size_t>();
      c.part.d_a = v.at("d_a").get<std::size_t>();
      c.part.d_b = v.at("d_b").get<std::size_t>();
    } else {
      throw std::invalid_argument("unknown config key: " + key);
    }
  }
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  RunConfig c = parse_run_config(j);
  // Relative paths are taken from the config's directory.
  const auto dir = std::filesystem::path(path).parent_path();
  for (std::string* p : {&c.triple_store, &c.data, &c.report}) {
    if (!p->empty() && std::filesystem::path(*p).is_relative()) *p = (dir / *p).string();
  }
  return c;
}

Seed party_seed(const Seed& run_seed, Role r) {
  std::vector<std::uint8_t> buf = {'s', 'p', 'k', 'm', '-', 'p', 'a', 'r', 't', 'y', static_cast<std::uint8_t>(r)};
  buf.insert(buf.end(), run_seed.begin(), run_seed.end());
  const auto h = sha256(buf);
  Seed s{};
  std::copy_n(h.begin(), s.size(), s.begin());
  return s;
}

// ---- reports ----

namespace {

constexpr Step kSteps[] = {Step::S1, Step::S2, Step::S3, Step::Other};
constexpr Phase kPhases[] = {Phase::Online, Phase::Offline};

json cell_json(const MetricsCell& c) {
  return {{"bytes_sent", c.bytes_sent},
          {"bytes_received", c.bytes_received},
          {"rounds", c.rounds},
          {"dealer_bytes", c.dealer_bytes},
          {"wall_seconds", c.wall_seconds}};
}

MetricsCell cell_from(const json& j) {
  MetricsCell c;
  c.bytes_sent = j.at("bytes_sent").get<u64>();
  c.bytes_received = j.at("bytes_received").get<u64>();
  c.rounds = j.at("rounds").get<u64>();
  c.dealer_bytes = j.at("dealer_bytes").get<u64>();
  c.wall_seconds = j.at("wall_seconds").get<double>();
  return c;
}

bool same_counts(const MetricsCell& a, const MetricsCell& b) {
  return a.bytes_sent == b.bytes_sent && a.bytes_received == b.bytes_received && a.rounds == b.rounds &&
         a.dealer_bytes == b.dealer_bytes && std::abs(a.wall_seconds - b.wall_seconds) < 1e-6;
}

}  // namespace

json report_to_json(const Report& r) {
  json metrics, totals;
  for (Phase p : kPhases) {
    json ph;
    for (Step s : kSteps) ph[step_name(s)] = cell_json(r.metrics.at(p, s));
    metrics[phase_name(p)] = ph;
    totals[phase_name(p)] = cell_json(r.metrics.phase_total(p));
  }
  totals["all"] = cell_json(r.metrics.total());
  json j = {{"schema_version", kReportSchemaVersion},
            {"label", r.label},
            {"role", r.role},
            {"partition", r.partition},
            {"sparse", r.sparse},
            {"n", r.n},
            {"d", r.d},
            {"k", r.k},
            {"max_iters", r.max_iters},
            {"iterations", r.iterations},
            {"converged", r.converged},
            {"fixed_point", {{"l", r.l}, {"f", r.f}}},
            {"wall_seconds", r.wall_seconds},
            {"triples_left", r.triples_left},
            {"metrics", metrics},
            {"totals", totals},
            {"centroids", r.centroids},
            {"assignment", r.assignment}};
  if (r.oracle_agreement) j["oracle_agreement"] = *r.oracle_agreement;
  if (r.jaccard) j["jaccard"] = *r.jaccard;
  return j;
}

Report report_from_json(const json& j) {
  const int version = j.at("schema_version").get<int>();
  if (version != kReportSchemaVersion) {
    throw std::runtime_error("report schema version " + std::to_string(version) + " is not supported");
  }
  Report r;
  r.label = j.at("label").get<std::string>();
  r.role = j.at("role").get<std::string>();
  r.partition = j.at("partition").get<std::string>();
  r.sparse = j.at("sparse").get<bool>();
  r.n = j.at("n").get<std::size_t>();
  r.d = j.at("d").get<std::size_t>();
  r.k = j.at("k").get<std::size_t>();
  r.max_iters = j.at("max_iters").get<std::size_t>();
  r.iterations = j.at("iterations").get<std::size_t>();
  r.converged = j.at("converged").get<bool>();
  r.l = j.at("fixed_point").at("l").get<unsigned>();
  r.f = j.at("fixed_point").at("f").get<unsigned>();
  r.wall_seconds = j.at("wall_seconds").get<double>();
  r.triples_left = j.at("triples_left").get<std::size_t>();
  for (Phase p : kPhases)
    for (Step s : kSteps) r.metrics.at(p, s) = cell_from(j.at("metrics").at(phase_name(p)).at(step_name(s)));
  const json& t = j.at("totals");
  for (Phase p : kPhases) {
    if (!same_counts(cell_from(t.at(phase_name(p))), r.metrics.phase_total(p))) {
      throw std::runtime_error(std::string("report totals do not reconcile for phase ") + phase_name(p));
    }
  }
  if (!same_counts(cell_from(t.at("all")), r.metrics.total())) throw std::runtime_error("report totals do not reconcile");
  r.centroids = j.at("centroids").get<std::vector<double>>();
  r.assignment = j.at("assignment").get<std::vector<std::size_t>>();
  if (j.contains("oracle_agreement")) r.oracle_agreement = j.at("oracle_agreement").get<double>();
  if (j.contains("jaccard")) r.jaccard = j.at("jaccard").get<double>();
  return r;
}

Report load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  in >> j;
  return report_from_json(j);
}

void save_report(const Report& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << report_to_json(r).dump(2) << '\n';
}

u64 online_bytes(const RunMetrics& m, Step s) { return m.at(Phase::Online, s).bytes_sent; }

u64 offline_bytes(const RunMetrics& m, Step s) {
  const MetricsCell& c = m.at(Phase::Offline, s);
  return c.bytes_sent + c.dealer_bytes;
}

Report merge_reports(const Report& a, const Report& b) {
  if (a.n != b.n || a.d != b.d || a.k != b.k || a.partition != b.partition || a.sparse != b.sparse) {
    throw std::runtime_error("reports describe different jobs");
  }
  Report r = a;
  r.role = "system";
  for (Phase p : kPhases)
    for (Step s : kSteps) {
      MetricsCell& c = r.metrics.at(p, s);
      const MetricsCell& o = b.metrics.at(p, s);
      c.bytes_sent += o.bytes_sent;
      c.bytes_received += o.bytes_received;
      c.dealer_bytes += o.dealer_bytes;
      c.rounds = std::max(c.rounds, o.rounds);
      c.wall_seconds = std::max(c.wall_seconds, o.wall_seconds);
    }
  r.wall_seconds = std::max(a.wall_seconds, b.wall_seconds);
  r.triples_left = a.triples_left + b.triples_left;
  return r;
}

namespace {

const std::vector<std::string> kNumericCols = {"online_bytes",  "offline_bytes",  "total_bytes",
                                               "online_rounds", "online_seconds", "offline_seconds"};

json step_row(const Report& r, const char* step, const MetricsCell& on, const MetricsCell& off) {
  const u64 onb = on.bytes_sent, offb = off.bytes_sent + off.dealer_bytes;
  return {{"label", r.label},
          {"role", r.role},
          {"partition", r.partition},
          {"mode", r.sparse ? "sparse" : "dense"},
          {"n", r.n},
          {"d", r.d},
          {"k", r.k},
          {"step", step},
          {"online_bytes", onb},
          {"offline_bytes", offb},
          {"total_bytes", onb + offb},
          {"online_rounds", on.rounds},
          {"online_seconds", on.wall_seconds},
          {"offline_seconds", off.wall_seconds}};
}

std::vector<json> report_rows(const Report& r) {
  std::vector<json> rows;
  for (Step s : kSteps) rows.push_back(step_row(r, step_name(s), r.metrics.at(Phase::Online, s), r.metrics.at(Phase::Offline, s)));
  rows.push_back(step_row(r, "total", r.metrics.phase_total(Phase::Online), r.metrics.phase_total(Phase::Offline)));
  return rows;
}

}  // namespace

json report_compare(const std::vector<Report>& reports) {
  if (reports.size() < 2) throw std::invalid_argument("report_compare needs at least two reports");
  json rows = json::array(), deltas = json::array();
  const auto base = report_rows(reports[0]);
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto rs = report_rows(reports[i]);
    for (std::size_t k = 0; k < rs.size(); ++k) {
      rows.push_back(rs[k]);
      if (i == 0) continue;
      json d = {{"label", reports[i].label}, {"versus", reports[0].label}, {"step", rs[k]["step"]}};
      for (const auto& col : kNumericCols) d[col] = rs[k][col].get<double>() - base[k][col].get<double>();
      deltas.push_back(d);
    }
  }
  return {{"schema_version", kReportSchemaVersion}, {"rows", rows}, {"deltas", deltas}};
}

std::string compare_csv(const json& table) {
  auto cell = [](const json& v) {
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
  };
  std::ostringstream out;
  const std::vector<std::string> head = {"label", "role", "partition", "mode", "n", "d", "k", "step"};
  out << "kind,versus";
  for (const auto& h : head) out << ',' << h;
  for (const auto& h : kNumericCols) out << ',' << h;
  out << '\n';
  for (const auto& r : table.at("rows")) {
    out << "value,";
    for (const auto& h : head) out << ',' << cell(r.at(h));
    for (const auto& h : kNumericCols) out << ',' << cell(r.at(h));
    out << '\n';
  }
  for (const auto& r : table.at("deltas")) {
    out << "delta," << cell(r.at("versus")) << ',' << cell(r.at("label")) << ",,,,,,," << cell(r.at("step"));
    for (const auto& h : kNumericCols) out << ',' << cell(r.at(h));
    out << '\n';
  }
  return out.str();
}

// ---- evaluation ----

std::set<std::size_t> extract_outliers(const std::vector<double>& x, std::size_t n, std::size_t d,
                                       const std::vector<double>& centroids,
                                       const std::vector<std::size_t>& assignment, double q) {
  if (x.size() != n * d || assignment.size() != n) throw ShapeError("extract_outliers: bad shapes");
  if (!(q > 0 && q < 1)) throw std::invalid_argument("quantile must be in (0, 1)");
  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = assignment[i];
    if ((j + 1) * d > centroids.size()) throw ShapeError("extract_outliers: assignment out of range");
    double s = 0;
    for (std::size_t c = 0; c < d; ++c) s += (x[i * d + c] - centroids[j * d + c]) * (x[i * d + c] - centroids[j * d + c]);
    dist[i] = std::sqrt(s);
  }
  std::vector<double> sorted = dist;
  std::sort(sorted.begin(), sorted.end());
  const double cut = sorted[static_cast<std::size_t>(std::floor((1.0 - q) * static_cast<double>(n - 1)))];
  std::set<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i)
    if (dist[i] > cut) out.insert(i);
  return out;
}

std::set<std::size_t> labeled_outliers(const std::vector<int>& labels) {
  std::set<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] < 0) out.insert(i);
  return out;
}

// ---- drivers ----

namespace {

Report make_report(const ProtocolResult& res, const PartitionSpec& part, const KMeansConfig& cfg, Role role,
                   const std::string& label, double seconds) {
  Report r;
  r.label = label;
  r.role = role_name(role);
  r.partition = partition_name(part.mode);
  r.sparse = cfg.sparse;
  r.n = part.n();
  r.d = part.d();
  r.k = cfg.k;
  r.max_iters = cfg.max_iters;
  r.iterations = res.iterations;
  r.converged = res.converged;
  r.l = cfg.fp.l;
  r.f = cfg.fp.f;
  r.metrics = res.metrics;
  r.wall_seconds = seconds;
  r.triples_left = res.triples_left;
  r.centroids = res.opened_mu;
  r.assignment = res.opened_assignment;
  return r;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

Report run_party(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const PartitionSpec& part = cfg.part;
  part.validate();
  const Role me = cfg.role;
  std::size_t rows = 0, cols = 0;
  auto values = read_csv(cfg.data, rows, cols);
  if (rows != part.rows_of(me) || cols != part.cols_of(me)) {
    throw ShapeError(cfg.data + " is " + std::to_string(rows) + "x" + std::to_string(cols) + ", expected " +
                     std::to_string(part.rows_of(me)) + "x" + std::to_string(part.cols_of(me)));
  }
  if (cfg.normalize) {
    if (part.mode != Partition::Vertical) throw std::invalid_argument("local normalization needs vertical partitioning");
    values = normalize_inputs(values, rows, cols);
  }
  const LocalData data = make_local_data(std::move(values), rows, cols, cfg.kmeans.fp, cfg.kmeans.sparse);
  FileTripleSource store(cfg.triple_store);
  if (store.header().role != me) throw std::runtime_error(cfg.triple_store + " was dealt to the other party");
  if (store.ring_bits() != cfg.kmeans.fp.l) throw std::runtime_error("triple store ring size differs from the config");
  auto ch = connect(me, cfg.peer);
  Session s(*ch, &store, cfg.kmeans.fp, party_seed(cfg.seed, me));
  const ProtocolResult res = run_protocol(s, data, part, cfg.kmeans);
  ch->close();
  Report r = make_report(res, part, cfg.kmeans, me, cfg.label, seconds_since(t0));
  if (!cfg.report.empty()) save_report(r, cfg.report);
  return r;
}

SelftestResult selftest(const SyntheticSpec& spec, const KMeansConfig& cfg_in, const Seed& seed) {
  const auto t0 = std::chrono::steady_clock::now();
  const Dataset ds = gen_dataset(spec);
  const PartitionSpec part = partition_of(spec);
  KMeansConfig cfg = cfg_in;
  cfg.open_results = true;
  // A seeded explicit start lets the plaintext oracle begin from the same centroids.
  const bool oracle_ok = cfg.init != InitMode::LocalKMeans;
  if (cfg.init == InitMode::Random) {
    Prg prg(seed, 0x0c1e);
    std::vector<std::size_t> idx;
    while (idx.size() < cfg.k) {
      const std::size_t i = prg.uniform(ds.n);
      if (std::find(idx.begin(), idx.end(), i) == idx.end()) idx.push_back(i);
    }
    cfg.init = InitMode::Explicit;
    cfg.explicit_centroids.clear();
    for (std::size_t i : idx)
      cfg.explicit_centroids.insert(cfg.explicit_centroids.end(), ds.x.begin() + static_cast<std::ptrdiff_t>(i * ds.d),
                                    ds.x.begin() + static_cast<std::ptrdiff_t>((i + 1) * ds.d));
  }

  const TripleBudget budget = compute_budget(job_params(part, cfg));
  auto dealt = dealer_generate(budget, seed);
  auto [ca, cb] = loopback_pair();
  Session sa(*ca, dealt.a.get(), cfg.fp, party_seed(seed, Role::A));
  Session sb(*cb, dealt.b.get(), cfg.fp, party_seed(seed, Role::B));
  const LocalData la = make_local_data(party_block(ds, part, Role::A), part.rows_of(Role::A), part.cols_of(Role::A), cfg.fp, cfg.sparse);
  const LocalData lb = make_local_data(party_block(ds, part, Role::B), part.rows_of(Role::B), part.cols_of(Role::B), cfg.fp, cfg.sparse);

  ProtocolResult rb;
  std::exception_ptr err_b;
  std::thread tb([&] {
    try {
      rb = run_protocol(sb, lb, part, cfg);
    } catch (...) {
      err_b = std::current_exception();
      cb->close();
    }
  });
  ProtocolResult ra;
  try {
    ra = run_protocol(sa, la, part, cfg);
  } catch (...) {
    ca->close();
    tb.join();
    throw;
  }
  tb.join();
  if (err_b) std::rethrow_exception(err_b);

  const double secs = seconds_since(t0);
  SelftestResult out;
  out.a = make_report(ra, part, cfg, Role::A, "selftest", secs);
  out.b = make_report(rb, part, cfg, Role::B, "selftest", secs);
  out.system = merge_reports(out.a, out.b);
  if (oracle_ok && !ra.opened_assignment.empty()) {
    const auto oracle = plaintext_kmeans(ds.x, ds.n, ds.d, cfg.k, cfg.explicit_centroids, cfg.max_iters, cfg.epsilon,
                                         UpdateRule::PhantomMember);
    std::size_t same = 0;
    for (std::size_t i = 0; i < ds.n; ++i) same += ra.opened_assignment[i] == oracle.trajectory.back()[i];
    out.system.oracle_agreement = static_cast<double>(same) / static_cast<double>(ds.n);
  }
  if (spec.outliers > 0 && !ra.opened_assignment.empty()) {
    const auto found = extract_outliers(ds.x, ds.n, ds.d, ra.opened_mu, ra.opened_assignment);
    out.system.jaccard = jaccard(found, labeled_outliers(ds.labels));
  }
  return out;
}

}  // namespace spkm
