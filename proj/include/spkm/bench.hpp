#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "spkm/kmeans.hpp"
#include "spkm/transport.hpp"

namespace spkm {

// ---- synthetic data ----

struct SyntheticSpec {
  std::size_t n = 1000, d = 2, k_true = 2;
  double cluster_std = 0.05;
  double sparsity = 0.0;  // fraction of entries forced to zero
  u64 seed = 1;
  Partition mode = Partition::Vertical;
  // Columns (vertical) or rows (horizontal) given to A; 0 means half.
  std::size_t split = 0;
  // Rows replaced by uniform points in [0,1]^d and labeled -1.
  std::size_t outliers = 0;

  std::size_t split_at() const;
  void validate() const;
};

struct Dataset {
  std::size_t n = 0, d = 0;
  std::vector<double> x;  // n x d
  std::vector<int> labels;
};

Dataset gen_dataset(const SyntheticSpec& spec);
PartitionSpec partition_of(const SyntheticSpec& spec);
// Party blocks of a full row-major matrix.
std::vector<double> party_block(const Dataset& ds, const PartitionSpec& part, Role r);
// Writes party_a.csv, party_b.csv and labels.csv into dir.
void write_dataset(const SyntheticSpec& spec, const Dataset& ds, const std::string& dir);

void write_csv(const std::string& path, const std::vector<double>& values, std::size_t rows, std::size_t cols);
std::vector<double> read_csv(const std::string& path, std::size_t& rows, std::size_t& cols);
std::vector<int> read_labels(const std::string& path);

// ---- run configuration ----

struct RunConfig {
  KMeansConfig kmeans;
  PartitionSpec part;
  Seed seed{};
  Role role = Role::A;
  Endpoint peer;
  std::string triple_store;
  std::string data;
  std::string report;
  std::string label;
  // Min-max scale local columns before encoding (vertical only).
  bool normalize = false;
};

// Fills only the keys present in j on top of `base`.
RunConfig parse_run_config(const nlohmann::json& j, RunConfig base = {});
RunConfig load_run_config(const std::string& path);

// Private protocol randomness of one party, derived from the run seed.
Seed party_seed(const Seed& run_seed, Role r);

// ---- reports ----

inline constexpr int kReportSchemaVersion = 1;

struct Report {
  std::string label;
  std::string role;  // "A", "B" or "system"
  std::string partition;
  bool sparse = false;
  std::size_t n = 0, d = 0, k = 0, max_iters = 0, iterations = 0;
  bool converged = false;
  unsigned l = 64, f = 20;
  RunMetrics metrics;
  double wall_seconds = 0;
  std::size_t triples_left = 0;
  std::vector<double> centroids;
  std::vector<std::size_t> assignment;
  std::optional<double> oracle_agreement;
  std::optional<double> jaccard;
};

nlohmann::json report_to_json(const Report& r);
// Throws std::runtime_error on a schema version mismatch or when the stored
// totals do not match the cells.
Report report_from_json(const nlohmann::json& j);
Report load_report(const std::string& path);
void save_report(const Report& r, const std::string& path);

// Offline bytes count dealer material plus offline channel traffic.
u64 online_bytes(const RunMetrics& m, Step s);
u64 offline_bytes(const RunMetrics& m, Step s);
// Both parties' reports folded into one system-level view.
Report merge_reports(const Report& a, const Report& b);

nlohmann::json report_compare(const std::vector<Report>& reports);
std::string compare_csv(const nlohmann::json& table);

// ---- evaluation ----

template <typename T>
double jaccard(const std::set<T>& r, const std::set<T>& truth) {
  if (r.empty() && truth.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& v : r) inter += truth.count(v);
  return static_cast<double>(inter) / static_cast<double>(r.size() + truth.size() - inter);
}

// Points farther from their centroid than the (1 - q) distance quantile.
std::set<std::size_t> extract_outliers(const std::vector<double>& x, std::size_t n, std::size_t d,
                                       const std::vector<double>& centroids,
                                       const std::vector<std::size_t>& assignment, double q = 0.05);
std::set<std::size_t> labeled_outliers(const std::vector<int>& labels);

// ---- drivers ----

// One party over TCP with a dealer-written triple store.
Report run_party(const RunConfig& cfg);

struct SelftestResult {
  Report a, b, system;
};
// Both parties in-process over loopback with in-memory dealer triples. The
// report carries oracle agreement and, with outliers, the Jaccard index.
SelftestResult selftest(const SyntheticSpec& spec, const KMeansConfig& cfg, const Seed& seed);

}  // namespace spkm
