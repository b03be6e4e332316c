#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "spkm/arith_share.hpp"
#include "spkm/budget.hpp"
#include "spkm/session.hpp"
#include "spkm/sparse_matrix.hpp"

namespace spkm {

struct PartitionSpec {
  Partition mode = Partition::Vertical;
  std::size_t n_a = 0, n_b = 0, d_a = 0, d_b = 0;

  std::size_t n() const { return mode == Partition::Vertical ? n_a : n_a + n_b; }
  std::size_t d() const { return mode == Partition::Vertical ? d_a + d_b : d_a; }
  // Shape of the block held by `r`.
  std::size_t rows_of(Role r) const;
  std::size_t cols_of(Role r) const;
  void validate() const;
};

enum class InitMode { Random, LocalKMeans, Explicit };
const char* init_name(InitMode m);
InitMode parse_init(const std::string& s);

struct KMeansConfig {
  std::size_t k = 2;
  std::size_t max_iters = 10;
  double epsilon = 1e-4;
  InitMode init = InitMode::Random;
  bool sparse = false;
  FixedPointConfig fp;
  // 0 selects ceil(log2 n) + 6.
  std::size_t reciprocal_iters = 0;
  double overprovision = 1.0;
  bool open_results = false;
  // Opens C after every iteration. Leaks the assignments; tests only.
  bool debug_open_trajectory = false;
  unsigned he_key_bits = 2048;
  bool allow_test_keys = false;
  // Explicit init: k x d row-major, supplied by party A.
  std::vector<double> explicit_centroids;

  std::size_t theta(std::size_t n) const;
  void validate() const;
};

JobParams job_params(const PartitionSpec& part, const KMeansConfig& cfg);
// Hash over every setting both parties must agree on (not seeds or paths).
u64 config_hash(const PartitionSpec& part, const KMeansConfig& cfg);

// ---- plaintext reference ----

enum class UpdateRule {
  Standard,       // mean of members; an empty cluster keeps its centroid
  PhantomMember,  // previous centroid counted as one extra member
};

struct PlainResult {
  std::vector<double> centroids;                  // k x d
  std::vector<std::vector<std::size_t>> trajectory;  // assignment per iteration
  std::size_t iterations = 0;
  bool converged = false;
};

// Row-major n x d data. Ties go to the lowest centroid index.
PlainResult plaintext_kmeans(const std::vector<double>& x, std::size_t n, std::size_t d, std::size_t k,
                             const std::vector<double>& init, std::size_t max_iters, double epsilon,
                             UpdateRule rule = UpdateRule::Standard);
std::vector<std::size_t> assign_nearest(const std::vector<double>& x, std::size_t n, std::size_t d,
                                        const std::vector<double>& centroids, std::size_t k);

// Per-column min-max scaling to [0, 1]; constant columns become 0.
std::vector<double> normalize_inputs(const std::vector<double>& x, std::size_t rows, std::size_t cols);

// ---- secure protocol ----

// One party's plaintext block.
struct LocalData {
  std::size_t rows = 0, cols = 0;
  std::vector<double> values;
  RingMatrix encoded;
  std::optional<SparsePlainMatrix> sparse;     // rows x cols
  std::optional<SparsePlainMatrix> sparse_t;   // cols x rows
};
LocalData make_local_data(std::vector<double> values, std::size_t rows, std::size_t cols,
                          const FixedPointConfig& fp, bool sparse);

AShare init_centroids(Session& s, const KMeansConfig& cfg, const PartitionSpec& part, const LocalData& data);
// D' = U - 2 X mu^T with 2f fractional bits (n x k).
AShare esd_reduced(Session& s, const LocalData& data, const PartitionSpec& part, bool sparse, const AShare& mu);
// One-hot rows of C (n x k) selecting each row's first minimum.
AShare argmin_tree(Session& s, const AShare& dist);
// 1/s with f fractional bits for integer shares s in [1, n_pub + 1].
AShare secure_reciprocal(Session& s, const AShare& denom, std::size_t n_pub, std::size_t theta);
AShare centroid_update(Session& s, const LocalData& data, const PartitionSpec& part, bool sparse,
                       const AShare& c, const AShare& mu, std::size_t theta);
// True when the summed squared centroid displacement is below epsilon.
bool check_stop(Session& s, const AShare& mu_prev, const AShare& mu_next, double epsilon);

struct ProtocolResult {
  AShare mu;  // k x d
  AShare c;   // n x k (empty if no iteration ran)
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> opened_mu;
  std::vector<std::size_t> opened_assignment;
  std::vector<std::vector<std::size_t>> trajectory;
  std::size_t triples_left = 0;
  RunMetrics metrics;
};

// The session's triple store must come from a budget matching this job.
ProtocolResult run_protocol(Session& s, const LocalData& data, const PartitionSpec& part,
                            const KMeansConfig& cfg);

std::vector<std::size_t> onehot_to_index(const RingMatrix& c);

}  // namespace spkm
