#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "spkm/transport.hpp"
#include "spkm/triples.hpp"

namespace spkm {

enum class Partition : std::uint8_t { Vertical = 0, Horizontal = 1 };
const char* partition_name(Partition p);
Partition parse_partition(const std::string& s);

struct JobParams {
  Partition mode = Partition::Vertical;
  std::size_t n_a = 0, n_b = 0, d_a = 0, d_b = 0;
  std::size_t k = 2;
  unsigned l = 64;
  std::size_t iterations = 1;
  std::size_t reciprocal_iters = 16;
  bool sparse = false;
  double overprovision = 1.0;

  std::size_t n() const { return mode == Partition::Vertical ? n_a : n_a + n_b; }
  std::size_t d() const { return mode == Partition::Vertical ? d_a + d_b : d_a; }
  // Lloyd iterations actually provisioned: ceil(iterations * overprovision).
  std::size_t provisioned_iterations() const;
  void validate() const;
};

struct BudgetItem {
  TripleShape shape;
  Step step = Step::Other;
  bool operator==(const BudgetItem&) const = default;
};

// One node-pair level of the argmin tree: `widths` are the leaf counts of the
// nodes entering the level, paired (0,1), (2,3), ... with an odd node passed up.
struct TreeLevel {
  std::vector<std::size_t> widths;
  std::size_t pairs() const { return widths.size() / 2; }
  // Mux outputs per sample: one value plus both position vectors per pair.
  std::size_t mux_width() const;
};
std::vector<TreeLevel> argmin_levels(std::size_t k);

// Records in exact consumption order.
std::vector<BudgetItem> plan_esd(const JobParams& p);
std::vector<BudgetItem> plan_argmin(const JobParams& p);
std::vector<BudgetItem> plan_update(const JobParams& p);
std::vector<BudgetItem> plan_stop(const JobParams& p);

struct TripleBudget {
  JobParams params;
  std::vector<BudgetItem> init;           // before the first iteration
  std::vector<BudgetItem> per_iteration;  // S1, S2, S3, stop check

  std::vector<BudgetItem> sequence() const;
  std::size_t record_count() const;
  std::size_t matrix_triples() const;      // Matrix records
  std::size_t scalar_triples() const;      // 1x1 products inside Elementwise records
  std::size_t bit_triples() const;
  std::size_t cmpms_per_iteration() const;
  // Bytes of one party's records.
  std::size_t party_bytes(Step s) const;
  std::size_t party_bytes() const;
};

TripleBudget compute_budget(const JobParams& p);

}  // namespace spkm
