#include "spkm/budget.hpp"

#include <cmath>
#include <stdexcept>

namespace spkm {

const char* partition_name(Partition p) { return p == Partition::Vertical ? "vertical" : "horizontal"; }

Partition parse_partition(const std::string& s) {
  if (s == "vertical") return Partition::Vertical;
  if (s == "horizontal") return Partition::Horizontal;
  throw std::invalid_argument("unknown partition mode: " + s);
}

std::size_t JobParams::provisioned_iterations() const {
  return static_cast<std::size_t>(std::ceil(static_cast<double>(iterations) * overprovision - 1e-9));
}

void JobParams::validate() const {
  if (k < 2) throw std::invalid_argument("k must be at least 2");
  if (l != 8 && l != 16 && l != 32 && l != 64) throw std::invalid_argument("ring size must be 8, 16, 32 or 64 bits");
  if (!(overprovision >= 1.0)) throw std::invalid_argument("overprovision must be >= 1");
  if (mode == Partition::Vertical) {
    if (n_a == 0 || n_a != n_b) throw std::invalid_argument("vertical partition needs n_a = n_b > 0");
    if (d_a + d_b == 0) throw std::invalid_argument("no features");
  } else {
    if (d_a == 0 || d_a != d_b) throw std::invalid_argument("horizontal partition needs d_a = d_b > 0");
    if (n_a + n_b == 0) throw std::invalid_argument("no samples");
  }
  if (n() < k) throw std::invalid_argument("need at least k samples");
}

std::size_t TreeLevel::mux_width() const {
  std::size_t w = 0;
  for (std::size_t i = 0; i + 1 < widths.size(); i += 2) w += 1 + widths[i] + widths[i + 1];
  return w;
}

std::vector<TreeLevel> argmin_levels(std::size_t k) {
  std::vector<TreeLevel> levels;
  std::vector<std::size_t> widths(k, 1);
  while (widths.size() > 1) {
    levels.push_back(TreeLevel{widths});
    std::vector<std::size_t> next;
    for (std::size_t i = 0; i + 1 < widths.size(); i += 2) next.push_back(widths[i] + widths[i + 1]);
    if (widths.size() % 2) next.push_back(widths.back());
    widths = std::move(next);
  }
  return levels;
}

namespace {

// Cross products between one party's plaintext block and the peer's share.
// Dense only; the sparse path uses HE instead.
void cross_terms_s1(const JobParams& p, std::vector<BudgetItem>& out) {
  if (p.sparse) return;
  if (p.mode == Partition::Vertical) {
    if (p.d_a) out.push_back({TripleShape::matrix(p.n_a, p.d_a, p.k), Step::S1});
    if (p.d_b) out.push_back({TripleShape::matrix(p.n_a, p.d_b, p.k), Step::S1});
  } else {
    if (p.n_a) out.push_back({TripleShape::matrix(p.n_a, p.d_a, p.k), Step::S1});
    if (p.n_b) out.push_back({TripleShape::matrix(p.n_b, p.d_a, p.k), Step::S1});
  }
}

void cross_terms_s3(const JobParams& p, std::vector<BudgetItem>& out) {
  if (p.sparse) return;
  if (p.mode == Partition::Vertical) {
    if (p.d_a) out.push_back({TripleShape::matrix(p.k, p.n_a, p.d_a), Step::S3});
    if (p.d_b) out.push_back({TripleShape::matrix(p.k, p.n_a, p.d_b), Step::S3});
  } else {
    if (p.n_a) out.push_back({TripleShape::matrix(p.k, p.n_a, p.d_a), Step::S3});
    if (p.n_b) out.push_back({TripleShape::matrix(p.k, p.n_b, p.d_a), Step::S3});
  }
}

void comparison(std::size_t count, unsigned l, Step s, std::vector<BudgetItem>& out) {
  for (unsigned i = 0; i + 1 < l; ++i) out.push_back({TripleShape::bits(count), s});
}

}  // namespace

std::vector<BudgetItem> plan_esd(const JobParams& p) {
  std::vector<BudgetItem> out{{TripleShape::elementwise(p.k, p.d()), Step::S1}};
  cross_terms_s1(p, out);
  return out;
}

std::vector<BudgetItem> plan_argmin(const JobParams& p) {
  std::vector<BudgetItem> out;
  const std::size_t n = p.n();
  for (const auto& level : argmin_levels(p.k)) {
    comparison(n * level.pairs(), p.l, Step::S2, out);
    out.push_back({TripleShape::elementwise(n, level.pairs()), Step::S2});
    out.push_back({TripleShape::elementwise(n, level.mux_width()), Step::S2});
  }
  return out;
}

std::vector<BudgetItem> plan_update(const JobParams& p) {
  std::vector<BudgetItem> out;
  cross_terms_s3(p, out);
  for (std::size_t i = 0; i < p.reciprocal_iters; ++i) {
    out.push_back({TripleShape::elementwise(p.k, 1), Step::S3});
    out.push_back({TripleShape::elementwise(p.k, 1), Step::S3});
  }
  out.push_back({TripleShape::elementwise(p.k, p.d()), Step::S3});
  return out;
}

std::vector<BudgetItem> plan_stop(const JobParams& p) {
  std::vector<BudgetItem> out{{TripleShape::elementwise(p.k, 3 * p.d()), Step::S3}};
  comparison(1, p.l, Step::S3, out);
  out.push_back({TripleShape::elementwise(1, 1), Step::S3});
  return out;
}

std::vector<BudgetItem> TripleBudget::sequence() const {
  std::vector<BudgetItem> seq = init;
  const std::size_t iters = params.provisioned_iterations();
  seq.reserve(init.size() + per_iteration.size() * iters);
  for (std::size_t t = 0; t < iters; ++t) seq.insert(seq.end(), per_iteration.begin(), per_iteration.end());
  return seq;
}

namespace {

template <typename F>
std::size_t sum_over(const TripleBudget& b, F f) {
  std::size_t per = 0, once = 0;
  for (const auto& it : b.per_iteration) per += f(it);
  for (const auto& it : b.init) once += f(it);
  return once + per * b.params.provisioned_iterations();
}

}  // namespace

std::size_t TripleBudget::record_count() const {
  return sum_over(*this, [](const BudgetItem&) { return std::size_t{1}; });
}

std::size_t TripleBudget::matrix_triples() const {
  return sum_over(*this, [](const BudgetItem& i) { return std::size_t{i.shape.kind == TripleKind::Matrix}; });
}

std::size_t TripleBudget::scalar_triples() const {
  return sum_over(*this, [](const BudgetItem& i) {
    return i.shape.kind == TripleKind::Elementwise ? i.shape.d0 * i.shape.d1 : std::size_t{0};
  });
}

std::size_t TripleBudget::bit_triples() const {
  return sum_over(*this, [](const BudgetItem& i) {
    return i.shape.kind == TripleKind::Bit ? i.shape.d0 : std::size_t{0};
  });
}

std::size_t TripleBudget::cmpms_per_iteration() const {
  std::size_t pairs = 0;
  for (const auto& level : argmin_levels(params.k)) pairs += level.pairs();
  return pairs * params.n();
}

std::size_t TripleBudget::party_bytes(Step s) const {
  const unsigned l = params.l;
  return sum_over(*this, [&](const BudgetItem& i) { return i.step == s ? i.shape.record_bytes(l) : 0; });
}

std::size_t TripleBudget::party_bytes() const {
  const unsigned l = params.l;
  return sum_over(*this, [&](const BudgetItem& i) { return i.shape.record_bytes(l); });
}

TripleBudget compute_budget(const JobParams& p) {
  p.validate();
  TripleBudget b;
  b.params = p;
  for (auto plan : {plan_esd, plan_argmin, plan_update, plan_stop}) {
    auto items = plan(p);
    b.per_iteration.insert(b.per_iteration.end(), items.begin(), items.end());
  }
  return b;
}

}  // namespace spkm
