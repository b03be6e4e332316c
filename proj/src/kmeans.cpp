#include "spkm/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <iostream>
#include <limits>
#include <stdexcept>

#include "spkm/ahe.hpp"
#include "spkm/bool_share.hpp"
#include "spkm/errors.hpp"

namespace spkm {

std::size_t PartitionSpec::rows_of(Role r) const {
  if (mode == Partition::Vertical) return n_a;
  return r == Role::A ? n_a : n_b;
}

std::size_t PartitionSpec::cols_of(Role r) const {
  if (mode == Partition::Horizontal) return d_a;
  return r == Role::A ? d_a : d_b;
}

void PartitionSpec::validate() const {
  if (mode == Partition::Vertical) {
    if (n_a == 0 || n_a != n_b) throw std::invalid_argument("vertical partition needs n_a = n_b > 0");
    if (d_a == 0 || d_b == 0) throw std::invalid_argument("vertical partition needs d_a, d_b > 0");
  } else {
    if (d_a == 0 || d_a != d_b) throw std::invalid_argument("horizontal partition needs d_a = d_b > 0");
    if (n_a == 0 || n_b == 0) throw std::invalid_argument("horizontal partition needs n_a, n_b > 0");
  }
}

const char* init_name(InitMode m) {
  switch (m) {
    case InitMode::Random: return "random";
    case InitMode::LocalKMeans: return "local-kmeans";
    case InitMode::Explicit: return "explicit";
  }
  return "?";
}

InitMode parse_init(const std::string& s) {
  if (s == "random") return InitMode::Random;
  if (s == "local-kmeans") return InitMode::LocalKMeans;
  if (s == "explicit") return InitMode::Explicit;
  throw std::invalid_argument("unknown init mode: " + s);
}

std::size_t KMeansConfig::theta(std::size_t n) const {
  if (reciprocal_iters) return reciprocal_iters;
  return static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(std::max<std::size_t>(n, 2))))) + 6;
}

void KMeansConfig::validate() const {
  if (k < 2) throw std::invalid_argument("k must be at least 2");
  if (!(epsilon >= 0)) throw std::invalid_argument("epsilon must be non-negative");
  fp.validate();
}

JobParams job_params(const PartitionSpec& part, const KMeansConfig& cfg) {
  JobParams p;
  p.mode = part.mode;
  p.n_a = part.n_a;
  p.n_b = part.n_b;
  p.d_a = part.d_a;
  p.d_b = part.d_b;
  p.k = cfg.k;
  p.l = cfg.fp.l;
  p.iterations = cfg.max_iters;
  p.reciprocal_iters = cfg.theta(part.n());
  p.sparse = cfg.sparse;
  p.overprovision = cfg.overprovision;
  return p;
}

u64 config_hash(const PartitionSpec& part, const KMeansConfig& cfg) {
  ByteWriter w;
  const std::string tag = "spkm-config-v1";
  w.bytes(std::span(reinterpret_cast<const std::uint8_t*>(tag.data()), tag.size()));
  auto dbl = [&](double v) {
    u64 b;
    std::memcpy(&b, &v, sizeof b);
    w.u64(b);
  };
  w.u8(static_cast<std::uint8_t>(part.mode));
  for (std::size_t v : {part.n_a, part.n_b, part.d_a, part.d_b, cfg.k, cfg.max_iters}) w.u64(v);
  dbl(cfg.epsilon);
  w.u8(static_cast<std::uint8_t>(cfg.init));
  w.u8(cfg.sparse);
  w.u8(static_cast<std::uint8_t>(cfg.fp.l));
  w.u8(static_cast<std::uint8_t>(cfg.fp.f));
  w.u64(cfg.theta(part.n()));
  dbl(cfg.overprovision);
  w.u8(cfg.open_results);
  w.u8(cfg.debug_open_trajectory);
  w.u32(cfg.he_key_bits);
  const auto h = sha256(w.buffer());
  u64 v = 0;
  for (int i = 0; i < 8; ++i) v |= u64{h[i]} << (8 * i);
  return v;
}

// ---- plaintext reference ----

std::vector<std::size_t> assign_nearest(const std::vector<double>& x, std::size_t n, std::size_t d,
                                        const std::vector<double>& centroids, std::size_t k) {
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) {
      double dist = 0;
      for (std::size_t c = 0; c < d; ++c) {
        const double t = x[i * d + c] - centroids[j * d + c];
        dist += t * t;
      }
      if (dist < best) {
        best = dist;
        out[i] = j;
      }
    }
  }
  return out;
}

PlainResult plaintext_kmeans(const std::vector<double>& x, std::size_t n, std::size_t d, std::size_t k,
                             const std::vector<double>& init, std::size_t max_iters, double epsilon,
                             UpdateRule rule) {
  if (n < k) throw std::invalid_argument("plaintext_kmeans: n < k");
  if (x.size() != n * d || init.size() != k * d) throw ShapeError("plaintext_kmeans: bad shapes");
  PlainResult r;
  r.centroids = init;
  for (std::size_t it = 0; it < max_iters; ++it) {
    const auto assign = assign_nearest(x, n, d, r.centroids, k);
    r.trajectory.push_back(assign);
    std::vector<double> sum(k * d, 0.0);
    std::vector<double> count(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      count[assign[i]] += 1;
      for (std::size_t c = 0; c < d; ++c) sum[assign[i] * d + c] += x[i * d + c];
    }
    std::vector<double> next(k * d);
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t c = 0; c < d; ++c) {
        const double old = r.centroids[j * d + c];
        if (rule == UpdateRule::PhantomMember) {
          next[j * d + c] = (sum[j * d + c] + old) / (count[j] + 1);
        } else {
          next[j * d + c] = count[j] > 0 ? sum[j * d + c] / count[j] : old;
        }
      }
    }
    double shift = 0;
    for (std::size_t i = 0; i < next.size(); ++i) shift += (next[i] - r.centroids[i]) * (next[i] - r.centroids[i]);
    r.centroids = std::move(next);
    ++r.iterations;
    if (shift < epsilon) {
      r.converged = true;
      break;
    }
  }
  return r;
}

std::vector<double> normalize_inputs(const std::vector<double>& x, std::size_t rows, std::size_t cols) {
  if (x.size() != rows * cols) throw ShapeError("normalize_inputs: bad shape");
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t c = 0; c < cols; ++c) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t r = 0; r < rows; ++r) {
      lo = std::min(lo, x[r * cols + c]);
      hi = std::max(hi, x[r * cols + c]);
    }
    if (!(hi > lo)) continue;
    for (std::size_t r = 0; r < rows; ++r) out[r * cols + c] = (x[r * cols + c] - lo) / (hi - lo);
  }
  return out;
}

// ---- secure protocol ----

LocalData make_local_data(std::vector<double> values, std::size_t rows, std::size_t cols,
                          const FixedPointConfig& fp, bool sparse) {
  LocalData d;
  d.rows = rows;
  d.cols = cols;
  d.encoded = encode_matrix(values, rows, cols, fp);
  d.values = std::move(values);
  if (sparse) {
    d.sparse = SparsePlainMatrix::from_dense(d.encoded);
    d.sparse_t = SparsePlainMatrix::from_dense(d.encoded.transpose());
  }
  return d;
}

namespace {

RingMatrix zeros(std::size_t r, std::size_t c, unsigned l) { return RingMatrix(r, c, l); }

RingMatrix hconcat_all(const std::vector<RingMatrix>& parts) {
  std::size_t rows = parts.empty() ? 0 : parts[0].rows(), cols = 0;
  for (const auto& p : parts) cols += p.cols();
  RingMatrix out(rows, cols, parts.empty() ? 64 : parts[0].bits());
  std::size_t at = 0;
  for (const auto& p : parts) {
    out.set_block(0, at, p);
    at += p.cols();
  }
  return out;
}

RingMatrix ones(std::size_t r, std::size_t c, unsigned l) { return RingMatrix::filled(r, c, l, 1); }

// This party's share of the centroid block multiplying party p's features.
RingMatrix mu_block(const PartitionSpec& part, const AShare& mu, Role p) {
  if (part.mode == Partition::Horizontal) return mu.value;
  return p == Role::A ? mu.value.block(0, 0, mu.rows(), part.d_a) : mu.value.block(0, part.d_a, mu.rows(), part.d_b);
}

RingMatrix rows_block(const PartitionSpec& part, const RingMatrix& m, Role p) {
  if (part.mode == Partition::Vertical) return m;
  return p == Role::A ? m.block(0, 0, part.n_a, m.cols()) : m.block(part.n_a, 0, part.n_b, m.cols());
}

void check_local(const Session& s, const LocalData& data, const PartitionSpec& part) {
  const Role me = s.role();
  if (data.rows != part.rows_of(me) || data.cols != part.cols_of(me)) {
    throw ShapeError("local data shape does not match the partition");
  }
}

}  // namespace

AShare esd_reduced(Session& s, const LocalData& data, const PartitionSpec& part, bool sparse, const AShare& mu) {
  check_local(s, data, part);
  const Role me = s.role();
  const std::size_t n = part.n(), k = mu.rows();
  const unsigned l = s.l();
  if (mu.cols() != part.d()) throw ShapeError("esd_reduced: centroid width differs from d");

  const AShare sq = beaver_mul(s, mu, mu);
  const RingMatrix u = repeat_rows(row_sums(sq.value).transpose(), n);

  const RingMatrix local = matmul(data.encoded, mu_block(part, mu, me).transpose());
  std::vector<RingMatrix> cross;
  if (!sparse) {
    std::vector<AShare> xs, ys;
    xs.reserve(2);
    ys.reserve(2);
    std::vector<BeaverJob> jobs;
    for (Role p : {Role::A, Role::B}) {
      const std::size_t r = part.rows_of(p), c = part.cols_of(p);
      xs.push_back(AShare{me, me == p ? data.encoded : zeros(r, c, l)});
      ys.push_back(AShare{me, me == p ? zeros(c, k, l) : mu_block(part, mu, p).transpose()});
    }
    for (int i = 0; i < 2; ++i) {
      const Role p = i == 0 ? Role::A : Role::B;
      jobs.push_back(BeaverJob{&xs[i], &ys[i], s.take_matrix(part.rows_of(p), part.cols_of(p), k)});
    }
    for (auto& r : beaver_batch(s.channel(), std::move(jobs))) cross.push_back(std::move(r.value));
  } else {
    if (!data.sparse) throw std::logic_error("sparse path needs CSR data");
    for (Role p : {Role::A, Role::B}) {
      const RingMatrix y = mu_block(part, mu, p).transpose();
      AShare z = me == p ? sparse_matmul(s, p, &*data.sparse, nullptr) : sparse_matmul(s, p, nullptr, &y);
      cross.push_back(std::move(z.value));
    }
  }

  RingMatrix xm;
  if (part.mode == Partition::Vertical) {
    xm = local;
    add_inplace(xm, cross[0]);
    add_inplace(xm, cross[1]);
  } else {
    RingMatrix top = cross[0], bottom = cross[1];
    add_inplace(me == Role::A ? top : bottom, local);
    xm = vconcat(top, bottom);
  }
  return AShare{me, sub(u, scale(xm, 2))};
}

AShare argmin_tree(Session& s, const AShare& dist) {
  const Role me = s.role();
  const std::size_t n = dist.rows(), k = dist.cols();
  const unsigned l = s.l();
  if (k < 2) throw std::invalid_argument("argmin_tree needs k >= 2");
  struct Node {
    RingMatrix val;  // n x 1
    RingMatrix pos;  // n x width
  };
  std::vector<Node> nodes;
  const AShare one = public_share(me, ones(n, 1, l));
  for (std::size_t j = 0; j < k; ++j) nodes.push_back(Node{dist.value.block(0, j, n, 1), one.value});

  while (nodes.size() > 1) {
    const std::size_t pairs = nodes.size() / 2;
    std::vector<RingMatrix> diffs;
    for (std::size_t p = 0; p < pairs; ++p) diffs.push_back(sub(nodes[2 * p + 1].val, nodes[2 * p].val));
    // [right < left]; the left node wins ties.
    const AShare right_less = cmp(s, AShare{me, hconcat_all(diffs)}, zero_share(me, n, pairs, l));
    const AShare b = linear(ring_mask(l), right_less, zero_share(me, n, pairs, l), 1);

    std::vector<RingMatrix> sel, operand;
    for (std::size_t p = 0; p < pairs; ++p) {
      const Node& left = nodes[2 * p];
      const Node& right = nodes[2 * p + 1];
      const std::size_t w = 1 + left.pos.cols() + right.pos.cols();
      sel.push_back(repeat_cols(b.value.block(0, p, n, 1), w));
      operand.push_back(sub(left.val, right.val));
      operand.push_back(left.pos);
      operand.push_back(right.pos);
    }
    const AShare prod = beaver_mul(s, AShare{me, hconcat_all(sel)}, AShare{me, hconcat_all(operand)});

    std::vector<Node> next;
    std::size_t at = 0;
    for (std::size_t p = 0; p < pairs; ++p) {
      const Node& left = nodes[2 * p];
      const Node& right = nodes[2 * p + 1];
      const std::size_t wl = left.pos.cols(), wr = right.pos.cols();
      RingMatrix val = add(prod.value.block(0, at, n, 1), right.val);
      RingMatrix pos = hconcat(prod.value.block(0, at + 1, n, wl),
                               sub(right.pos, prod.value.block(0, at + 1 + wl, n, wr)));
      at += 1 + wl + wr;
      next.push_back(Node{std::move(val), std::move(pos)});
    }
    if (nodes.size() % 2) next.push_back(std::move(nodes.back()));
    nodes = std::move(next);
  }
  return AShare{me, std::move(nodes[0].pos)};
}

AShare secure_reciprocal(Session& s, const AShare& denom, std::size_t n_pub, std::size_t theta) {
  const Role me = s.role();
  const FixedPointConfig& fp = s.fp();
  const std::size_t rows = denom.rows(), cols = denom.cols();
  // z tracks 1/s directly: z = w / (n_pub + 1) where w runs Newton on
  // x = s / (n_pub + 1); z' = z (2 - s z) needs no truncation for s*z.
  const u64 c = static_cast<u64>(std::llround(std::ldexp(1.0 / static_cast<double>(n_pub + 1), fp.f)));
  const AShare x = scale(denom, c);
  const AShare zero = zero_share(me, rows, cols, fp.l);
  const AShare w0 = linear(fp.mask() - 1, x, zero, encode_fixed(2.9142, fp));
  AShare z = truncate(scale(w0, c), fp.f);
  const u64 two = encode_fixed(2.0, fp);
  for (std::size_t i = 0; i < theta; ++i) {
    const AShare t = beaver_mul(s, denom, z);
    const AShare u = linear(fp.mask(), t, zero, two);
    z = truncate(beaver_mul(s, z, u), fp.f);
  }
  return z;
}

AShare centroid_update(Session& s, const LocalData& data, const PartitionSpec& part, bool sparse,
                       const AShare& c, const AShare& mu, std::size_t theta) {
  check_local(s, data, part);
  const Role me = s.role();
  const unsigned l = s.l();
  const std::size_t k = c.cols(), d = part.d();
  if (c.rows() != part.n() || mu.rows() != k || mu.cols() != d) throw ShapeError("centroid_update: bad shapes");

  // Numerator C^T X: local block plus one cross term per data owner.
  RingMatrix num(k, d, l);
  const RingMatrix local = matmul(rows_block(part, c.value, me).transpose(), data.encoded);
  auto place = [&](Role p, const RingMatrix& m) {
    if (part.mode == Partition::Vertical) {
      RingMatrix cur = num.block(0, p == Role::A ? 0 : part.d_a, k, m.cols());
      add_inplace(cur, m);
      num.set_block(0, p == Role::A ? 0 : part.d_a, cur);
    } else {
      add_inplace(num, m);
    }
  };
  place(me, local);
  if (!sparse) {
    std::vector<AShare> xs, ys;
    xs.reserve(2);
    ys.reserve(2);
    for (Role p : {Role::A, Role::B}) {
      const std::size_t r = part.rows_of(p), cc = part.cols_of(p);
      xs.push_back(AShare{me, me == p ? zeros(k, r, l) : rows_block(part, c.value, p).transpose()});
      ys.push_back(AShare{me, me == p ? data.encoded : zeros(r, cc, l)});
    }
    std::vector<BeaverJob> jobs;
    for (int i = 0; i < 2; ++i) {
      const Role p = i == 0 ? Role::A : Role::B;
      jobs.push_back(BeaverJob{&xs[i], &ys[i], s.take_matrix(k, part.rows_of(p), part.cols_of(p))});
    }
    auto out = beaver_batch(s.channel(), std::move(jobs));
    place(Role::A, out[0].value);
    place(Role::B, out[1].value);
  } else {
    if (!data.sparse_t) throw std::logic_error("sparse path needs CSR data");
    for (Role p : {Role::A, Role::B}) {
      // (X_p^T C_p)^T with X_p^T sparse at p and C_p's peer share dense.
      const RingMatrix y = rows_block(part, c.value, p);
      AShare z = me == p ? sparse_matmul(s, p, &*data.sparse_t, nullptr) : sparse_matmul(s, p, nullptr, &y);
      place(p, z.value.transpose());
    }
  }
  // Phantom member: previous centroid joins its own cluster.
  add_inplace(num, mu.value);
  AShare denom{me, col_sums(c.value).transpose()};
  if (me == Role::A) denom.value = add_scalar(denom.value, 1);

  const AShare z = secure_reciprocal(s, denom, part.n(), theta);
  const AShare zb{me, repeat_cols(z.value, d)};
  return truncate(beaver_mul(s, AShare{me, num}, zb), s.fp().f);
}

bool check_stop(Session& s, const AShare& mu_prev, const AShare& mu_next, double epsilon) {
  const Role me = s.role();
  const FixedPointConfig& fp = s.fp();
  if (mu_prev.rows() != mu_next.rows() || mu_prev.cols() != mu_next.cols()) throw ShapeError("check_stop: shapes");
  const std::size_t k = mu_prev.rows(), d = mu_prev.cols();
  // |a|^2 + |b|^2 - 2 a.b over all centroids, kept at 2f fractional bits.
  const AShare lhs{me, hconcat_all({mu_prev.value, mu_next.value, mu_prev.value})};
  const AShare rhs{me, hconcat_all({mu_prev.value, mu_next.value, mu_next.value})};
  const AShare prod = beaver_mul(s, lhs, rhs);
  u64 sq = 0, dot = 0;
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t c = 0; c < 2 * d; ++c) sq += prod.value(r, c);
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t c = 2 * d; c < 3 * d; ++c) dot += prod.value(r, c);
  RingMatrix esd(1, 1, fp.l);
  esd.set(0, 0, sq - 2 * dot);

  const double scaled = std::min(std::ldexp(epsilon, 2 * fp.f), std::ldexp(1.0, static_cast<int>(fp.l) - 2));
  const u64 eps = static_cast<u64>(std::llround(scaled));
  const AShare below = cmp(s, AShare{me, esd}, public_share(me, RingMatrix::filled(1, 1, fp.l, eps)));
  return open(s.channel(), below)(0, 0) == 1;
}

namespace {

std::vector<std::size_t> distinct_indices(Prg& prg, std::size_t count, std::size_t range) {
  if (range < count) throw std::invalid_argument("not enough samples to pick distinct indices");
  std::vector<std::size_t> out;
  while (out.size() < count) {
    const std::size_t i = prg.uniform(range);
    if (std::find(out.begin(), out.end(), i) == out.end()) out.push_back(i);
  }
  return out;
}

Seed joint_seed(Session& s) {
  const Seed mine = s.prg().derive_seed();
  auto peer = s.channel().exchange(MsgType::Control, std::vector<std::uint8_t>(mine.begin(), mine.end()));
  if (peer.size() != mine.size()) throw TransportError("malformed coin-flip message");
  Seed j{};
  for (std::size_t i = 0; i < j.size(); ++i) j[i] = mine[i] ^ peer[i];
  return j;
}

std::vector<double> pick_rows(const std::vector<double>& v, std::size_t cols, const std::vector<std::size_t>& idx) {
  std::vector<double> out;
  for (std::size_t i : idx) out.insert(out.end(), v.begin() + i * cols, v.begin() + (i + 1) * cols);
  return out;
}

}  // namespace

AShare init_centroids(Session& s, const KMeansConfig& cfg, const PartitionSpec& part, const LocalData& data) {
  check_local(s, data, part);
  const Role me = s.role();
  const std::size_t k = cfg.k, d = part.d();
  const FixedPointConfig& fp = s.fp();
  if (cfg.init == InitMode::Explicit) {
    if (me == Role::A) {
      if (cfg.explicit_centroids.size() != k * d) throw ShapeError("explicit centroids must be k x d");
      const RingMatrix m = encode_matrix(cfg.explicit_centroids, k, d, fp);
      return input_share(s, Role::A, &m, k, d);
    }
    return input_share(s, Role::A, nullptr, k, d);
  }

  Prg joint(joint_seed(s), 0x1d);
  if (part.mode == Partition::Vertical) {
    const auto idx = distinct_indices(joint, k, part.n());
    std::vector<double> block = pick_rows(data.values, data.cols, idx);
    if (cfg.init == InitMode::LocalKMeans) {
      block = plaintext_kmeans(data.values, data.rows, data.cols, k, block, cfg.max_iters, cfg.epsilon).centroids;
    }
    const RingMatrix mine = encode_matrix(block, k, data.cols, fp);
    const AShare a = input_share(s, Role::A, me == Role::A ? &mine : nullptr, k, part.d_a);
    const AShare b = input_share(s, Role::B, me == Role::B ? &mine : nullptr, k, part.d_b);
    return AShare{me, hconcat(a.value, b.value)};
  }

  std::vector<double> full(k * d, 0.0);
  if (cfg.init == InitMode::Random) {
    const auto idx = distinct_indices(joint, k, part.n());
    for (std::size_t j = 0; j < k; ++j) {
      const bool in_a = idx[j] < part.n_a;
      if (in_a != (me == Role::A)) continue;
      const std::size_t row = in_a ? idx[j] : idx[j] - part.n_a;
      std::copy_n(data.values.begin() + row * d, d, full.begin() + j * d);
    }
  } else {
    // A fills the first ceil(k/2) rows from its own clustering, B the rest.
    const std::size_t ka = (k + 1) / 2, kme = me == Role::A ? ka : k - ka;
    const std::size_t offset = me == Role::A ? 0 : ka;
    Prg local(joint.derive_seed(), me == Role::A ? 0xa : 0xb);
    const auto idx = distinct_indices(local, kme, data.rows);
    const auto cent = plaintext_kmeans(data.values, data.rows, d, kme, pick_rows(data.values, d, idx),
                                       cfg.max_iters, cfg.epsilon)
                          .centroids;
    std::copy(cent.begin(), cent.end(), full.begin() + offset * d);
  }
  const RingMatrix mine = encode_matrix(full, k, d, fp);
  const AShare a = input_share(s, Role::A, me == Role::A ? &mine : nullptr, k, d);
  const AShare b = input_share(s, Role::B, me == Role::B ? &mine : nullptr, k, d);
  return add(a, b);
}

std::vector<std::size_t> onehot_to_index(const RingMatrix& c) {
  std::vector<std::size_t> out(c.rows(), static_cast<std::size_t>(-1));
  for (std::size_t r = 0; r < c.rows(); ++r) {
    for (std::size_t j = 0; j < c.cols(); ++j) {
      if (c(r, j) == 1) {
        out[r] = j;
        break;
      }
    }
  }
  return out;
}

ProtocolResult run_protocol(Session& s, const LocalData& data, const PartitionSpec& part,
                            const KMeansConfig& cfg) {
  part.validate();
  cfg.validate();
  check_local(s, data, part);
  if (cfg.k > part.n()) throw std::invalid_argument("k exceeds the number of samples");
  Channel& ch = s.channel();
  const Role me = s.role();
  const std::size_t theta = cfg.theta(part.n());
  {
    StepScope scope(ch, Phase::Online, Step::Other);
    ByteWriter w;
    w.u64(config_hash(part, cfg));
    const Seed sid = s.triples() ? s.triples()->session_id() : Seed{};
    w.bytes(sid);
    auto peer = ch.exchange(MsgType::Control, w.take());
    ByteReader r(peer);
    if (r.u64() != config_hash(part, cfg)) throw ConfigMismatch("configuration hash differs from the peer's");
    auto psid = r.bytes(sid.size());
    if (!std::equal(psid.begin(), psid.end(), sid.begin())) {
      throw ConfigMismatch("triple stores come from different dealer sessions");
    }
  }
  if (cfg.sparse) {
    StepScope scope(ch, Phase::Offline, Step::Other);
    auto he = std::make_unique<HeContext>();
    he->mine.emplace(keygen(cfg.he_key_bits, s.prg(), cfg.allow_test_keys));
    ByteWriter w;
    he->mine->pk.write(w);
    auto payload = ch.exchange(MsgType::PublicKey, w.take());
    ByteReader r(payload);
    he->peer.emplace(PublicKey::read(r));
    s.set_he(std::move(he));
  }

  ProtocolResult res;
  {
    StepScope scope(ch, Phase::Online, Step::Other);
    res.mu = init_centroids(s, cfg, part, data);
  }
  for (std::size_t t = 0; t < cfg.max_iters; ++t) {
    AShare dist, c, next;
    bool stop = false;
    {
      StepScope scope(ch, Phase::Online, Step::S1);
      dist = esd_reduced(s, data, part, cfg.sparse, res.mu);
    }
    {
      StepScope scope(ch, Phase::Online, Step::S2);
      c = argmin_tree(s, dist);
    }
    {
      StepScope scope(ch, Phase::Online, Step::S3);
      next = centroid_update(s, data, part, cfg.sparse, c, res.mu, theta);
      stop = check_stop(s, res.mu, next, cfg.epsilon);
    }
    res.mu = std::move(next);
    res.c = std::move(c);
    ++res.iterations;
    if (cfg.debug_open_trajectory) {
      StepScope scope(ch, Phase::Online, Step::Other);
      res.trajectory.push_back(onehot_to_index(open(ch, res.c)));
    }
    if (stop) {
      res.converged = true;
      break;
    }
  }
  if (cfg.open_results) {
    StepScope scope(ch, Phase::Online, Step::Other);
    res.opened_mu = decode_matrix(open(ch, res.mu), s.fp());
    if (res.iterations > 0) res.opened_assignment = onehot_to_index(open(ch, res.c));
  }
  res.triples_left = s.triples() ? s.triples()->remaining() : 0;
  if (res.triples_left > 0 && !res.converged) {
    std::clog << "warning: " << res.triples_left << " triple records left unused by party " << role_name(me)
              << "\n";
  }
  res.metrics = ch.metrics_snapshot();
  return res;
}

}  // namespace spkm
