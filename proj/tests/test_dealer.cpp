#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "spkm/ahe.hpp"
#include "spkm/dealer.hpp"
#include "spkm/errors.hpp"
#include "test_util.hpp"

using namespace spkm;
using namespace spkm::testing;
namespace fs = std::filesystem;

namespace {

JobParams vertical_job(std::size_t n, std::size_t d_a, std::size_t d_b, std::size_t k, std::size_t t) {
  JobParams p;
  p.mode = Partition::Vertical;
  p.n_a = p.n_b = n;
  p.d_a = d_a;
  p.d_b = d_b;
  p.k = k;
  p.iterations = t;
  return p;
}

std::size_t bit_records_in(const std::vector<BudgetItem>& items, Step s) {
  std::size_t c = 0;
  for (const auto& it : items) c += it.step == s && it.shape.kind == TripleKind::Bit ? 1 : 0;
  return c;
}

std::size_t matrix_records_in(const std::vector<BudgetItem>& items, Step s) {
  std::size_t c = 0;
  for (const auto& it : items) c += it.step == s && it.shape.kind == TripleKind::Matrix ? 1 : 0;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "spkm_test_dealer";
  fs::create_directories(dir);
  return dir / name;
}

// Fraction of set bits over all words of a matrix list.
double ones_fraction(const std::vector<const RingMatrix*>& ms) {
  std::size_t ones = 0, total = 0;
  for (const auto* m : ms) {
    for (u64 w : m->data()) ones += static_cast<std::size_t>(__builtin_popcountll(w));
    total += m->size() * 64;
  }
  return static_cast<double>(ones) / static_cast<double>(total);
}

}  // namespace

TEST(Budget, TwoClustersGiveOneCmpmPerSample) {
  for (std::size_t n : {4u, 17u, 1000u}) {
    const TripleBudget b = compute_budget(vertical_job(n, 1, 1, 2, 1));
    EXPECT_EQ(b.cmpms_per_iteration(), n);
    const auto s2 = plan_argmin(b.params);
    // One tree level: l-1 AND layers over n comparisons.
    EXPECT_EQ(bit_records_in(s2, Step::S2), 63u);
    for (const auto& it : s2)
      if (it.shape.kind == TripleKind::Bit) EXPECT_EQ(it.shape.d0, n);
  }
}

TEST(Budget, CmpmCountIsKMinusOnePerSample) {
  for (std::size_t k = 2; k <= 16; ++k) {
    const TripleBudget b = compute_budget(vertical_job(50, 2, 2, k, 1));
    EXPECT_EQ(b.cmpms_per_iteration(), (k - 1) * 50) << k;
  }
}

TEST(Budget, SparseModeDropsJointMatmulTriples) {
  JobParams p = vertical_job(100, 3, 4, 4, 2);
  const TripleBudget dense = compute_budget(p);
  p.sparse = true;
  const TripleBudget sparse = compute_budget(p);
  const auto seq_d = dense.sequence(), seq_s = sparse.sequence();
  EXPECT_EQ(matrix_records_in(seq_d, Step::S1), 4u);
  EXPECT_EQ(matrix_records_in(seq_d, Step::S3), 4u);
  EXPECT_EQ(matrix_records_in(seq_s, Step::S1), 0u);
  EXPECT_EQ(matrix_records_in(seq_s, Step::S3), 0u);
  EXPECT_EQ(sparse.matrix_triples(), 0u);
  EXPECT_EQ(sparse.bit_triples(), dense.bit_triples());

  JobParams h;
  h.mode = Partition::Horizontal;
  h.n_a = 60;
  h.n_b = 40;
  h.d_a = h.d_b = 5;
  h.k = 3;
  h.sparse = true;
  EXPECT_EQ(compute_budget(h).matrix_triples(), 0u);
  h.sparse = false;
  EXPECT_EQ(compute_budget(h).matrix_triples(), 4u);
}

TEST(Budget, DoublingIterationsDoublesCounts) {
  const TripleBudget one = compute_budget(vertical_job(30, 2, 3, 5, 3));
  const TripleBudget two = compute_budget(vertical_job(30, 2, 3, 5, 6));
  EXPECT_EQ(two.per_iteration, one.per_iteration);
  EXPECT_EQ(two.init, one.init);
  EXPECT_EQ(two.record_count() - two.init.size(), 2 * (one.record_count() - one.init.size()));
  EXPECT_EQ(two.bit_triples(), 2 * one.bit_triples());
  EXPECT_EQ(two.scalar_triples(), 2 * one.scalar_triples());
  EXPECT_EQ(two.matrix_triples(), 2 * one.matrix_triples());
  EXPECT_EQ(two.party_bytes(), 2 * one.party_bytes());
}

TEST(Budget, OverprovisionRoundsUp) {
  JobParams p = vertical_job(10, 1, 1, 2, 10);
  p.overprovision = 1.25;
  EXPECT_EQ(p.provisioned_iterations(), 13u);
  p.overprovision = 1.0;
  EXPECT_EQ(p.provisioned_iterations(), 10u);
  p.overprovision = 0.5;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(Budget, InvalidParamsRejected) {
  EXPECT_THROW(compute_budget(vertical_job(10, 1, 1, 1, 1)), std::invalid_argument);
  EXPECT_THROW(compute_budget(vertical_job(3, 1, 1, 4, 1)), std::invalid_argument);
  EXPECT_THROW(compute_budget(vertical_job(10, 0, 0, 2, 1)), std::invalid_argument);
  JobParams p = vertical_job(10, 1, 1, 2, 1);
  p.n_b = 9;
  EXPECT_THROW(compute_budget(p), std::invalid_argument);
  p = vertical_job(10, 1, 1, 2, 1);
  p.l = 48;
  EXPECT_THROW(compute_budget(p), std::invalid_argument);
}

TEST(Budget, Deterministic) {
  const JobParams p = vertical_job(77, 3, 2, 6, 4);
  EXPECT_EQ(compute_budget(p).sequence(), compute_budget(p).sequence());
}

TEST(Budget, StepOrderWithinIteration) {
  const TripleBudget b = compute_budget(vertical_job(20, 2, 2, 4, 1));
  int last = 0;
  for (const auto& it : b.per_iteration) {
    const int s = static_cast<int>(it.step);
    EXPECT_GE(s, last);
    last = s;
  }
  EXPECT_EQ(b.per_iteration.front().step, Step::S1);
  EXPECT_EQ(b.per_iteration.back().step, Step::S3);
}

TEST(Dealer, ReconstructedTriplesSatisfyProduct) {
  std::vector<BudgetItem> its;
  Prg shapes(seed_from_u64(11));
  for (int i = 0; i < 100; ++i) {
    const std::size_t m = 1 + shapes.next_u64() % 6, p = 1 + shapes.next_u64() % 6, q = 1 + shapes.next_u64() % 6;
    switch (i % 3) {
      case 0: its.push_back({TripleShape::matrix(m, p, q), Step::S1}); break;
      case 1: its.push_back({TripleShape::elementwise(m, p), Step::S2}); break;
      default: its.push_back({TripleShape::bits(m * p * q), Step::S3}); break;
    }
  }
  for (unsigned l : {16u, 64u}) {
    auto dealt = dealer_generate(its, seed_from_u64(12), l);
    ASSERT_EQ(dealt.a->remaining(), its.size());
    for (const auto& it : its) {
      const TripleRecord a = dealt.a->next(), b = dealt.b->next();
      ASSERT_EQ(a.shape, it.shape);
      ASSERT_EQ(b.step, it.step);
      if (it.shape.kind == TripleKind::Bit) {
        ASSERT_EQ(a.bw ^ b.bw, (a.bu ^ b.bu) & (a.bv ^ b.bv));
        continue;
      }
      const RingMatrix u = add(a.u, b.u), v = add(a.v, b.v), z = add(a.z, b.z);
      ASSERT_EQ(u.bits(), l);
      // Independent oracle: schoolbook products in 64-bit then masked.
      const u64 mask = ring_mask(l);
      for (std::size_t r = 0; r < z.rows(); ++r)
        for (std::size_t c = 0; c < z.cols(); ++c) {
          u64 acc = 0;
          if (it.shape.kind == TripleKind::Matrix) {
            for (std::size_t j = 0; j < u.cols(); ++j) acc += u(r, j) * v(j, c);
          } else {
            acc = u(r, c) * v(r, c);
          }
          ASSERT_EQ(z(r, c), acc & mask);
        }
    }
    EXPECT_THROW(dealt.a->next(), TripleShortfall);
  }
}

TEST(Dealer, SameSeedSameStoresDifferentSeedDifferent) {
  const TripleBudget b = compute_budget(vertical_job(12, 2, 1, 3, 2));
  const auto a1 = scratch("s1_a.mkts"), b1 = scratch("s1_b.mkts"), a2 = scratch("s2_a.mkts"),
             b2 = scratch("s2_b.mkts"), a3 = scratch("s3_a.mkts"), b3 = scratch("s3_b.mkts");
  EXPECT_EQ(dealer_generate(b, seed_from_u64(5), a1, b1), b.record_count());
  dealer_generate(b, seed_from_u64(5), a2, b2);
  dealer_generate(b, seed_from_u64(6), a3, b3);
  EXPECT_EQ(slurp(a1), slurp(a2));
  EXPECT_EQ(slurp(b1), slurp(b2));
  EXPECT_NE(slurp(a1), slurp(a3));
  EXPECT_NE(slurp(a1), slurp(b1));
}

TEST(Dealer, ShareStreamsAreBitBalanced) {
  const TripleBudget b = compute_budget(vertical_job(200, 4, 4, 4, 1));
  auto dealt = dealer_generate(b, seed_from_u64(21));
  std::vector<TripleRecord> ra, rb;
  while (dealt.a->remaining()) {
    ra.push_back(dealt.a->next());
    rb.push_back(dealt.b->next());
  }
  for (const auto* recs : {&ra, &rb}) {
    std::vector<const RingMatrix*> ms;
    std::size_t bit_ones = 0, bit_total = 0;
    for (const auto& r : *recs) {
      if (r.shape.kind == TripleKind::Bit) {
        for (const BitMatrix* bm : {&r.bu, &r.bv, &r.bw})
          for (std::size_t i = 0; i < bm->size(); ++i) bit_ones += bm->get(i);
        bit_total += 3 * r.bu.size();
      } else {
        ms.insert(ms.end(), {&r.u, &r.v, &r.z});
      }
    }
    std::size_t words = 0;
    for (const auto* m : ms) words += m->size();
    const double frac = ones_fraction(ms);
    EXPECT_LT(std::abs(frac - 0.5), 6 * 0.5 / std::sqrt(64.0 * static_cast<double>(words)));
    const double bfrac = static_cast<double>(bit_ones) / static_cast<double>(bit_total);
    EXPECT_LT(std::abs(bfrac - 0.5), 6 * 0.5 / std::sqrt(static_cast<double>(bit_total)));
  }
}

TEST(TripleStore, FileRoundTripMatchesMemory) {
  const TripleBudget b = compute_budget(vertical_job(9, 1, 2, 3, 1));
  const auto pa = scratch("rt_a.mkts"), pb = scratch("rt_b.mkts");
  dealer_generate(b, seed_from_u64(7), pa, pb);
  auto mem = dealer_generate(b, seed_from_u64(7));
  FileTripleSource fa(pa.string()), fb(pb.string());
  EXPECT_EQ(fa.header().role, Role::A);
  EXPECT_EQ(fb.header().role, Role::B);
  EXPECT_EQ(fa.header().version, kTripleStoreVersion);
  EXPECT_EQ(fa.ring_bits(), 64u);
  EXPECT_EQ(fa.session_id(), fb.session_id());
  EXPECT_EQ(fa.session_id(), mem.a->session_id());
  EXPECT_EQ(fa.remaining(), b.record_count());
  while (mem.a->remaining()) {
    const TripleRecord x = fa.next(), y = mem.a->next();
    ASSERT_EQ(x.shape, y.shape);
    ASSERT_EQ(x.step, y.step);
    ASSERT_EQ(x.u, y.u);
    ASSERT_EQ(x.v, y.v);
    ASSERT_EQ(x.z, y.z);
    ASSERT_EQ(x.bw, y.bw);
  }
  EXPECT_EQ(fa.remaining(), 0u);
  EXPECT_THROW(fa.next(), TripleShortfall);

  const std::string raw = slurp(pa);
  ASSERT_GE(raw.size(), 32u);
  EXPECT_EQ(raw.substr(0, 4), "MKTS");
  EXPECT_EQ(static_cast<unsigned char>(raw[6]), 64u);
  EXPECT_EQ(static_cast<unsigned char>(raw[7]), 0u);
}

TEST(TripleStore, RejectsForeignAndTruncatedFiles) {
  const auto bad = scratch("bad.mkts");
  {
    std::ofstream(bad, std::ios::binary) << "NOPE and some more bytes to fill the header";
  }
  EXPECT_THROW(FileTripleSource(bad.string()), std::runtime_error);
  EXPECT_THROW(FileTripleSource(scratch("missing.mkts").string()), std::runtime_error);

  const TripleBudget b = compute_budget(vertical_job(9, 1, 2, 3, 1));
  const auto pa = scratch("tr_a.mkts"), pb = scratch("tr_b.mkts");
  dealer_generate(b, seed_from_u64(8), pa, pb);
  std::string raw = slurp(pa);
  std::string v2 = raw;
  v2[4] = 9;
  {
    std::ofstream(bad, std::ios::binary | std::ios::trunc) << v2;
  }
  EXPECT_THROW(FileTripleSource(bad.string()), std::runtime_error);
  raw.resize(raw.size() - 10);
  {
    std::ofstream(bad, std::ios::binary | std::ios::trunc) << raw;
  }
  FileTripleSource cut(bad.string());
  EXPECT_THROW(
      {
        while (true) cut.next();
      },
      std::runtime_error);
}

TEST(TripleStore, SessionIdCommitsToSeed) {
  EXPECT_EQ(dealer_session_id(seed_from_u64(1)), dealer_session_id(seed_from_u64(1)));
  EXPECT_NE(dealer_session_id(seed_from_u64(1)), dealer_session_id(seed_from_u64(2)));
  EXPECT_NE(dealer_session_id(seed_from_u64(1)), seed_from_u64(1));
}

TEST(TripleStore, ShortfallNamesStep) {
  auto [pa, pb] = make_parties(items({TripleShape::elementwise(2, 2)}, Step::S2));
  StepScope sc(*pa.ch, Phase::Online, Step::S2);
  pa.s->take_elementwise(2, 2);
  try {
    pa.s->take_elementwise(2, 2);
    FAIL() << "expected shortfall";
  } catch (const TripleShortfall& e) {
    EXPECT_NE(std::string(e.what()).find("S2"), std::string::npos) << e.what();
  }
  StepScope sb(*pb.ch, Phase::Online, Step::S3);
  EXPECT_THROW(pb.s->take_elementwise(2, 2), TripleShortfall);
}

TEST(TripleStore, ConsumptionChargesDealerBytes) {
  auto [pa, pb] = make_parties(items({TripleShape::matrix(2, 3, 4)}, Step::S1));
  {
    StepScope sc(*pa.ch, Phase::Online, Step::S1);
    pa.s->take_matrix(2, 3, 4);
  }
  const RunMetrics m = pa.ch->metrics_snapshot();
  EXPECT_EQ(m.at(Phase::Offline, Step::S1).dealer_bytes, TripleShape::matrix(2, 3, 4).record_bytes(64));
  EXPECT_EQ(m.at(Phase::Online, Step::S1).dealer_bytes, 0u);
}

TEST(Dealer, StoresIndependentOfData) {
  // Two jobs of identical shape; nothing but the shape and seed reaches the dealer.
  JobParams p1 = vertical_job(40, 2, 3, 4, 2), p2 = p1;
  const auto a1 = scratch("d1_a.mkts"), b1 = scratch("d1_b.mkts"), a2 = scratch("d2_a.mkts"),
             b2 = scratch("d2_b.mkts");
  dealer_generate(compute_budget(p1), seed_from_u64(99), a1, b1);
  dealer_generate(compute_budget(p2), seed_from_u64(99), a2, b2);
  EXPECT_EQ(slurp(a1), slurp(a2));
  EXPECT_EQ(slurp(b1), slurp(b2));
}

namespace {

struct HeParties {
  Party a, b;
};

HeParties he_parties(unsigned key_bits, FixedPointConfig fp, u64 seed) {
  auto [pa, pb] = make_parties({}, seed, fp);
  Prg kp(seed_from_u64(seed), 0x4b);
  pb.s->set_he(std::make_unique<HeContext>());
  pb.s->he()->mine.emplace(keygen(key_bits, kp, true));
  run_both(pa, pb, [](Session& s) {
    if (s.is_a()) recv_public_key(s);
    else send_public_key(s);
  });
  return {std::move(pa), std::move(pb)};
}

}  // namespace

TEST(HeGenerate, MatrixTriplesOverZ16) {
  auto hp = he_parties(512, FixedPointConfig{16, 4}, 31);
  const auto its = repeat(items({TripleShape::matrix(2, 2, 2)}, Step::S1), 20);
  const std::size_t before = hp.a.ch->metrics_snapshot().total().bytes_sent;
  auto [sa, sb] = run_both(hp.a, hp.b, [&](Session& s) { return he_generate(s, its); });
  ASSERT_EQ(sa->remaining(), 20u);
  EXPECT_FALSE(sa->dealer_delivered());
  for (int i = 0; i < 20; ++i) {
    const TripleRecord a = sa->next(), b = sb->next();
    EXPECT_EQ(a.step, Step::S1);
    const RingMatrix u = add(a.u, b.u), v = add(a.v, b.v), z = add(a.z, b.z);
    ASSERT_EQ(z.bits(), 16u);
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t c = 0; c < 2; ++c)
        ASSERT_EQ(z(r, c), (u(r, 0) * v(0, c) + u(r, 1) * v(1, c)) & 0xffff);
  }
  // All traffic is offline.
  const RunMetrics ma = hp.a.ch->metrics_snapshot();
  EXPECT_GT(ma.phase_total(Phase::Offline).bytes_sent, before);
  EXPECT_EQ(ma.phase_total(Phase::Online).bytes_sent, before);
}

TEST(HeGenerate, CiphertextCountIsTwoCrossBatchesPerTriple) {
  auto hp = he_parties(512, FixedPointConfig{16, 4}, 32);
  hp.a.ch->record_transcript(true);
  const auto its = repeat(items({TripleShape::matrix(2, 3, 2)}, Step::S1), 4);
  run_both(hp.a, hp.b, [&](Session& s) { return he_generate(s, its); });
  const PublicKey& pk = *hp.a.s->he()->peer;
  std::size_t from_b = 0, from_a = 0, batches_a = 0;
  for (const auto& e : hp.a.ch->transcript()) {
    if (e.frame.type != MsgType::Ciphertext) continue;
    ByteReader r(e.frame.payload);
    while (r.remaining()) {
      const CipherMatrix m = read_cipher_matrix(r, pk);
      if (e.outgoing) {
        from_a += m.data.size();
        ++batches_a;
      } else {
        from_b += m.data.size();
      }
    }
  }
  // B: encryptions of U_B (2x3) and V_B (3x2); A: masked U_A·V_B and U_B·V_A.
  EXPECT_EQ(batches_a, 2u * 4u);
  EXPECT_EQ(from_a, 4u * (4 + 4));
  EXPECT_EQ(from_b, 4u * (6 + 6));
}

TEST(HeGenerate, ElementwiseAndBitTriples) {
  auto hp = he_parties(512, FixedPointConfig{16, 4}, 33);
  const auto its = items({TripleShape::elementwise(3, 3), TripleShape::bits(100)}, Step::S2);
  auto [sa, sb] = run_both(hp.a, hp.b, [&](Session& s) { return he_generate(s, its); });
  const TripleRecord a = sa->next(), b = sb->next();
  EXPECT_EQ(add(a.z, b.z), hadamard(add(a.u, b.u), add(a.v, b.v)));
  const TripleRecord ba = sa->next(), bb = sb->next();
  EXPECT_EQ(ba.bw ^ bb.bw, (ba.bu ^ bb.bu) & (ba.bv ^ bb.bv));
}

TEST(HeGenerate, RequiresKeys) {
  auto [pa, pb] = make_parties({});
  EXPECT_THROW(he_generate(*pa.s, items({TripleShape::bits(1)})), HeError);
}

TEST(HeGenerate, InterchangeableWithDealerTriples) {
  // Same Beaver product from HE-generated and dealer-generated triples.
  auto hp = he_parties(512, FixedPointConfig{16, 4}, 34);
  const auto its = items({TripleShape::matrix(3, 2, 2)}, Step::S1);
  auto [sa, sb] = run_both(hp.a, hp.b, [&](Session& s) { return he_generate(s, its); });
  Prg prg(seed_from_u64(35));
  const RingMatrix x = random_matrix(prg, 3, 2, 16), y = random_matrix(prg, 2, 2, 16);
  const auto xs = share(x, prg), ys = share(y, prg);
  hp.a.s->set_triples(sa.get());
  hp.b.s->set_triples(sb.get());
  auto [za, zb] = run_both(hp.a, hp.b, [&](Session& s) {
    StepScope sc(s.channel(), Phase::Online, Step::S1);
    return beaver_matmul(s, s.is_a() ? xs.first : xs.second, s.is_a() ? ys.first : ys.second);
  });
  auto [qa, qb] = make_parties(its, 36, FixedPointConfig{16, 4});
  auto [wa, wb] = run_both(qa, qb, [&](Session& s) {
    StepScope sc(s.channel(), Phase::Online, Step::S1);
    return beaver_matmul(s, s.is_a() ? xs.first : xs.second, s.is_a() ? ys.first : ys.second);
  });
  EXPECT_EQ(reconstruct(za, zb), matmul(x, y));
  EXPECT_EQ(reconstruct(wa, wb), matmul(x, y));
}
