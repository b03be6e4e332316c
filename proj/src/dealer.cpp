#include "spkm/dealer.hpp"

#include <stdexcept>

#include "spkm/ahe.hpp"
#include "spkm/errors.hpp"

namespace spkm {

Seed dealer_session_id(const Seed& seed) {
  static constexpr char kDomain[] = "spkm-dealer-session";
  std::vector<std::uint8_t> buf(kDomain, kDomain + sizeof(kDomain) - 1);
  buf.insert(buf.end(), seed.begin(), seed.end());
  const auto h = sha256(buf);
  Seed id{};
  std::copy_n(h.begin(), id.size(), id.begin());
  return id;
}

namespace {

BitMatrix random_bits(Prg& prg, std::size_t count) {
  BitMatrix b(count, 1);
  for (auto& w : b.words()) w = prg.next_u64();
  b.trim();
  return b;
}

}  // namespace

std::pair<TripleRecord, TripleRecord> deal(const BudgetItem& item, unsigned l, Prg& prg) {
  const TripleShape& sh = item.shape;
  TripleRecord a{sh, item.step, {}, {}, {}, {}, {}, {}};
  TripleRecord b = a;
  switch (sh.kind) {
    case TripleKind::Matrix:
    case TripleKind::Elementwise: {
      const bool mat = sh.kind == TripleKind::Matrix;
      const std::size_t vr = mat ? sh.d1 : sh.d0, vc = mat ? sh.d2 : sh.d1;
      RingMatrix u = random_matrix(prg, sh.d0, sh.d1, l);
      RingMatrix v = random_matrix(prg, vr, vc, l);
      RingMatrix z = mat ? matmul(u, v) : hadamard(u, v);
      a.u = random_matrix(prg, u.rows(), u.cols(), l);
      a.v = random_matrix(prg, v.rows(), v.cols(), l);
      a.z = random_matrix(prg, z.rows(), z.cols(), l);
      b.u = sub(u, a.u);
      b.v = sub(v, a.v);
      b.z = sub(z, a.z);
      break;
    }
    case TripleKind::Bit: {
      const BitMatrix u = random_bits(prg, sh.d0), v = random_bits(prg, sh.d0);
      const BitMatrix w = u & v;
      a.bu = random_bits(prg, sh.d0);
      a.bv = random_bits(prg, sh.d0);
      a.bw = random_bits(prg, sh.d0);
      b.bu = u ^ a.bu;
      b.bv = v ^ a.bv;
      b.bw = w ^ a.bw;
      break;
    }
  }
  return {std::move(a), std::move(b)};
}

DealtPair dealer_generate(const TripleBudget& budget, const Seed& seed) {
  return dealer_generate(budget.sequence(), seed, budget.params.l);
}

DealtPair dealer_generate(const std::vector<BudgetItem>& items, const Seed& seed, unsigned l) {
  Prg prg(seed, 0xdea1);
  std::vector<TripleRecord> ra, rb;
  for (const auto& item : items) {
    auto [a, b] = deal(item, l, prg);
    ra.push_back(std::move(a));
    rb.push_back(std::move(b));
  }
  const Seed sid = dealer_session_id(seed);
  return {std::make_unique<MemoryTripleSource>(l, sid, std::move(ra), true),
          std::make_unique<MemoryTripleSource>(l, sid, std::move(rb), true)};
}

std::size_t dealer_generate(const TripleBudget& budget, const Seed& seed, const std::string& path_a,
                            const std::string& path_b) {
  Prg prg(seed, 0xdea1);
  const auto seq = budget.sequence();
  TripleStoreHeader h;
  h.l = budget.params.l;
  h.session_id = dealer_session_id(seed);
  h.count = seq.size();
  h.role = Role::A;
  TripleStoreWriter wa(path_a, h);
  h.role = Role::B;
  TripleStoreWriter wb(path_b, h);
  for (const auto& item : seq) {
    auto [a, b] = deal(item, h.l, prg);
    wa.append(a);
    wb.append(b);
  }
  wa.finish();
  wb.finish();
  return seq.size();
}

namespace {

BitMatrix bits_of(const RingMatrix& m) {
  BitMatrix b(m.size(), 1);
  for (std::size_t i = 0; i < m.size(); ++i) b.set(i, m[i] & 1);
  return b;
}

RingMatrix ring_of(const BitMatrix& b, unsigned l) {
  RingMatrix m(b.size(), 1, l);
  for (std::size_t i = 0; i < b.size(); ++i) m.mutable_data()[i] = b.get(i);
  return m;
}

// Shares of the two cross products between A's and B's local factors.
// `cross` maps (A's plaintext, B's ciphertexts) to a ciphertext product.
template <typename CrossA, typename CrossB>
std::pair<AShare, AShare> cross_products(Session& s, const RingMatrix& x_mine, const RingMatrix& y_mine,
                                         unsigned bound_bits, unsigned out_bits, CrossA first,
                                         CrossB second) {
  Channel& ch = s.channel();
  HeContext* he = s.he();
  if (s.is_a()) {
    const PublicKey& pk = *he->peer;
    auto payload = ch.recv_msg(MsgType::Ciphertext);
    ByteReader r(payload);
    const CipherMatrix ex = read_cipher_matrix(r, pk);
    const CipherMatrix ey = read_cipher_matrix(r, pk);
    const CipherMatrix c1 = first(pk, x_mine, ey);
    const CipherMatrix c2 = second(pk, ex, y_mine);
    AShare s1 = he2ss(s, Role::A, &c1, bound_bits, out_bits);
    AShare s2 = he2ss(s, Role::A, &c2, bound_bits, out_bits);
    return {std::move(s1), std::move(s2)};
  }
  const PublicKey& pk = he->mine->pk;
  ByteWriter w;
  write_cipher_matrix(w, pk, encrypt_matrix(pk, x_mine, s.prg()));
  write_cipher_matrix(w, pk, encrypt_matrix(pk, y_mine, s.prg()));
  ch.send_msg(MsgType::Ciphertext, w.take());
  AShare s1 = he2ss(s, Role::A, nullptr, 0, out_bits);
  AShare s2 = he2ss(s, Role::A, nullptr, 0, out_bits);
  return {std::move(s1), std::move(s2)};
}

unsigned bits_for(std::size_t inner, unsigned l) {
  unsigned lg = 0;
  while ((std::size_t{1} << lg) < inner) ++lg;
  // |sum of `inner` products of centered l-bit words| <= inner * 2^(2l-2)
  return 2 * l - 2 + lg + 1;
}

}  // namespace

std::unique_ptr<MemoryTripleSource> he_generate(Session& s, const std::vector<BudgetItem>& items) {
  HeContext* he = s.he();
  if (!he || (s.is_a() ? !he->peer : !he->mine)) {
    throw HeError("he_generate: B needs a key pair and A needs B's public key");
  }
  Channel& ch = s.channel();
  const unsigned l = s.l();
  std::vector<TripleRecord> out;
  out.reserve(items.size());
  for (const auto& item : items) {
    StepScope scope(ch, Phase::Offline, item.step);
    const TripleShape& sh = item.shape;
    TripleRecord rec{sh, item.step, {}, {}, {}, {}, {}, {}};
    if (sh.kind == TripleKind::Bit) {
      RingMatrix u = random_matrix(s.prg(), sh.d0, 1, 1);
      RingMatrix v = random_matrix(s.prg(), sh.d0, 1, 1);
      const RingMatrix ul = ring_of(bits_of(u), l), vl = ring_of(bits_of(v), l);
      auto had = [](const PublicKey& pk, const auto& a, const auto& b) {
        if constexpr (std::is_same_v<std::decay_t<decltype(a)>, RingMatrix>) return he_hadamard(pk, b, a);
        else return he_hadamard(pk, a, b);
      };
      auto [c1, c2] = cross_products(s, ul, vl, 2, 1, had, had);
      rec.bu = bits_of(u);
      rec.bv = bits_of(v);
      rec.bw = bits_of(hadamard(u, v)) ^ bits_of(c1.value) ^ bits_of(c2.value);
    } else {
      const bool mat = sh.kind == TripleKind::Matrix;
      const std::size_t vr = mat ? sh.d1 : sh.d0, vc = mat ? sh.d2 : sh.d1;
      RingMatrix u = random_matrix(s.prg(), sh.d0, sh.d1, l);
      RingMatrix v = random_matrix(s.prg(), vr, vc, l);
      AShare c1, c2;
      // A holds (U_A, V_A), B encrypts (U_B, V_B); cross terms U_A·V_B and U_B·V_A.
      if (mat) {
        auto left = [](const PublicKey& pk, const RingMatrix& ua, const CipherMatrix& evb) {
          return he_matmul(pk, SparsePlainMatrix::from_dense(ua), evb);
        };
        auto right = [](const PublicKey& pk, const CipherMatrix& eub, const RingMatrix& va) {
          return he_matmul(pk, eub, va);
        };
        std::tie(c1, c2) = cross_products(s, u, v, bits_for(sh.d1, l), l, left, right);
      } else {
        auto left = [](const PublicKey& pk, const RingMatrix& ua, const CipherMatrix& evb) {
          return he_hadamard(pk, evb, ua);
        };
        auto right = [](const PublicKey& pk, const CipherMatrix& eub, const RingMatrix& va) {
          return he_hadamard(pk, eub, va);
        };
        std::tie(c1, c2) = cross_products(s, u, v, bits_for(1, l), l, left, right);
      }
      RingMatrix z = mat ? matmul(u, v) : hadamard(u, v);
      add_inplace(z, c1.value);
      add_inplace(z, c2.value);
      rec.u = std::move(u);
      rec.v = std::move(v);
      rec.z = std::move(z);
    }
    out.push_back(std::move(rec));
  }
  const Seed sid{};
  return std::make_unique<MemoryTripleSource>(l, sid, std::move(out), false);
}

std::unique_ptr<MemoryTripleSource> he_generate(Session& s, const TripleBudget& budget) {
  return he_generate(s, budget.sequence());
}

}  // namespace spkm
