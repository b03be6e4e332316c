#include "spkm/ahe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "spkm/errors.hpp"

namespace spkm {
namespace {

mpz_class random_bits(Prg& prg, unsigned bits) {
  std::vector<std::uint8_t> buf((bits + 7) / 8);
  prg.fill(buf);
  mpz_class r;
  mpz_import(r.get_mpz_t(), buf.size(), 1, 1, 1, 0, buf.data());
  mpz_fdiv_r_2exp(r.get_mpz_t(), r.get_mpz_t(), bits);
  return r;
}

mpz_class random_below(Prg& prg, const mpz_class& bound) {
  const unsigned bits = static_cast<unsigned>(mpz_sizeinbase(bound.get_mpz_t(), 2));
  mpz_class r;
  do {
    r = random_bits(prg, bits);
  } while (r >= bound);
  return r;
}

mpz_class random_prime(Prg& prg, unsigned bits) {
  mpz_class p = random_bits(prg, bits);
  mpz_setbit(p.get_mpz_t(), bits - 1);
  mpz_setbit(p.get_mpz_t(), bits - 2);
  mpz_setbit(p.get_mpz_t(), 0);
  mpz_nextprime(p.get_mpz_t(), p.get_mpz_t());
  return p;
}

u64 fingerprint_of(const mpz_class& n) {
  std::vector<std::uint8_t> buf((mpz_sizeinbase(n.get_mpz_t(), 2) + 7) / 8);
  std::size_t count = 0;
  mpz_export(buf.data(), &count, 1, 1, 1, 0, n.get_mpz_t());
  buf.resize(count);
  const auto h = sha256(buf);
  u64 v = 0;
  for (int i = 0; i < 8; ++i) v |= u64{h[i]} << (8 * i);
  return v;
}

void mulmod(mpz_class& acc, const mpz_class& x, const mpz_class& m) {
  mpz_mul(acc.get_mpz_t(), acc.get_mpz_t(), x.get_mpz_t());
  mpz_tdiv_r(acc.get_mpz_t(), acc.get_mpz_t(), m.get_mpz_t());
}

unsigned window_digit(const mpz_class& e, unsigned pos, unsigned w) {
  unsigned d = 0;
  for (unsigned b = 0; b < w; ++b) d |= static_cast<unsigned>(mpz_tstbit(e.get_mpz_t(), pos + b)) << b;
  return d;
}

void write_mpz_fixed(ByteWriter& w, const mpz_class& v, std::size_t width) {
  std::vector<std::uint8_t> buf(width, 0);
  const std::size_t need = (mpz_sizeinbase(v.get_mpz_t(), 2) + 7) / 8;
  if (v < 0 || need > width) throw HeError("integer does not fit its wire width");
  std::size_t count = 0;
  if (v != 0) mpz_export(buf.data() + (width - need), &count, 1, 1, 1, 0, v.get_mpz_t());
  for (int s = 24; s >= 0; s -= 8) w.u8(static_cast<std::uint8_t>(width >> s));
  w.bytes(buf);
}

mpz_class read_mpz(ByteReader& r) {
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len = (len << 8) | r.u8();
  auto bytes = r.bytes(len);
  mpz_class v;
  mpz_import(v.get_mpz_t(), bytes.size(), 1, 1, 1, 0, bytes.data());
  return v;
}

mpz_class signed_word(u64 v, unsigned bits) {
  const i64 s = to_signed(v, bits);
  mpz_class r;
  if (s < 0) {
    mpz_set_ui(r.get_mpz_t(), static_cast<unsigned long>(u64{0} - static_cast<u64>(s)));
    r = -r;
  } else {
    mpz_set_ui(r.get_mpz_t(), static_cast<unsigned long>(s));
  }
  return r;
}

// Cost in modular multiplications of serving `uses` exponentiations of
// `bits`-bit exponents with window w (w = 0: plain powm each time).
double table_cost(unsigned bits, std::size_t uses, unsigned w) {
  if (w == 0) return static_cast<double>(uses) * (1.25 * bits + 1);
  const double windows = std::ceil(static_cast<double>(bits) / w);
  return windows * ((1u << w) + w) + static_cast<double>(uses) * windows;
}

unsigned pick_window(unsigned bits, std::size_t uses) {
  unsigned best = 0;
  double best_cost = table_cost(bits, uses, 0);
  for (unsigned w = 2; w <= 10; ++w) {
    const double c = table_cost(bits, uses, w);
    if (c < best_cost) {
      best = w;
      best_cost = c;
    }
  }
  return best;
}

void check_key(const CipherMatrix& c, const PublicKey& pk) {
  if (c.key_id != pk.fingerprint()) throw HeError("ciphertext key mismatch");
}

}  // namespace

FixedBaseTable::FixedBaseTable(const mpz_class& base, const mpz_class& mod, unsigned max_exp_bits,
                               unsigned window)
    : mod_(mod),
      max_bits_(max_exp_bits),
      window_(window),
      windows_((max_exp_bits + window - 1) / window) {
  if (window == 0 || window > 16) throw std::invalid_argument("window must be in [1, 16]");
  const std::size_t per = (std::size_t{1} << window) - 1;
  entries_.resize(windows_ * per);
  mpz_class g = base % mod;
  for (unsigned t = 0; t < windows_; ++t) {
    mpz_class* row = entries_.data() + t * per;
    row[0] = g;
    for (std::size_t c = 1; c < per; ++c) {
      row[c] = row[c - 1];
      mulmod(row[c], g, mod_);
    }
    mpz_class next = row[per - 1];
    mulmod(next, g, mod_);
    g = next;
  }
}

void FixedBaseTable::mul_pow(mpz_class& acc, const mpz_class& e) const {
  if (e < 0 || mpz_sizeinbase(e.get_mpz_t(), 2) > max_bits_) throw std::invalid_argument("exponent exceeds table");
  const std::size_t per = (std::size_t{1} << window_) - 1;
  for (unsigned t = 0; t < windows_; ++t) {
    const unsigned d = window_digit(e, t * window_, window_);
    if (d) mulmod(acc, entries_[t * per + d - 1], mod_);
  }
}

void FixedBaseTable::mul_pow(mpz_class& acc, u64 e) const {
  const std::size_t per = (std::size_t{1} << window_) - 1;
  for (unsigned t = 0; t < windows_ && e; ++t) {
    const unsigned d = static_cast<unsigned>(e & per);
    e >>= window_;
    if (d) mulmod(acc, entries_[t * per + d - 1], mod_);
  }
}

PublicKey::PublicKey(mpz_class n, mpz_class hs) : n_(std::move(n)), hs_(std::move(hs)) {
  n2_ = n_ * n_;
  bits_ = static_cast<unsigned>(mpz_sizeinbase(n_.get_mpz_t(), 2));
  rbits_ = bits_ / 2;
  ct_bytes_ = (mpz_sizeinbase(n2_.get_mpz_t(), 2) + 7) / 8;
  fingerprint_ = fingerprint_of(n_);
}

PublicKey::PublicKey(const PublicKey& o) : PublicKey(o.n_, o.hs_) {
  std::lock_guard lock(o.table_mu_);
  hs_table_ = o.hs_table_;
}

PublicKey& PublicKey::operator=(const PublicKey& o) {
  if (this != &o) {
    n_ = o.n_;
    n2_ = o.n2_;
    hs_ = o.hs_;
    bits_ = o.bits_;
    rbits_ = o.rbits_;
    ct_bytes_ = o.ct_bytes_;
    fingerprint_ = o.fingerprint_;
    std::scoped_lock lock(table_mu_, o.table_mu_);
    hs_table_ = o.hs_table_;
  }
  return *this;
}

const FixedBaseTable& PublicKey::hs_table() const {
  std::lock_guard lock(table_mu_);
  if (!hs_table_) hs_table_ = std::make_shared<const FixedBaseTable>(hs_, n2_, rbits_, 8);
  return *hs_table_;
}

void PublicKey::blind(mpz_class& c, Prg& prg) const { hs_table().mul_pow(c, random_bits(prg, rbits_)); }

Ciphertext PublicKey::encrypt(const mpz_class& m, Prg& prg) const {
  mpz_class mm;
  mpz_fdiv_r(mm.get_mpz_t(), m.get_mpz_t(), n_.get_mpz_t());
  // (1 + N)^m = 1 + mN mod N^2
  mpz_class c = mm * n_ + 1;
  blind(c, prg);
  return Ciphertext{std::move(c), fingerprint_};
}

Ciphertext PublicKey::rerandomize(const Ciphertext& c, Prg& prg) const {
  check(c);
  Ciphertext r = c;
  blind(r.value, prg);
  return r;
}

void PublicKey::check(const Ciphertext& c) const {
  if (c.key_id != fingerprint_) throw HeError("ciphertext key mismatch");
}

void PublicKey::write(ByteWriter& w) const {
  w.u16(static_cast<std::uint16_t>(bits_));
  write_mpz_fixed(w, n_, (bits_ + 7) / 8);
  write_mpz_fixed(w, hs_, ct_bytes_);
}

PublicKey PublicKey::read(ByteReader& r) {
  r.u16();
  mpz_class n = read_mpz(r);
  mpz_class hs = read_mpz(r);
  if (n <= 1 || hs <= 0 || hs >= n * n) throw HeError("malformed public key");
  return PublicKey(std::move(n), std::move(hs));
}

SecretKey::SecretKey(const mpz_class& p, const mpz_class& q) : p_(p), q_(q) {
  n_ = p_ * q_;
  p2_ = p_ * p_;
  q2_ = q_ * q_;
  pm1_ = p_ - 1;
  qm1_ = q_ - 1;
  half_n_ = n_ / 2;
  const mpz_class g = n_ + 1;
  auto h = [&](const mpz_class& prime, const mpz_class& sq, const mpz_class& e) {
    mpz_class u;
    mpz_powm(u.get_mpz_t(), g.get_mpz_t(), e.get_mpz_t(), sq.get_mpz_t());
    mpz_class lu = (u - 1) / prime;
    mpz_class inv;
    if (mpz_invert(inv.get_mpz_t(), lu.get_mpz_t(), prime.get_mpz_t()) == 0) throw HeError("bad key");
    return inv;
  };
  hp_ = h(p_, p2_, pm1_);
  hq_ = h(q_, q2_, qm1_);
  mpz_invert(qinv_p_.get_mpz_t(), q_.get_mpz_t(), p_.get_mpz_t());
  fingerprint_ = fingerprint_of(n_);
}

mpz_class SecretKey::decrypt(const Ciphertext& c) const {
  if (c.key_id != fingerprint_) throw HeError("ciphertext key mismatch");
  auto part = [&](const mpz_class& prime, const mpz_class& sq, const mpz_class& e, const mpz_class& hh) {
    mpz_class cm, u;
    mpz_tdiv_r(cm.get_mpz_t(), c.value.get_mpz_t(), sq.get_mpz_t());
    mpz_powm(u.get_mpz_t(), cm.get_mpz_t(), e.get_mpz_t(), sq.get_mpz_t());
    mpz_class m = ((u - 1) / prime) * hh;
    mpz_tdiv_r(m.get_mpz_t(), m.get_mpz_t(), prime.get_mpz_t());
    return m;
  };
  const mpz_class mp = part(p_, p2_, pm1_, hp_);
  const mpz_class mq = part(q_, q2_, qm1_, hq_);
  mpz_class t = (mp - mq) * qinv_p_;
  mpz_fdiv_r(t.get_mpz_t(), t.get_mpz_t(), p_.get_mpz_t());
  return mq + q_ * t;
}

mpz_class SecretKey::decrypt_centered(const Ciphertext& c) const {
  mpz_class m = decrypt(c);
  if (m > half_n_) m -= n_;
  return m;
}

KeyPair keygen(unsigned bits, Prg& prg, bool allow_test_sizes) {
  if (bits < 2048 && !(allow_test_sizes && bits >= 256)) {
    throw std::invalid_argument("HE keys must be at least 2048 bits");
  }
  if (bits % 2 != 0) throw std::invalid_argument("key size must be even");
  mpz_class p, q, n;
  do {
    p = random_prime(prg, bits / 2);
    q = random_prime(prg, bits / 2);
    n = p * q;
  } while (p == q || mpz_sizeinbase(n.get_mpz_t(), 2) != bits);
  mpz_class x = random_below(prg, n);
  mpz_class h = n - (x * x) % n;
  mpz_class hs;
  const mpz_class n2 = n * n;
  mpz_powm(hs.get_mpz_t(), h.get_mpz_t(), n.get_mpz_t(), n2.get_mpz_t());
  return KeyPair{PublicKey(n, hs), SecretKey(p, q)};
}

Ciphertext he_add(const PublicKey& pk, const Ciphertext& a, const Ciphertext& b) {
  pk.check(a);
  pk.check(b);
  Ciphertext r = a;
  mulmod(r.value, b.value, pk.n2());
  return r;
}

Ciphertext he_plain_add(const PublicKey& pk, const Ciphertext& c, const mpz_class& u) {
  pk.check(c);
  mpz_class uu;
  mpz_fdiv_r(uu.get_mpz_t(), u.get_mpz_t(), pk.n().get_mpz_t());
  Ciphertext r = c;
  mulmod(r.value, uu * pk.n() + 1, pk.n2());
  return r;
}

Ciphertext he_scalar_mul(const PublicKey& pk, const Ciphertext& c, const mpz_class& u) {
  pk.check(c);
  Ciphertext r{0, c.key_id};
  if (u >= 0) {
    mpz_powm(r.value.get_mpz_t(), c.value.get_mpz_t(), u.get_mpz_t(), pk.n2().get_mpz_t());
  } else {
    mpz_class inv, mag = -u;
    if (mpz_invert(inv.get_mpz_t(), c.value.get_mpz_t(), pk.n2().get_mpz_t()) == 0) {
      throw HeError("ciphertext not invertible");
    }
    mpz_powm(r.value.get_mpz_t(), inv.get_mpz_t(), mag.get_mpz_t(), pk.n2().get_mpz_t());
  }
  return r;
}

CipherMatrix CipherMatrix::transpose() const {
  CipherMatrix t{cols, rows, key_id, std::vector<mpz_class>(data.size())};
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) t.data[c * rows + r] = data[r * cols + c];
  return t;
}

CipherMatrix encrypt_matrix(const PublicKey& pk, const RingMatrix& m, Prg& prg) {
  CipherMatrix c{m.rows(), m.cols(), pk.fingerprint(), {}};
  c.data.reserve(m.size());
  for (u64 v : m.data()) c.data.push_back(pk.encrypt(signed_word(v, m.bits()), prg).value);
  return c;
}

std::vector<mpz_class> decrypt_matrix_centered(const SecretKey& sk, const CipherMatrix& c) {
  std::vector<mpz_class> out;
  out.reserve(c.data.size());
  for (const auto& v : c.data) out.push_back(sk.decrypt_centered(Ciphertext{v, c.key_id}));
  return out;
}

void write_cipher_matrix(ByteWriter& w, const PublicKey& pk, const CipherMatrix& m) {
  check_key(m, pk);
  w.u64(m.rows);
  w.u64(m.cols);
  w.u64(m.key_id);
  w.buffer().reserve(w.size() + m.data.size() * (pk.ciphertext_bytes() + 4));
  for (const auto& v : m.data) write_mpz_fixed(w, v, pk.ciphertext_bytes());
}

CipherMatrix read_cipher_matrix(ByteReader& r, const PublicKey& pk) {
  CipherMatrix m;
  m.rows = r.u64();
  m.cols = r.u64();
  m.key_id = r.u64();
  check_key(m, pk);
  if (m.rows * m.cols > r.remaining() / 4) throw HeError("cipher matrix header exceeds payload");
  m.data.reserve(m.rows * m.cols);
  for (std::size_t i = 0; i < m.rows * m.cols; ++i) {
    m.data.push_back(read_mpz(r));
    if (m.data.back() <= 0 || m.data.back() >= pk.n2()) throw HeError("ciphertext out of range");
  }
  return m;
}

CipherMatrix he_matmul(const PublicKey& pk, const SparsePlainMatrix& x, const CipherMatrix& y) {
  check_key(y, pk);
  if (x.cols() != y.rows) throw ShapeError("he_matmul: inner dimensions differ");
  const std::size_t m = x.rows(), q = y.cols;
  const mpz_class& n2 = pk.n2();
  std::vector<mpz_class> pos(m * q, 1), negs(m * q, 1);
  std::vector<char> neg_used(m * q, 0);
  // Walk X column by column so each ciphertext base is reused across rows.
  const SparsePlainMatrix xt = x.transpose();
  const auto& off = xt.row_offsets();
  const auto& rows_of = xt.col_indices();
  const auto& vals = xt.values();
  const unsigned bits = x.bits();
  std::vector<u64> mags;
  for (std::size_t l = 0; l < xt.rows(); ++l) {
    const std::size_t begin = off[l], end = off[l + 1];
    if (begin == end) continue;
    mags.assign(end - begin, 0);
    unsigned max_bits = 1;
    for (std::size_t k = begin; k < end; ++k) {
      const i64 s = to_signed(vals[k], bits);
      mags[k - begin] = s < 0 ? u64{0} - static_cast<u64>(s) : static_cast<u64>(s);
      max_bits = std::max(max_bits, 64u - static_cast<unsigned>(__builtin_clzll(mags[k - begin] | 1)));
    }
    const unsigned w = pick_window(max_bits, end - begin);
    for (std::size_t j = 0; j < q; ++j) {
      const mpz_class& base = y.at(l, j);
      std::unique_ptr<FixedBaseTable> table;
      if (w) table = std::make_unique<FixedBaseTable>(base, n2, max_bits, w);
      mpz_class tmp;
      for (std::size_t k = begin; k < end; ++k) {
        const std::size_t idx = rows_of[k] * q + j;
        const bool negative = to_signed(vals[k], bits) < 0;
        mpz_class& acc = negative ? negs[idx] : pos[idx];
        if (negative) neg_used[idx] = 1;
        if (table) {
          table->mul_pow(acc, mags[k - begin]);
        } else {
          mpz_powm_ui(tmp.get_mpz_t(), base.get_mpz_t(), mags[k - begin], n2.get_mpz_t());
          mulmod(acc, tmp, n2);
        }
      }
    }
  }
  for (std::size_t i = 0; i < pos.size(); ++i) {
    if (!neg_used[i]) continue;
    mpz_class inv;
    if (mpz_invert(inv.get_mpz_t(), negs[i].get_mpz_t(), n2.get_mpz_t()) == 0) throw HeError("not invertible");
    mulmod(pos[i], inv, n2);
  }
  return CipherMatrix{m, q, pk.fingerprint(), std::move(pos)};
}

CipherMatrix he_matmul(const PublicKey& pk, const CipherMatrix& x, const RingMatrix& y) {
  // [[X]]·Y = (Y^T · [[X]]^T)^T
  return he_matmul(pk, SparsePlainMatrix::from_dense(y.transpose()), x.transpose()).transpose();
}

CipherMatrix he_hadamard(const PublicKey& pk, const CipherMatrix& x, const RingMatrix& y) {
  check_key(x, pk);
  if (x.rows != y.rows() || x.cols != y.cols()) throw ShapeError("he_hadamard shape mismatch");
  CipherMatrix r{x.rows, x.cols, x.key_id, std::vector<mpz_class>(x.data.size())};
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    r.data[i] = he_scalar_mul(pk, Ciphertext{x.data[i], x.key_id}, signed_word(y[i], y.bits())).value;
  }
  return r;
}

unsigned product_bound_bits(const SparsePlainMatrix& x, unsigned y_bits) {
  // max_i sum_j |x_ij| * 2^(y_bits-1)
  mpz_class best = 0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    mpz_class sum = 0;
    for (std::size_t k = x.row_offsets()[r]; k < x.row_offsets()[r + 1]; ++k) {
      sum += abs(signed_word(x.values()[k], x.bits()));
    }
    if (sum > best) best = sum;
  }
  if (best == 0) return 1;
  return static_cast<unsigned>(mpz_sizeinbase(best.get_mpz_t(), 2)) + y_bits - 1;
}

void send_public_key(Session& s) {
  HeContext* he = s.he();
  if (!he || !he->mine) throw HeError("no key pair to publish");
  ByteWriter w;
  he->mine->pk.write(w);
  s.channel().send_msg(MsgType::PublicKey, w.take());
}

void recv_public_key(Session& s) {
  auto payload = s.channel().recv_msg(MsgType::PublicKey);
  ByteReader r(payload);
  PublicKey pk = PublicKey::read(r);
  if (!s.he()) s.set_he(std::make_unique<HeContext>());
  s.he()->peer.emplace(pk);
}

AShare he2ss(Session& s, Role holder, const CipherMatrix* c, unsigned bound_bits, unsigned out_bits) {
  Channel& ch = s.channel();
  HeContext* he = s.he();
  if (!he) throw HeError("he2ss needs HE keys");
  const u64 omask = ring_mask(out_bits);
  if (ch.role() == holder) {
    if (!c || !he->peer) throw HeError("he2ss: holder needs ciphertexts and the peer key");
    const PublicKey& pk = *he->peer;
    check_key(*c, pk);
    // r uniform in [0, 2^(bound+1+sigma)) statistically hides |Z| < 2^bound.
    const unsigned mask_bits = bound_bits + 1 + kStatSecurityBits;
    if (pk.bits() < mask_bits + 2) throw HeError("plaintext space too small for statistical masking");
    CipherMatrix masked{c->rows, c->cols, c->key_id, std::vector<mpz_class>(c->data.size())};
    RingMatrix share(c->rows, c->cols, out_bits);
    auto sd = share.mutable_data();
    for (std::size_t i = 0; i < c->data.size(); ++i) {
      const mpz_class r = random_bits(s.prg(), mask_bits);
      masked.data[i] = he_plain_add(pk, Ciphertext{c->data[i], c->key_id}, r).value;
      pk.blind(masked.data[i], s.prg());
      sd[i] = (u64{0} - mpz_class(r & mpz_class(omask)).get_ui()) & omask;
    }
    ByteWriter w;
    write_cipher_matrix(w, pk, masked);
    ch.send_msg(MsgType::Ciphertext, w.take());
    return AShare{holder, std::move(share)};
  }
  if (!he->mine) throw HeError("he2ss: key owner has no secret key");
  auto payload = ch.recv_msg(MsgType::Ciphertext);
  ByteReader r(payload);
  const CipherMatrix masked = read_cipher_matrix(r, he->mine->pk);
  RingMatrix share(masked.rows, masked.cols, out_bits);
  auto sd = share.mutable_data();
  for (std::size_t i = 0; i < masked.data.size(); ++i) {
    mpz_class m = he->mine->sk.decrypt_centered(Ciphertext{masked.data[i], masked.key_id});
    mpz_fdiv_r_2exp(m.get_mpz_t(), m.get_mpz_t(), out_bits);
    sd[i] = m.get_ui();
  }
  return AShare{ch.role(), std::move(share)};
}

AShare sparse_matmul(Session& s, Role sparse_holder, const SparsePlainMatrix* x, const RingMatrix* y) {
  Channel& ch = s.channel();
  HeContext* he = s.he();
  if (!he) throw HeError("sparse_matmul needs HE keys");
  if (ch.role() == sparse_holder) {
    if (!x || !he->peer) throw HeError("sparse_matmul: holder needs X and the peer key");
    auto payload = ch.recv_msg(MsgType::Ciphertext);
    ByteReader r(payload);
    const CipherMatrix ey = read_cipher_matrix(r, *he->peer);
    if (ey.rows != x->cols()) throw ShapeError("sparse_matmul: X.cols != Y.rows");
    const CipherMatrix z = he_matmul(*he->peer, *x, ey);
    return he2ss(s, sparse_holder, &z, product_bound_bits(*x, s.l()), s.l());
  }
  if (!y || !he->mine) throw HeError("sparse_matmul: dense holder needs Y and a key pair");
  ByteWriter w;
  write_cipher_matrix(w, he->mine->pk, encrypt_matrix(he->mine->pk, *y, s.prg()));
  ch.send_msg(MsgType::Ciphertext, w.take());
  return he2ss(s, sparse_holder, nullptr, 0, s.l());
}

}  // namespace spkm
