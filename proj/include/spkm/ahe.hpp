#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "spkm/arith_share.hpp"
#include "spkm/prg.hpp"
#include "spkm/serialize.hpp"
#include "spkm/session.hpp"
#include "spkm/sparse_matrix.hpp"

namespace spkm {

inline constexpr unsigned kStatSecurityBits = 40;

// acc <- acc * base^e mod m using precomputed powers base^(c * 2^(w*t)).
class FixedBaseTable {
 public:
  FixedBaseTable(const mpz_class& base, const mpz_class& mod, unsigned max_exp_bits, unsigned window);

  void mul_pow(mpz_class& acc, const mpz_class& e) const;
  void mul_pow(mpz_class& acc, u64 e) const;
  unsigned max_exp_bits() const { return max_bits_; }

 private:
  mpz_class mod_;
  unsigned max_bits_, window_, windows_;
  std::vector<mpz_class> entries_;  // windows_ x (2^window - 1)
};

struct Ciphertext {
  mpz_class value;
  u64 key_id = 0;
};

// Paillier public key with g = N + 1. Encryption randomness is hs^a with a
// short exponent a (hs = h^N mod N^2 for a random square h), so every
// encryption costs one fixed-base exponentiation.
class PublicKey {
 public:
  PublicKey(mpz_class n, mpz_class hs);
  PublicKey(const PublicKey& o);
  PublicKey& operator=(const PublicKey& o);

  const mpz_class& n() const { return n_; }
  const mpz_class& n2() const { return n2_; }
  unsigned bits() const { return bits_; }
  u64 fingerprint() const { return fingerprint_; }
  // Plaintext space size.
  const mpz_class& phi() const { return n_; }

  Ciphertext encrypt(const mpz_class& m, Prg& prg) const;  // m taken mod N
  Ciphertext rerandomize(const Ciphertext& c, Prg& prg) const;
  // c * hs^a for fresh a; in-place form of rerandomize.
  void blind(mpz_class& c, Prg& prg) const;
  void check(const Ciphertext& c) const;

  void write(ByteWriter& w) const;
  static PublicKey read(ByteReader& r);
  std::size_t ciphertext_bytes() const { return ct_bytes_; }

 private:
  const FixedBaseTable& hs_table() const;

  mpz_class n_, n2_, hs_;
  unsigned bits_ = 0;
  unsigned rbits_ = 0;
  std::size_t ct_bytes_ = 0;
  u64 fingerprint_ = 0;
  mutable std::mutex table_mu_;
  mutable std::shared_ptr<const FixedBaseTable> hs_table_;
};

class SecretKey {
 public:
  SecretKey(const mpz_class& p, const mpz_class& q);
  // Result in [0, N).
  mpz_class decrypt(const Ciphertext& c) const;
  // Result in (-N/2, N/2].
  mpz_class decrypt_centered(const Ciphertext& c) const;
  u64 fingerprint() const { return fingerprint_; }

 private:
  mpz_class p_, q_, n_, p2_, q2_, pm1_, qm1_, hp_, hq_, qinv_p_, half_n_;
  u64 fingerprint_ = 0;
};

struct KeyPair {
  PublicKey pk;
  SecretKey sk;
};

// Sizes below 2048 bits are refused unless allow_test_sizes is set.
KeyPair keygen(unsigned bits, Prg& prg, bool allow_test_sizes = false);

Ciphertext he_add(const PublicKey& pk, const Ciphertext& a, const Ciphertext& b);
Ciphertext he_plain_add(const PublicKey& pk, const Ciphertext& c, const mpz_class& u);
// u may be negative; negative scalars go through the ciphertext inverse.
Ciphertext he_scalar_mul(const PublicKey& pk, const Ciphertext& c, const mpz_class& u);

struct CipherMatrix {
  std::size_t rows = 0, cols = 0;
  u64 key_id = 0;
  std::vector<mpz_class> data;

  const mpz_class& at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  CipherMatrix transpose() const;
};

// Entries are the centered (two's complement) values of the ring words.
CipherMatrix encrypt_matrix(const PublicKey& pk, const RingMatrix& m, Prg& prg);
std::vector<mpz_class> decrypt_matrix_centered(const SecretKey& sk, const CipherMatrix& c);
void write_cipher_matrix(ByteWriter& w, const PublicKey& pk, const CipherMatrix& m);
CipherMatrix read_cipher_matrix(ByteReader& r, const PublicKey& pk);

// [[X·Y]] for plaintext X (ring words read as signed) and encrypted Y. Only
// the stored nonzeros of X are touched.
CipherMatrix he_matmul(const PublicKey& pk, const SparsePlainMatrix& x, const CipherMatrix& y);
// [[X]]·Y for encrypted X and plaintext Y.
CipherMatrix he_matmul(const PublicKey& pk, const CipherMatrix& x, const RingMatrix& y);
// Elementwise [[x]]^y.
CipherMatrix he_hadamard(const PublicKey& pk, const CipherMatrix& x, const RingMatrix& y);

// Bits b such that |X·Y| < 2^b for any Y with centered entries below 2^(l-1).
unsigned product_bound_bits(const SparsePlainMatrix& x, unsigned y_bits);

struct HeContext {
  std::optional<KeyPair> mine;
  std::optional<PublicKey> peer;
};

void send_public_key(Session& s);
void recv_public_key(Session& s);

// The holder owns ciphertexts under the peer's key whose centered plaintexts
// satisfy |Z| < 2^bound_bits. Result shares are over Z_2^out_bits. Both
// parties call this; the key owner passes nullptr.
AShare he2ss(Session& s, Role holder, const CipherMatrix* c, unsigned bound_bits, unsigned out_bits);

// Z = X·Y with X held in the clear by `sparse_holder` and Y by the peer, under
// the peer's key. Each party passes only its own operand.
AShare sparse_matmul(Session& s, Role sparse_holder, const SparsePlainMatrix* x, const RingMatrix* y);

}  // namespace spkm
