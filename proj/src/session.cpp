#include "spkm/session.hpp"

#include "spkm/ahe.hpp"
#include "spkm/errors.hpp"

namespace spkm {

Session::Session(Channel& ch, TripleSource* triples, FixedPointConfig fp, const Seed& seed)
    : ch_(ch), triples_(triples), fp_(fp), prg_(seed, 0x5e55) {
  fp_.validate();
}

Session::~Session() = default;

void Session::set_he(std::unique_ptr<HeContext> he) { he_ = std::move(he); }

TripleRecord Session::take(const TripleShape& want) {
  const Step step = ch_.step();
  if (!triples_) throw TripleShortfall(std::string("no triple store attached at step ") + step_name(step));
  if (triples_->remaining() == 0) {
    throw TripleShortfall(std::string("triple shortfall at step ") + step_name(step) + ": needed " +
                          want.describe());
  }
  TripleRecord r = triples_->next();
  if (!(r.shape == want) || r.step != step) {
    throw TripleShortfall(std::string("triple budget mismatch at step ") + step_name(step) + ": needed " +
                          want.describe() + ", store holds " + r.shape.describe() + " tagged " +
                          step_name(r.step));
  }
  if (triples_->dealer_delivered()) ch_.metrics().add_dealer_bytes(step, want.record_bytes(fp_.l));
  return r;
}

MatrixTriple Session::take_matrix(std::size_t m, std::size_t p, std::size_t q) {
  TripleRecord r = take(TripleShape::matrix(m, p, q));
  return MatrixTriple(TripleKind::Matrix, std::move(r.u), std::move(r.v), std::move(r.z));
}

MatrixTriple Session::take_elementwise(std::size_t rows, std::size_t cols) {
  TripleRecord r = take(TripleShape::elementwise(rows, cols));
  return MatrixTriple(TripleKind::Elementwise, std::move(r.u), std::move(r.v), std::move(r.z));
}

BitTriple Session::take_bits(std::size_t count) {
  TripleRecord r = take(TripleShape::bits(count));
  return BitTriple(std::move(r.bu), std::move(r.bv), std::move(r.bw));
}

}  // namespace spkm
