#pragma once

#include <memory>
#include <string>
#include <utility>

#include "spkm/budget.hpp"
#include "spkm/prg.hpp"
#include "spkm/session.hpp"
#include "spkm/triples.hpp"

namespace spkm {

// Both stores of one dealer run carry this id; it commits to the seed
// without revealing it.
Seed dealer_session_id(const Seed& seed);

// Fresh uniform U, V with Z = U·V (or U∘V, or u&v), split additively.
std::pair<TripleRecord, TripleRecord> deal(const BudgetItem& item, unsigned l, Prg& prg);

struct DealtPair {
  std::unique_ptr<MemoryTripleSource> a, b;
};
DealtPair dealer_generate(const TripleBudget& budget, const Seed& seed);
DealtPair dealer_generate(const std::vector<BudgetItem>& items, const Seed& seed, unsigned l);
// Streams both stores to disk; returns the number of records per store.
std::size_t dealer_generate(const TripleBudget& budget, const Seed& seed, const std::string& path_a,
                            const std::string& path_b);

// Two-party generation without a dealer. B must hold an HE key pair and A
// B's public key (see send_public_key). Traffic is tagged offline.
std::unique_ptr<MemoryTripleSource> he_generate(Session& s, const TripleBudget& budget);
std::unique_ptr<MemoryTripleSource> he_generate(Session& s, const std::vector<BudgetItem>& items);

}  // namespace spkm
