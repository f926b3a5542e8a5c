#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mimtnet/matrix.hpp"

namespace mimtnet {

/// A fixed set of random feature-index subsets ("region proposals"). Each is
/// one instance of the patient bag after gathering and zero padding.
struct ProposalSet {
  std::vector<std::vector<std::size_t>> proposals;  // sorted, distinct, < d
  std::size_t max_size = 0;                          // S
  std::size_t feature_count = 0;                     // d
  std::uint64_t seed = 0;

  std::size_t count() const noexcept { return proposals.size(); }

  /// Throws ParameterError if an invariant does not hold.
  void validate() const;

  friend bool operator==(const ProposalSet&, const ProposalSet&) = default;
};

ProposalSet generate_proposals(std::size_t feature_count, std::size_t count,
                               std::size_t max_size, std::uint64_t seed);

/// R x S matrix: row r is x gathered at proposal r, zero padded to S.
RealMatrix extract_instances(const ProposalSet& ps, std::span<const std::uint8_t> x);

/// Same as extract_instances but writes into a preallocated R x S buffer.
void extract_instances_into(const ProposalSet& ps, std::span<const std::uint8_t> x,
                            RealMatrix& out);

}  // namespace mimtnet
