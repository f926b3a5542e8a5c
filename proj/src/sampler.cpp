#include "mimtnet/sampler.hpp"

#include <algorithm>

#include "mimtnet/error.hpp"
#include "mimtnet/random.hpp"

namespace mimtnet {

void ProposalSet::validate() const {
  if (proposals.empty()) throw ParameterError("proposal set is empty");
  if (max_size == 0 || max_size > feature_count) {
    throw ParameterError("proposal max size must lie in [1, feature count]");
  }
  for (const auto& p : proposals) {
    if (p.empty() || p.size() > max_size) {
      throw ParameterError("proposal size outside [1, max size]");
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p[i] >= feature_count) throw ParameterError("proposal index out of range");
      if (i > 0 && p[i - 1] >= p[i]) {
        throw ParameterError("proposal indices must be strictly increasing");
      }
    }
  }
}

ProposalSet generate_proposals(std::size_t feature_count, std::size_t count,
                               std::size_t max_size, std::uint64_t seed) {
  if (count == 0) throw ParameterError("proposal generation times must be >= 1");
  if (max_size == 0 || max_size > feature_count) {
    throw ParameterError("proposal max size must lie in [1, " +
                         std::to_string(feature_count) + "], got " +
                         std::to_string(max_size));
  }
  Rng rng(seed);
  ProposalSet ps;
  ps.max_size = max_size;
  ps.feature_count = feature_count;
  ps.seed = seed;
  ps.proposals.reserve(count);
  for (std::size_t r = 0; r < count; ++r) {
    const std::size_t size = rng.uniform_int(1, max_size);
    auto indices = rng.sample_without_replacement(feature_count, size);
    std::ranges::sort(indices);
    ps.proposals.push_back(std::move(indices));
  }
  return ps;
}

void extract_instances_into(const ProposalSet& ps, std::span<const std::uint8_t> x,
                            RealMatrix& out) {
  if (x.size() != ps.feature_count) {
    throw ShapeError("instance extraction: row has " + std::to_string(x.size()) +
                     " features, proposals expect " +
                     std::to_string(ps.feature_count));
  }
  if (out.rows() != ps.count() || out.cols() != ps.max_size) {
    out = RealMatrix(ps.count(), ps.max_size);
  }
  for (std::size_t r = 0; r < ps.count(); ++r) {
    auto row = out.row(r);
    const auto& indices = ps.proposals[r];
    std::size_t s = 0;
    for (; s < indices.size(); ++s) row[s] = x[indices[s]];
    for (; s < row.size(); ++s) row[s] = 0.0;
  }
}

RealMatrix extract_instances(const ProposalSet& ps, std::span<const std::uint8_t> x) {
  RealMatrix out(ps.count(), ps.max_size);
  extract_instances_into(ps, x, out);
  return out;
}

}  // namespace mimtnet
