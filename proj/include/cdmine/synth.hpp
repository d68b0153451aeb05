#pragma once

#include <cstdint>
#include <vector>

#include "cdmine/records.hpp"

namespace cdmine {

struct SynthOptions {
  std::size_t rows = 30000;
  std::size_t defaults = 6626;
  std::uint64_t seed = 2005;
  /// Records copied verbatim into the output (matched by id, which must lie
  /// in [1, rows]). Their labels count toward `defaults`.
  std::vector<CustomerRecord> pinned;
};

/// Generates a source dataset with the same schema and broadly similar
/// marginals as the public credit-card default data: repayment status follows
/// a per-account Markov chain driven by a latent risk factor, bills track a
/// utilization level of the credit limit, and payments settle a fraction of
/// the previous bill. Exactly `defaults` accounts carry label 1: those with
/// the highest latent default score. Output is sorted by id and depends only
/// on the options.
std::vector<CustomerRecord> synthesize_source(const SynthOptions& options);

}  // namespace cdmine
