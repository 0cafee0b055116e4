#ifndef SCALWEIGHT_SAMPLER_HPP
#define SCALWEIGHT_SAMPLER_HPP

#include <cstdint>
#include <vector>

#include "scalweight/dataset.hpp"
#include "scalweight/rng.hpp"
#include "scalweight/weighting.hpp"

namespace scalweight {

// Epoch accounting is pinned to one reference source: an epoch is always
// ceil(|reference| / batch_size) steps, no matter how the sampling weights
// tilt the mixture.
struct EpochConvention {
  std::size_t reference_source = 0;
  std::size_t batch_size = 32;
};

std::size_t steps_per_epoch(const MultiSourceDataset& ds,
                            const EpochConvention& epoch);

// A mixture batch in draw order: row i came from sources[i] at that source's
// row indices[i].
struct MixedBatch {
  std::vector<std::size_t> sources;
  std::vector<std::size_t> indices;
  std::size_t size() const { return sources.size(); }
};

// Samples i.i.d. with replacement from the weighted source mixture: each
// draw picks source t with probability p_t, then a row of t uniformly.
// This realizes the resampled distribution sum_t 1[x in X_t] q(x,y) p_t.
class ResamplingSampler {
 public:
  ResamplingSampler(const MultiSourceDataset& ds, WeightVector weights,
                    Rng rng);

  MixedBatch next_batch(std::size_t batch_size);
  void set_weights(WeightVector weights);
  const WeightVector& weights() const { return weights_; }

  Rng& rng() { return rng_; }

 private:
  const MultiSourceDataset* ds_;
  WeightVector weights_;
  Rng rng_;
};

// Gathers the rows of a mixed batch that belong to `source` into dense
// feature/label matrices, preserving draw order.
struct SourceSlice {
  Matrix features;
  Matrix labels;
  std::size_t count = 0;
};
SourceSlice gather_source(const MultiSourceDataset& ds, const MixedBatch& batch,
                          std::size_t source);

// Gathers an entire mixed batch in draw order; valid only when every source
// shares one label layout (multi-domain datasets).
SourceSlice gather_all(const MultiSourceDataset& ds, const MixedBatch& batch);

// Uniform within-source batch (used by single-source training and by the
// per-task sub-batches of weighted steps).
MixedBatch uniform_source_batch(const MultiSourceDataset& ds,
                                std::size_t source, std::size_t batch_size,
                                Rng& rng);

}  // namespace scalweight

#endif
