#include "scalweight/sampler.hpp"

#include "scalweight/error.hpp"

namespace scalweight {

std::size_t steps_per_epoch(const MultiSourceDataset& ds,
                            const EpochConvention& epoch) {
  if (epoch.reference_source >= ds.task_count())
    throw ConfigError("epoch convention: reference source out of range");
  if (epoch.batch_size == 0) throw ConfigError("epoch convention: batch_size is zero");
  const std::size_t n = ds.size(epoch.reference_source);
  return (n + epoch.batch_size - 1) / epoch.batch_size;
}

ResamplingSampler::ResamplingSampler(const MultiSourceDataset& ds,
                                     WeightVector weights, Rng rng)
    : ds_(&ds), weights_(std::move(weights)), rng_(rng) {
  if (weights_.size() != ds.task_count())
    throw ConfigError("sampler: weight/source count mismatch");
}

void ResamplingSampler::set_weights(WeightVector weights) {
  if (weights.size() != ds_->task_count())
    throw ConfigError("sampler: weight/source count mismatch");
  weights_ = std::move(weights);
}

MixedBatch ResamplingSampler::next_batch(std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("sampler: zero batch size");
  MixedBatch batch;
  batch.sources.reserve(batch_size);
  batch.indices.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    const std::size_t t = rng_.categorical(weights_.values());
    batch.sources.push_back(t);
    batch.indices.push_back(rng_.uniform_index(ds_->size(t)));
  }
  return batch;
}

SourceSlice gather_source(const MultiSourceDataset& ds, const MixedBatch& batch,
                          std::size_t source) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < batch.size(); ++i)
    if (batch.sources[i] == source) rows.push_back(batch.indices[i]);
  SourceSlice slice;
  slice.count = rows.size();
  slice.features = Matrix(rows.size(), ds.feature_dim());
  slice.labels = Matrix(rows.size(), ds.labels[source].cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = rows[i];
    std::copy(ds.features[source].row(r).begin(),
              ds.features[source].row(r).end(), slice.features.row(i).begin());
    std::copy(ds.labels[source].row(r).begin(), ds.labels[source].row(r).end(),
              slice.labels.row(i).begin());
  }
  return slice;
}

SourceSlice gather_all(const MultiSourceDataset& ds, const MixedBatch& batch) {
  for (const auto& t : ds.tasks)
    if (t.label_cols() != ds.tasks[0].label_cols())
      throw ConfigError("gather_all: sources disagree on label layout");
  SourceSlice slice;
  slice.count = batch.size();
  slice.features = Matrix(batch.size(), ds.feature_dim());
  slice.labels = Matrix(batch.size(), ds.tasks[0].label_cols());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto s = batch.sources[i];
    const auto r = batch.indices[i];
    std::copy(ds.features[s].row(r).begin(), ds.features[s].row(r).end(),
              slice.features.row(i).begin());
    std::copy(ds.labels[s].row(r).begin(), ds.labels[s].row(r).end(),
              slice.labels.row(i).begin());
  }
  return slice;
}

MixedBatch uniform_source_batch(const MultiSourceDataset& ds,
                                std::size_t source, std::size_t batch_size,
                                Rng& rng) {
  if (source >= ds.task_count())
    throw ConfigError("uniform_source_batch: source out of range");
  MixedBatch batch;
  batch.sources.assign(batch_size, source);
  batch.indices.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i)
    batch.indices.push_back(rng.uniform_index(ds.size(source)));
  return batch;
}

}  // namespace scalweight
