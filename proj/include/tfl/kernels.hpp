#pragma once

#include "tfl/dataset.hpp"
#include "tfl/seq2seq.hpp"
#include "tfl/training.hpp"

#include <cstddef>
#include <span>
#include <vector>

// Data-parallel kernels over windows. Each parallel kernel has a serial
// reference next to it; tests compare the two and bench/ times them.
//
// The parallel batch gradient splits the batch into fixed-size chunks that
// do not depend on the thread count, accumulates each chunk serially, and
// sums chunk results in index order. The result is therefore bitwise
// reproducible for any OMP_NUM_THREADS.
namespace tfl::kernels {

inline constexpr std::size_t kChunk = 4;

struct BatchWorkspace {
	std::vector<ForwardCache> caches; // one per chunk
	std::vector<Gradients> partial;   // one per chunk
	std::vector<double> chunk_loss;
};

/// Mean Huber loss over the selected windows; grads receives its gradient
/// (overwritten, not accumulated). Windows are processed in index order.
double batch_gradient_serial(const Seq2SeqModel &model, const WindowedDataset &data,
                             std::span<const std::size_t> indices, const HuberConfig &loss, Gradients &grads,
                             ForwardCache &cache);

double batch_gradient_parallel(const Seq2SeqModel &model, const WindowedDataset &data,
                               std::span<const std::size_t> indices, const HuberConfig &loss, Gradients &grads,
                               BatchWorkspace &workspace);

/// Forecasts for every window, (windows x n_future).
Matrix predict_serial(const Seq2SeqModel &model, const WindowedDataset &data);
Matrix predict_parallel(const Seq2SeqModel &model, const WindowedDataset &data);

} // namespace tfl::kernels
