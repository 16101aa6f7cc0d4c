#include "tfl/kernels.hpp"

#include "tfl/errors.hpp"

#include <omp.h>

namespace tfl::kernels {

namespace {

void check_geometry(const Seq2SeqModel &model, const WindowedDataset &data) {
	if (data.n_past() != model.config.n_past || data.n_future() != model.config.n_future) {
		throw ShapeError("dataset windows (" + std::to_string(data.n_past()) + " -> " + std::to_string(data.n_future()) +
		                 ") do not match the model (" + std::to_string(model.config.n_past) + " -> " +
		                 std::to_string(model.config.n_future) + ")");
	}
}

void add_into(Gradients &dst, const Gradients &src) {
	auto d = dst.blocks();
	auto s = src.blocks();
	for (std::size_t b = 0; b < d.size(); ++b) {
		auto dd = d[b]->data();
		auto ss = s[b]->data();
		for (std::size_t i = 0; i < dd.size(); ++i) {
			dd[i] += ss[i];
		}
	}
}

// Accumulates loss and gradient of windows [begin, end) of indices, each
// sample's output gradient pre-divided by the batch size.
double accumulate_range(const Seq2SeqModel &model, const WindowedDataset &data, std::span<const std::size_t> indices,
                        std::size_t begin, std::size_t end, const HuberConfig &loss, Gradients &grads,
                        ForwardCache &cache) {
	const double inv_batch = 1.0 / static_cast<double>(indices.size());
	double total = 0.0;
	for (std::size_t j = begin; j < end; ++j) {
		const std::size_t k = indices[j];
		forward(model, data.input(k), cache);
		HuberResult h = huber(cache.pred, data.target(k), loss);
		for (double &g : h.grad) {
			g *= inv_batch;
		}
		total += h.loss;
		accumulate_backward(model, cache, h.grad, grads);
	}
	return total;
}

} // namespace

double batch_gradient_serial(const Seq2SeqModel &model, const WindowedDataset &data,
                             std::span<const std::size_t> indices, const HuberConfig &loss, Gradients &grads,
                             ForwardCache &cache) {
	check_geometry(model, data);
	if (indices.empty()) {
		throw DataError("empty batch");
	}
	if (!grads.congruent(model.params)) {
		grads = Parameters::zeros(model.config);
	}
	grads.set_zero();
	const double total = accumulate_range(model, data, indices, 0, indices.size(), loss, grads, cache);
	return total / static_cast<double>(indices.size());
}

double batch_gradient_parallel(const Seq2SeqModel &model, const WindowedDataset &data,
                               std::span<const std::size_t> indices, const HuberConfig &loss, Gradients &grads,
                               BatchWorkspace &ws) {
	check_geometry(model, data);
	if (indices.empty()) {
		throw DataError("empty batch");
	}
	const std::size_t chunks = (indices.size() + kChunk - 1) / kChunk;
	if (ws.partial.size() < chunks || (!ws.partial.empty() && !ws.partial[0].congruent(model.params))) {
		ws.partial.assign(chunks, Parameters::zeros(model.config));
		ws.caches.assign(chunks, ForwardCache{});
	}
	ws.chunk_loss.assign(chunks, 0.0);

	const auto n_chunks = static_cast<std::ptrdiff_t>(chunks);
#pragma omp parallel for schedule(static)
	for (std::ptrdiff_t c = 0; c < n_chunks; ++c) {
		const auto ci = static_cast<std::size_t>(c);
		const std::size_t begin = ci * kChunk;
		const std::size_t end = std::min(indices.size(), begin + kChunk);
		ws.partial[ci].set_zero();
		ws.chunk_loss[ci] = accumulate_range(model, data, indices, begin, end, loss, ws.partial[ci], ws.caches[ci]);
	}

	if (!grads.congruent(model.params)) {
		grads = Parameters::zeros(model.config);
	}
	grads.set_zero();
	double total = 0.0;
	for (std::size_t c = 0; c < chunks; ++c) {
		add_into(grads, ws.partial[c]);
		total += ws.chunk_loss[c];
	}
	return total / static_cast<double>(indices.size());
}

Matrix predict_serial(const Seq2SeqModel &model, const WindowedDataset &data) {
	check_geometry(model, data);
	Matrix out(data.size(), model.config.n_future);
	ForwardCache cache;
	for (std::size_t k = 0; k < data.size(); ++k) {
		forward(model, data.input(k), cache);
		std::copy(cache.pred.begin(), cache.pred.end(), out.row(k).begin());
	}
	return out;
}

Matrix predict_parallel(const Seq2SeqModel &model, const WindowedDataset &data) {
	check_geometry(model, data);
	Matrix out(data.size(), model.config.n_future);
	const auto n = static_cast<std::ptrdiff_t>(data.size());
#pragma omp parallel
	{
		ForwardCache cache;
#pragma omp for schedule(static)
		for (std::ptrdiff_t k = 0; k < n; ++k) {
			const auto row = static_cast<std::size_t>(k);
			forward(model, data.input(row), cache);
			std::copy(cache.pred.begin(), cache.pred.end(), out.row(row).begin());
		}
	}
	return out;
}

} // namespace tfl::kernels
