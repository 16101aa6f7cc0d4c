// Serial reference kernels against their OpenMP counterparts.
// Arguments are (hidden, threads); the serial variants ignore the thread count.

#include "tfl/dataset.hpp"
#include "tfl/kernels.hpp"
#include "tfl/seq2seq.hpp"

#include <benchmark/benchmark.h>
#include <omp.h>

#include <numeric>

namespace {

using namespace tfl;

struct Fixture {
	Seq2SeqModel model;
	WindowedDataset data;
	std::vector<std::size_t> batch;

	explicit Fixture(std::size_t hidden) {
		Rng rng(1);
		model = init({12, 6, hidden, true}, rng);
		const TimeSeries series = synth({}, 2000);
		data = make_windows(scale(series.values, fit_scaler(series.values)), 12, 6);
		batch.resize(128);
		std::iota(batch.begin(), batch.end(), std::size_t{0});
	}
};

void gradient_serial(benchmark::State &state) {
	const Fixture f(static_cast<std::size_t>(state.range(0)));
	Gradients grads = Parameters::zeros(f.model.config);
	ForwardCache cache;
	for (auto _ : state) {
		benchmark::DoNotOptimize(kernels::batch_gradient_serial(f.model, f.data, f.batch, {}, grads, cache));
	}
	state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.batch.size()));
}

void gradient_parallel(benchmark::State &state) {
	const Fixture f(static_cast<std::size_t>(state.range(0)));
	omp_set_num_threads(static_cast<int>(state.range(1)));
	Gradients grads = Parameters::zeros(f.model.config);
	kernels::BatchWorkspace workspace;
	for (auto _ : state) {
		benchmark::DoNotOptimize(kernels::batch_gradient_parallel(f.model, f.data, f.batch, {}, grads, workspace));
	}
	state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.batch.size()));
}

void predict_serial(benchmark::State &state) {
	const Fixture f(static_cast<std::size_t>(state.range(0)));
	for (auto _ : state) {
		benchmark::DoNotOptimize(kernels::predict_serial(f.model, f.data));
	}
	state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.data.size()));
}

void predict_parallel(benchmark::State &state) {
	const Fixture f(static_cast<std::size_t>(state.range(0)));
	omp_set_num_threads(static_cast<int>(state.range(1)));
	for (auto _ : state) {
		benchmark::DoNotOptimize(kernels::predict_parallel(f.model, f.data));
	}
	state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.data.size()));
}

void sizes(benchmark::internal::Benchmark *b) {
	const int max_threads = omp_get_max_threads();
	for (int hidden : {32, 100}) {
		for (int threads = 1; threads <= max_threads; threads *= 2) {
			b->Args({hidden, threads});
		}
	}
}

BENCHMARK(gradient_serial)->Apply(sizes)->Unit(benchmark::kMillisecond);
BENCHMARK(gradient_parallel)->Apply(sizes)->Unit(benchmark::kMillisecond);
BENCHMARK(predict_serial)->Apply(sizes)->Unit(benchmark::kMillisecond);
BENCHMARK(predict_parallel)->Apply(sizes)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
