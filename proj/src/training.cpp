#include "tfl/training.hpp"

#include "tfl/errors.hpp"
#include "tfl/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tfl {

HuberResult huber(std::span<const double> pred, std::span<const double> target, const HuberConfig &cfg) {
	if (pred.size() != target.size()) {
		throw ShapeError("huber: prediction length " + std::to_string(pred.size()) + " vs target length " +
		                 std::to_string(target.size()));
	}
	if (pred.empty()) {
		throw ShapeError("huber: empty input");
	}
	if (!(cfg.delta > 0.0)) {
		throw ConfigError("huber delta must be positive");
	}
	const double n = static_cast<double>(pred.size());
	HuberResult out;
	out.grad.resize(pred.size());
	for (std::size_t i = 0; i < pred.size(); ++i) {
		const double e = pred[i] - target[i];
		if (std::abs(e) <= cfg.delta) {
			out.loss += 0.5 * e * e;
			out.grad[i] = e / n;
		} else {
			out.loss += cfg.delta * (std::abs(e) - 0.5 * cfg.delta);
			out.grad[i] = (e > 0.0 ? cfg.delta : -cfg.delta) / n;
		}
	}
	out.loss /= n;
	return out;
}

AdamState AdamState::fresh(const Seq2SeqModel &model, double lr) {
	AdamState s;
	s.m = Parameters::zeros(model.config);
	s.v = Parameters::zeros(model.config);
	s.lr = lr;
	return s;
}

FreezeMask FreezeMask::all(const Parameters &params, bool trainable) {
	FreezeMask mask;
	for (const Matrix *m : params.blocks()) {
		mask.blocks.emplace_back(m->size(), trainable ? 1 : 0);
	}
	return mask;
}

FreezeMask FreezeMask::output_only(const Parameters &params) {
	FreezeMask mask = all(params, false);
	const std::size_t n = mask.blocks.size();
	std::fill(mask.blocks[n - 2].begin(), mask.blocks[n - 2].end(), 1);
	std::fill(mask.blocks[n - 1].begin(), mask.blocks[n - 1].end(), 1);
	return mask;
}

bool FreezeMask::congruent(const Parameters &params) const {
	const auto b = params.blocks();
	if (b.size() != blocks.size()) {
		return false;
	}
	for (std::size_t i = 0; i < b.size(); ++i) {
		if (b[i]->size() != blocks[i].size()) {
			return false;
		}
	}
	return true;
}

void adam_step(Seq2SeqModel &model, const Gradients &grads, AdamState &state, const FreezeMask &mask) {
	if (!grads.congruent(model.params) || !state.m.congruent(model.params) || !state.v.congruent(model.params)) {
		throw ShapeError("adam_step: gradient or moment tree is not congruent with the model");
	}
	if (!mask.congruent(model.params)) {
		throw ShapeError("adam_step: freeze mask is not congruent with the model");
	}
	state.t += 1;
	const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
	const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
	auto params = model.params.blocks();
	auto g = grads.blocks();
	auto m = state.m.blocks();
	auto v = state.v.blocks();
	for (std::size_t b = 0; b < params.size(); ++b) {
		auto p = params[b]->data();
		auto gb = g[b]->data();
		auto mb = m[b]->data();
		auto vb = v[b]->data();
		const auto &flags = mask.blocks[b];
		for (std::size_t i = 0; i < p.size(); ++i) {
			if (!flags[i]) {
				continue;
			}
			mb[i] = state.beta1 * mb[i] + (1.0 - state.beta1) * gb[i];
			vb[i] = state.beta2 * vb[i] + (1.0 - state.beta2) * gb[i] * gb[i];
			const double m_hat = mb[i] / c1;
			const double v_hat = vb[i] / c2;
			p[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
		}
	}
}

void TrainConfig::validate() const {
	if (epochs < 1 || batch < 1) {
		throw ConfigError("training needs epochs >= 1 and batch >= 1");
	}
	if (!(lr >= 0.0) || !std::isfinite(lr)) {
		throw ConfigError("learning rate must be finite and non-negative");
	}
}

std::vector<double> train(Seq2SeqModel &model, const WindowedDataset &data, const TrainConfig &cfg,
                          const HuberConfig &loss, const TrainOptions &options) {
	cfg.validate();
	if (data.empty()) {
		throw DataError("cannot train on an empty dataset");
	}
	const FreezeMask everything = options.mask ? FreezeMask{} : FreezeMask::all(model.params);
	const FreezeMask &mask = options.mask ? *options.mask : everything;

	std::vector<std::size_t> order(data.size());
	std::iota(order.begin(), order.end(), std::size_t{0});
	Rng rng(cfg.seed);
	AdamState adam = AdamState::fresh(model, cfg.lr);
	Gradients grads = Parameters::zeros(model.config);
	kernels::BatchWorkspace workspace;

	std::vector<double> history;
	history.reserve(cfg.epochs);
	for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
		if (cfg.shuffle) {
			for (std::size_t i = order.size(); i > 1; --i) {
				std::swap(order[i - 1], order[rng.below(i)]);
			}
		}
		double epoch_loss = 0.0;
		for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch) {
			const std::size_t end = std::min(order.size(), begin + cfg.batch);
			const std::span<const std::size_t> batch(order.data() + begin, end - begin);
			const double batch_loss = kernels::batch_gradient_parallel(model, data, batch, loss, grads, workspace);
			if (!std::isfinite(batch_loss)) {
				throw NumericError("training loss became non-finite in epoch " + std::to_string(epoch + 1));
			}
			epoch_loss += batch_loss * static_cast<double>(batch.size());
			adam_step(model, grads, adam, mask);
		}
		epoch_loss /= static_cast<double>(order.size());
		history.push_back(epoch_loss);
		if (options.on_epoch) {
			options.on_epoch(epoch, epoch_loss);
		}
	}
	return history;
}

double dataset_loss(const Seq2SeqModel &model, const WindowedDataset &data, const HuberConfig &loss) {
	if (data.empty()) {
		throw DataError("cannot evaluate loss on an empty dataset");
	}
	const Matrix pred = kernels::predict_parallel(model, data);
	double total = 0.0;
	for (std::size_t k = 0; k < data.size(); ++k) {
		total += huber(pred.row(k), data.target(k), loss).loss;
	}
	return total / static_cast<double>(data.size());
}

TransferResult transfer(const Seq2SeqModel &source, const ModelConfig &target, const WindowedDataset &target_data,
                        const TransferConfig &cfg, const HuberConfig &loss, const TransferHooks &hooks) {
	target.validate();
	const std::string mismatch = source.config.diff(target);
	if (!mismatch.empty()) {
		throw ConfigError("transfer: source model and target configuration differ (" + mismatch + ")");
	}
	if (target_data.n_past() != target.n_past || target_data.n_future() != target.n_future) {
		throw ConfigError("transfer: target windows do not match the target configuration");
	}

	TransferResult result{source, {}, {}, {}};
	Rng rng(cfg.seed);
	reinit_output(result.model, rng);

	if (cfg.phase1.epochs > 0) {
		const FreezeMask head = FreezeMask::output_only(result.model.params);
		TrainOptions opts;
		opts.mask = &head;
		result.phase1_history = train(result.model, target_data, cfg.phase1, loss, opts);
		result.learning_rates.push_back(cfg.phase1.lr);
	}
	if (hooks.on_phase_end) {
		hooks.on_phase_end(1, result.model);
	}
	if (cfg.phase2.epochs > 0) {
		result.phase2_history = train(result.model, target_data, cfg.phase2, loss);
		result.learning_rates.push_back(cfg.phase2.lr);
	}
	if (hooks.on_phase_end) {
		hooks.on_phase_end(2, result.model);
	}
	return result;
}

double gradient_check(const Seq2SeqModel &model, std::span<const double> window, std::span<const double> targets,
                      double epsilon, const GradientCheckOptions &options) {
	if (!(epsilon > 0.0)) {
		throw std::invalid_argument("gradient_check: epsilon must be positive");
	}
	ForwardCache cache;
	forward(model, window, cache);
	const HuberResult base = huber(cache.pred, targets, options.loss);
	const Gradients analytic = backward(model, cache, base.grad);

	Seq2SeqModel probe = model;
	auto loss_at = [&]() {
		forward(probe, window, cache);
		return huber(cache.pred, targets, options.loss).loss;
	};

	Rng rng(options.seed);
	auto blocks = probe.params.blocks();
	auto grad_blocks = analytic.blocks();
	double worst = 0.0;
	for (std::size_t b = 0; b < blocks.size(); ++b) {
		auto values = blocks[b]->data();
		std::vector<std::size_t> picks(values.size());
		std::iota(picks.begin(), picks.end(), std::size_t{0});
		const std::size_t take = std::min(options.samples_per_block, picks.size());
		for (std::size_t i = 0; i < take; ++i) {
			std::swap(picks[i], picks[i + rng.below(picks.size() - i)]);
		}
		for (std::size_t i = 0; i < take; ++i) {
			const std::size_t idx = picks[i];
			const double saved = values[idx];
			values[idx] = saved + epsilon;
			const double up = loss_at();
			values[idx] = saved - epsilon;
			const double down = loss_at();
			values[idx] = saved;
			const double numeric = (up - down) / (2.0 * epsilon);
			const double exact = grad_blocks[b]->data()[idx];
			const double denom = std::max({std::abs(exact), std::abs(numeric), options.floor});
			worst = std::max(worst, std::abs(exact - numeric) / denom);
		}
	}
	return worst;
}

} // namespace tfl
