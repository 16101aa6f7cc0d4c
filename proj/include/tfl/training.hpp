#pragma once

#include "tfl/dataset.hpp"
#include "tfl/seq2seq.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace tfl {

struct HuberConfig {
	double delta = 1.0;
};

struct HuberResult {
	double loss = 0.0;
	Vector grad; // d(loss)/d(pred)
};

/// Mean Huber loss: 0.5 e^2 inside |e| <= delta, delta (|e| - delta/2) outside.
HuberResult huber(std::span<const double> pred, std::span<const double> target, const HuberConfig &cfg = {});

struct AdamState {
	Parameters m;
	Parameters v;
	std::int64_t t = 0;
	double lr = 0.001;
	double beta1 = 0.9;
	double beta2 = 0.999;
	double eps = 1e-8;

	static AdamState fresh(const Seq2SeqModel &model, double lr);
};

/// Per-parameter trainability flags, one vector per Parameters block (in
/// Parameters::blocks() order). true = trainable.
struct FreezeMask {
	std::vector<std::vector<std::uint8_t>> blocks;

	static FreezeMask all(const Parameters &params, bool trainable = true);
	/// Everything frozen except the output layer.
	static FreezeMask output_only(const Parameters &params);
	bool congruent(const Parameters &params) const;
};

/// One bias-corrected Adam update. Parameters whose mask entry is false are
/// left untouched and their moments are not advanced.
void adam_step(Seq2SeqModel &model, const Gradients &grads, AdamState &state, const FreezeMask &mask);

struct TrainConfig {
	std::size_t epochs = 100;
	std::size_t batch = 32;
	double lr = 0.001;
	std::uint64_t seed = 42;
	bool shuffle = true;

	void validate() const;
};

struct TrainOptions {
	const FreezeMask *mask = nullptr; // nullptr = everything trainable
	/// Called after every epoch with (epoch index, mean epoch loss).
	std::function<void(std::size_t, double)> on_epoch;
};

/// Minibatch Adam on the mean Huber loss. Returns one mean training loss per
/// epoch, measured on the batches as they were visited. Deterministic per seed.
std::vector<double> train(Seq2SeqModel &model, const WindowedDataset &data, const TrainConfig &cfg,
                          const HuberConfig &loss = {}, const TrainOptions &options = {});

/// Mean Huber loss of the model over every window.
double dataset_loss(const Seq2SeqModel &model, const WindowedDataset &data, const HuberConfig &loss = {});

struct TransferConfig {
	TrainConfig phase1{50, 32, 0.001, 42, true};
	TrainConfig phase2{50, 32, 0.0001, 42, true};
	std::uint64_t seed = 42; // output-layer re-initialisation
};

struct TransferResult {
	Seq2SeqModel model;
	std::vector<double> phase1_history;
	std::vector<double> phase2_history;
	std::vector<double> learning_rates; // lr of every phase that ran, in order
};

struct TransferHooks {
	/// Called with (phase number, model) as each phase finishes.
	std::function<void(int, const Seq2SeqModel &)> on_phase_end;
};

/// Two-phase parameter transfer: fresh output layer, train it alone with the
/// body frozen, then fine-tune everything. Phase 2 is skipped when its epoch
/// count is zero. Throws ConfigError listing differing fields when the target
/// geometry does not match the source model.
TransferResult transfer(const Seq2SeqModel &source, const ModelConfig &target, const WindowedDataset &target_data,
                        const TransferConfig &cfg, const HuberConfig &loss = {}, const TransferHooks &hooks = {});

struct GradientCheckOptions {
	std::size_t samples_per_block = 20;
	std::uint64_t seed = 7;
	/// Relative error is |a - n| / max(|a|, |n|, floor).
	double floor = 1e-7;
	HuberConfig loss{};
};

/// Worst relative error between BPTT and central differences of the Huber
/// loss over a sample of parameters from every block.
double gradient_check(const Seq2SeqModel &model, std::span<const double> window, std::span<const double> targets,
                      double epsilon, const GradientCheckOptions &options = {});

} // namespace tfl
