#pragma once

#include "tfl/numeric.hpp"

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace tfl {

/// Architecture of an encoder-decoder forecaster.
struct ModelConfig {
	std::size_t n_past = 12;
	std::size_t n_future = 6;
	std::size_t hidden = 100;
	bool attention = false;

	void validate() const;
	/// Human-readable list of fields that differ, empty when equal.
	std::string diff(const ModelConfig &other) const;

	friend bool operator==(const ModelConfig &, const ModelConfig &) = default;
};

enum Gate : std::size_t { kForget = 0, kInput = 1, kCandidate = 2, kOutput = 3 };

/// Weights of one LSTM layer using the concatenated-input convention
/// z_g = W_g * [h_prev, x] + b_g. Each W_g is hidden x (hidden + input),
/// each b_g is hidden x 1.
struct LstmParams {
	std::array<Matrix, 4> weights;
	std::array<Matrix, 4> biases;

	static LstmParams zeros(std::size_t hidden, std::size_t input);
	std::size_t hidden() const { return weights[0].rows(); }
	std::size_t width() const { return weights[0].cols(); }
	std::size_t input() const { return width() - hidden(); }

	friend bool operator==(const LstmParams &, const LstmParams &) = default;
};

/// Affine map to one scalar, shared by every decoder step.
struct DenseParams {
	Matrix weight; // 1 x in
	Matrix bias;   // 1 x 1

	static DenseParams zeros(std::size_t in);
	friend bool operator==(const DenseParams &, const DenseParams &) = default;
};

/// Every learnable parameter of the forecaster. The same tree type carries
/// gradients and optimiser moments.
struct Parameters {
	LstmParams encoder;
	LstmParams decoder;
	DenseParams output;

	static Parameters zeros(const ModelConfig &config);

	/// Blocks in a fixed order: encoder W/b per gate, decoder W/b per gate, output W, output b.
	std::vector<Matrix *> blocks();
	std::vector<const Matrix *> blocks() const;
	static const std::vector<std::string> &block_names();

	std::size_t count() const;
	void set_zero();
	bool congruent(const Parameters &other) const;

	friend bool operator==(const Parameters &, const Parameters &) = default;
};

using Gradients = Parameters;

struct Seq2SeqModel {
	ModelConfig config;
	Parameters params;

	friend bool operator==(const Seq2SeqModel &, const Seq2SeqModel &) = default;
};

std::size_t parameter_count(const ModelConfig &config);

/// Glorot-uniform weights (bound sqrt(6 / (fan_in + fan_out)) per matrix), zero biases.
Seq2SeqModel init(const ModelConfig &config, Rng &rng);

/// Re-draws the output layer with the same scheme as init().
void reinit_output(Seq2SeqModel &model, Rng &rng);

struct LstmState {
	Vector h;
	Vector c;
};

/// Result of a single cell update with the gate activations it used.
struct LstmStep {
	LstmState state;
	Vector forget;
	Vector input;
	Vector candidate;
	Vector output;
};

LstmStep lstm_step(const LstmParams &params, std::span<const double> x, const LstmState &prev);

struct EncoderOutput {
	LstmState final;
	std::vector<Vector> stack; // h_1 ... h_T
};

struct AttentionTrace {
	Matrix weights; // n_future x n_past
	std::vector<Vector> contexts;
};

struct AttentionDecode {
	Vector predictions;
	AttentionTrace trace;
};

EncoderOutput encode(const Seq2SeqModel &model, std::span<const double> window);
Vector decode_plain(const Seq2SeqModel &model, const EncoderOutput &enc);
AttentionDecode decode_attention(const Seq2SeqModel &model, const EncoderOutput &enc);

/// Activations recorded by forward() and consumed by backward().
///
/// Rows are laid out step-major. Encoder buffers hold n_past steps, decoder
/// buffers n_future steps; the h/c buffers carry one extra leading row for
/// the initial state. Gate rows store the activated f, i, C~, o blocks.
/// Buffers are reused across calls, so one cache per worker avoids
/// reallocating inside training loops.
struct ForwardCache {
	ModelConfig config{};
	bool ready = false;

	Vector enc_v, enc_gates, enc_c, enc_h, enc_tc;
	Vector dec_v, dec_gates, dec_c, dec_h, dec_tc;
	Vector attn, ctx, pred;

	// Backward scratch.
	mutable Vector ext_dh, dec_dh, dh, dh_total, dc, dc_prev, dv, dz, d_hT, da;

	void resize(const ModelConfig &cfg);
	std::span<const double> predictions() const { return pred; }
};

/// Full forward pass, filling the cache. Pure in (model, window).
void forward(const Seq2SeqModel &model, std::span<const double> window, ForwardCache &cache);

Vector predict(const Seq2SeqModel &model, std::span<const double> window);

/// Adds d(loss)/d(params) into grads given d(loss)/d(predictions).
/// Throws when the cache was not filled by forward() for this model's config.
void accumulate_backward(const Seq2SeqModel &model, const ForwardCache &cache, std::span<const double> loss_grad,
                         Gradients &grads);

Gradients backward(const Seq2SeqModel &model, const ForwardCache &cache, std::span<const double> loss_grad);

} // namespace tfl
