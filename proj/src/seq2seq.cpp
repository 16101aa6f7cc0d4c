#include "tfl/seq2seq.hpp"

#include "tfl/errors.hpp"

#include <algorithm>
#include <cmath>

namespace tfl {

void ModelConfig::validate() const {
	if (n_past < 1 || n_future < 1 || hidden < 1) {
		throw ConfigError("model config requires n_past, n_future and hidden >= 1 (got n_past=" +
		                  std::to_string(n_past) + ", n_future=" + std::to_string(n_future) +
		                  ", hidden=" + std::to_string(hidden) + ")");
	}
}

std::string ModelConfig::diff(const ModelConfig &other) const {
	std::string out;
	auto field = [&](const char *name, auto a, auto b) {
		if (a != b) {
			if (!out.empty()) {
				out += ", ";
			}
			out += std::string(name) + ": " + std::to_string(a) + " vs " + std::to_string(b);
		}
	};
	field("n_past", n_past, other.n_past);
	field("n_future", n_future, other.n_future);
	field("hidden", hidden, other.hidden);
	field("attention", static_cast<int>(attention), static_cast<int>(other.attention));
	return out;
}

LstmParams LstmParams::zeros(std::size_t hidden, std::size_t input) {
	LstmParams p;
	for (std::size_t g = 0; g < 4; ++g) {
		p.weights[g] = Matrix(hidden, hidden + input);
		p.biases[g] = Matrix(hidden, 1);
	}
	return p;
}

DenseParams DenseParams::zeros(std::size_t in) {
	return DenseParams{Matrix(1, in), Matrix(1, 1)};
}

Parameters Parameters::zeros(const ModelConfig &config) {
	const std::size_t h = config.hidden;
	return Parameters{LstmParams::zeros(h, 1), LstmParams::zeros(h, h),
	                  DenseParams::zeros(config.attention ? 2 * h : h)};
}

std::vector<Matrix *> Parameters::blocks() {
	std::vector<Matrix *> out;
	out.reserve(18);
	for (LstmParams *layer : {&encoder, &decoder}) {
		for (std::size_t g = 0; g < 4; ++g) {
			out.push_back(&layer->weights[g]);
			out.push_back(&layer->biases[g]);
		}
	}
	out.push_back(&output.weight);
	out.push_back(&output.bias);
	return out;
}

std::vector<const Matrix *> Parameters::blocks() const {
	auto mutable_blocks = const_cast<Parameters *>(this)->blocks();
	return {mutable_blocks.begin(), mutable_blocks.end()};
}

const std::vector<std::string> &Parameters::block_names() {
	static const std::vector<std::string> names = [] {
		std::vector<std::string> out;
		const char *gates[] = {"f", "i", "C", "o"};
		for (const char *layer : {"encoder", "decoder"}) {
			for (const char *g : gates) {
				out.push_back(std::string(layer) + ".W_" + g);
				out.push_back(std::string(layer) + ".b_" + g);
			}
		}
		out.push_back("output.W");
		out.push_back("output.b");
		return out;
	}();
	return names;
}

std::size_t Parameters::count() const {
	std::size_t n = 0;
	for (const Matrix *m : blocks()) {
		n += m->size();
	}
	return n;
}

void Parameters::set_zero() {
	for (Matrix *m : blocks()) {
		m->fill(0.0);
	}
}

bool Parameters::congruent(const Parameters &other) const {
	const auto a = blocks();
	const auto b = other.blocks();
	return std::equal(a.begin(), a.end(), b.begin(), b.end(),
	                  [](const Matrix *x, const Matrix *y) { return x->same_shape(*y); });
}

std::size_t parameter_count(const ModelConfig &config) {
	const std::size_t h = config.hidden;
	const std::size_t encoder = 4 * (h * (h + 1) + h);
	const std::size_t decoder = 4 * (h * (2 * h) + h);
	const std::size_t output = (config.attention ? 2 * h : h) + 1;
	return encoder + decoder + output;
}

namespace {

void glorot_fill(Matrix &m, std::size_t fan_in, std::size_t fan_out, Rng &rng) {
	const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
	for (double &v : m.data()) {
		v = rng.uniform(-bound, bound);
	}
}

void glorot_layer(LstmParams &layer, Rng &rng) {
	for (std::size_t g = 0; g < 4; ++g) {
		glorot_fill(layer.weights[g], layer.width(), layer.hidden(), rng);
		layer.biases[g].fill(0.0);
	}
}

} // namespace

Seq2SeqModel init(const ModelConfig &config, Rng &rng) {
	config.validate();
	Seq2SeqModel model{config, Parameters::zeros(config)};
	glorot_layer(model.params.encoder, rng);
	glorot_layer(model.params.decoder, rng);
	reinit_output(model, rng);
	return model;
}

void reinit_output(Seq2SeqModel &model, Rng &rng) {
	auto &out = model.params.output;
	glorot_fill(out.weight, out.weight.cols(), 1, rng);
	out.bias.fill(0.0);
}

namespace {

// One LSTM cell update over raw buffers. v = [h_prev, x] has width columns.
void cell_forward(const LstmParams &p, const double *v, const double *c_prev, double *gates, double *c,
                  double *tc, double *h) {
	const std::size_t hidden = p.hidden();
	const std::size_t width = p.width();
	for (std::size_t g = 0; g < 4; ++g) {
		const double *w = p.weights[g].data().data();
		const double *b = p.biases[g].data().data();
		double *out = gates + g * hidden;
		for (std::size_t r = 0; r < hidden; ++r) {
			const double z = b[r] + dot(w + r * width, v, width);
			out[r] = g == kCandidate ? std::tanh(z) : sigmoid(z);
		}
	}
	const double *f = gates;
	const double *i = gates + hidden;
	const double *cand = gates + 2 * hidden;
	const double *o = gates + 3 * hidden;
	for (std::size_t r = 0; r < hidden; ++r) {
		c[r] = f[r] * c_prev[r] + i[r] * cand[r];
		tc[r] = std::tanh(c[r]);
		h[r] = o[r] * tc[r];
	}
}

// Backward through one cell. On entry dc holds dL/dC_t from later steps; on
// exit dc_prev holds dL/dC_{t-1}. dv receives dL/d[h_prev, x].
void cell_backward(const LstmParams &p, LstmParams &grad, const double *v, const double *gates,
                   const double *c_prev, const double *tc, const double *dh, const double *dc, double *dc_prev,
                   double *dz, double *dv) {
	const std::size_t hidden = p.hidden();
	const std::size_t width = p.width();
	const double *f = gates;
	const double *i = gates + hidden;
	const double *cand = gates + 2 * hidden;
	const double *o = gates + 3 * hidden;
	double *dzf = dz;
	double *dzi = dz + hidden;
	double *dzc = dz + 2 * hidden;
	double *dzo = dz + 3 * hidden;
	for (std::size_t r = 0; r < hidden; ++r) {
		const double d_o = dh[r] * tc[r];
		const double d_c = dc[r] + dh[r] * o[r] * (1.0 - tc[r] * tc[r]);
		dc_prev[r] = d_c * f[r];
		dzf[r] = d_c * c_prev[r] * f[r] * (1.0 - f[r]);
		dzi[r] = d_c * cand[r] * i[r] * (1.0 - i[r]);
		dzc[r] = d_c * i[r] * (1.0 - cand[r] * cand[r]);
		dzo[r] = d_o * o[r] * (1.0 - o[r]);
	}
	std::fill(dv, dv + width, 0.0);
	for (std::size_t g = 0; g < 4; ++g) {
		const double *w = p.weights[g].data().data();
		double *gw = grad.weights[g].data().data();
		double *gb = grad.biases[g].data().data();
		const double *dzg = dz + g * hidden;
		for (std::size_t r = 0; r < hidden; ++r) {
			const double s = dzg[r];
			gb[r] += s;
			double *gw_row = gw + r * width;
			const double *w_row = w + r * width;
			for (std::size_t k = 0; k < width; ++k) {
				gw_row[k] += s * v[k];
				dv[k] += s * w_row[k];
			}
		}
	}
}

void check_window(const ModelConfig &config, std::span<const double> window) {
	if (window.size() != config.n_past) {
		throw ShapeError("window length " + std::to_string(window.size()) + " does not match n_past " +
		                 std::to_string(config.n_past));
	}
}

void run_encoder(const Seq2SeqModel &model, std::span<const double> window, ForwardCache &cache) {
	const auto &cfg = model.config;
	const std::size_t h = cfg.hidden;
	const std::size_t w = h + 1;
	const auto &enc = model.params.encoder;
	std::fill(cache.enc_h.begin(), cache.enc_h.begin() + h, 0.0);
	std::fill(cache.enc_c.begin(), cache.enc_c.begin() + h, 0.0);
	for (std::size_t t = 0; t < cfg.n_past; ++t) {
		double *v = cache.enc_v.data() + t * w;
		std::copy_n(cache.enc_h.data() + t * h, h, v);
		v[h] = window[t];
		cell_forward(enc, v, cache.enc_c.data() + t * h, cache.enc_gates.data() + t * 4 * h,
		             cache.enc_c.data() + (t + 1) * h, cache.enc_tc.data() + t * h, cache.enc_h.data() + (t + 1) * h);
	}
}

// Decoder over the encoder rows already in the cache. The decoder starts
// from (h_T, c_T) and receives h_T as its input at every step.
void run_decoder(const Seq2SeqModel &model, ForwardCache &cache) {
	const auto &cfg = model.config;
	const std::size_t h = cfg.hidden;
	const std::size_t w = 2 * h;
	const std::size_t past = cfg.n_past;
	const auto &dec = model.params.decoder;
	const double *h_T = cache.enc_h.data() + past * h;
	const double *c_T = cache.enc_c.data() + past * h;
	std::copy_n(h_T, h, cache.dec_h.begin());
	std::copy_n(c_T, h, cache.dec_c.begin());
	for (std::size_t k = 0; k < cfg.n_future; ++k) {
		double *v = cache.dec_v.data() + k * w;
		std::copy_n(cache.dec_h.data() + k * h, h, v);
		std::copy_n(h_T, h, v + h);
		cell_forward(dec, v, cache.dec_c.data() + k * h, cache.dec_gates.data() + k * 4 * h,
		             cache.dec_c.data() + (k + 1) * h, cache.dec_tc.data() + k * h, cache.dec_h.data() + (k + 1) * h);
	}

	const double *wout = model.params.output.weight.data().data();
	const double bout = model.params.output.bias(0, 0);
	for (std::size_t k = 0; k < cfg.n_future; ++k) {
		const double *dh = cache.dec_h.data() + (k + 1) * h;
		if (!cfg.attention) {
			cache.pred[k] = bout + dot(wout, dh, h);
			continue;
		}
		double *a = cache.attn.data() + k * past;
		double peak = -INFINITY;
		for (std::size_t s = 0; s < past; ++s) {
			a[s] = dot(dh, cache.enc_h.data() + (s + 1) * h, h);
			peak = std::max(peak, a[s]);
		}
		double total = 0.0;
		for (std::size_t s = 0; s < past; ++s) {
			a[s] = std::exp(a[s] - peak);
			total += a[s];
		}
		for (std::size_t s = 0; s < past; ++s) {
			a[s] /= total;
		}
		double *ctx = cache.ctx.data() + k * h;
		std::fill(ctx, ctx + h, 0.0);
		for (std::size_t s = 0; s < past; ++s) {
			const double *es = cache.enc_h.data() + (s + 1) * h;
			for (std::size_t r = 0; r < h; ++r) {
				ctx[r] += a[s] * es[r];
			}
		}
		cache.pred[k] = bout + dot(wout, ctx, h) + dot(wout + h, dh, h);
	}
	cache.ready = true;
}

} // namespace

void ForwardCache::resize(const ModelConfig &cfg) {
	config = cfg;
	ready = false;
	const std::size_t h = cfg.hidden;
	const std::size_t p = cfg.n_past;
	const std::size_t f = cfg.n_future;
	enc_v.resize(p * (h + 1));
	enc_gates.resize(p * 4 * h);
	enc_c.resize((p + 1) * h);
	enc_h.resize((p + 1) * h);
	enc_tc.resize(p * h);
	dec_v.resize(f * 2 * h);
	dec_gates.resize(f * 4 * h);
	dec_c.resize((f + 1) * h);
	dec_h.resize((f + 1) * h);
	dec_tc.resize(f * h);
	attn.resize(cfg.attention ? f * p : 0);
	ctx.resize(cfg.attention ? f * h : 0);
	pred.resize(f);
	ext_dh.resize(p * h);
	dec_dh.resize(f * h);
	dh.resize(h);
	dh_total.resize(h);
	da.resize(p);
	dc.resize(h);
	dc_prev.resize(h);
	dv.resize(2 * h);
	dz.resize(4 * h);
	d_hT.resize(h);
}

LstmStep lstm_step(const LstmParams &params, std::span<const double> x, const LstmState &prev) {
	const std::size_t hidden = params.hidden();
	if (x.size() != params.input()) {
		throw ShapeError("lstm_step input width " + std::to_string(x.size()) + " does not match " +
		                 std::to_string(params.input()));
	}
	if (prev.h.size() != hidden || prev.c.size() != hidden) {
		throw ShapeError("lstm_step state width does not match hidden size " + std::to_string(hidden));
	}
	Vector v(prev.h);
	v.insert(v.end(), x.begin(), x.end());
	Vector gates(4 * hidden);
	LstmStep step;
	step.state.h.resize(hidden);
	step.state.c.resize(hidden);
	Vector tc(hidden);
	cell_forward(params, v.data(), prev.c.data(), gates.data(), step.state.c.data(), tc.data(), step.state.h.data());
	auto slice = [&](std::size_t g) {
		return Vector(gates.begin() + g * hidden, gates.begin() + (g + 1) * hidden);
	};
	step.forget = slice(kForget);
	step.input = slice(kInput);
	step.candidate = slice(kCandidate);
	step.output = slice(kOutput);
	return step;
}

EncoderOutput encode(const Seq2SeqModel &model, std::span<const double> window) {
	check_window(model.config, window);
	ForwardCache cache;
	cache.resize(model.config);
	run_encoder(model, window, cache);
	const std::size_t h = model.config.hidden;
	EncoderOutput out;
	for (std::size_t t = 1; t <= model.config.n_past; ++t) {
		out.stack.emplace_back(cache.enc_h.begin() + t * h, cache.enc_h.begin() + (t + 1) * h);
	}
	out.final.h = out.stack.back();
	const std::size_t last = model.config.n_past * h;
	out.final.c.assign(cache.enc_c.begin() + last, cache.enc_c.begin() + last + h);
	return out;
}

namespace {

ForwardCache cache_from_encoder(const Seq2SeqModel &model, const EncoderOutput &enc) {
	const auto &cfg = model.config;
	const std::size_t h = cfg.hidden;
	if (enc.stack.size() != cfg.n_past || enc.final.h.size() != h || enc.final.c.size() != h) {
		throw ShapeError("encoder output does not match the model configuration");
	}
	ForwardCache cache;
	cache.resize(cfg);
	for (std::size_t t = 0; t < cfg.n_past; ++t) {
		if (enc.stack[t].size() != h) {
			throw ShapeError("encoder stack entry has the wrong width");
		}
		std::copy(enc.stack[t].begin(), enc.stack[t].end(), cache.enc_h.begin() + (t + 1) * h);
	}
	// The decoder starts from the final state, which need not equal the last stack entry.
	std::copy(enc.final.h.begin(), enc.final.h.end(), cache.enc_h.begin() + cfg.n_past * h);
	std::copy(enc.final.c.begin(), enc.final.c.end(), cache.enc_c.begin() + cfg.n_past * h);
	return cache;
}

} // namespace

Vector decode_plain(const Seq2SeqModel &model, const EncoderOutput &enc) {
	if (model.config.attention) {
		throw ConfigError("decode_plain called on an attention model");
	}
	ForwardCache cache = cache_from_encoder(model, enc);
	run_decoder(model, cache);
	return cache.pred;
}

AttentionDecode decode_attention(const Seq2SeqModel &model, const EncoderOutput &enc) {
	if (!model.config.attention) {
		throw ConfigError("decode_attention called on a model without attention");
	}
	ForwardCache cache = cache_from_encoder(model, enc);
	run_decoder(model, cache);
	const auto &cfg = model.config;
	AttentionDecode out;
	out.predictions = cache.pred;
	out.trace.weights = Matrix(cfg.n_future, cfg.n_past, cache.attn);
	for (std::size_t k = 0; k < cfg.n_future; ++k) {
		out.trace.contexts.emplace_back(cache.ctx.begin() + k * cfg.hidden, cache.ctx.begin() + (k + 1) * cfg.hidden);
	}
	return out;
}

void forward(const Seq2SeqModel &model, std::span<const double> window, ForwardCache &cache) {
	check_window(model.config, window);
	if (cache.config != model.config || cache.pred.size() != model.config.n_future) {
		cache.resize(model.config);
	}
	cache.ready = false;
	run_encoder(model, window, cache);
	run_decoder(model, cache);
}

Vector predict(const Seq2SeqModel &model, std::span<const double> window) {
	ForwardCache cache;
	forward(model, window, cache);
	return cache.pred;
}

void accumulate_backward(const Seq2SeqModel &model, const ForwardCache &cache, std::span<const double> loss_grad,
                         Gradients &grads) {
	const auto &cfg = model.config;
	if (!cache.ready || cache.config != cfg) {
		throw std::logic_error("backward called without a forward cache for this model");
	}
	if (loss_grad.size() != cfg.n_future) {
		throw ShapeError("loss gradient length " + std::to_string(loss_grad.size()) + " does not match n_future " +
		                 std::to_string(cfg.n_future));
	}
	if (!grads.congruent(model.params)) {
		throw ShapeError("gradient tree is not congruent with the model parameters");
	}
	const std::size_t h = cfg.hidden;
	const std::size_t past = cfg.n_past;
	const std::size_t future = cfg.n_future;

	double *ext = cache.ext_dh.data(); // dL/dh_s from attention, encoder steps
	double *dh = cache.dh.data();
	double *dc = cache.dc.data();
	double *dc_prev = cache.dc_prev.data();
	double *dv = cache.dv.data();
	double *dz = cache.dz.data();
	double *d_hT = cache.d_hT.data(); // dL/dh_T via the repeated decoder input
	std::fill(cache.ext_dh.begin(), cache.ext_dh.end(), 0.0);
	std::fill(cache.d_hT.begin(), cache.d_hT.end(), 0.0);

	const double *wout = model.params.output.weight.data().data();
	double *gw_out = grads.output.weight.data().data();
	double &gb_out = grads.output.bias(0, 0);

	// Per-step gradient w.r.t. decoder hidden state from the output path, kept in dec-sized scratch.
	Vector &dec_dh = cache.dec_dh;
	Vector &da = cache.da;
	for (std::size_t k = 0; k < future; ++k) {
		const double g = loss_grad[k];
		const double *hk = cache.dec_h.data() + (k + 1) * h;
		double *dhk = dec_dh.data() + k * h;
		gb_out += g;
		if (!cfg.attention) {
			for (std::size_t r = 0; r < h; ++r) {
				gw_out[r] += g * hk[r];
				dhk[r] = g * wout[r];
			}
			continue;
		}
		const double *ctx = cache.ctx.data() + k * h;
		const double *a = cache.attn.data() + k * past;
		for (std::size_t r = 0; r < h; ++r) {
			gw_out[r] += g * ctx[r];
			gw_out[h + r] += g * hk[r];
			dhk[r] = g * wout[h + r];
		}
		// dctx = g * wout[0:h]
		double weighted = 0.0;
		for (std::size_t s = 0; s < past; ++s) {
			const double *es = cache.enc_h.data() + (s + 1) * h;
			double acc = 0.0;
			for (std::size_t r = 0; r < h; ++r) {
				acc += g * wout[r] * es[r];
			}
			da[s] = acc;
			weighted += a[s] * acc;
			double *ext_s = ext + s * h;
			for (std::size_t r = 0; r < h; ++r) {
				ext_s[r] += a[s] * g * wout[r];
			}
		}
		for (std::size_t s = 0; s < past; ++s) {
			const double de = a[s] * (da[s] - weighted);
			const double *es = cache.enc_h.data() + (s + 1) * h;
			double *ext_s = ext + s * h;
			for (std::size_t r = 0; r < h; ++r) {
				dhk[r] += de * es[r];
				ext_s[r] += de * hk[r];
			}
		}
	}

	// Decoder BPTT.
	std::fill(cache.dh.begin(), cache.dh.end(), 0.0);
	std::fill(cache.dc.begin(), cache.dc.end(), 0.0);
	Vector &dh_total = cache.dh_total;
	for (std::size_t k = future; k-- > 0;) {
		const double *dhk = dec_dh.data() + k * h;
		for (std::size_t r = 0; r < h; ++r) {
			dh_total[r] = dhk[r] + dh[r];
		}
		cell_backward(model.params.decoder, grads.decoder, cache.dec_v.data() + k * 2 * h,
		              cache.dec_gates.data() + k * 4 * h, cache.dec_c.data() + k * h, cache.dec_tc.data() + k * h,
		              dh_total.data(), dc, dc_prev, dz, dv);
		for (std::size_t r = 0; r < h; ++r) {
			dh[r] = dv[r];
			d_hT[r] += dv[h + r];
			dc[r] = dc_prev[r];
		}
	}

	// dh now holds dL/dh_T through the decoder's initial state, dc holds dL/dC_T.
	for (std::size_t r = 0; r < h; ++r) {
		dh[r] += d_hT[r];
	}
	for (std::size_t t = past; t-- > 0;) {
		const double *ext_t = ext + t * h;
		for (std::size_t r = 0; r < h; ++r) {
			dh_total[r] = dh[r] + ext_t[r];
		}
		cell_backward(model.params.encoder, grads.encoder, cache.enc_v.data() + t * (h + 1),
		              cache.enc_gates.data() + t * 4 * h, cache.enc_c.data() + t * h, cache.enc_tc.data() + t * h,
		              dh_total.data(), dc, dc_prev, dz, dv);
		for (std::size_t r = 0; r < h; ++r) {
			dh[r] = dv[r];
			dc[r] = dc_prev[r];
		}
	}
}

Gradients backward(const Seq2SeqModel &model, const ForwardCache &cache, std::span<const double> loss_grad) {
	Gradients grads = Parameters::zeros(model.config);
	accumulate_backward(model, cache, loss_grad, grads);
	return grads;
}

} // namespace tfl
