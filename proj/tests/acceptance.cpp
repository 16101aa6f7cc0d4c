// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// Pass criterion numbers as arguments to run a subset, e.g. `tfl_acceptance 7 8`.

#include "support.hpp"

#include "tfl/cli.hpp"
#include "tfl/dataset.hpp"
#include "tfl/errors.hpp"
#include "tfl/evaluation.hpp"
#include "tfl/kernels.hpp"
#include "tfl/seq2seq.hpp"
#include "tfl/training.hpp"
#include "tfl/wavelet.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using namespace tfl;
using tfl::test::Gen;

namespace {

struct Verdict {
	bool pass = true;
	std::string detail;

	void require(bool ok, const std::string &what) {
		if (!ok) {
			pass = false;
			detail += (detail.empty() ? "" : "; ") + what;
		}
	}
	void note(const std::string &what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string fmt(const char *format, double v) {
	char buf[64];
	std::snprintf(buf, sizeof buf, format, v);
	return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
	return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- 1: gradient correctness ------------------------------------------------

Verdict gradients() {
	Verdict v;
	const auto t0 = std::chrono::steady_clock::now();
	Gen gen(101);
	double worst = 0.0;
	for (bool attention : {false, true}) {
		const ModelConfig cfg{4, 2, 8, attention};
		for (std::uint64_t trial = 0; trial < 3; ++trial) {
			Rng rng(1000 + trial);
			const Seq2SeqModel model = init(cfg, rng);
			const Vector window = gen.vec(4, 0, 1);
			const Vector target = gen.vec(2, 0, 1);
			GradientCheckOptions opt;
			opt.samples_per_block = 20;
			opt.seed = 7 + trial;
			worst = std::max(worst, gradient_check(model, window, target, 1e-5, opt));
		}
	}
	const double elapsed = seconds_since(t0);
	v.require(worst < 1e-4, "max relative error " + fmt("%.3g", worst));
	v.require(elapsed < 30.0, "runtime " + fmt("%.1f", elapsed) + " s");
	v.note("max relative error " + fmt("%.3g", worst));
	return v;
}

// ---- 2: DWT perfect reconstruction -----------------------------------------

Verdict reconstruction() {
	Verdict v;
	Gen gen(102);
	double worst = 0.0, worst_identity = 0.0;
	std::size_t checked = 0;
	for (const auto &filter : {WaveletFilter::haar(), WaveletFilter::db4()}) {
		for (Extension ext : {Extension::symmetric, Extension::periodic}) {
			for (std::size_t levels = 1; levels <= 3; ++levels) {
				for (std::size_t n : {64, 128, 256}) {
					AugmentConfig cfg;
					cfg.filter = filter;
					cfg.levels = levels;
					cfg.extension = ext;
					for (int s = 0; s < 50; ++s) {
						const Vector x = gen.vec(n, -1e3, 1e3);
						worst = std::max(worst, test::max_abs_diff(idwt(dwt(x, cfg), cfg), x));
						++checked;
					}
					cfg.factor_lo = cfg.factor_hi = 1.0;
					for (int s = 0; s < 10; ++s) {
						cfg.seed = static_cast<std::uint64_t>(s);
						const Vector x = gen.vec(n, 0, 1e3);
						worst_identity = std::max(worst_identity, test::max_abs_diff(augment_series(x, cfg), x));
					}
				}
			}
		}
	}
	v.require(worst < 1e-9, "reconstruction error " + fmt("%.3g", worst));
	v.require(worst_identity < 1e-9, "unit-factor augmentation error " + fmt("%.3g", worst_identity));
	v.note(std::to_string(checked) + " signals, max error " + fmt("%.3g", worst) + ", identity " +
	       fmt("%.3g", worst_identity));
	return v;
}

// ---- 3: filter identities -----------------------------------------------------

Verdict filters() {
	Verdict v;
	for (const auto &filter : {WaveletFilter::haar(), WaveletFilter::db4()}) {
		const FilterIdentityErrors e = filter_identity_errors(filter);
		v.require(e.sum < 1e-10 && e.energy < 1e-10, filter.name + " sum/energy off");
		try {
			validate_filter(filter, 1e-10);
		} catch (const std::exception &ex) {
			v.require(false, ex.what());
		}
		v.note(filter.name + " sum " + fmt("%.2g", e.sum) + " energy " + fmt("%.2g", e.energy));
	}
	return v;
}

// ---- 4: attention normalisation ---------------------------------------------

Verdict attention() {
	Verdict v;
	Gen gen(104);
	double worst = 0.0;
	bool negative = false;
	for (int trial = 0; trial < 100; ++trial) {
		const ModelConfig cfg{gen.index(1, 24), gen.index(1, 8), gen.index(1, 16), true};
		Rng rng(static_cast<std::uint64_t>(trial));
		const Seq2SeqModel model = init(cfg, rng);
		const Vector window = gen.vec(cfg.n_past, -2, 2);
		const AttentionDecode d = decode_attention(model, encode(model, window));
		for (std::size_t t = 0; t < d.trace.weights.rows(); ++t) {
			double sum = 0.0;
			for (std::size_t s = 0; s < d.trace.weights.cols(); ++s) {
				sum += d.trace.weights(t, s);
				negative = negative || d.trace.weights(t, s) < 0.0;
			}
			worst = std::max(worst, std::abs(sum - 1.0));
		}
	}
	v.require(worst <= 1e-12, "row sum error " + fmt("%.3g", worst));
	v.require(!negative, "negative attention weight");

	bool lone_exact = true;
	for (int trial = 0; trial < 20; ++trial) {
		const ModelConfig cfg{1, gen.index(1, 8), gen.index(1, 16), true};
		Rng rng(500 + static_cast<std::uint64_t>(trial));
		const Seq2SeqModel model = init(cfg, rng);
		const Vector window = gen.vec(1, -2, 2);
		const EncoderOutput enc = encode(model, window);
		for (const Vector &ctx : decode_attention(model, enc).trace.contexts) {
			lone_exact = lone_exact && ctx == enc.stack[0];
		}
	}
	v.require(lone_exact, "n_past = 1 context differs from the encoder state");
	v.note("max |row sum - 1| " + fmt("%.3g", worst));
	return v;
}

// ---- 5: freeze invariance ------------------------------------------------------

Verdict freeze() {
	Verdict v;
	const TimeSeries target = synth(SynthProfile{2e8, 6e7, 1e7, 0.0, 1e7, 9}, 1200);
	const ScalerParams scaler = fit_scaler(target.values);
	const WindowedDataset data = make_windows(scale(target.values, scaler), 12, 6);
	for (bool attention : {false, true}) {
		const ModelConfig cfg{12, 6, 16, attention};
		Rng rng(5);
		const Seq2SeqModel source = init(cfg, rng);
		TransferConfig tc;
		tc.phase1 = {3, 32, 0.001, 5, true};
		tc.phase2 = {1, 32, 0.0001, 5, true};
		bool body_same = false, output_moved = false;
		TransferHooks hooks;
		hooks.on_phase_end = [&](int phase, const Seq2SeqModel &m) {
			if (phase == 1) {
				body_same = m.params.encoder == source.params.encoder && m.params.decoder == source.params.decoder;
				output_moved = !(m.params.output == source.params.output);
			}
		};
		const TransferResult r = transfer(source, cfg, data, tc, {}, hooks);
		v.require(body_same, std::string(attention ? "attention" : "plain") + " body changed in phase 1");
		v.require(output_moved, "output layer did not change");
		v.require(r.learning_rates == std::vector<double>{0.001, 0.0001}, "phase learning rates");
	}
	return v;
}

// ---- 6: metric oracles -----------------------------------------------------------

Verdict metrics() {
	Verdict v;
	Gen gen(106);
	double worst = 0.0;
	bool ordered = true;
	for (int trial = 0; trial < 100; ++trial) {
		const std::size_t n = gen.index(1, 200);
		const Vector p = gen.vec(n, 0, 10), o = gen.vec(n, 0.1, 10);
		long double abs_sum = 0.0L, sq_sum = 0.0L, obs_sum = 0.0L;
		for (std::size_t i = 0; i < n; ++i) {
			const long double e = static_cast<long double>(p[i]) - o[i];
			abs_sum += std::abs(e);
			sq_sum += e * e;
			obs_sum += std::abs(static_cast<long double>(o[i]));
		}
		const auto count = static_cast<long double>(n);
		const double m = mae(p, o), r = rmse(p, o), w = wape(p, o);
		worst = std::max({worst, static_cast<double>(std::abs(m - abs_sum / count)),
		                  static_cast<double>(std::abs(r - std::sqrt(sq_sum / count))),
		                  static_cast<double>(std::abs(w - abs_sum / obs_sum * 100.0L))});
		ordered = ordered && r >= m;
	}
	v.require(worst <= 1e-12, "oracle mismatch " + fmt("%.3g", worst));
	v.require(ordered, "RMSE < MAE on some pair");
	const double acc = accuracy(6.28);
	v.require(std::abs(acc - 93.72) < 1e-12, "accuracy(6.28) = " + fmt("%.17g", acc));
	v.note("max oracle difference " + fmt("%.3g", worst) + ", accuracy(6.28) = " + fmt("%.6g", acc));
	return v;
}

// ---- shared pieces of the learning experiments -----------------------------------

struct Prepared {
	ScalerParams scaler;
	WindowedDataset train;
	WindowedDataset test;
	TimeSeries train_series;
};

Prepared prepare(const TimeSeries &series, std::size_t n_past, std::size_t n_future) {
	Prepared p;
	auto [train_part, test_part] = split(series, 0.8, n_past + n_future);
	p.scaler = fit_scaler(train_part.values);
	p.train = make_windows(scale(train_part.values, p.scaler), n_past, n_future);
	p.test = make_windows(scale(test_part.values, p.scaler), n_past, n_future);
	p.train_series = std::move(train_part);
	return p;
}

Matrix raw(const Matrix &scaled, const ScalerParams &scaler) {
	return Matrix(scaled.rows(), scaled.cols(), inverse_scale(scaled.data(), scaler));
}

/// Average test WAPE in original units.
double test_wape(const Seq2SeqModel &model, const Prepared &d) {
	const Matrix pred = kernels::predict_parallel(model, d.test);
	return per_step_table(raw(pred, d.scaler), raw(d.test.target_matrix(), d.scaler)).average.wape;
}

double persistence_wape(const Prepared &d) {
	Vector inputs;
	for (std::size_t k = 0; k < d.test.size(); ++k) {
		inputs.insert(inputs.end(), d.test.input(k).begin(), d.test.input(k).end());
	}
	const Matrix naive = persistence_forecast(inputs, d.test.n_past(), d.test.n_future());
	return per_step_table(raw(naive, d.scaler), raw(d.test.target_matrix(), d.scaler)).average.wape;
}

bool decreased(const std::vector<double> &history) { return !history.empty() && history.back() < history.front(); }

// ---- 7: desk-scale learnability ---------------------------------------------------

constexpr std::size_t kLearnEpochs = 20;

Verdict learnability() {
	Verdict v;
	const auto t0 = std::chrono::steady_clock::now();
	SynthProfile profile;
	profile.seed = 42;
	const Prepared d = prepare(synth(profile, 20000), 12, 6);
	Rng rng(42);
	Seq2SeqModel model = init({12, 6, 32, false}, rng);
	const auto history = train(model, d.train, {kLearnEpochs, 32, 0.001, 42, true});
	const double model_wape = test_wape(model, d), naive_wape = persistence_wape(d);
	const double elapsed = seconds_since(t0);
	v.require(model_wape < naive_wape, "model does not beat persistence");
	v.require(decreased(history), "final training loss not below initial");
	v.require(elapsed < 300.0, "runtime " + fmt("%.0f", elapsed) + " s");
	v.note("WAPE " + fmt("%.4f", model_wape) + "% vs persistence " + fmt("%.4f", naive_wape) + "%, " +
	       std::to_string(kLearnEpochs) + " epochs, " + fmt("%.0f", elapsed) + " s");
	return v;
}

// ---- 8: transfer and augmentation direction -------------------------------------

constexpr std::size_t kSourceEpochs = 15;
constexpr std::size_t kPhaseEpochs = 25;
constexpr std::size_t kHidden = 32;

Verdict transfer_direction() {
	Verdict v;
	const auto t0 = std::chrono::steady_clock::now();
	const ModelConfig cfg{12, 6, kHidden, false};
	double scratch_sum = 0.0, transfer_sum = 0.0, augmented_sum = 0.0;
	std::ostringstream per_seed;
	for (std::uint64_t seed : {1, 2, 3}) {
		const Prepared source = prepare(synth({5e8, 1.5e8, 5e7, 0.0, 2e7, 100 + seed}, 20000), 12, 6);
		// Lower level, smaller swings, relatively noisier and slowly growing.
		const Prepared target = prepare(synth({1.2e8, 6e7, 1.5e7, 2e5, 1.2e7, 200 + seed}, 2000), 12, 6);

		Rng rng(seed);
		Seq2SeqModel src = init(cfg, rng);
		v.require(decreased(train(src, source.train, {kSourceEpochs, 32, 0.001, seed, true})),
		          "source loss did not decrease");

		Rng scratch_rng(seed + 1000);
		Seq2SeqModel scratch = init(cfg, scratch_rng);
		v.require(decreased(train(scratch, target.train, {2 * kPhaseEpochs, 32, 0.001, seed, true})),
		          "scratch loss did not decrease");

		TransferConfig tc;
		tc.phase1 = {kPhaseEpochs, 32, 0.001, seed, true};
		tc.phase2 = {kPhaseEpochs, 32, 0.0001, seed, true};
		tc.seed = seed;
		const TransferResult plain = transfer(src, cfg, target.train, tc);
		v.require(plain.phase2_history.back() < plain.phase1_history.front(), "transfer loss did not decrease");

		AugmentConfig aug;
		aug.seed = seed;
		const AugmentedCorpus corpus = expand_dataset(target.train_series, aug, 3);
		const TransferResult augmented = transfer(src, cfg, corpus_windows(corpus, target.scaler, 12, 6), tc);
		v.require(augmented.phase2_history.back() < augmented.phase1_history.front(),
		          "augmented transfer loss did not decrease");

		const double s = test_wape(scratch, target), t = test_wape(plain.model, target),
		             a = test_wape(augmented.model, target);
		scratch_sum += s;
		transfer_sum += t;
		augmented_sum += a;
		per_seed << " [seed " << seed << ": " << fmt("%.3f", s) << "/" << fmt("%.3f", t) << "/" << fmt("%.3f", a)
		         << "]";
	}
	const double scratch = scratch_sum / 3, plain = transfer_sum / 3, augmented = augmented_sum / 3;
	const double elapsed = seconds_since(t0);
	v.require(plain <= scratch + 0.5, "transfer worse than scratch by more than 0.5 pp");
	v.require(augmented <= plain + 0.5, "augmented transfer worse than plain transfer by more than 0.5 pp");
	v.require(elapsed < 900.0, "runtime " + fmt("%.0f", elapsed) + " s");
	v.note("mean WAPE scratch " + fmt("%.3f", scratch) + "%, transfer " + fmt("%.3f", plain) + "%, augmented " +
	       fmt("%.3f", augmented) + "%;" + per_seed.str() + " " + fmt("%.0f", elapsed) + " s");
	return v;
}

// ---- 9: IQR and outliers -------------------------------------------------------

Verdict quartiles() {
	Verdict v;
	const Quartiles q = iqr(Vector{1, 2, 3, 4});
	v.require(q.q1 == 1.75 && q.q3 == 3.25 && q.iqr == 1.5, "iqr([1,2,3,4])");
	const auto out = outliers(Vector{1, 2, 3, 4, 100});
	v.require(out.size() == 1 && out[0].value == 100.0 && out[0].index == 4, "outliers([1,2,3,4,100])");
	Gen gen(109);
	bool invariant = true;
	for (int trial = 0; trial < 100; ++trial) {
		Vector x = gen.vec(gen.index(4, 60), -50, 50);
		if (trial % 3 == 0) {
			x.push_back(gen.real(500, 1000));
		}
		const Quartiles before = iqr(x);
		std::multiset<double> flagged;
		for (const Outlier &o : outliers(x)) {
			flagged.insert(o.value);
		}
		std::shuffle(x.begin(), x.end(), gen.engine());
		const Quartiles after = iqr(x);
		std::multiset<double> flagged_after;
		for (const Outlier &o : outliers(x)) {
			flagged_after.insert(o.value);
		}
		invariant = invariant && before.q1 == after.q1 && before.q3 == after.q3 && before.iqr == after.iqr &&
		            flagged == flagged_after;
	}
	v.require(invariant, "permutation changed the quartiles or outliers");
	return v;
}

// ---- 10: end-to-end determinism -------------------------------------------------

void cli(const std::vector<std::string> &args) {
	std::ostringstream out, err;
	const int code = cli::run(args, out, err);
	if (code != 0) {
		throw std::runtime_error("tfl " + args.front() + " exited " + std::to_string(code) + ": " + err.str());
	}
}

// Runs synth -> train -> augment -> transfer -> evaluate -> report under dir.
void pipeline(const fs::path &dir) {
	const auto p = [&](const char *name) { return (dir / name).string(); };
	cli({"synth", "--out", p("source.csv"), "--length", "3000", "--seed", "11"});
	cli({"synth", "--out", p("target.csv"), "--length", "800", "--seed", "12", "--base-bps", "2e8", "--daily-amp", "6e7"});
	cli({"train", "--data", p("source.csv"), "--hidden", "8", "--epochs", "3", "--out", p("source.tfl"), "--jobs",
	     "2"});
	cli({"augment", "--data", p("target.csv"), "--copies", "2", "--out", p("augmented")});
	cli({"transfer", "--source-model", p("source.tfl"), "--data", p("target.csv"), "--phase1-epochs", "2",
	     "--phase2-epochs", "2", "--augment-copies", "2", "--out", p("target.tfl")});
	cli({"evaluate", "--model", p("source.tfl"), "--model", p("target.tfl"), "--data", p("target.csv"), "--out",
	     p("eval"), "--jobs", "2"});
	cli({"report", "--before", p("eval/metrics_source_h6.csv"), "--after", p("eval/metrics_target_h6.csv"), "--out",
	     p("report")});
}

std::map<std::string, std::string> csv_files(const fs::path &root) {
	std::map<std::string, std::string> files;
	for (const auto &entry : fs::recursive_directory_iterator(root)) {
		if (entry.is_regular_file() && entry.path().extension() == ".csv") {
			files[fs::relative(entry.path(), root).string()] = test::read_text(entry.path());
		}
	}
	return files;
}

Verdict determinism() {
	Verdict v;
	test::TempDir dir;
	pipeline(dir / "first");
	pipeline(dir / "second");
	const auto a = csv_files(dir / "first"), b = csv_files(dir / "second");
	v.require(a.size() >= 10, "expected report CSVs missing");
	v.require(a.count("report/improvements_h6.csv") == 1, "no improvements table");
	v.require(a == b, "CSV outputs differ between runs");
	std::size_t bytes = 0;
	for (const auto &[name, text] : a) {
		bytes += text.size();
	}
	v.note(std::to_string(a.size()) + " CSV files, " + std::to_string(bytes) + " bytes compared");
	return v;
}

} // namespace

int main(int argc, char **argv) {
	const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
	    {"gradient correctness", gradients},
	    {"DWT perfect reconstruction", reconstruction},
	    {"filter identities", filters},
	    {"attention normalisation", attention},
	    {"freeze invariance", freeze},
	    {"metric oracles", metrics},
	    {"desk-scale learnability", learnability},
	    {"transfer and augmentation direction", transfer_direction},
	    {"IQR and outliers", quartiles},
	    {"end-to-end determinism", determinism},
	};
	std::set<std::size_t> wanted;
	for (int i = 1; i < argc; ++i) {
		wanted.insert(std::stoul(argv[i]));
	}
	int failures = 0;
	for (std::size_t i = 0; i < criteria.size(); ++i) {
		if (!wanted.empty() && !wanted.count(i + 1)) {
			continue;
		}
		Verdict v;
		try {
			v = criteria[i].second();
		} catch (const std::exception &e) {
			v.pass = false;
			v.detail = std::string("exception: ") + e.what();
		}
		failures += v.pass ? 0 : 1;
		std::printf("criterion %2zu %-38s %s  %s\n", i + 1, criteria[i].first.c_str(), v.pass ? "PASS" : "FAIL",
		            v.detail.c_str());
		std::fflush(stdout);
	}
	return failures == 0 ? 0 : 1;
}
