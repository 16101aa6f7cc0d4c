#include "tfl/cli.hpp"

#include "tfl/dataset.hpp"
#include "tfl/errors.hpp"
#include "tfl/evaluation.hpp"
#include "tfl/kernels.hpp"
#include "tfl/model_io.hpp"
#include "tfl/training.hpp"
#include "tfl/wavelet.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>

namespace tfl::cli {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string &s) {
	const auto first = s.find_first_not_of(" \t\r\n");
	if (first == std::string::npos) {
		return {};
	}
	const auto last = s.find_last_not_of(" \t\r\n");
	return s.substr(first, last - first + 1);
}

std::string format_long(double v) {
	char buf[64];
	std::snprintf(buf, sizeof buf, "%.10g", v);
	return buf;
}

fs::path sibling(const fs::path &out, const std::string &suffix) {
	fs::path p = out;
	p.replace_extension(suffix);
	return p;
}

void ensure_parent(const fs::path &file) {
	if (file.has_parent_path()) {
		std::error_code ec;
		fs::create_directories(file.parent_path(), ec);
		if (ec) {
			throw DataError("cannot create directory " + file.parent_path().string() + ": " + ec.message());
		}
	}
}

void ensure_dir(const fs::path &dir) {
	std::error_code ec;
	fs::create_directories(dir, ec);
	if (ec) {
		throw DataError("cannot create directory " + dir.string() + ": " + ec.message());
	}
}

// Every long option with its resolved value, in declaration order. The file
// can be fed back through --config to repeat the run.
void write_resolved_config(const CLI::App &sub, const fs::path &path) {
	std::ofstream out(path);
	if (!out) {
		throw DataError("cannot write " + path.string());
	}
	out << "# tfl " << sub.get_name() << " resolved configuration\n";
	for (const CLI::Option *opt : sub.get_options()) {
		if (opt->get_lnames().empty()) {
			continue;
		}
		const std::string &name = opt->get_lnames().front();
		if (name == "help" || name == "config") {
			continue;
		}
		// Vector options get one line per value, which reads back as repeated flags.
		if (opt->count() > 0) {
			if (opt->get_items_expected_max() > 1) {
				for (const auto &r : opt->results()) {
					out << name << '=' << r << '\n';
				}
			} else {
				out << name << '=' << opt->results().back() << '\n';
			}
			continue;
		}
		// Unset vector options are left out so a rerun sees the same implicit default.
		const std::string value = opt->get_default_str();
		if (value.empty() || opt->get_items_expected_max() > 1) {
			continue;
		}
		out << name << '=' << value << '\n';
	}
	if (!out) {
		throw DataError("write failed for " + path.string());
	}
}

struct CommonOptions {
	std::uint64_t seed = 42;
	int jobs = 1;
	std::string config; // consumed before parsing; declared for --help
};

void add_common(CLI::App *sub, CommonOptions &o) {
	sub->add_option("--seed", o.seed, "Random seed (falls back to $TFL_SEED)")->envname("TFL_SEED");
	sub->add_option("--jobs", o.jobs, "Worker threads for parallel kernels (0 = OpenMP default)")->check(CLI::NonNegativeNumber);
	sub->add_option("--config", o.config, "key=value file; explicit flags take precedence");
}

void apply_jobs(const CommonOptions &o) {
	if (o.jobs > 0) {
		omp_set_num_threads(o.jobs);
	}
}

struct AugmentOptions {
	std::string wavelet = "db4";
	std::size_t levels = 3;
	double factor_min = 0.5;
	double factor_max = 1.5;
	std::size_t copies = 0;
	std::vector<std::size_t> perturb_levels;
	bool per_band = false;
};

void add_augment(CLI::App *sub, AugmentOptions &o, const std::string &copies_flag, std::size_t default_copies) {
	o.copies = default_copies;
	sub->add_option(copies_flag, o.copies, "Number of wavelet-perturbed copies of the training series");
	sub->add_option("--wavelet", o.wavelet, "Wavelet filter")->check(CLI::IsMember({"haar", "db4"}));
	sub->add_option("--levels", o.levels, "Decomposition levels")->check(CLI::PositiveNumber);
	sub->add_option("--factor-min", o.factor_min, "Lower end of the detail scaling factor range");
	sub->add_option("--factor-max", o.factor_max, "Upper end of the detail scaling factor range");
	sub->add_option("--perturb-levels", o.perturb_levels, "Detail levels to perturb (1 = finest); default all")
	    ->delimiter(',')
	    ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
	sub->add_flag("--per-band", o.per_band, "One factor per detail band instead of per coefficient");
}

AugmentConfig to_augment_config(const AugmentOptions &o, std::uint64_t seed) {
	AugmentConfig cfg;
	cfg.filter = WaveletFilter::by_name(o.wavelet);
	validate_filter(cfg.filter);
	cfg.levels = o.levels;
	cfg.factor_lo = o.factor_min;
	cfg.factor_hi = o.factor_max;
	cfg.seed = seed;
	cfg.perturb_levels = o.perturb_levels;
	cfg.granularity = o.per_band ? FactorGranularity::per_band : FactorGranularity::per_coefficient;
	return cfg;
}

struct Prepared {
	TimeSeries train;
	TimeSeries test;
	ScalerParams scaler;
	WindowedDataset train_windows;
	WindowedDataset test_windows;
	std::size_t interpolated = 0;
};

Prepared prepare(const std::string &path, double ratio, std::size_t n_past, std::size_t n_future,
                 const AugmentOptions *aug, std::uint64_t seed, const ScalerParams *fixed_scaler) {
	LoadResult loaded = load_csv(path);
	Prepared p;
	p.interpolated = loaded.interpolated;
	std::tie(p.train, p.test) = split(loaded.series, ratio, n_past + n_future);
	p.scaler = fixed_scaler ? *fixed_scaler : fit_scaler(p.train.values);
	if (aug && aug->copies > 0) {
		const AugmentedCorpus corpus = expand_dataset(p.train, to_augment_config(*aug, seed), aug->copies);
		p.train_windows = corpus_windows(corpus, p.scaler, n_past, n_future);
	} else {
		p.train_windows = make_windows(scale(p.train.values, p.scaler), n_past, n_future);
	}
	p.test_windows = make_windows(scale(p.test.values, p.scaler), n_past, n_future);
	return p;
}

void report_interpolation(const Prepared &p, std::ostream &out) {
	if (p.interpolated > 0) {
		out << "warning: filled " << p.interpolated << " missing samples by linear interpolation\n";
	}
}

void write_history(const std::vector<std::pair<std::string, std::vector<double>>> &phases, const fs::path &path) {
	std::ofstream out(path);
	if (!out) {
		throw DataError("cannot write " + path.string());
	}
	out << "phase,epoch,loss\n";
	for (const auto &[phase, history] : phases) {
		for (std::size_t e = 0; e < history.size(); ++e) {
			out << phase << ',' << e + 1 << ',' << format_number(history[e]) << '\n';
		}
	}
	if (!out) {
		throw DataError("write failed for " + path.string());
	}
}

// ---- synth ----------------------------------------------------------------

struct SynthCmd {
	CommonOptions common;
	std::string out;
	std::size_t length = 20000;
	SynthProfile profile;
	std::string start = "2024-01-01T00:00:00Z";
};

void register_synth(CLI::App &app, SynthCmd &c) {
	auto *sub = app.add_subcommand("synth", "Generate a synthetic seasonal traffic series");
	add_common(sub, c.common);
	sub->add_option("--out", c.out, "Output CSV path")->required();
	sub->add_option("--length", c.length, "Number of 5-minute samples")->check(CLI::PositiveNumber);
	sub->add_option("--base-bps", c.profile.base_bps, "Mean level in bits per second");
	sub->add_option("--daily-amp", c.profile.daily_amp, "Daily sinusoid amplitude");
	sub->add_option("--weekly-amp", c.profile.weekly_amp, "Weekly sinusoid amplitude");
	sub->add_option("--trend-per-day", c.profile.trend_per_day, "Linear trend in bps per day");
	sub->add_option("--noise-std", c.profile.noise_std, "Gaussian noise standard deviation");
	sub->add_option("--start", c.start, "First timestamp (ISO-8601 UTC or epoch seconds)");
	sub->callback([&app, sub, &c]() {
		(void)app;
		SynthProfile profile = c.profile;
		profile.seed = c.common.seed;
		const TimeSeries series = synth(profile, c.length, parse_timestamp(c.start));
		ensure_parent(c.out);
		save_csv(series, c.out);
		write_resolved_config(*sub, sibling(c.out, ".config.txt"));
	});
}

// ---- stats ----------------------------------------------------------------

struct StatsCmd {
	CommonOptions common;
	std::string data;
	std::string out;
};

void register_stats(CLI::App &app, StatsCmd &c, std::ostream &os) {
	auto *sub = app.add_subcommand("stats", "Summary statistics of a traffic series");
	add_common(sub, c.common);
	sub->add_option("--data", c.data, "Input CSV (timestamp,bps)")->required();
	sub->add_option("--out", c.out, "Directory for stats.csv");
	sub->callback([sub, &c, &os]() {
		const LoadResult loaded = load_csv(c.data);
		const SummaryStats s = summary_stats(loaded.series.values);
		const std::string skew = s.skewness ? format_long(*s.skewness) : "undefined";
		os << "length=" << loaded.series.size() << "\nmean=" << format_long(s.mean) << "\nstd=" << format_long(s.std)
		   << "\nvar=" << format_long(s.var) << "\nskewness=" << skew << '\n';
		if (loaded.interpolated > 0) {
			os << "warning: filled " << loaded.interpolated << " missing samples by linear interpolation\n";
		}
		if (!c.out.empty()) {
			ensure_dir(c.out);
			std::ofstream f(fs::path(c.out) / "stats.csv");
			f << "length,mean,std,var,skewness\n"
			  << loaded.series.size() << ',' << format_long(s.mean) << ',' << format_long(s.std) << ','
			  << format_long(s.var) << ',' << skew << '\n';
			if (!f) {
				throw DataError("cannot write stats.csv in " + c.out);
			}
			write_resolved_config(*sub, fs::path(c.out) / "run_config.txt");
		}
	});
}

// ---- augment --------------------------------------------------------------

struct AugmentCmd {
	CommonOptions common;
	AugmentOptions aug;
	std::string data;
	std::string out;
};

void register_augment(CLI::App &app, AugmentCmd &c, std::ostream &os) {
	auto *sub = app.add_subcommand("augment", "Write wavelet-perturbed variants of a series");
	add_common(sub, c.common);
	add_augment(sub, c.aug, "--copies", 3);
	sub->add_option("--data", c.data, "Input CSV (timestamp,bps)")->required();
	sub->add_option("--out", c.out, "Output directory")->required();
	sub->callback([sub, &c, &os]() {
		apply_jobs(c.common);
		if (c.aug.copies < 1) {
			throw ConfigError("--copies must be at least 1");
		}
		const LoadResult loaded = load_csv(c.data);
		const AugmentedCorpus corpus = expand_dataset(loaded.series, to_augment_config(c.aug, c.common.seed), c.aug.copies);
		ensure_dir(c.out);
		std::ofstream prov(fs::path(c.out) / "provenance.csv");
		prov << "member,kind,seed,factor_lo,factor_hi,clamped\n";
		for (std::size_t k = 0; k < corpus.series.size(); ++k) {
			const auto &member = corpus.series[k];
			std::size_t clamped = 0;
			TimeSeries ts{corpus.start, corpus.interval, member.values};
			for (double &v : ts.values) {
				if (v < 0.0) {
					v = 0.0;
					++clamped;
				}
			}
			const std::string name = member.original ? "original.csv" : "aug_" + std::to_string(k) + ".csv";
			save_csv(ts, fs::path(c.out) / name);
			prov << name << ',' << (member.original ? "original" : "augmented") << ',' << member.seed << ','
			     << format_number(member.factor_lo) << ',' << format_number(member.factor_hi) << ',' << clamped << '\n';
			if (clamped > 0) {
				os << "warning: " << name << ": clamped " << clamped << " negative values to 0\n";
			}
		}
		if (!prov) {
			throw DataError("cannot write provenance.csv in " + c.out);
		}
		write_resolved_config(*sub, fs::path(c.out) / "run_config.txt");
		os << "wrote " << corpus.series.size() << " series to " << c.out << '\n';
	});
}

// ---- train ----------------------------------------------------------------

struct TrainCmd {
	CommonOptions common;
	AugmentOptions aug;
	std::string data;
	std::string out;
	ModelConfig model;
	TrainConfig train;
	double split = 0.8;
	double huber_delta = 1.0;
	bool no_shuffle = false;
};

void register_train(CLI::App &app, TrainCmd &c, std::ostream &os) {
	auto *sub = app.add_subcommand("train", "Train an encoder-decoder forecaster");
	add_common(sub, c.common);
	sub->add_option("--data", c.data, "Input CSV (timestamp,bps)")->required();
	sub->add_option("--out", c.out, "Output model file")->required();
	sub->add_option("--n-past", c.model.n_past, "Input window length")->check(CLI::PositiveNumber);
	sub->add_option("--n-future", c.model.n_future, "Forecast horizon")->check(CLI::PositiveNumber);
	sub->add_option("--hidden", c.model.hidden, "LSTM hidden units")->check(CLI::PositiveNumber);
	sub->add_flag("--attention", c.model.attention, "Use the dot-product attention decoder");
	sub->add_option("--epochs", c.train.epochs, "Training epochs")->check(CLI::PositiveNumber);
	sub->add_option("--batch", c.train.batch, "Minibatch size")->check(CLI::PositiveNumber);
	sub->add_option("--lr", c.train.lr, "Adam learning rate");
	sub->add_option("--split", c.split, "Chronological train fraction");
	sub->add_option("--huber-delta", c.huber_delta, "Huber loss threshold");
	sub->add_flag("--no-shuffle", c.no_shuffle, "Visit windows in chronological order");
	add_augment(sub, c.aug, "--augment-copies", 0);
	sub->callback([sub, &c, &os]() {
		apply_jobs(c.common);
		c.model.validate();
		const Prepared d = prepare(c.data, c.split, c.model.n_past, c.model.n_future, &c.aug, c.common.seed, nullptr);
		report_interpolation(d, os);
		Rng rng(c.common.seed);
		Seq2SeqModel model = init(c.model, rng);
		TrainConfig tc = c.train;
		tc.seed = c.common.seed;
		tc.shuffle = !c.no_shuffle;
		const auto history = train(model, d.train_windows, tc, HuberConfig{c.huber_delta});
		ensure_parent(c.out);
		save_model({model, d.scaler, {c.common.seed, static_cast<std::uint32_t>(tc.epochs), false, 0}}, c.out);
		write_history({{"train", history}}, sibling(c.out, ".loss.csv"));
		write_resolved_config(*sub, sibling(c.out, ".config.txt"));
		const Matrix pred = kernels::predict_parallel(model, d.test_windows);
		const MetricsTable table = per_step_table(pred, d.test_windows.target_matrix());
		os << "trained " << d.train_windows.size() << " windows, final loss " << format_number(history.back())
		   << ", test average WAPE " << format_number(table.average.wape) << "%\n";
	});
}

// ---- transfer -------------------------------------------------------------

struct TransferCmd {
	CommonOptions common;
	AugmentOptions aug;
	std::string source;
	std::string data;
	std::string out;
	TransferConfig transfer;
	double split = 0.8;
	double huber_delta = 1.0;
	std::size_t batch = 32;
	std::optional<std::size_t> n_past, n_future, hidden;
};

void register_transfer(CLI::App &app, TransferCmd &c, std::ostream &os) {
	auto *sub = app.add_subcommand("transfer", "Adapt a source model to a target series");
	add_common(sub, c.common);
	sub->add_option("--source-model", c.source, "Source model file")->required();
	sub->add_option("--data", c.data, "Target CSV (timestamp,bps)")->required();
	sub->add_option("--out", c.out, "Output model file")->required();
	sub->add_option("--phase1-lr", c.transfer.phase1.lr, "Learning rate while only the new output layer trains");
	sub->add_option("--phase2-lr", c.transfer.phase2.lr, "Learning rate for full fine-tuning");
	sub->add_option("--phase1-epochs", c.transfer.phase1.epochs, "Epochs with the body frozen");
	sub->add_option("--phase2-epochs", c.transfer.phase2.epochs, "Fine-tuning epochs (0 skips the phase)");
	sub->add_option("--batch", c.batch, "Minibatch size")->check(CLI::PositiveNumber);
	sub->add_option("--split", c.split, "Chronological train fraction");
	sub->add_option("--huber-delta", c.huber_delta, "Huber loss threshold");
	sub->add_option("--n-past", c.n_past, "Expected input window (must match the source model)");
	sub->add_option("--n-future", c.n_future, "Expected horizon (must match the source model)");
	sub->add_option("--hidden", c.hidden, "Expected hidden size (must match the source model)");
	add_augment(sub, c.aug, "--augment-copies", 0);
	sub->callback([sub, &c, &os]() {
		apply_jobs(c.common);
		const auto bytes = read_file_bytes(c.source);
		ModelBundle source;
		try {
			source = decode_model(bytes);
		} catch (const DataError &e) {
			throw DataError(c.source + ": " + e.what());
		}
		ModelConfig target = source.model.config;
		if (c.n_past) {
			target.n_past = *c.n_past;
		}
		if (c.n_future) {
			target.n_future = *c.n_future;
		}
		if (c.hidden) {
			target.hidden = *c.hidden;
		}
		if (const auto diff = source.model.config.diff(target); !diff.empty()) {
			throw ConfigError("target configuration contradicts the source model (" + diff + ")");
		}
		const Prepared d =
		    prepare(c.data, c.split, target.n_past, target.n_future, &c.aug, c.common.seed, nullptr);
		report_interpolation(d, os);
		TransferConfig tc = c.transfer;
		tc.seed = c.common.seed;
		for (TrainConfig *phase : {&tc.phase1, &tc.phase2}) {
			phase->batch = c.batch;
			phase->seed = c.common.seed;
		}
		const TransferResult result = transfer(source.model, target, d.train_windows, tc, HuberConfig{c.huber_delta});
		ensure_parent(c.out);
		const auto epochs = static_cast<std::uint32_t>(tc.phase1.epochs + tc.phase2.epochs);
		save_model({result.model, d.scaler, {c.common.seed, epochs, true, fnv1a64(bytes)}}, c.out);
		write_history({{"phase1", result.phase1_history}, {"phase2", result.phase2_history}},
		              sibling(c.out, ".loss.csv"));
		write_resolved_config(*sub, sibling(c.out, ".config.txt"));
		const Matrix pred = kernels::predict_parallel(result.model, d.test_windows);
		const MetricsTable table = per_step_table(pred, d.test_windows.target_matrix());
		os << "transferred onto " << d.train_windows.size() << " windows, test average WAPE "
		   << format_number(table.average.wape) << "%\n";
	});
}

// ---- evaluate -------------------------------------------------------------

struct EvaluateCmd {
	CommonOptions common;
	std::vector<std::string> models;
	std::string data;
	std::string out;
	std::vector<std::size_t> horizons{6, 9, 12};
	double split = 0.8;
	std::string scaler = "model";
};

struct EvalResult {
	std::string label;
	std::size_t horizon = 0;
	MetricsTable scaled, raw, persistence;
};

MetricsTable leading_steps(const Matrix &pred, const Matrix &target, std::size_t steps, bool raw,
                           const ScalerParams &scaler) {
	Matrix p(pred.rows(), steps), o(pred.rows(), steps);
	for (std::size_t k = 0; k < pred.rows(); ++k) {
		for (std::size_t j = 0; j < steps; ++j) {
			p(k, j) = pred(k, j);
			o(k, j) = target(k, j);
		}
	}
	if (raw) {
		p = Matrix(p.rows(), p.cols(), inverse_scale(p.data(), scaler));
		o = Matrix(o.rows(), o.cols(), inverse_scale(o.data(), scaler));
	}
	return per_step_table(p, o);
}

void register_evaluate(CLI::App &app, EvaluateCmd &c, std::ostream &os) {
	auto *sub = app.add_subcommand("evaluate", "Per-step MAE/RMSE/WAPE tables on the test split");
	add_common(sub, c.common);
	auto *horizons_opt = sub->add_option("--horizons", c.horizons, "Horizons to tabulate")
	                         ->delimiter(',')
	                         ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
	sub->add_option("--model", c.models, "Model file (repeatable)")
	    ->required()
	    ->delimiter(',')
	    ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
	sub->add_option("--data", c.data, "Input CSV (timestamp,bps)")->required();
	sub->add_option("--out", c.out, "Output directory")->required();
	sub->add_option("--split", c.split, "Chronological train fraction");
	sub->add_option("--scaler", c.scaler, "Scaler source: the model's stored scaler or a refit on the train split")
	    ->check(CLI::IsMember({"model", "refit"}));
	sub->callback([sub, horizons_opt, &c, &os]() {
		apply_jobs(c.common);
		const bool explicit_horizons = horizons_opt->count() > 0;
		const LoadResult loaded = load_csv(c.data);
		if (loaded.interpolated > 0) {
			os << "warning: filled " << loaded.interpolated << " missing samples by linear interpolation\n";
		}

		std::vector<ModelBundle> bundles;
		std::vector<std::string> labels;
		for (const auto &path : c.models) {
			bundles.push_back(load_model(path));
			labels.push_back(fs::path(path).stem().string());
			const auto n_future = bundles.back().model.config.n_future;
			for (std::size_t h : c.horizons) {
				if (h == 0 || (explicit_horizons && h > n_future)) {
					throw ConfigError("horizon " + std::to_string(h) + " is not available from " + path +
					                  " (n_future = " + std::to_string(n_future) + ")");
				}
			}
		}

		// Models are independent; results land in fixed slots so output order never depends on scheduling.
		std::vector<std::vector<EvalResult>> results(bundles.size());
		std::vector<std::exception_ptr> errors(bundles.size());
		const auto n = static_cast<std::ptrdiff_t>(bundles.size());
#pragma omp parallel for schedule(dynamic)
		for (std::ptrdiff_t i = 0; i < n; ++i) {
			const auto m = static_cast<std::size_t>(i);
			try {
				const auto &bundle = bundles[m];
				const auto &cfg = bundle.model.config;
				auto [train_part, test_part] = split(loaded.series, c.split, cfg.n_past + cfg.n_future);
				const ScalerParams scaler = c.scaler == "model" ? bundle.scaler : fit_scaler(train_part.values);
				const WindowedDataset test = make_windows(scale(test_part.values, scaler), cfg.n_past, cfg.n_future);
				const Matrix pred = kernels::predict_serial(bundle.model, test);
				const Matrix target = test.target_matrix();
				Vector inputs;
				for (std::size_t k = 0; k < test.size(); ++k) {
					inputs.insert(inputs.end(), test.input(k).begin(), test.input(k).end());
				}
				const Matrix naive = persistence_forecast(inputs, cfg.n_past, cfg.n_future);
				for (std::size_t h : c.horizons) {
					if (h > cfg.n_future) {
						continue;
					}
					results[m].push_back({labels[m], h, leading_steps(pred, target, h, false, scaler),
					                      leading_steps(pred, target, h, true, scaler),
					                      leading_steps(naive, target, h, false, scaler)});
				}
			} catch (...) {
				errors[m] = std::current_exception();
			}
		}
		for (const auto &e : errors) {
			if (e) {
				std::rethrow_exception(e);
			}
		}

		ensure_dir(c.out);
		const fs::path dir(c.out);
		std::ofstream acc(dir / "accuracy.csv");
		acc << "model,horizon,average_wape,accuracy\n";
		for (const auto &per_model : results) {
			for (const auto &r : per_model) {
				const std::string suffix = r.label + "_h" + std::to_string(r.horizon);
				write_metrics_csv(r.scaled, dir / ("metrics_" + suffix + ".csv"));
				write_metrics_csv(r.raw, dir / ("metrics_raw_" + suffix + ".csv"));
				write_metrics_csv(r.persistence, dir / ("metrics_persistence_" + suffix + ".csv"));
				acc << r.label << ',' << r.horizon << ',' << format_number(r.scaled.average.wape) << ','
				    << format_number(accuracy(r.scaled.average.wape)) << '\n';
				os << r.label << " h=" << r.horizon << ": MAE " << format_number(r.scaled.average.mae) << ", RMSE "
				   << format_number(r.scaled.average.rmse) << ", WAPE " << format_number(r.scaled.average.wape)
				   << "% (raw-scale WAPE " << format_number(r.raw.average.wape) << "%, persistence "
				   << format_number(r.persistence.average.wape) << "%)\n";
			}
		}
		if (!acc) {
			throw DataError("cannot write accuracy.csv in " + c.out);
		}
		write_resolved_config(*sub, dir / "run_config.txt");
	});
}

// ---- report ---------------------------------------------------------------

struct ReportCmd {
	CommonOptions common;
	std::vector<std::string> before;
	std::vector<std::string> after;
	std::string out;
};

void register_report(CLI::App &app, ReportCmd &c, std::ostream &os) {
	auto *sub = app.add_subcommand("report", "Before/after WAPE improvements with IQR and outlier summary");
	add_common(sub, c.common);
	sub->add_option("--before", c.before, "Metrics CSV of the baseline run (repeatable)")
	    ->required()
	    ->delimiter(',')
	    ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
	sub->add_option("--after", c.after, "Metrics CSV of the improved run, paired with --before")
	    ->required()
	    ->delimiter(',')
	    ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
	sub->add_option("--out", c.out, "Output directory")->required();
	sub->callback([sub, &c, &os]() {
		if (c.before.size() != c.after.size()) {
			throw ConfigError("--before and --after must be given the same number of times");
		}
		ensure_dir(c.out);
		for (std::size_t i = 0; i < c.before.size(); ++i) {
			const MetricsTable before = read_metrics_csv(c.before[i]);
			const MetricsTable after = read_metrics_csv(c.after[i]);
			const ImprovementStats stats = improvements(before, after);
			const std::string h = "h" + std::to_string(stats.horizon);
			const std::vector<LabelledTable> tables{{"before_" + h, before}, {"after_" + h, after}};
			emit_report(tables, &stats, c.out);
			os << h << ": average WAPE " << format_number(before.average.wape) << "% -> "
			   << format_number(after.average.wape) << "% (improvement " << format_number(stats.average_delta)
			   << " pp, IQR " << format_number(stats.quartiles.iqr) << ", " << stats.outliers.size()
			   << " outlier steps)\n";
		}
		write_resolved_config(*sub, fs::path(c.out) / "run_config.txt");
	});
}

// Pulls --config out of the argument list and splices the file's settings in
// directly after the subcommand name, ahead of the explicit flags.
std::vector<std::string> splice_config(const std::vector<std::string> &args) {
	if (args.empty()) {
		return args;
	}
	std::vector<std::string> rest;
	std::vector<std::string> from_file;
	for (std::size_t i = 1; i < args.size(); ++i) {
		if (args[i] == "--config" && i + 1 < args.size()) {
			auto extra = config_file_args(args[++i]);
			from_file.insert(from_file.end(), extra.begin(), extra.end());
		} else if (args[i].rfind("--config=", 0) == 0) {
			auto extra = config_file_args(args[i].substr(9));
			from_file.insert(from_file.end(), extra.begin(), extra.end());
		} else {
			rest.push_back(args[i]);
		}
	}
	std::vector<std::string> out{args[0]};
	out.insert(out.end(), from_file.begin(), from_file.end());
	out.insert(out.end(), rest.begin(), rest.end());
	return out;
}

} // namespace

std::vector<std::string> config_file_args(const fs::path &path) {
	std::ifstream in(path);
	if (!in) {
		throw ConfigError("cannot open config file " + path.string());
	}
	std::vector<std::string> out;
	std::string line;
	std::size_t line_no = 0;
	while (std::getline(in, line)) {
		++line_no;
		if (const auto hash = line.find('#'); hash != std::string::npos) {
			line.erase(hash);
		}
		line = trim(line);
		if (line.empty() || line.front() == '[') {
			continue;
		}
		const auto eq = line.find('=');
		if (eq == std::string::npos) {
			throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected key=value");
		}
		const std::string key = trim(line.substr(0, eq));
		std::string value = trim(line.substr(eq + 1));
		if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front()) {
			value = value.substr(1, value.size() - 2);
		}
		out.push_back("--" + key + "=" + value);
	}
	return out;
}

int run(const std::vector<std::string> &raw_args, std::ostream &out, std::ostream &err) {
	CLI::App app{"Traffic forecasting toolkit: seq2seq LSTM forecasting, wavelet augmentation and transfer learning",
	             "tfl"};
	app.require_subcommand(1);
	app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

	SynthCmd synth_cmd;
	StatsCmd stats_cmd;
	AugmentCmd augment_cmd;
	TrainCmd train_cmd;
	TransferCmd transfer_cmd;
	EvaluateCmd evaluate_cmd;
	ReportCmd report_cmd;
	register_synth(app, synth_cmd);
	register_stats(app, stats_cmd, out);
	register_augment(app, augment_cmd, out);
	register_train(app, train_cmd, out);
	register_transfer(app, transfer_cmd, out);
	register_evaluate(app, evaluate_cmd, out);
	register_report(app, report_cmd, out);

	try {
		const std::vector<std::string> args = splice_config(raw_args);
		std::vector<const char *> argv{"tfl"};
		for (const auto &a : args) {
			argv.push_back(a.c_str());
		}
		app.parse(static_cast<int>(argv.size()), argv.data());
		return kOk;
	} catch (const CLI::ParseError &e) {
		const int code = app.exit(e, out, err);
		return code == 0 ? kOk : kUsage;
	} catch (const ConfigError &e) {
		err << "error: " << e.what() << '\n';
		return kUsage;
	} catch (const NumericError &e) {
		err << "numeric failure: " << e.what() << '\n';
		return kNumericFailure;
	} catch (const std::exception &e) {
		err << "error: " << e.what() << '\n';
		return kDataError;
	}
}

} // namespace tfl::cli
