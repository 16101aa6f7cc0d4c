#include "tfl/dataset.hpp"

#include "tfl/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

namespace tfl {

void TimeSeries::validate() const {
	if (interval <= 0) {
		throw DataError("series interval must be positive, got " + std::to_string(interval));
	}
	for (std::size_t k = 0; k < values.size(); ++k) {
		if (!std::isfinite(values[k]) || values[k] < 0.0) {
			throw DataError("series value at index " + std::to_string(k) + " is negative or non-finite");
		}
	}
}

namespace {

std::string trim(const std::string &s) {
	const auto first = s.find_first_not_of(" \t\r\n");
	if (first == std::string::npos) {
		return {};
	}
	const auto last = s.find_last_not_of(" \t\r\n");
	return s.substr(first, last - first + 1);
}

bool parse_double(const std::string &text, double &out) {
	const std::string t = trim(text);
	if (t.empty()) {
		return false;
	}
	std::size_t used = 0;
	try {
		out = std::stod(t, &used);
	} catch (const std::exception &) {
		return false;
	}
	return used == t.size();
}

} // namespace

std::int64_t parse_timestamp(const std::string &raw) {
	const std::string text = trim(raw);
	if (text.empty()) {
		throw DataError("empty timestamp");
	}
	const bool integral = std::all_of(text.begin() + (text[0] == '-' ? 1 : 0), text.end(),
	                                  [](char c) { return c >= '0' && c <= '9'; });
	if (integral && text != "-") {
		try {
			return std::stoll(text);
		} catch (const std::exception &) {
			throw DataError("timestamp out of range: '" + text + "'");
		}
	}
	int y = 0;
	unsigned mo = 0, d = 0, hh = 0, mm = 0, ss = 0;
	char sep = 0;
	int consumed = 0;
	if (std::sscanf(text.c_str(), "%d-%u-%u%c%u:%u:%u%n", &y, &mo, &d, &sep, &hh, &mm, &ss, &consumed) != 7 ||
	    (sep != 'T' && sep != ' ')) {
		throw DataError("unrecognised timestamp '" + text + "'");
	}
	const std::string rest = text.substr(static_cast<std::size_t>(consumed));
	if (!(rest.empty() || rest == "Z" || rest == "+00:00")) {
		throw DataError("only UTC timestamps are supported: '" + text + "'");
	}
	const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{mo}, std::chrono::day{d}};
	if (!ymd.ok() || hh > 23 || mm > 59 || ss > 60) {
		throw DataError("invalid calendar timestamp '" + text + "'");
	}
	const auto days = std::chrono::sys_days{ymd}.time_since_epoch().count();
	return static_cast<std::int64_t>(days) * 86400 + hh * 3600 + mm * 60 + ss;
}

std::string format_timestamp(std::int64_t epoch_seconds) {
	std::int64_t days = epoch_seconds / 86400;
	std::int64_t secs = epoch_seconds % 86400;
	if (secs < 0) {
		secs += 86400;
		--days;
	}
	const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{days}}};
	char buf[32];
	std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
	              static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<int>(secs / 3600),
	              static_cast<int>(secs / 60 % 60), static_cast<int>(secs % 60));
	return buf;
}

LoadResult load_csv(const std::filesystem::path &path, std::int64_t interval) {
	if (interval <= 0) {
		throw DataError("interval must be positive");
	}
	std::ifstream in(path);
	if (!in) {
		throw DataError("cannot open " + path.string());
	}
	LoadResult result;
	result.series.interval = interval;
	auto &values = result.series.values;
	std::string line;
	std::size_t line_no = 0;
	std::int64_t prev_ts = 0;
	bool have_prev = false;
	while (std::getline(in, line)) {
		++line_no;
		const std::string t = trim(line);
		if (t.empty()) {
			continue;
		}
		if (!have_prev && values.empty() && t.rfind("timestamp", 0) == 0) {
			continue;
		}
		const auto comma = t.find(',');
		if (comma == std::string::npos) {
			throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected 'timestamp,bps'");
		}
		std::int64_t ts = 0;
		try {
			ts = parse_timestamp(t.substr(0, comma));
		} catch (const DataError &e) {
			throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
		}
		double value = 0.0;
		if (!parse_double(t.substr(comma + 1), value) || !std::isfinite(value)) {
			throw DataError(path.string() + ":" + std::to_string(line_no) + ": unparseable value");
		}
		if (value < 0.0) {
			throw DataError(path.string() + ":" + std::to_string(line_no) + ": negative traffic value");
		}
		if (!have_prev) {
			result.series.start = ts;
		} else {
			const std::int64_t delta = ts - prev_ts;
			if (delta <= 0) {
				throw DataError(path.string() + ":" + std::to_string(line_no) + ": timestamps are not increasing");
			}
			if (delta % interval != 0) {
				throw DataError(path.string() + ":" + std::to_string(line_no) + ": timestamp is off the " +
				                std::to_string(interval) + " s grid");
			}
			const std::int64_t slots = delta / interval;
			const double from = values.back();
			for (std::int64_t s = 1; s < slots; ++s) {
				values.push_back(from + (value - from) * static_cast<double>(s) / static_cast<double>(slots));
				++result.interpolated;
			}
		}
		values.push_back(value);
		prev_ts = ts;
		have_prev = true;
	}
	if (values.empty()) {
		throw DataError(path.string() + ": no data rows");
	}
	return result;
}

void save_csv(const TimeSeries &series, const std::filesystem::path &path) {
	std::ofstream out(path);
	if (!out) {
		throw DataError("cannot write " + path.string());
	}
	out << "timestamp,bps\n";
	char buf[64];
	for (std::size_t k = 0; k < series.size(); ++k) {
		std::snprintf(buf, sizeof buf, "%.17g", series.values[k]);
		out << format_timestamp(series.timestamp(k)) << ',' << buf << '\n';
	}
	if (!out) {
		throw DataError("write failed for " + path.string());
	}
}

BpsConversion counters_to_bps(std::span<const std::uint64_t> samples, std::int64_t interval, std::int64_t start) {
	if (samples.size() < 2) {
		throw DataError("counters_to_bps needs at least 2 samples");
	}
	if (interval <= 0) {
		throw DataError("interval must be positive");
	}
	BpsConversion out;
	out.series.start = start;
	out.series.interval = interval;
	out.series.values.reserve(samples.size() - 1);
	for (std::size_t k = 0; k + 1 < samples.size(); ++k) {
		// Unsigned subtraction is exactly the single-wrap rule (delta + 2^64).
		const std::uint64_t delta = samples[k + 1] - samples[k];
		const double bps = static_cast<double>(delta) * 8.0 / static_cast<double>(interval);
		if (bps > kLinkCapacityBps) {
			out.over_capacity.push_back(k);
		}
		out.series.values.push_back(bps);
	}
	return out;
}

SummaryStats summary_stats(std::span<const double> values) {
	if (values.size() < 2) {
		throw DataError("summary statistics need at least 2 values");
	}
	const double n = static_cast<double>(values.size());
	double mean = 0.0;
	for (double v : values) {
		mean += v;
	}
	mean /= n;
	double m2 = 0.0, m3 = 0.0;
	for (double v : values) {
		const double d = v - mean;
		m2 += d * d;
		m3 += d * d * d;
	}
	m2 /= n;
	m3 /= n;
	SummaryStats s;
	s.mean = mean;
	s.var = m2;
	s.std = std::sqrt(m2);
	if (s.std > 0.0) {
		s.skewness = m3 / std::pow(m2, 1.5);
	}
	return s;
}

ScalerParams fit_scaler(std::span<const double> train) {
	if (train.empty()) {
		throw DataError("cannot fit a scaler on an empty series");
	}
	const auto [lo, hi] = std::minmax_element(train.begin(), train.end());
	if (!(*hi > *lo)) {
		throw DataError("cannot fit a scaler on a constant series");
	}
	return ScalerParams{*lo, *hi};
}

Vector scale(std::span<const double> x, const ScalerParams &p) {
	const double range = p.max - p.min;
	Vector out(x.size());
	for (std::size_t i = 0; i < x.size(); ++i) {
		out[i] = (x[i] - p.min) / range;
	}
	return out;
}

Vector inverse_scale(std::span<const double> x, const ScalerParams &p) {
	const double range = p.max - p.min;
	Vector out(x.size());
	for (std::size_t i = 0; i < x.size(); ++i) {
		out[i] = x[i] * range + p.min;
	}
	return out;
}

void WindowedDataset::push_back(std::span<const double> input, std::span<const double> target) {
	if (input.size() != n_past_ || target.size() != n_future_) {
		throw ShapeError("window shape does not match dataset geometry");
	}
	inputs_.insert(inputs_.end(), input.begin(), input.end());
	targets_.insert(targets_.end(), target.begin(), target.end());
}

void WindowedDataset::append(const WindowedDataset &other) {
	if (other.n_past_ != n_past_ || other.n_future_ != n_future_) {
		throw ShapeError("cannot append windows with different geometry");
	}
	inputs_.insert(inputs_.end(), other.inputs_.begin(), other.inputs_.end());
	targets_.insert(targets_.end(), other.targets_.begin(), other.targets_.end());
}

Matrix WindowedDataset::target_matrix() const {
	return Matrix(size(), n_future_, targets_);
}

WindowedDataset make_windows(std::span<const double> series, std::size_t n_past, std::size_t n_future) {
	if (n_past < 1 || n_future < 1) {
		throw ConfigError("n_past and n_future must be at least 1");
	}
	if (series.size() < n_past + n_future) {
		throw DataError("series of length " + std::to_string(series.size()) + " is too short: windowing needs at least " +
		                std::to_string(n_past + n_future) + " points");
	}
	WindowedDataset ds(n_past, n_future);
	const std::size_t count = series.size() - n_past - n_future + 1;
	for (std::size_t k = 0; k < count; ++k) {
		ds.push_back(series.subspan(k, n_past), series.subspan(k + n_past, n_future));
	}
	return ds;
}

std::pair<TimeSeries, TimeSeries> split(const TimeSeries &series, double ratio, std::size_t min_side) {
	if (!(ratio > 0.0 && ratio < 1.0)) {
		throw ConfigError("split ratio must lie in (0, 1)");
	}
	const auto cut = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(series.size())));
	if (cut < min_side || series.size() - cut < min_side) {
		throw DataError("split at " + std::to_string(cut) + " of " + std::to_string(series.size()) +
		                " leaves a side shorter than " + std::to_string(min_side) + " points");
	}
	TimeSeries train{series.start, series.interval, Vector(series.values.begin(), series.values.begin() + cut)};
	TimeSeries test{series.timestamp(cut), series.interval, Vector(series.values.begin() + cut, series.values.end())};
	return {std::move(train), std::move(test)};
}

TimeSeries synth(const SynthProfile &profile, std::size_t length, std::int64_t start) {
	if (length < 1) {
		throw DataError("synthetic series length must be at least 1");
	}
	Rng rng(profile.seed);
	TimeSeries series{start, 300, Vector(length)};
	const double two_pi = 2.0 * std::numbers::pi;
	for (std::size_t k = 0; k < length; ++k) {
		const double t = static_cast<double>(k);
		double v = profile.base_bps;
		v += profile.daily_amp * std::sin(two_pi * t / static_cast<double>(kSamplesPerDay));
		v += profile.weekly_amp * std::sin(two_pi * t / static_cast<double>(kSamplesPerWeek));
		v += profile.trend_per_day * t / static_cast<double>(kSamplesPerDay);
		if (profile.noise_std > 0.0) {
			v += profile.noise_std * rng.normal();
		}
		if (v < 0.0) {
			throw DataError("synthetic profile produces a negative value at index " + std::to_string(k));
		}
		series.values[k] = v;
	}
	return series;
}

} // namespace tfl
