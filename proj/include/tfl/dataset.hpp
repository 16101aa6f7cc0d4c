#pragma once

#include "tfl/numeric.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace tfl {

/// Evenly spaced univariate traffic rates in bits per second.
struct TimeSeries {
	std::int64_t start = 0;     // epoch seconds of values[0]
	std::int64_t interval = 300; // seconds between samples
	Vector values;

	std::size_t size() const { return values.size(); }
	std::int64_t timestamp(std::size_t k) const { return start + static_cast<std::int64_t>(k) * interval; }
	/// Throws DataError unless interval > 0 and every value is finite and >= 0.
	void validate() const;
};

struct LoadResult {
	TimeSeries series;
	std::size_t interpolated = 0; // number of missing slots filled
};

/// Reads `timestamp,bps` CSV. Timestamps are epoch seconds or ISO-8601 UTC
/// (YYYY-MM-DDTHH:MM:SS with optional trailing Z). Missing slots are filled
/// by linear interpolation and counted.
LoadResult load_csv(const std::filesystem::path &path, std::int64_t interval = 300);
void save_csv(const TimeSeries &series, const std::filesystem::path &path);

/// Parses one timestamp field; throws DataError on malformed input.
std::int64_t parse_timestamp(const std::string &text);
std::string format_timestamp(std::int64_t epoch_seconds);

inline constexpr double kLinkCapacityBps = 40e9;

struct BpsConversion {
	TimeSeries series;
	std::vector<std::size_t> over_capacity; // indices of rates above kLinkCapacityBps
};

/// Octet-counter readings to bits per second: (next - prev) * 8 / interval.
/// A counter that moved backwards is taken to have wrapped once at 2^64.
BpsConversion counters_to_bps(std::span<const std::uint64_t> samples, std::int64_t interval = 300,
                              std::int64_t start = 0);

struct SummaryStats {
	double mean = 0.0;
	double std = 0.0;
	double var = 0.0;
	std::optional<double> skewness; // empty when std == 0
};

/// Population moments and Fisher skewness m3 / m2^{3/2}.
SummaryStats summary_stats(std::span<const double> values);

struct ScalerParams {
	double min = 0.0;
	double max = 1.0;
	friend bool operator==(const ScalerParams &, const ScalerParams &) = default;
};

ScalerParams fit_scaler(std::span<const double> train);
Vector scale(std::span<const double> x, const ScalerParams &p);
Vector inverse_scale(std::span<const double> x, const ScalerParams &p);

/// Supervised (n_past -> n_future) windows, stored row-major.
class WindowedDataset {
public:
	WindowedDataset() = default;
	WindowedDataset(std::size_t n_past, std::size_t n_future) : n_past_(n_past), n_future_(n_future) {}

	std::size_t size() const { return n_past_ == 0 ? 0 : inputs_.size() / n_past_; }
	bool empty() const { return size() == 0; }
	std::size_t n_past() const { return n_past_; }
	std::size_t n_future() const { return n_future_; }

	std::span<const double> input(std::size_t k) const {
		return std::span<const double>(inputs_).subspan(k * n_past_, n_past_);
	}
	std::span<const double> target(std::size_t k) const {
		return std::span<const double>(targets_).subspan(k * n_future_, n_future_);
	}

	void push_back(std::span<const double> input, std::span<const double> target);
	/// Appends every window of other; window geometry must match.
	void append(const WindowedDataset &other);

	/// Targets as a (windows x n_future) matrix.
	Matrix target_matrix() const;

private:
	std::size_t n_past_ = 0;
	std::size_t n_future_ = 0;
	Vector inputs_;
	Vector targets_;
};

/// Sliding windows with stride 1: length - n_past - n_future + 1 of them.
WindowedDataset make_windows(std::span<const double> series, std::size_t n_past, std::size_t n_future);

/// Chronological split at floor(ratio * length). Both sides must hold at
/// least min_side points.
std::pair<TimeSeries, TimeSeries> split(const TimeSeries &series, double ratio, std::size_t min_side = 1);

struct SynthProfile {
	double base_bps = 5e8;
	double daily_amp = 1.5e8;
	double weekly_amp = 5e7;
	double trend_per_day = 0.0;
	double noise_std = 2e7;
	std::uint64_t seed = 42;
};

inline constexpr std::size_t kSamplesPerDay = 288;
inline constexpr std::size_t kSamplesPerWeek = 2016;

/// base + daily sinusoid + weekly sinusoid + linear trend + Gaussian noise,
/// sampled every 300 s from start. Throws DataError if any value is negative.
TimeSeries synth(const SynthProfile &profile, std::size_t length, std::int64_t start = 0);

} // namespace tfl
