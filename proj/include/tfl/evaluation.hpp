#pragma once

#include "tfl/numeric.hpp"

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace tfl {

double mae(std::span<const double> pred, std::span<const double> obs);
double rmse(std::span<const double> pred, std::span<const double> obs);
/// sum |p - o| / sum |o| * 100. Throws when sum |o| == 0.
double wape(std::span<const double> pred, std::span<const double> obs);

struct StepMetrics {
	std::size_t step = 0; // 1-based; 0 marks the average row
	double mae = 0.0;
	double rmse = 0.0;
	double wape = 0.0; // percent
};

struct MetricsTable {
	std::size_t horizon = 0;
	std::vector<StepMetrics> per_step;
	StepMetrics average;
};

/// Column j aggregates the j-th future step over all windows; the average
/// row is the arithmetic mean of the step rows.
MetricsTable per_step_table(const Matrix &predictions, const Matrix &targets);

/// 100 - wape, floored at 0.
double accuracy(double wape_percent);

struct Quartiles {
	double q1 = 0.0;
	double q3 = 0.0;
	double iqr = 0.0;
};

/// Linear interpolation at position p * (n - 1) of the sorted values.
Quartiles iqr(std::span<const double> values);

struct Outlier {
	std::size_t index = 0;
	double value = 0.0;
};

/// Values outside the Tukey fences [q1 - 1.5 iqr, q3 + 1.5 iqr].
std::vector<Outlier> outliers(std::span<const double> values);

struct ImprovementStats {
	std::size_t horizon = 0;
	std::vector<double> deltas; // before.wape - after.wape per step, percentage points
	double average_delta = 0.0; // before.average.wape - after.average.wape
	Quartiles quartiles;
	std::vector<Outlier> outliers; // Outlier::index is the 0-based step
};

ImprovementStats improvements(const MetricsTable &before, const MetricsTable &after);

/// Persistence forecast: every future step repeats the last input value.
Matrix persistence_forecast(std::span<const double> inputs, std::size_t n_past, std::size_t n_future);

// Report files. Numbers are written with 6 significant digits.

/// step,mae,rmse,wape with one row per step and a final "average" row.
void write_metrics_csv(const MetricsTable &table, const std::filesystem::path &path);
MetricsTable read_metrics_csv(const std::filesystem::path &path);

/// step,delta_wape_pp
void write_improvements_csv(const ImprovementStats &stats, const std::filesystem::path &path);
/// q1,q3,iqr,n_outliers
void write_summary_csv(const ImprovementStats &stats, const std::filesystem::path &path);
/// Whitespace-separated "step value" lines with a leading '#' comment header.
void write_plot_data(std::span<const double> values, const std::string &label, const std::filesystem::path &path);

struct LabelledTable {
	std::string label;
	MetricsTable table;
};

/// Writes metrics_<label>.csv and plot_<label>_{mae,rmse,wape}.dat for every
/// table, and improvements/summary/plot files when stats are given.
void emit_report(std::span<const LabelledTable> tables, const ImprovementStats *stats,
                 const std::filesystem::path &dir);

/// Formats with 6 significant digits, the convention of every report file.
std::string format_number(double value);

} // namespace tfl
