#include "tfl/evaluation.hpp"

#include "tfl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace tfl {

namespace {

void check_pair(std::span<const double> pred, std::span<const double> obs, const char *what) {
	if (pred.size() != obs.size()) {
		throw ShapeError(std::string(what) + ": length mismatch (" + std::to_string(pred.size()) + " vs " +
		                 std::to_string(obs.size()) + ")");
	}
	if (pred.empty()) {
		throw ShapeError(std::string(what) + ": empty input");
	}
}

} // namespace

double mae(std::span<const double> pred, std::span<const double> obs) {
	check_pair(pred, obs, "mae");
	double total = 0.0;
	for (std::size_t i = 0; i < pred.size(); ++i) {
		total += std::abs(pred[i] - obs[i]);
	}
	return total / static_cast<double>(pred.size());
}

double rmse(std::span<const double> pred, std::span<const double> obs) {
	check_pair(pred, obs, "rmse");
	double total = 0.0;
	for (std::size_t i = 0; i < pred.size(); ++i) {
		const double e = pred[i] - obs[i];
		total += e * e;
	}
	return std::sqrt(total / static_cast<double>(pred.size()));
}

double wape(std::span<const double> pred, std::span<const double> obs) {
	check_pair(pred, obs, "wape");
	double err = 0.0, mass = 0.0;
	for (std::size_t i = 0; i < pred.size(); ++i) {
		err += std::abs(pred[i] - obs[i]);
		mass += std::abs(obs[i]);
	}
	if (mass == 0.0) {
		throw DataError("wape is undefined when every observation is zero");
	}
	return err / mass * 100.0;
}

MetricsTable per_step_table(const Matrix &predictions, const Matrix &targets) {
	if (!predictions.same_shape(targets)) {
		throw ShapeError("per_step_table: predictions " + predictions.shape_string() + " vs targets " +
		                 targets.shape_string());
	}
	if (predictions.rows() == 0 || predictions.cols() == 0) {
		throw DataError("per_step_table needs at least one window and one step");
	}
	MetricsTable table;
	table.horizon = predictions.cols();
	Vector p(predictions.rows()), o(predictions.rows());
	for (std::size_t j = 0; j < predictions.cols(); ++j) {
		for (std::size_t k = 0; k < predictions.rows(); ++k) {
			p[k] = predictions(k, j);
			o[k] = targets(k, j);
		}
		StepMetrics row{j + 1, mae(p, o), rmse(p, o), wape(p, o)};
		if (row.rmse < row.mae * (1.0 - 1e-12)) {
			throw NumericError("rmse < mae at step " + std::to_string(j + 1));
		}
		table.per_step.push_back(row);
	}
	const double n = static_cast<double>(table.horizon);
	for (const auto &row : table.per_step) {
		table.average.mae += row.mae;
		table.average.rmse += row.rmse;
		table.average.wape += row.wape;
	}
	table.average.mae /= n;
	table.average.rmse /= n;
	table.average.wape /= n;
	return table;
}

double accuracy(double wape_percent) {
	return std::max(0.0, 100.0 - wape_percent);
}

Quartiles iqr(std::span<const double> values) {
	if (values.size() < 4) {
		throw DataError("iqr needs at least 4 values");
	}
	Vector sorted(values.begin(), values.end());
	std::sort(sorted.begin(), sorted.end());
	auto quantile = [&](double p) {
		const double pos = p * static_cast<double>(sorted.size() - 1);
		const auto lo = static_cast<std::size_t>(std::floor(pos));
		const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
		const double frac = pos - static_cast<double>(lo);
		return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
	};
	Quartiles q{quantile(0.25), quantile(0.75), 0.0};
	q.iqr = q.q3 - q.q1;
	return q;
}

std::vector<Outlier> outliers(std::span<const double> values) {
	const Quartiles q = iqr(values);
	const double lo = q.q1 - 1.5 * q.iqr;
	const double hi = q.q3 + 1.5 * q.iqr;
	std::vector<Outlier> out;
	for (std::size_t i = 0; i < values.size(); ++i) {
		if (values[i] < lo || values[i] > hi) {
			out.push_back({i, values[i]});
		}
	}
	return out;
}

ImprovementStats improvements(const MetricsTable &before, const MetricsTable &after) {
	if (before.horizon != after.horizon || before.per_step.size() != after.per_step.size()) {
		throw ConfigError("improvements: horizon " + std::to_string(before.horizon) + " vs " +
		                  std::to_string(after.horizon));
	}
	ImprovementStats stats;
	stats.horizon = before.horizon;
	for (std::size_t j = 0; j < before.per_step.size(); ++j) {
		stats.deltas.push_back(before.per_step[j].wape - after.per_step[j].wape);
	}
	stats.average_delta = before.average.wape - after.average.wape;
	if (stats.deltas.size() >= 4) {
		stats.quartiles = iqr(stats.deltas);
		stats.outliers = outliers(stats.deltas);
	}
	return stats;
}

Matrix persistence_forecast(std::span<const double> inputs, std::size_t n_past, std::size_t n_future) {
	if (n_past == 0 || inputs.size() % n_past != 0) {
		throw ShapeError("persistence_forecast: inputs are not a whole number of windows");
	}
	const std::size_t windows = inputs.size() / n_past;
	Matrix out(windows, n_future);
	for (std::size_t k = 0; k < windows; ++k) {
		const double last = inputs[(k + 1) * n_past - 1];
		for (std::size_t j = 0; j < n_future; ++j) {
			out(k, j) = last;
		}
	}
	return out;
}

std::string format_number(double value) {
	char buf[64];
	std::snprintf(buf, sizeof buf, "%.6g", value);
	return buf;
}

namespace {

std::ofstream open_for_write(const std::filesystem::path &path) {
	std::ofstream out(path);
	if (!out) {
		throw DataError("cannot write " + path.string());
	}
	return out;
}

void finish(std::ofstream &out, const std::filesystem::path &path) {
	out.flush();
	if (!out) {
		throw DataError("write failed for " + path.string());
	}
}

} // namespace

void write_metrics_csv(const MetricsTable &table, const std::filesystem::path &path) {
	auto out = open_for_write(path);
	out << "step,mae,rmse,wape\n";
	for (const auto &row : table.per_step) {
		out << row.step << ',' << format_number(row.mae) << ',' << format_number(row.rmse) << ','
		    << format_number(row.wape) << '\n';
	}
	out << "average," << format_number(table.average.mae) << ',' << format_number(table.average.rmse) << ','
	    << format_number(table.average.wape) << '\n';
	finish(out, path);
}

MetricsTable read_metrics_csv(const std::filesystem::path &path) {
	std::ifstream in(path);
	if (!in) {
		throw DataError("cannot open " + path.string());
	}
	std::string line;
	if (!std::getline(in, line) || line != "step,mae,rmse,wape") {
		throw DataError(path.string() + ": expected header step,mae,rmse,wape");
	}
	MetricsTable table;
	bool have_average = false;
	std::size_t line_no = 1;
	while (std::getline(in, line)) {
		++line_no;
		if (line.empty()) {
			continue;
		}
		std::istringstream fields(line);
		std::string step, a, b, c;
		if (!std::getline(fields, step, ',') || !std::getline(fields, a, ',') || !std::getline(fields, b, ',') ||
		    !std::getline(fields, c)) {
			throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected 4 fields");
		}
		StepMetrics row;
		try {
			row.mae = std::stod(a);
			row.rmse = std::stod(b);
			row.wape = std::stod(c);
			if (step == "average") {
				row.step = 0;
				table.average = row;
				have_average = true;
			} else {
				row.step = static_cast<std::size_t>(std::stoul(step));
				table.per_step.push_back(row);
			}
		} catch (const std::logic_error &) {
			throw DataError(path.string() + ":" + std::to_string(line_no) + ": unparseable number");
		}
	}
	if (!have_average || table.per_step.empty()) {
		throw DataError(path.string() + ": missing step rows or average row");
	}
	table.horizon = table.per_step.size();
	return table;
}

void write_improvements_csv(const ImprovementStats &stats, const std::filesystem::path &path) {
	auto out = open_for_write(path);
	out << "step,delta_wape_pp\n";
	for (std::size_t j = 0; j < stats.deltas.size(); ++j) {
		out << j + 1 << ',' << format_number(stats.deltas[j]) << '\n';
	}
	out << "average," << format_number(stats.average_delta) << '\n';
	finish(out, path);
}

void write_summary_csv(const ImprovementStats &stats, const std::filesystem::path &path) {
	auto out = open_for_write(path);
	out << "q1,q3,iqr,n_outliers\n";
	out << format_number(stats.quartiles.q1) << ',' << format_number(stats.quartiles.q3) << ','
	    << format_number(stats.quartiles.iqr) << ',' << stats.outliers.size() << '\n';
	finish(out, path);
}

void write_plot_data(std::span<const double> values, const std::string &label, const std::filesystem::path &path) {
	auto out = open_for_write(path);
	out << "# step " << label << '\n';
	for (std::size_t j = 0; j < values.size(); ++j) {
		out << j + 1 << ' ' << format_number(values[j]) << '\n';
	}
	finish(out, path);
}

void emit_report(std::span<const LabelledTable> tables, const ImprovementStats *stats,
                 const std::filesystem::path &dir) {
	std::error_code ec;
	std::filesystem::create_directories(dir, ec);
	if (ec) {
		throw DataError("cannot create report directory " + dir.string() + ": " + ec.message());
	}
	for (const auto &entry : tables) {
		if (entry.table.per_step.empty()) {
			throw DataError("refusing to emit an empty metrics table '" + entry.label + "'");
		}
		write_metrics_csv(entry.table, dir / ("metrics_" + entry.label + ".csv"));
		Vector maes, rmses, wapes;
		for (const auto &row : entry.table.per_step) {
			maes.push_back(row.mae);
			rmses.push_back(row.rmse);
			wapes.push_back(row.wape);
		}
		write_plot_data(maes, "mae", dir / ("plot_" + entry.label + "_mae.dat"));
		write_plot_data(rmses, "rmse", dir / ("plot_" + entry.label + "_rmse.dat"));
		write_plot_data(wapes, "wape", dir / ("plot_" + entry.label + "_wape.dat"));
	}
	if (stats) {
		const std::string suffix = "_h" + std::to_string(stats->horizon);
		write_improvements_csv(*stats, dir / ("improvements" + suffix + ".csv"));
		write_summary_csv(*stats, dir / ("summary" + suffix + ".csv"));
		write_plot_data(stats->deltas, "delta_wape_pp", dir / ("plot_improvements" + suffix + ".dat"));
	}
}

} // namespace tfl
