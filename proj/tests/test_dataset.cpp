#include "support.hpp"

#include "tfl/dataset.hpp"
#include "tfl/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>
#include <limits>

using namespace tfl;
using tfl::test::Gen;
using tfl::test::TempDir;
using tfl::test::write_text;

namespace {

std::string error_of(const std::function<void()> &fn) {
	try {
		fn();
	} catch (const std::exception &e) {
		return e.what();
	}
	return {};
}

} // namespace

TEST_CASE("timestamps") {
	CHECK(parse_timestamp("2024-01-01T00:00:00Z") == 1704067200);
	CHECK(parse_timestamp("2024-01-01T00:00:00") == 1704067200);
	CHECK(parse_timestamp("1704067200") == 1704067200);
	CHECK(parse_timestamp("1970-01-01T00:00:00Z") == 0);
	CHECK(parse_timestamp("2000-02-29T12:34:56Z") == 951827696);
	CHECK(format_timestamp(1704067500) == "2024-01-01T00:05:00Z");
	Gen gen(51);
	for (int i = 0; i < 200; ++i) {
		const auto t = static_cast<std::int64_t>(gen.index(0, 4102444800ULL));
		CHECK(parse_timestamp(format_timestamp(t)) == t);
	}
	CHECK_THROWS_AS(parse_timestamp("yesterday"), DataError);
	CHECK_THROWS_AS(parse_timestamp("2024-13-01T00:00:00Z"), DataError);
	CHECK_THROWS_AS(parse_timestamp("2024-01-01T00:00:00+02:00"), DataError);
	CHECK_THROWS_AS(parse_timestamp(""), DataError);
}

TEST_CASE("csv loading") {
	TempDir dir;
	write_text(dir / "ok.csv", "timestamp,bps\n2024-01-01T00:00:00Z,10\n2024-01-01T00:05:00Z,20\n1704067800,30\n");
	const LoadResult ok = load_csv(dir / "ok.csv");
	CHECK(ok.series.size() == 3);
	CHECK(ok.series.values == Vector{10, 20, 30});
	CHECK(ok.series.start == 1704067200);
	CHECK(ok.interpolated == 0);

	write_text(dir / "gap.csv", "timestamp,bps\n0,10\n300,20\n900,40\n");
	const LoadResult gap = load_csv(dir / "gap.csv");
	CHECK(gap.series.size() == 4);
	CHECK(gap.interpolated == 1);
	CHECK(gap.series.values == Vector{10, 20, 30, 40});

	write_text(dir / "neg.csv", "timestamp,bps\n0,10\n300,-1\n");
	const std::string neg = error_of([&] { load_csv(dir / "neg.csv"); });
	CHECK(neg.find(":3:") != std::string::npos);
	CHECK(neg.find("negative") != std::string::npos);

	write_text(dir / "order.csv", "0,10\n600,20\n300,30\n");
	CHECK(error_of([&] { load_csv(dir / "order.csv"); }).find(":3:") != std::string::npos);

	write_text(dir / "junk.csv", "timestamp,bps\n0,10\n300,abc\n");
	const std::string junk = error_of([&] { load_csv(dir / "junk.csv"); });
	CHECK(junk.find(":3:") != std::string::npos);

	write_text(dir / "grid.csv", "0,10\n301,20\n");
	CHECK_THROWS_AS(load_csv(dir / "grid.csv"), DataError);
	write_text(dir / "empty.csv", "timestamp,bps\n");
	CHECK_THROWS_AS(load_csv(dir / "empty.csv"), DataError);
	CHECK_THROWS_AS(load_csv(dir / "missing.csv"), DataError);
}

TEST_CASE("csv save and reload is exact") {
	TempDir dir;
	Gen gen(52);
	TimeSeries ts{1704067200, 300, gen.vec(500, 0, 1e10)};
	save_csv(ts, dir / "s.csv");
	const LoadResult back = load_csv(dir / "s.csv");
	CHECK(back.series.values == ts.values);
	CHECK(back.series.start == ts.start);
	CHECK(test::read_text(dir / "s.csv").rfind("timestamp,bps\n2024-01-01T00:00:00Z,", 0) == 0);
}

TEST_CASE("counter conversion") {
	const std::vector<std::uint64_t> two{0, 300};
	const BpsConversion a = counters_to_bps(two);
	CHECK(a.series.values == Vector{8.0});
	const std::vector<std::uint64_t> flat{77, 77, 77, 77};
	CHECK(counters_to_bps(flat).series.values == Vector{0.0, 0.0, 0.0});
	const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
	const std::vector<std::uint64_t> wrap{max - 99, 200};
	CHECK(counters_to_bps(wrap).series.values == Vector{8.0});
	// 40 Gbps for five minutes is 1.5e12 octets.
	const std::vector<std::uint64_t> burst{0, 1500000000000ULL, 3000000000001ULL};
	const BpsConversion b = counters_to_bps(burst);
	CHECK(b.over_capacity == std::vector<std::size_t>{1});
	const std::vector<std::uint64_t> one{5};
	CHECK_THROWS_AS(counters_to_bps(one), DataError);
}

TEST_CASE("summary statistics") {
	const SummaryStats flat = summary_stats(Vector{1, 1, 1, 1});
	CHECK(flat.mean == 1.0);
	CHECK(flat.std == 0.0);
	CHECK(flat.var == 0.0);
	CHECK_FALSE(flat.skewness.has_value());
	const SummaryStats sym = summary_stats(Vector{1, 2, 3});
	REQUIRE(sym.skewness.has_value());
	CHECK(std::abs(*sym.skewness) < 1e-12);
	CHECK(std::abs(sym.var - 2.0 / 3.0) < 1e-15);
	CHECK_THROWS_AS(summary_stats(Vector{1}), DataError);

	Gen gen(53);
	for (int trial = 0; trial < 50; ++trial) {
		const Vector x = gen.vec(gen.index(2, 300), -5, 20);
		long double mean = 0.0L;
		for (double v : x) {
			mean += v;
		}
		mean /= static_cast<long double>(x.size());
		long double m2 = 0.0L, m3 = 0.0L;
		for (double v : x) {
			m2 += (v - mean) * (v - mean);
			m3 += (v - mean) * (v - mean) * (v - mean);
		}
		m2 /= static_cast<long double>(x.size());
		m3 /= static_cast<long double>(x.size());
		const SummaryStats s = summary_stats(x);
		CHECK(std::abs(s.mean - static_cast<double>(mean)) < 1e-12);
		CHECK(std::abs(s.var - s.std * s.std) <= 1e-9 * s.var);
		CHECK(std::abs(s.var - static_cast<double>(m2)) <= 1e-10 * s.var);
		REQUIRE(s.skewness.has_value());
		CHECK(std::abs(*s.skewness - static_cast<double>(m3 / std::pow(m2, 1.5L))) < 1e-9);
	}

	std::normal_distribution<double> normal;
	Vector z(10000);
	for (double &v : z) {
		v = normal(gen.engine());
	}
	const SummaryStats n = summary_stats(z);
	CHECK(std::abs(n.mean) < 0.05);
	CHECK(std::abs(n.std - 1.0) < 0.05);
	CHECK(std::abs(*n.skewness) < 0.1);
}

TEST_CASE("min-max scaler") {
	const Vector train{3, 7, 5};
	const ScalerParams p = fit_scaler(train);
	CHECK(p.min == 3.0);
	CHECK(p.max == 7.0);
	CHECK(scale(Vector{3, 7, 5}, p) == Vector{0.0, 1.0, 0.5});
	CHECK_THROWS_AS(fit_scaler(Vector{2, 2, 2}), DataError);
	Gen gen(54);
	for (int trial = 0; trial < 100; ++trial) {
		const Vector x = gen.vec(50, 1e8, 1e10);
		const ScalerParams q = fit_scaler(x);
		CHECK(test::max_abs_diff(inverse_scale(scale(x, q), q), x) <= 1e-12 * q.max);
		const Vector unit = gen.vec(50, -0.5, 1.5);
		CHECK(test::max_abs_diff(scale(inverse_scale(unit, q), q), unit) < 1e-12);
	}
}

TEST_CASE("windowing") {
	Vector series(10);
	for (std::size_t i = 0; i < 10; ++i) {
		series[i] = static_cast<double>(i);
	}
	const WindowedDataset w = make_windows(series, 3, 2);
	CHECK(w.size() == 6);
	CHECK(make_windows(series, 7, 3).size() == 1);
	const std::string err = error_of([&] { make_windows(series, 8, 3); });
	CHECK(err.find("11") != std::string::npos);
	CHECK_THROWS_AS(make_windows(series, 0, 3), ConfigError);

	Gen gen(55);
	for (int trial = 0; trial < 50; ++trial) {
		const std::size_t p = gen.index(1, 15), f = gen.index(1, 8);
		const Vector s = gen.vec(gen.index(p + f, 200));
		const WindowedDataset d = make_windows(s, p, f);
		CHECK(d.size() == s.size() - p - f + 1);
		Vector rebuilt;
		for (std::size_t k = 0; k < d.size(); ++k) {
			rebuilt.push_back(d.input(k)[0]);
			CHECK(d.target(k)[0] == s[k + p]);
		}
		const std::size_t last = d.size() - 1;
		rebuilt.insert(rebuilt.end(), d.input(last).begin() + 1, d.input(last).end());
		rebuilt.insert(rebuilt.end(), d.target(last).begin(), d.target(last).end());
		CHECK(rebuilt == s);
	}
	WindowedDataset a = make_windows(series, 3, 2);
	a.append(make_windows(series, 3, 2));
	CHECK(a.size() == 12);
	CHECK_THROWS_AS(a.append(make_windows(series, 2, 2)), ShapeError);
	const Matrix t = a.target_matrix();
	CHECK(t.rows() == 12);
	CHECK(t(1, 1) == 5.0);
}

TEST_CASE("chronological split") {
	Gen gen(56);
	TimeSeries ts{600, 300, gen.vec(100, 0, 1)};
	const auto [train, test] = split(ts, 0.8);
	CHECK(train.size() == 80);
	CHECK(test.size() == 20);
	CHECK(test.start == 600 + 80 * 300);
	CHECK(train.values.back() == ts.values[79]);
	CHECK(test.values.front() == ts.values[80]);
	CHECK_THROWS_AS(split(ts, 0.8, 21), DataError);
	CHECK_THROWS_AS(split(ts, 1.0), ConfigError);
}

TEST_CASE("scaler fitted on the train split ignores test values") {
	Gen gen(57);
	TimeSeries ts{0, 300, gen.vec(500, 10, 20)};
	const ScalerParams before = fit_scaler(split(ts, 0.8).first.values);
	for (std::size_t i = 400; i < 500; ++i) {
		ts.values[i] = i % 2 ? 1e12 : 0.0;
	}
	CHECK(fit_scaler(split(ts, 0.8).first.values) == before);
}

TEST_CASE("synthetic profiles") {
	SynthProfile flat;
	flat.daily_amp = flat.weekly_amp = flat.noise_std = 0.0;
	const TimeSeries c = synth(flat, 50);
	for (double v : c.values) {
		CHECK(v == flat.base_bps);
	}
	SynthProfile p;
	CHECK(synth(p, 3000).values == synth(p, 3000).values);
	SynthProfile q = p;
	q.seed = 7;
	CHECK(synth(p, 3000).values != synth(q, 3000).values);

	// With noise off the daily component repeats every 288 samples.
	SynthProfile daily;
	daily.weekly_amp = daily.noise_std = 0.0;
	const TimeSeries d = synth(daily, 600);
	CHECK(std::abs(d.values[10] - d.values[10 + kSamplesPerDay]) < 1e-6);

	SynthProfile neg;
	neg.base_bps = 1e6;
	CHECK_THROWS_AS(synth(neg, 1000), DataError);
	CHECK_THROWS_AS(synth(p, 0), DataError);
}
