#pragma once

#include "tfl/numeric.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <unistd.h>

namespace tfl::test {

// Generators for property tests. std::mt19937_64 keeps the test inputs
// independent of the library's own generator.
class Gen {
public:
	explicit Gen(std::uint64_t seed) : eng_(seed) {}

	double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
	std::size_t index(std::size_t lo, std::size_t hi) {
		return std::uniform_int_distribution<std::size_t>(lo, hi)(eng_);
	}
	Vector vec(std::size_t n, double lo = -1.0, double hi = 1.0) {
		Vector v(n);
		for (double &x : v) {
			x = real(lo, hi);
		}
		return v;
	}
	Matrix mat(std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) { return Matrix(r, c, vec(r * c, lo, hi)); }
	std::mt19937_64 &engine() { return eng_; }

private:
	std::mt19937_64 eng_;
};

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
	double m = 0.0;
	for (std::size_t i = 0; i < a.size(); ++i) {
		m = std::max(m, std::abs(a[i] - b[i]));
	}
	return m;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
	TempDir() {
		static std::atomic<int> counter{0};
		path_ = std::filesystem::temp_directory_path() /
		        ("tfl_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
		std::filesystem::remove_all(path_);
		std::filesystem::create_directories(path_);
	}
	~TempDir() {
		std::error_code ec;
		std::filesystem::remove_all(path_, ec);
	}
	TempDir(const TempDir &) = delete;
	TempDir &operator=(const TempDir &) = delete;

	const std::filesystem::path &path() const { return path_; }
	std::filesystem::path operator/(const std::string &name) const { return path_ / name; }

private:
	std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path &path, const std::string &text) {
	std::ofstream(path) << text;
}

inline std::string read_text(const std::filesystem::path &path) {
	std::ifstream in(path, std::ios::binary);
	return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace tfl::test
