#include "tfl/numeric.hpp"

#include "tfl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace tfl {

Matrix::Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
	if (data_.size() != rows_ * cols_) {
		throw ShapeError("matrix data length " + std::to_string(data_.size()) + " does not match shape " +
		                 shape_string());
	}
	if (!all_finite()) {
		throw NumericError("matrix data contains non-finite entries");
	}
}

Matrix Matrix::identity(std::size_t n) {
	Matrix m(n, n);
	for (std::size_t i = 0; i < n; ++i) {
		m(i, i) = 1.0;
	}
	return m;
}

void Matrix::fill(double value) {
	std::fill(data_.begin(), data_.end(), value);
}

bool Matrix::all_finite() const {
	return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Matrix::shape_string() const {
	return "(" + std::to_string(rows_) + "x" + std::to_string(cols_) + ")";
}

Matrix matmul(const Matrix &a, const Matrix &b) {
	if (a.cols() != b.rows()) {
		throw ShapeError("matmul dimension mismatch: " + a.shape_string() + " x " + b.shape_string());
	}
	Matrix out(a.rows(), b.cols());
	for (std::size_t i = 0; i < a.rows(); ++i) {
		auto out_row = out.row(i);
		for (std::size_t k = 0; k < a.cols(); ++k) {
			const double aik = a(i, k);
			const auto b_row = b.row(k);
			for (std::size_t j = 0; j < b.cols(); ++j) {
				out_row[j] += aik * b_row[j];
			}
		}
	}
	if (!out.all_finite()) {
		throw NumericError("matmul produced non-finite entries");
	}
	return out;
}

double sigmoid(double x) {
	if (x >= 0.0) {
		return 1.0 / (1.0 + std::exp(-x));
	}
	const double e = std::exp(x);
	return e / (1.0 + e);
}

double tanh(double x) {
	return std::tanh(x);
}

Matrix sigmoid(const Matrix &m) {
	Matrix out = m;
	for (double &v : out.data()) {
		v = sigmoid(v);
	}
	return out;
}

Matrix tanh(const Matrix &m) {
	Matrix out = m;
	for (double &v : out.data()) {
		v = std::tanh(v);
	}
	return out;
}

Vector softmax(std::span<const double> v) {
	if (v.empty()) {
		throw std::invalid_argument("softmax of an empty vector");
	}
	const double peak = *std::max_element(v.begin(), v.end());
	Vector out(v.size());
	double total = 0.0;
	for (std::size_t i = 0; i < v.size(); ++i) {
		out[i] = std::exp(v[i] - peak);
		total += out[i];
	}
	for (double &x : out) {
		x /= total;
	}
	return out;
}

double dot(const double *a, const double *b, std::size_t n) {
	double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
	std::size_t i = 0;
	for (; i + 4 <= n; i += 4) {
		s0 += a[i] * b[i];
		s1 += a[i + 1] * b[i + 1];
		s2 += a[i + 2] * b[i + 2];
		s3 += a[i + 3] * b[i + 3];
	}
	for (; i < n; ++i) {
		s0 += a[i] * b[i];
	}
	return (s0 + s1) + (s2 + s3);
}

namespace {

std::uint64_t splitmix64(std::uint64_t &x) {
	std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
	z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
	z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
	return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) {
	return (x << k) | (x >> (64 - k));
}

} // namespace

Rng::Rng(std::uint64_t seed) {
	std::uint64_t x = seed;
	for (auto &word : state_) {
		word = splitmix64(x);
	}
}

std::uint64_t Rng::next_u64() {
	const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
	const std::uint64_t t = state_[1] << 17;
	state_[2] ^= state_[0];
	state_[3] ^= state_[1];
	state_[1] ^= state_[2];
	state_[0] ^= state_[3];
	state_[2] ^= t;
	state_[3] = rotl(state_[3], 45);
	return result;
}

double Rng::next_double() {
	return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
	if (!(lo <= hi)) {
		throw std::invalid_argument("uniform: lo > hi");
	}
	if (lo == hi) {
		return lo;
	}
	const double v = lo + (hi - lo) * next_double();
	// Rounding can land exactly on hi for wide ranges.
	return v < hi ? v : std::nextafter(hi, lo);
}

double Rng::normal() {
	double u1 = next_double();
	while (u1 <= 0.0) {
		u1 = next_double();
	}
	const double u2 = next_double();
	return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
	if (n == 0) {
		throw std::invalid_argument("Rng::below(0)");
	}
	// Rejection sampling keeps the draw unbiased.
	const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
	std::uint64_t x = next_u64();
	while (x >= limit) {
		x = next_u64();
	}
	return x % n;
}

Rng Rng::from_state(const State &state) {
	if (state == State{}) {
		throw DataError("all-zero xoshiro256** state never leaves zero");
	}
	Rng rng;
	rng.state_ = state;
	return rng;
}

std::string Rng::serialize() const {
	std::ostringstream out;
	out << "xoshiro256ss";
	for (auto word : state_) {
		out << ' ' << word;
	}
	return out.str();
}

Rng Rng::deserialize(const std::string &text) {
	std::istringstream in(text);
	std::string tag;
	in >> tag;
	if (tag != "xoshiro256ss") {
		throw DataError("unrecognised rng state tag '" + tag + "'");
	}
	State state{};
	for (auto &word : state) {
		if (!(in >> word)) {
			throw DataError("truncated rng state");
		}
	}
	return from_state(state);
}

double uniform(Rng &rng, double lo, double hi) {
	return rng.uniform(lo, hi);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
	std::uint64_t x = seed ^ (stream * 0xd1b54a32d192ed03ULL);
	splitmix64(x);
	return splitmix64(x);
}

} // namespace tfl
