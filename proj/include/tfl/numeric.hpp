#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace tfl {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
///
/// Entries are checked for finiteness whenever a Matrix is built from
/// caller-supplied data or produced by matmul. Element access through
/// operator() and data() is unchecked so that training kernels can update
/// parameters in place.
class Matrix {
public:
	Matrix() = default;
	Matrix(std::size_t rows, std::size_t cols);
	Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

	static Matrix identity(std::size_t n);
	static Matrix zeros(std::size_t rows, std::size_t cols) { return Matrix(rows, cols); }

	std::size_t rows() const { return rows_; }
	std::size_t cols() const { return cols_; }
	std::size_t size() const { return data_.size(); }
	bool same_shape(const Matrix &other) const { return rows_ == other.rows_ && cols_ == other.cols_; }

	double &operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
	double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

	std::span<double> data() { return data_; }
	std::span<const double> data() const { return data_; }
	std::span<double> row(std::size_t r) { return std::span<double>(data_).subspan(r * cols_, cols_); }
	std::span<const double> row(std::size_t r) const {
		return std::span<const double>(data_).subspan(r * cols_, cols_);
	}

	void fill(double value);
	bool all_finite() const;
	std::string shape_string() const;

	friend bool operator==(const Matrix &, const Matrix &) = default;

private:
	std::size_t rows_ = 0;
	std::size_t cols_ = 0;
	std::vector<double> data_;
};

/// Standard matrix product. Throws ShapeError naming both shapes when a.cols != b.rows.
Matrix matmul(const Matrix &a, const Matrix &b);

double sigmoid(double x);
double tanh(double x);
Matrix sigmoid(const Matrix &m);
Matrix tanh(const Matrix &m);

/// Numerically stable softmax (max-subtraction). Throws on empty input.
Vector softmax(std::span<const double> v);

/// Dot product with a fixed four-lane accumulation order, used by every
/// kernel so that results do not depend on compiler vectorisation choices.
double dot(const double *a, const double *b, std::size_t n);

/// xoshiro256** generator seeded through splitmix64.
///
/// The algorithm is fixed so identical seeds give identical streams on every
/// platform; none of the std:: distributions are used because their output is
/// implementation-defined.
class Rng {
public:
	using State = std::array<std::uint64_t, 4>;

	explicit Rng(std::uint64_t seed);

	std::uint64_t next_u64();
	/// Uniform double in [0, 1) with 53 random bits.
	double next_double();
	/// Uniform in [lo, hi). Returns lo when lo == hi; throws when lo > hi.
	double uniform(double lo, double hi);
	/// Standard normal draw (Box-Muller, one value per call).
	double normal();
	/// Uniform integer in [0, n). n must be positive.
	std::uint64_t below(std::uint64_t n);

	const State &state() const { return state_; }
	static Rng from_state(const State &state);

	std::string serialize() const;
	static Rng deserialize(const std::string &text);

	friend bool operator==(const Rng &, const Rng &) = default;

private:
	Rng() = default;
	State state_{};
};

double uniform(Rng &rng, double lo, double hi);

/// splitmix64 finaliser; derives independent sub-seeds from (seed, stream).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

} // namespace tfl
