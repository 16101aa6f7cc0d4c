#pragma once

#include "tfl/dataset.hpp"
#include "tfl/numeric.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace tfl {

/// Orthonormal two-channel filter bank. The highpass filter is derived from
/// the lowpass by the quadrature-mirror rule g_k = (-1)^k h_{L-1-k}.
struct WaveletFilter {
	std::string name;
	Vector lowpass;
	Vector highpass;

	static WaveletFilter from_lowpass(std::string name, Vector lowpass);
	static WaveletFilter haar();
	/// 8-tap Daubechies filter (four vanishing moments).
	static WaveletFilter db4();
	/// "haar" or "db4"; throws ConfigError otherwise.
	static WaveletFilter by_name(const std::string &name);

	std::size_t length() const { return lowpass.size(); }
};

struct FilterIdentityErrors {
	double sum = 0.0;         // |sum h - sqrt 2|
	double energy = 0.0;      // |sum h^2 - 1|
	double shift_orthogonality = 0.0; // max_m!=0 |sum h_k h_{k+2m}|
};

FilterIdentityErrors filter_identity_errors(const WaveletFilter &filter);

/// Throws NumericError when any identity is off by more than tol.
void validate_filter(const WaveletFilter &filter, double tol = 1e-10);

enum class Extension { symmetric, periodic };
enum class FactorGranularity { per_coefficient, per_band };

struct DwtCoeffs {
	Vector approx;               // level-J approximation
	std::vector<Vector> details; // details[0] is level 1 (highest frequency)
	std::vector<std::size_t> lengths; // input length at each level, lengths[0] = signal length
	std::string filter;
	Extension extension = Extension::symmetric;

	std::size_t levels() const { return details.size(); }
};

struct AugmentConfig {
	WaveletFilter filter = WaveletFilter::db4();
	std::size_t levels = 3;
	double factor_lo = 0.5;
	double factor_hi = 1.5;
	std::uint64_t seed = 42;
	std::vector<std::size_t> perturb_levels; // 1-based; empty = every level
	FactorGranularity granularity = FactorGranularity::per_coefficient;
	Extension extension = Extension::symmetric;

	/// Checks 0 < factor_lo <= factor_hi and the level bound for this length.
	void validate(std::size_t signal_length) const;
};

/// floor(log2(signal_length / filter_length)) + 1, or 0 when the signal is
/// shorter than the filter.
std::size_t max_level(std::size_t signal_length, std::size_t filter_length);

/// Mallat cascade with the configured boundary extension.
DwtCoeffs dwt(std::span<const double> signal, const AugmentConfig &cfg);
/// Exact inverse of dwt for the same filter and extension.
Vector idwt(const DwtCoeffs &coeffs, const AugmentConfig &cfg);

/// Multiplies detail coefficients at the selected levels by independent
/// Uniform[factor_lo, factor_hi) draws. The approximation is copied untouched.
DwtCoeffs perturb(const DwtCoeffs &coeffs, const AugmentConfig &cfg, Rng &rng);

/// idwt(perturb(dwt(x))) with an Rng seeded from cfg.seed.
Vector augment_series(std::span<const double> series, const AugmentConfig &cfg);

struct CorpusSeries {
	Vector values;
	bool original = false;
	std::uint64_t seed = 0; // augmentation seed; 0 for the original
	double factor_lo = 1.0;
	double factor_hi = 1.0;
};

struct AugmentedCorpus {
	std::int64_t start = 0;
	std::int64_t interval = 300;
	std::vector<CorpusSeries> series; // original first, then the variants
};

/// The original series plus `copies` variants, variant k seeded with
/// derive_seed(cfg.seed, k). Variants are generated in parallel; the result
/// does not depend on the thread count.
AugmentedCorpus expand_dataset(const TimeSeries &original, const AugmentConfig &cfg, std::size_t copies);

/// Scales every corpus member with one scaler and windows each member on
/// its own, so no window crosses from one member into the next.
WindowedDataset corpus_windows(const AugmentedCorpus &corpus, const ScalerParams &scaler, std::size_t n_past,
                               std::size_t n_future);

} // namespace tfl
