#pragma once

#include "tfl/dataset.hpp"
#include "tfl/seq2seq.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace tfl {

// Model file layout, all integers and reals little-endian:
//
//   "TFL1"                      4 bytes magic
//   u32 version                 currently 1
//   u32 n_past, u32 n_future, u32 hidden, u8 attention
//   f64 scaler_min, f64 scaler_max
//   u64 seed, u32 epochs, u8 has_parent, u64 parent_hash
//   u32 block_count
//   block_count x { u16 name_len, name bytes, u32 rows, u32 cols, rows*cols f64 row-major }
//
// Blocks appear in Parameters::blocks() order under Parameters::block_names().

inline constexpr std::uint32_t kModelFormatVersion = 1;

struct Provenance {
	std::uint64_t seed = 0;
	std::uint32_t epochs = 0;
	bool has_parent = false;
	std::uint64_t parent_hash = 0; // fnv1a64 of the parent model file

	friend bool operator==(const Provenance &, const Provenance &) = default;
};

struct ModelBundle {
	Seq2SeqModel model;
	ScalerParams scaler;
	Provenance provenance;

	friend bool operator==(const ModelBundle &, const ModelBundle &) = default;
};

std::vector<std::uint8_t> encode_model(const ModelBundle &bundle);
/// Throws DataError on bad magic, unsupported version, shape mismatch,
/// truncation or trailing bytes.
ModelBundle decode_model(std::span<const std::uint8_t> bytes);

void save_model(const ModelBundle &bundle, const std::filesystem::path &path);
ModelBundle load_model(const std::filesystem::path &path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path &path);
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

} // namespace tfl
