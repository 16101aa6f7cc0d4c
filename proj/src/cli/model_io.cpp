#include "tfl/model_io.hpp"

#include "tfl/errors.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

namespace tfl {

namespace {

class Writer {
public:
	void bytes(const void *p, std::size_t n) {
		const auto *b = static_cast<const std::uint8_t *>(p);
		out_.insert(out_.end(), b, b + n);
	}
	template <typename T>
	void uint(T v) {
		for (std::size_t i = 0; i < sizeof(T); ++i) {
			out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
		}
	}
	void real(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
	std::vector<std::uint8_t> take() { return std::move(out_); }

private:
	std::vector<std::uint8_t> out_;
};

class Reader {
public:
	explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

	std::span<const std::uint8_t> bytes(std::size_t n) {
		need(n);
		auto s = in_.subspan(pos_, n);
		pos_ += n;
		return s;
	}
	template <typename T>
	T uint() {
		need(sizeof(T));
		T v = 0;
		for (std::size_t i = 0; i < sizeof(T); ++i) {
			v |= static_cast<T>(static_cast<T>(in_[pos_ + i]) << (8 * i));
		}
		pos_ += sizeof(T);
		return v;
	}
	double real() { return std::bit_cast<double>(uint<std::uint64_t>()); }
	bool at_end() const { return pos_ == in_.size(); }

private:
	void need(std::size_t n) const {
		if (in_.size() - pos_ < n) {
			throw DataError("model file is truncated at byte " + std::to_string(pos_));
		}
	}
	std::span<const std::uint8_t> in_;
	std::size_t pos_ = 0;
};

std::uint32_t narrow32(std::size_t v, const char *what) {
	if (v > std::numeric_limits<std::uint32_t>::max()) {
		throw DataError(std::string(what) + " is too large for the model format");
	}
	return static_cast<std::uint32_t>(v);
}

} // namespace

std::vector<std::uint8_t> encode_model(const ModelBundle &bundle) {
	const auto &cfg = bundle.model.config;
	Writer w;
	w.bytes("TFL1", 4);
	w.uint<std::uint32_t>(kModelFormatVersion);
	w.uint<std::uint32_t>(narrow32(cfg.n_past, "n_past"));
	w.uint<std::uint32_t>(narrow32(cfg.n_future, "n_future"));
	w.uint<std::uint32_t>(narrow32(cfg.hidden, "hidden"));
	w.uint<std::uint8_t>(cfg.attention ? 1 : 0);
	w.real(bundle.scaler.min);
	w.real(bundle.scaler.max);
	w.uint<std::uint64_t>(bundle.provenance.seed);
	w.uint<std::uint32_t>(bundle.provenance.epochs);
	w.uint<std::uint8_t>(bundle.provenance.has_parent ? 1 : 0);
	w.uint<std::uint64_t>(bundle.provenance.parent_hash);

	const auto blocks = bundle.model.params.blocks();
	const auto &names = Parameters::block_names();
	w.uint<std::uint32_t>(narrow32(blocks.size(), "block count"));
	for (std::size_t b = 0; b < blocks.size(); ++b) {
		w.uint<std::uint16_t>(static_cast<std::uint16_t>(names[b].size()));
		w.bytes(names[b].data(), names[b].size());
		w.uint<std::uint32_t>(narrow32(blocks[b]->rows(), "rows"));
		w.uint<std::uint32_t>(narrow32(blocks[b]->cols(), "cols"));
		for (double v : blocks[b]->data()) {
			w.real(v);
		}
	}
	return w.take();
}

ModelBundle decode_model(std::span<const std::uint8_t> bytes) {
	Reader r(bytes);
	const auto magic = r.bytes(4);
	if (std::memcmp(magic.data(), "TFL1", 4) != 0) {
		throw DataError("not a model file (bad magic)");
	}
	const auto version = r.uint<std::uint32_t>();
	if (version > kModelFormatVersion) {
		throw DataError("unsupported model format version " + std::to_string(version) + " (this build reads up to " +
		                std::to_string(kModelFormatVersion) + ")");
	}
	if (version == 0) {
		throw DataError("invalid model format version 0");
	}
	ModelBundle bundle;
	auto &cfg = bundle.model.config;
	cfg.n_past = r.uint<std::uint32_t>();
	cfg.n_future = r.uint<std::uint32_t>();
	cfg.hidden = r.uint<std::uint32_t>();
	const auto attention = r.uint<std::uint8_t>();
	if (attention > 1) {
		throw DataError("invalid attention flag in model file");
	}
	cfg.attention = attention == 1;
	try {
		cfg.validate();
	} catch (const ConfigError &e) {
		throw DataError(std::string("model file has an invalid configuration: ") + e.what());
	}
	bundle.scaler.min = r.real();
	bundle.scaler.max = r.real();
	bundle.provenance.seed = r.uint<std::uint64_t>();
	bundle.provenance.epochs = r.uint<std::uint32_t>();
	const auto has_parent = r.uint<std::uint8_t>();
	if (has_parent > 1) {
		throw DataError("invalid parent flag in model file");
	}
	bundle.provenance.has_parent = has_parent == 1;
	bundle.provenance.parent_hash = r.uint<std::uint64_t>();

	bundle.model.params = Parameters::zeros(cfg);
	auto blocks = bundle.model.params.blocks();
	const auto &names = Parameters::block_names();
	const auto count = r.uint<std::uint32_t>();
	if (count != blocks.size()) {
		throw DataError("model file has " + std::to_string(count) + " weight blocks, expected " +
		                std::to_string(blocks.size()));
	}
	for (std::size_t b = 0; b < blocks.size(); ++b) {
		const auto name_len = r.uint<std::uint16_t>();
		const auto name_bytes = r.bytes(name_len);
		const std::string name(name_bytes.begin(), name_bytes.end());
		if (name != names[b]) {
			throw DataError("model file block " + std::to_string(b) + " is '" + name + "', expected '" + names[b] + "'");
		}
		const auto rows = r.uint<std::uint32_t>();
		const auto cols = r.uint<std::uint32_t>();
		if (rows != blocks[b]->rows() || cols != blocks[b]->cols()) {
			throw DataError("model file block '" + name + "' has shape (" + std::to_string(rows) + "x" +
			                std::to_string(cols) + "), configuration implies " + blocks[b]->shape_string());
		}
		for (double &v : blocks[b]->data()) {
			v = r.real();
		}
		if (!blocks[b]->all_finite()) {
			throw DataError("model file block '" + name + "' contains non-finite values");
		}
	}
	if (!r.at_end()) {
		throw DataError("model file has trailing bytes");
	}
	return bundle;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path &path) {
	std::ifstream in(path, std::ios::binary);
	if (!in) {
		throw DataError("cannot open " + path.string());
	}
	return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void save_model(const ModelBundle &bundle, const std::filesystem::path &path) {
	const auto bytes = encode_model(bundle);
	std::ofstream out(path, std::ios::binary);
	if (!out) {
		throw DataError("cannot write " + path.string());
	}
	out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
	if (!out) {
		throw DataError("write failed for " + path.string());
	}
}

ModelBundle load_model(const std::filesystem::path &path) {
	const auto bytes = read_file_bytes(path);
	try {
		return decode_model(bytes);
	} catch (const DataError &e) {
		throw DataError(path.string() + ": " + e.what());
	}
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
	std::uint64_t h = 0xcbf29ce484222325ULL;
	for (auto b : bytes) {
		h ^= b;
		h *= 0x100000001b3ULL;
	}
	return h;
}

} // namespace tfl
