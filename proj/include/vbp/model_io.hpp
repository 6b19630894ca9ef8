#pragma once

#include <filesystem>
#include <string>

#include "vbp/model.hpp"

namespace vbp {

class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

/// Reads a JSON manifest plus its weights blob, verifies the blob
/// checksum and byte count, and validates the shape chain.
Model load_model(const std::filesystem::path& manifest_path);

/// Writes manifest and weights blob; load_model(save_model(m)) is the
/// identity on the model, bit-exactly, and repeated saves are
/// byte-identical.
void save_model(const Model& m, const std::filesystem::path& manifest_path);

/// Hex-encoded SHA-256 of a byte buffer.
std::string sha256_hex(const void* data, std::size_t len);

}  // namespace vbp
