#pragma once

// On-disk formats. A volume is a JSON header (magic "SVOX1") next to a raw
// little-endian payload file named in the header; parameter sets use the
// same layout with magic "SPARAM1" and a float32 payload.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "symrec/optim.hpp"
#include "symrec/plane.hpp"
#include "symrec/voxgrid.hpp"

namespace symrec::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

enum class VoxelType { automatic, f32, u8 };

std::string sha256_hex(const void* data, std::size_t size);

// Hash of the canonical (sorted-key, compact) JSON dump, first 16 hex digits.
std::string config_hash(const json& config);

// Payload goes to <path>.bin. `automatic` stores binary masks as u8.
void save_volume(const fs::path& path, const Volume& v, VoxelType type = VoxelType::automatic);
// Throws DataError naming the file and the offending field.
Volume load_volume(const fs::path& path);

void save_params(const fs::path& path, const ParameterSet& params, const std::string& kind,
                 const std::string& config_hash = {});
// Loads into a set with the expected layer names and sizes (e.g. a fresh
// init), so a file for the wrong architecture is rejected.
void load_params(const fs::path& path, ParameterSet& params, const std::string& kind);

json plane_to_json(const Plane& p);
Plane plane_from_json(const json& j);

json read_json(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

}  // namespace symrec::io
