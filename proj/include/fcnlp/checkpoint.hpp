#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fcnlp/tensor.hpp"
#include "fcnlp/trainer.hpp"

namespace fcnlp {

// Checkpoint container, little-endian throughout:
//
//   header (16 bytes)
//     magic          4 bytes  "FCKP"
//     version        u32      1
//     section_count  u32
//     reserved       u32      0
//   section, repeated section_count times
//     name_len       u32
//     name           name_len bytes (UTF-8)
//     kind           u8       0 = text, 1 = matrix
//     payload_len    u64
//     payload        text: raw bytes
//                    matrix: u32 rows, u32 cols, rows*cols f64 row-major
//
// A model checkpoint has a text section "config" (format_config output), a
// text section "model" (input-dim = N) and one matrix section per parameter,
// named as the parameter.

inline constexpr char kCheckpointMagic[4] = {'F', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Section {
  std::string name;
  bool is_matrix = false;
  std::string text;
  Matrix matrix;

  bool operator==(const Section& o) const {
    return name == o.name && is_matrix == o.is_matrix && text == o.text &&
           matrix.rows() == o.matrix.rows() && matrix.cols() == o.matrix.cols() && matrix == o.matrix;
  }
};

std::vector<char> encode_sections(std::span<const Section> sections);
// Throws BadMagic, VersionMismatch, DimMismatch (truncated or trailing
// bytes) and BadRecord (unknown section kind).
std::vector<Section> decode_sections(std::span<const char> bytes);

struct LoadedModel {
  TrainConfig config;
  TrainedModel model;
};

std::vector<Section> checkpoint_sections(const TrainConfig& cfg, TrainedModel& model);
LoadedModel model_from_sections(std::span<const Section> sections);

void save_checkpoint(const std::filesystem::path& path, const TrainConfig& cfg, TrainedModel& model);
LoadedModel load_checkpoint(const std::filesystem::path& path);

}  // namespace fcnlp
