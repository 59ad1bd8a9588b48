#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fcnlp/tensor.hpp"

namespace fcnlp {

enum class Label : std::uint8_t { Real = 0, Fake = 1, Unlabeled = 255 };
enum class Split : std::uint8_t { Seen = 0, Unseen = 1, Test = 2 };

inline constexpr std::uint32_t kUnknownEvent = 0xFFFFFFFFu;

struct TweetRecord {
  std::string id;
  std::vector<float> image_emb;
  std::vector<float> text_emb;
  Label label = Label::Unlabeled;
  std::uint32_t event_id = kUnknownEvent;
  Split split = Split::Test;

  bool operator==(const TweetRecord&) const = default;
};

struct Dataset {
  std::vector<TweetRecord> records;
  std::uint32_t d_img = 0;
  std::uint32_t d_txt = 0;

  std::size_t size() const { return records.size(); }
  bool operator==(const Dataset&) const = default;
};

// TFRE v1 header: magic(4) + version(4) + record_count(8) + d_img(4) + d_txt(4).
inline constexpr std::size_t kTfreHeaderBytes = 24;
inline constexpr std::uint32_t kTfreVersion = 1;

// Throws Error with DimMismatch, NonFiniteValue, DuplicateId or MissingLabel.
void validate(const Dataset& ds);

Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& ds, const std::filesystem::path& path);

// Row i = concat(image_emb_i, text_emb_i).
Matrix node_features(const Dataset& ds);

std::vector<std::uint32_t> indices_of(const Dataset& ds, Split split);

const char* to_string(Label label);
const char* to_string(Split split);

}  // namespace fcnlp
