#include "fcnlp/dataset.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <unordered_set>

#include "binary_io.hpp"
#include "fcnlp/error.hpp"

namespace fcnlp {

namespace detail {

std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoError, "cannot open " + path.string());
  std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) fail(Errc::IoError, "read failed for " + path.string());
  return data;
}

void write_file(const std::filesystem::path& path, std::span<const char> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::IoError, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) fail(Errc::IoError, "write failed for " + path.string());
}

}  // namespace detail

namespace {

bool all_finite(const std::vector<float>& v) {
  for (float x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

Label decode_label(std::uint8_t b, const std::string& id) {
  switch (b) {
    case 0: return Label::Real;
    case 1: return Label::Fake;
    case 255: return Label::Unlabeled;
    default: fail(Errc::BadRecord, "record '" + id + "' has label byte " + std::to_string(b));
  }
}

Split decode_split(std::uint8_t b, const std::string& id) {
  if (b > 2) fail(Errc::BadRecord, "record '" + id + "' has split byte " + std::to_string(b));
  return static_cast<Split>(b);
}

}  // namespace

const char* to_string(Label label) {
  switch (label) {
    case Label::Real: return "real";
    case Label::Fake: return "fake";
    case Label::Unlabeled: return "unlabeled";
  }
  return "?";
}

const char* to_string(Split split) {
  switch (split) {
    case Split::Seen: return "seen";
    case Split::Unseen: return "unseen";
    case Split::Test: return "test";
  }
  return "?";
}

void validate(const Dataset& ds) {
  std::unordered_set<std::string> ids;
  ids.reserve(ds.records.size());
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const TweetRecord& r = ds.records[i];
    if (r.image_emb.size() != ds.d_img || r.text_emb.size() != ds.d_txt) {
      fail(Errc::DimMismatch, "record " + std::to_string(i) + " ('" + r.id + "') has dims (" +
                                  std::to_string(r.image_emb.size()) + ", " +
                                  std::to_string(r.text_emb.size()) + "), header says (" +
                                  std::to_string(ds.d_img) + ", " + std::to_string(ds.d_txt) + ")");
    }
    if (!all_finite(r.image_emb) || !all_finite(r.text_emb)) {
      fail(Errc::NonFiniteValue, "record '" + r.id + "' holds NaN or Inf");
    }
    if (!ids.insert(r.id).second) fail(Errc::DuplicateId, "id '" + r.id + "' appears twice");
    if (r.split != Split::Test && r.label == Label::Unlabeled) {
      fail(Errc::MissingLabel, "training record '" + r.id + "' is unlabeled");
    }
    if (r.id.size() > std::numeric_limits<std::uint16_t>::max()) {
      fail(Errc::BadRecord, "id of record " + std::to_string(i) + " exceeds 65535 bytes");
    }
  }
}

Dataset load_dataset(const std::filesystem::path& path) {
  const std::vector<char> bytes = detail::read_file(path);
  if (bytes.size() < 4 || std::string_view(bytes.data(), 4) != "TFRE") {
    fail(Errc::BadMagic, path.string() + " does not start with \"TFRE\"");
  }
  detail::ByteReader in(bytes, Errc::DimMismatch);
  in.get_string(4);
  const auto version = in.get<std::uint32_t>();
  if (version != kTfreVersion) {
    fail(Errc::VersionMismatch, "TFRE version " + std::to_string(version) + ", expected 1");
  }
  const auto count = in.get<std::uint64_t>();
  Dataset ds;
  ds.d_img = in.get<std::uint32_t>();
  ds.d_txt = in.get<std::uint32_t>();

  // Each record carries at least 8 fixed bytes plus its floats.
  const std::uint64_t min_record = 8 + 4ull * (std::uint64_t{ds.d_img} + ds.d_txt);
  if (count > in.remaining() / min_record + 1) {
    fail(Errc::DimMismatch, "header claims " + std::to_string(count) + " records; file is too short");
  }
  ds.records.reserve(static_cast<std::size_t>(count));
  for (std::uint64_t k = 0; k < count; ++k) {
    TweetRecord r;
    const auto id_len = in.get<std::uint16_t>();
    r.id = in.get_string(id_len);
    r.label = decode_label(in.get<std::uint8_t>(), r.id);
    r.split = decode_split(in.get<std::uint8_t>(), r.id);
    r.event_id = in.get<std::uint32_t>();
    r.image_emb.resize(ds.d_img);
    for (auto& x : r.image_emb) x = in.get<float>();
    r.text_emb.resize(ds.d_txt);
    for (auto& x : r.text_emb) x = in.get<float>();
    ds.records.push_back(std::move(r));
  }
  if (in.remaining() != 0) {
    fail(Errc::DimMismatch, std::to_string(in.remaining()) +
                                " trailing bytes after the last record; record lengths disagree with header");
  }
  validate(ds);
  return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  validate(ds);
  detail::ByteWriter out;
  out.put_bytes("TFRE");
  out.put<std::uint32_t>(kTfreVersion);
  out.put<std::uint64_t>(ds.records.size());
  out.put<std::uint32_t>(ds.d_img);
  out.put<std::uint32_t>(ds.d_txt);
  for (const TweetRecord& r : ds.records) {
    out.put<std::uint16_t>(static_cast<std::uint16_t>(r.id.size()));
    out.put_bytes(r.id);
    out.put<std::uint8_t>(static_cast<std::uint8_t>(r.label));
    out.put<std::uint8_t>(static_cast<std::uint8_t>(r.split));
    out.put<std::uint32_t>(r.event_id);
    for (float x : r.image_emb) out.put<float>(x);
    for (float x : r.text_emb) out.put<float>(x);
  }
  detail::write_file(path, out.bytes());
}

Matrix node_features(const Dataset& ds) {
  const Index n = static_cast<Index>(ds.records.size());
  Matrix x(n, static_cast<Index>(ds.d_img) + ds.d_txt);
  for (Index i = 0; i < n; ++i) {
    const TweetRecord& r = ds.records[static_cast<std::size_t>(i)];
    for (std::uint32_t c = 0; c < ds.d_img; ++c) x(i, c) = r.image_emb[c];
    for (std::uint32_t c = 0; c < ds.d_txt; ++c) x(i, ds.d_img + c) = r.text_emb[c];
  }
  return x;
}

std::vector<std::uint32_t> indices_of(const Dataset& ds, Split split) {
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    if (ds.records[i].split == split) out.push_back(static_cast<std::uint32_t>(i));
  }
  return out;
}

}  // namespace fcnlp
