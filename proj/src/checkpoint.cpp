#include "fcnlp/checkpoint.hpp"

#include <charconv>
#include <limits>

#include "binary_io.hpp"
#include "fcnlp/config.hpp"
#include "fcnlp/error.hpp"

namespace fcnlp {

namespace {

using detail::ByteReader;
using detail::ByteWriter;

constexpr std::uint8_t kText = 0;
constexpr std::uint8_t kMatrix = 1;

const Section* find_section(std::span<const Section> sections, std::string_view name) {
  for (const Section& s : sections) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

const Section& require_section(std::span<const Section> sections, std::string_view name, bool matrix) {
  const Section* s = find_section(sections, name);
  if (s == nullptr) fail(Errc::BadRecord, "checkpoint has no section '" + std::string(name) + "'");
  if (s->is_matrix != matrix) fail(Errc::BadRecord, "checkpoint section '" + std::string(name) + "' has the wrong kind");
  return *s;
}

}  // namespace

std::vector<char> encode_sections(std::span<const Section> sections) {
  ByteWriter w;
  w.put_bytes(std::string_view(kCheckpointMagic, 4));
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(sections.size()));
  w.put<std::uint32_t>(0);
  for (const Section& s : sections) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.name.size()));
    w.put_bytes(s.name);
    if (s.is_matrix) {
      const Matrix& m = s.matrix;
      w.put<std::uint8_t>(kMatrix);
      w.put<std::uint64_t>(8 + 8 * static_cast<std::uint64_t>(m.size()));
      w.put<std::uint32_t>(static_cast<std::uint32_t>(m.rows()));
      w.put<std::uint32_t>(static_cast<std::uint32_t>(m.cols()));
      for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) w.put<double>(m(i, j));
      }
    } else {
      w.put<std::uint8_t>(kText);
      w.put<std::uint64_t>(s.text.size());
      w.put_bytes(s.text);
    }
  }
  return w.bytes();
}

std::vector<Section> decode_sections(std::span<const char> bytes) {
  ByteReader r(bytes, Errc::DimMismatch);
  if (r.get_string(4) != std::string_view(kCheckpointMagic, 4)) fail(Errc::BadMagic, "not a checkpoint file");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    fail(Errc::VersionMismatch, "checkpoint version " + std::to_string(version) + " is not supported");
  }
  const auto count = r.get<std::uint32_t>();
  r.get<std::uint32_t>();
  std::vector<Section> out;
  for (std::uint32_t k = 0; k < count; ++k) {
    Section s;
    s.name = r.get_string(r.get<std::uint32_t>());
    const auto kind = r.get<std::uint8_t>();
    const auto len = r.get<std::uint64_t>();
    if (len > r.remaining()) fail(Errc::DimMismatch, "section '" + s.name + "' runs past the end of the file");
    if (kind == kText) {
      s.text = r.get_string(static_cast<std::size_t>(len));
    } else if (kind == kMatrix) {
      s.is_matrix = true;
      const auto rows = r.get<std::uint32_t>();
      const auto cols = r.get<std::uint32_t>();
      if (len != 8 + 8 * std::uint64_t{rows} * cols) {
        fail(Errc::DimMismatch, "section '" + s.name + "' length does not match its shape");
      }
      s.matrix.resize(rows, cols);
      for (Index i = 0; i < s.matrix.rows(); ++i) {
        for (Index j = 0; j < s.matrix.cols(); ++j) s.matrix(i, j) = r.get<double>();
      }
    } else {
      fail(Errc::BadRecord, "section '" + s.name + "' has unknown kind " + std::to_string(kind));
    }
    out.push_back(std::move(s));
  }
  if (r.remaining() != 0) fail(Errc::DimMismatch, std::to_string(r.remaining()) + " trailing bytes after the last section");
  return out;
}

std::vector<Section> checkpoint_sections(const TrainConfig& cfg, TrainedModel& model) {
  if (model.variant != cfg.variant) fail(Errc::BadConfig, "model variant differs from the config");
  std::vector<Section> out;
  out.push_back({"config", false, format_config(cfg), {}});
  out.push_back({"model", false, "input-dim = " + std::to_string(model.fcn.config.input_dim) + "\n", {}});
  for (const Parameter* p : model.parameters()) out.push_back({p->name, true, {}, p->value});
  return out;
}

LoadedModel model_from_sections(std::span<const Section> sections) {
  LoadedModel out;
  out.config = parse_config(require_section(sections, "config", false).text);
  out.config.validate();

  const std::string& model_text = require_section(sections, "model", false).text;
  constexpr std::string_view key = "input-dim = ";
  std::size_t input_dim = 0;
  const char* begin = model_text.data() + key.size();
  if (model_text.rfind(key, 0) != 0 ||
      std::from_chars(begin, model_text.data() + model_text.size(), input_dim).ec != std::errc() || input_dim == 0) {
    fail(Errc::BadRecord, "checkpoint section 'model' is malformed");
  }

  out.model = make_model(out.config, input_dim);
  std::size_t expected = 2;
  for (Parameter* p : out.model.parameters()) {
    const Section& s = require_section(sections, p->name, true);
    if (s.matrix.rows() != p->value.rows() || s.matrix.cols() != p->value.cols()) {
      fail(Errc::ShapeMismatch, "checkpoint tensor '" + p->name + "' is " + std::to_string(s.matrix.rows()) + "x" +
                                    std::to_string(s.matrix.cols()) + ", model expects " +
                                    std::to_string(p->value.rows()) + "x" + std::to_string(p->value.cols()));
    }
    p->value = s.matrix;
    p->zero_grad();
    ++expected;
  }
  if (sections.size() != expected) fail(Errc::BadRecord, "checkpoint has sections the model does not use");
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const TrainConfig& cfg, TrainedModel& model) {
  const std::vector<Section> sections = checkpoint_sections(cfg, model);
  detail::write_file(path, encode_sections(sections));
}

LoadedModel load_checkpoint(const std::filesystem::path& path) {
  const std::vector<char> bytes = detail::read_file(path);
  const std::vector<Section> sections = decode_sections(bytes);
  return model_from_sections(sections);
}

}  // namespace fcnlp
