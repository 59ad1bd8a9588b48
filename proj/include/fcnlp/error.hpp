#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fcnlp {

enum class Errc {
  BadMagic,
  VersionMismatch,
  DimMismatch,
  NonFiniteValue,
  DuplicateId,
  BadRecord,
  MissingLabel,
  IoError,
  ZeroVector,
  DimMismatchCross,
  IndexOutOfRange,
  NotAnEdge,
  ShapeMismatch,
  NotScalar,
  DetachedNode,
  EmptySet,
  DegenerateClass,
  BadConfig,
  NonFiniteLoss,
  EmptyTestSet,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& what);

// Non-fatal diagnostics (degenerate classes, skipped channels, zero
// divisions). The default sink writes to stderr; tests swap it out.
using WarningSink = std::function<void(std::string_view)>;

void warn(std::string_view message);
WarningSink set_warning_sink(WarningSink sink);

}  // namespace fcnlp
