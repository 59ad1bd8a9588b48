#include "fcnlp/error.hpp"

#include <iostream>
#include <mutex>
#include <utility>

namespace fcnlp {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::BadMagic: return "BadMagic";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::NonFiniteValue: return "NonFiniteValue";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::BadRecord: return "BadRecord";
    case Errc::MissingLabel: return "MissingLabel";
    case Errc::IoError: return "IoError";
    case Errc::ZeroVector: return "ZeroVector";
    case Errc::DimMismatchCross: return "DimMismatchCross";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::NotAnEdge: return "NotAnEdge";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::NotScalar: return "NotScalar";
    case Errc::DetachedNode: return "DetachedNode";
    case Errc::EmptySet: return "EmptySet";
    case Errc::DegenerateClass: return "DegenerateClass";
    case Errc::BadConfig: return "BadConfig";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::EmptyTestSet: return "EmptyTestSet";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void fail(Errc code, const std::string& what) { throw Error(code, what); }

namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

WarningSink& sink_slot() {
  static WarningSink sink = [](std::string_view msg) {
    std::cerr << "warning: " << msg << '\n';
  };
  return sink;
}

}  // namespace

void warn(std::string_view message) {
  std::lock_guard lock(sink_mutex());
  if (sink_slot()) sink_slot()(message);
}

WarningSink set_warning_sink(WarningSink sink) {
  std::lock_guard lock(sink_mutex());
  return std::exchange(sink_slot(), std::move(sink));
}

}  // namespace fcnlp
