#include "stochsym/error.hpp"

#include <iostream>
#include <mutex>

#include "stochsym/log.hpp"

namespace stochsym {

const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::NonFiniteEntry: return "NonFiniteEntry";
    case Errc::EmptyBox: return "EmptyBox";
    case Errc::NotWellPosed: return "NotWellPosed";
    case Errc::NotPositiveDefinite: return "NotPositiveDefinite";
    case Errc::Infeasible: return "Infeasible";
    case Errc::KappaBarOutOfRange: return "KappaBarOutOfRange";
    case Errc::UnboundedStateBox: return "UnboundedStateBox";
    case Errc::InvalidCertificate: return "InvalidCertificate";
    case Errc::WeightNotPositive: return "WeightNotPositive";
    case Errc::StructureMismatch: return "StructureMismatch";
    case Errc::NonLinearRho: return "NonLinearRho";
    case Errc::NonQuadraticAlpha: return "NonQuadraticAlpha";
    case Errc::InvalidKappa: return "InvalidKappa";
    case Errc::NegativeInput: return "NegativeInput";
    case Errc::Unachievable: return "Unachievable";
    case Errc::NonDiagonalNoise: return "NonDiagonalNoise";
    case Errc::RowMassError: return "RowMassError";
    case Errc::StaleLatch: return "StaleLatch";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::TooFewRooms: return "TooFewRooms";
    case Errc::ConditionViolated: return "ConditionViolated";
    case Errc::Config: return "ConfigError";
  }
  return "Unknown";
}

namespace {
std::string compose_message(Errc code, const std::string& subject, const std::string& message) {
  std::string out = to_string(code);
  if (!subject.empty()) out += "(" + subject + ")";
  if (!message.empty()) out += ": " + message;
  return out;
}
}  // namespace

Error::Error(Errc code, std::string subject, std::string message, std::int64_t index)
    : std::runtime_error(compose_message(code, subject, message)),
      code_(code),
      subject_(std::move(subject)),
      message_(std::move(message)),
      index_(index) {}

namespace {
std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}
WarningSink& sink_ref() {
  static WarningSink sink = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
  return sink;
}
}  // namespace

WarningSink set_warning_sink(WarningSink sink) {
  std::lock_guard<std::mutex> lock(sink_mutex());
  WarningSink old = std::move(sink_ref());
  sink_ref() = std::move(sink);
  return old;
}

void warn(const std::string& message) {
  std::lock_guard<std::mutex> lock(sink_mutex());
  if (sink_ref()) sink_ref()(message);
}

}  // namespace stochsym
