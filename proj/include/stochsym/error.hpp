#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace stochsym {

enum class Errc {
  DimensionMismatch,
  NonFiniteEntry,
  EmptyBox,
  NotWellPosed,
  NotPositiveDefinite,
  Infeasible,
  KappaBarOutOfRange,
  UnboundedStateBox,
  InvalidCertificate,
  WeightNotPositive,
  StructureMismatch,
  NonLinearRho,
  NonQuadraticAlpha,
  InvalidKappa,
  NegativeInput,
  Unachievable,
  NonDiagonalNoise,
  RowMassError,
  StaleLatch,
  InvalidSpec,
  TooFewRooms,
  ConditionViolated,
  Config,
};

const char* to_string(Errc code) noexcept;

/// Library error. `subject` names the offending field, condition or stage;
/// `index` carries a component index where one applies (else -1).
class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string subject, std::string message, std::int64_t index = -1);

  Errc code() const noexcept { return code_; }
  const std::string& subject() const noexcept { return subject_; }
  std::int64_t index() const noexcept { return index_; }
  const std::string& message() const noexcept { return message_; }

 private:
  Errc code_;
  std::string subject_;
  std::string message_;
  std::int64_t index_;
};

}  // namespace stochsym
