#ifndef FCG_ERROR_HPP
#define FCG_ERROR_HPP

#include <stdexcept>
#include <string>

namespace fcg {

enum class ErrorCode {
  ZeroVector,
  ChartOverflow,
  DegenerateTensor,
  EpsilonOutOfRange,
  StepSizeUnderflow,
  NoConvergence,
  JacobianSingular,
  BVPNoConvergence,
  NotCritical,
  MeshTooCoarse,
  NullityAmbiguous,
  NotLocallyConstant,
  EstimateViolated,
  FrameDegenerate,
  MarginAmbiguous,
  LambdaBelowOne,
  HypothesisNotMet,
  AlphaNotAboveOne,
  InsufficientSpectrum,
  BadInput,
};

inline const char* error_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::ChartOverflow: return "ChartOverflow";
    case ErrorCode::DegenerateTensor: return "DegenerateTensor";
    case ErrorCode::EpsilonOutOfRange: return "EpsilonOutOfRange";
    case ErrorCode::StepSizeUnderflow: return "StepSizeUnderflow";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::JacobianSingular: return "JacobianSingular";
    case ErrorCode::BVPNoConvergence: return "BVPNoConvergence";
    case ErrorCode::NotCritical: return "NotCritical";
    case ErrorCode::MeshTooCoarse: return "MeshTooCoarse";
    case ErrorCode::NullityAmbiguous: return "NullityAmbiguous";
    case ErrorCode::NotLocallyConstant: return "NotLocallyConstant";
    case ErrorCode::EstimateViolated: return "EstimateViolated";
    case ErrorCode::FrameDegenerate: return "FrameDegenerate";
    case ErrorCode::MarginAmbiguous: return "MarginAmbiguous";
    case ErrorCode::LambdaBelowOne: return "LambdaBelowOne";
    case ErrorCode::HypothesisNotMet: return "HypothesisNotMet";
    case ErrorCode::AlphaNotAboveOne: return "AlphaNotAboveOne";
    case ErrorCode::InsufficientSpectrum: return "InsufficientSpectrum";
    case ErrorCode::BadInput: return "BadInput";
  }
  return "Unknown";
}

/// Library-wide exception; `code` is stable and tested against.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode c, const std::string& what) { throw Error(c, what); }

}  // namespace fcg

#endif
