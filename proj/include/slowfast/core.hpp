#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <string_view>

namespace slowfast {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Failure categories reported by the library. Each maps onto one of the
/// error conditions named by the operations that raise it.
enum class ErrorCode {
  invalid_argument,
  not_stochastic,
  reducible_or_periodic,
  non_convergence,
  nonpositive_survival,
  negative_density,
  domain_exit,
  invalid_center,
  no_convergence,
  left_domain,
  collapsed_to_equilibrium,
  inhomogeneous_params,
  config_invalid,
  io_failure,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::not_stochastic: return "not_stochastic";
    case ErrorCode::reducible_or_periodic: return "reducible_or_periodic";
    case ErrorCode::non_convergence: return "non_convergence";
    case ErrorCode::nonpositive_survival: return "nonpositive_survival";
    case ErrorCode::negative_density: return "negative_density";
    case ErrorCode::domain_exit: return "domain_exit";
    case ErrorCode::invalid_center: return "invalid_center";
    case ErrorCode::no_convergence: return "no_convergence";
    case ErrorCode::left_domain: return "left_domain";
    case ErrorCode::collapsed_to_equilibrium: return "collapsed_to_equilibrium";
    case ErrorCode::inhomogeneous_params: return "inhomogeneous_params";
    case ErrorCode::config_invalid: return "config_invalid";
    case ErrorCode::io_failure: return "io_failure";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Survival variant: survival acting once per slow step, or re-scaled to
/// the fast dispersal step.
enum class Variant { slow, rescaled };

inline std::string_view to_string(Variant v) {
  return v == Variant::slow ? "slow_survival" : "rescaled";
}

/// Induced matrix 1-norm (maximum absolute column sum).
inline double norm1(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  return a.cwiseAbs().colwise().sum().maxCoeff();
}

inline bool all_finite(const Vector& x) { return x.allFinite(); }

}  // namespace slowfast
