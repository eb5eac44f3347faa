#pragma once

#include <Eigen/Dense>

#include <vector>

namespace gbsde {

/// Volatility-uncertainty interval [sigma_low_sq, sigma_high_sq] of a scalar
/// G-Brownian motion.
struct GParams {
  double sigma_low_sq = 1.0;
  double sigma_high_sq = 1.0;

  /// Throws InvalidArgument unless 0 < low <= high < inf.
  void validate() const;

  static GParams make(double low_sq, double high_sq);

  bool operator==(const GParams&) const = default;
};

/// G(a) = 1/2 (sigma_high_sq a^+ - sigma_low_sq a^-).
double g_value(const GParams& params, double a);

/// Maximizing variance in the scalar representation of G. Ties at a == 0 go
/// to sigma_high_sq.
double worst_case_q(const GParams& params, double a);

/// Finite set of symmetric positive-semidefinite d x d matrices.
class GammaSet {
 public:
  explicit GammaSet(std::vector<Eigen::MatrixXd> members);

  /// The two-member set {[low], [high]} that represents a scalar GParams.
  static GammaSet from_scalar(const GParams& params);

  Eigen::Index dim() const { return members_.front().rows(); }
  const std::vector<Eigen::MatrixXd>& members() const { return members_; }

 private:
  std::vector<Eigen::MatrixXd> members_;
};

/// G(A) = 1/2 max_{Q in gamma} tr[A Q]. Throws InvalidArgument unless A is a
/// symmetric matrix matching the dimension of gamma.
double g_value_matrix(const GammaSet& gamma, const Eigen::MatrixXd& a);

}  // namespace gbsde
