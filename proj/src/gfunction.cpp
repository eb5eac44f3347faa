#include "gbsde/gfunction.hpp"

#include "gbsde/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace gbsde {

namespace {
constexpr double kPsdTol = 1e-12;
}

void GParams::validate() const {
  if (!(std::isfinite(sigma_low_sq) && std::isfinite(sigma_high_sq))) {
    throw InvalidArgument("GParams: variances must be finite");
  }
  if (!(sigma_low_sq > 0.0)) {
    throw InvalidArgument("GParams: sigma_low_sq must be > 0 (degenerate G not supported)");
  }
  if (sigma_low_sq > sigma_high_sq) {
    throw InvalidArgument("GParams: sigma_low_sq must not exceed sigma_high_sq");
  }
}

GParams GParams::make(double low_sq, double high_sq) {
  GParams p{low_sq, high_sq};
  p.validate();
  return p;
}

double g_value(const GParams& params, double a) {
  return 0.5 * (params.sigma_high_sq * std::max(a, 0.0) - params.sigma_low_sq * std::max(-a, 0.0));
}

double worst_case_q(const GParams& params, double a) {
  return a >= 0.0 ? params.sigma_high_sq : params.sigma_low_sq;
}

GammaSet::GammaSet(std::vector<Eigen::MatrixXd> members) : members_(std::move(members)) {
  if (members_.empty()) throw InvalidArgument("GammaSet: must be non-empty");
  const Eigen::Index d = members_.front().rows();
  for (std::size_t k = 0; k < members_.size(); ++k) {
    const auto& q = members_[k];
    const std::string tag = "GammaSet member " + std::to_string(k);
    if (q.rows() != d || q.cols() != d) throw InvalidArgument(tag + ": dimension mismatch");
    if (!q.allFinite()) throw InvalidArgument(tag + ": non-finite entry");
    if ((q - q.transpose()).cwiseAbs().maxCoeff() > kPsdTol) {
      throw InvalidArgument(tag + ": not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(q, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -kPsdTol) {
      throw InvalidArgument(tag + ": not positive semidefinite");
    }
  }
}

GammaSet GammaSet::from_scalar(const GParams& params) {
  params.validate();
  Eigen::MatrixXd lo(1, 1), hi(1, 1);
  lo(0, 0) = params.sigma_low_sq;
  hi(0, 0) = params.sigma_high_sq;
  return GammaSet({lo, hi});
}

double g_value_matrix(const GammaSet& gamma, const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw InvalidArgument("g_value_matrix: matrix is not square");
  if (a.rows() != gamma.dim()) {
    throw InvalidArgument("g_value_matrix: dimension " + std::to_string(a.rows()) +
                          " does not match Gamma dimension " + std::to_string(gamma.dim()));
  }
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > kPsdTol * std::max(1.0, a.cwiseAbs().maxCoeff())) {
    throw InvalidArgument("g_value_matrix: matrix is not symmetric");
  }
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& q : gamma.members()) {
    best = std::max(best, (a * q).trace());
  }
  return 0.5 * best;
}

}  // namespace gbsde
