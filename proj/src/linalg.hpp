#pragma once

#include <cmath>

#include "wpcn/types.hpp"

namespace wpcn::linalg {

// ln det of a Hermitian positive definite matrix.
inline double logdet_hpd(const CMat& A) {
  Eigen::LLT<CMat> llt(A);
  if (llt.info() != Eigen::Success) throw NumericalFailure("logdet: matrix not positive definite");
  double s = 0.0;
  const auto& L = llt.matrixLLT();
  for (Eigen::Index i = 0; i < A.rows(); ++i) s += std::log(L(i, i).real());
  return 2.0 * s;
}

inline CMat herm(const CMat& A) { return 0.5 * (A + A.adjoint()); }

// Hermitian square root; negative eigenvalues are clipped to zero.
inline CMat psd_sqrt(const CMat& A) {
  Eigen::SelfAdjointEigenSolver<CMat> es(herm(A));
  RVec d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().adjoint();
}

// R with R^H R = A (A Hermitian PSD), R = diag(sqrt(lambda)) U^H.
inline CMat psd_factor(const CMat& A) {
  Eigen::SelfAdjointEigenSolver<CMat> es(herm(A));
  RVec d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return d.asDiagonal() * es.eigenvectors().adjoint();
}

inline double lambda_max(const CMat& A) {
  Eigen::SelfAdjointEigenSolver<CMat> es(herm(A), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

inline double lambda_min(const CMat& A) {
  Eigen::SelfAdjointEigenSolver<CMat> es(herm(A), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline CVec vec(const CMat& X) { return Eigen::Map<const CVec>(X.data(), X.size()); }

inline CMat unvec(const CVec& v, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const CMat>(v.data(), rows, cols);
}

// I_m kron Z.
inline CMat kron_identity(int m, const CMat& Z) {
  const auto r = Z.rows();
  CMat out = CMat::Zero(m * r, m * r);
  for (int i = 0; i < m; ++i) out.block(i * r, i * r, r, r) = Z;
  return out;
}

}  // namespace wpcn::linalg
