#pragma once

// Error-state Kalman machinery: prediction, Joseph-form update, observation
// stacking and chi-square innovation gating. Templated on scalar and state
// dimension; the navigation filter uses the 15-state instantiation.

#include "cin/stats.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <span>
#include <stdexcept>
#include <string>

namespace cin {

inline constexpr int kErrorStates = 15;

template <typename Scalar, int N = kErrorStates>
struct FilterState {
  using StateVector = Eigen::Matrix<Scalar, N, 1>;
  using Covariance = Eigen::Matrix<Scalar, N, N>;

  StateVector x = StateVector::Zero();
  Covariance P = Covariance::Identity();
  Scalar timestamp{0};
};

enum class ObservationKind { sp, sp_sl, v2v, stacked };

inline const char* to_string(ObservationKind kind) {
  switch (kind) {
    case ObservationKind::sp: return "sp";
    case ObservationKind::sp_sl: return "sp_sl";
    case ObservationKind::v2v: return "v2v";
    case ObservationKind::stacked: return "stacked";
  }
  return "?";
}

template <typename Scalar, int N = kErrorStates>
struct Observation {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Jacobian = Eigen::Matrix<Scalar, Eigen::Dynamic, N>;
  using Noise = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Vector z;
  Jacobian H;
  Noise R;
  ObservationKind kind = ObservationKind::sp;

  Eigen::Index rows() const { return z.size(); }

  bool consistent() const {
    return H.rows() == z.size() && R.rows() == z.size() && R.cols() == z.size() &&
           (R - R.transpose()).cwiseAbs().maxCoeff() <= Scalar(1e-9) * (1 + R.cwiseAbs().maxCoeff());
  }
};

/// Raised when the innovation covariance cannot be factored.
class UpdateRejected : public std::runtime_error {
 public:
  UpdateRejected(const std::string& what, Eigen::VectorXd innovation)
      : std::runtime_error(what), innovation_(std::move(innovation)) {}
  const Eigen::VectorXd& innovation() const { return innovation_; }

 private:
  Eigen::VectorXd innovation_;
};

inline constexpr double kMaxInnovationCondition = 1e12;

template <typename Scalar, int N>
FilterState<Scalar, N> predict(const FilterState<Scalar, N>& fs,
                               const Eigen::Matrix<Scalar, N, N>& F,
                               const Eigen::Matrix<Scalar, N, N>& Q) {
  FilterState<Scalar, N> out;
  out.x.noalias() = F * fs.x;
  out.P.noalias() = F * fs.P * F.transpose();
  out.P += Q;
  out.P = (out.P + out.P.transpose()) / 2;
  out.timestamp = fs.timestamp;
  return out;
}

template <typename Scalar, int N>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> innovation_covariance(
    const FilterState<Scalar, N>& fs, const Observation<Scalar, N>& obs) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> S = obs.H * fs.P * obs.H.transpose();
  S += obs.R;
  return (S + S.transpose()) / 2;
}

template <typename Scalar, int N>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> innovation(const FilterState<Scalar, N>& fs,
                                                    const Observation<Scalar, N>& obs) {
  return obs.z - obs.H * fs.x;
}

/// Kalman update with the Joseph-form covariance.
template <typename Scalar, int N>
FilterState<Scalar, N> update(const FilterState<Scalar, N>& fs, const Observation<Scalar, N>& obs) {
  using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Gain = Eigen::Matrix<Scalar, N, Eigen::Dynamic>;
  if (!obs.consistent()) throw std::invalid_argument("update: inconsistent observation dimensions");

  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> nu = innovation(fs, obs);
  const MatrixX S = innovation_covariance(fs, obs);

  const Eigen::SelfAdjointEigenSolver<MatrixX> eig(S, Eigen::EigenvaluesOnly);
  const Scalar lmin = eig.eigenvalues().minCoeff();
  const Scalar lmax = eig.eigenvalues().maxCoeff();
  if (!(lmin > 0) || lmax / lmin > Scalar(kMaxInnovationCondition)) {
    throw UpdateRejected("update: innovation covariance is singular or ill-conditioned",
                         nu.template cast<double>());
  }
  const Eigen::LLT<MatrixX> llt(S);
  if (llt.info() != Eigen::Success) {
    throw UpdateRejected("update: Cholesky factorization failed", nu.template cast<double>());
  }

  // K = P H^T S^-1, via S K^T = H P.
  const Gain PHt = fs.P * obs.H.transpose();
  const Gain K = llt.solve(PHt.transpose()).transpose();

  FilterState<Scalar, N> out;
  out.timestamp = fs.timestamp;
  out.x = fs.x + K * nu;
  const Eigen::Matrix<Scalar, N, N> I_KH = Eigen::Matrix<Scalar, N, N>::Identity() - K * obs.H;
  out.P = I_KH * fs.P * I_KH.transpose() + K * obs.R * K.transpose();
  out.P = (out.P + out.P.transpose()) / 2;
  return out;
}

/// Row-concatenate observations with block-diagonal noise.
template <typename Scalar, int N>
Observation<Scalar, N> stack(std::span<const Observation<Scalar, N>> parts) {
  if (parts.empty()) throw std::invalid_argument("stack: no observations");
  Eigen::Index rows = 0;
  for (const auto& p : parts) rows += p.rows();
  Observation<Scalar, N> out;
  out.z.resize(rows);
  out.H.resize(rows, N);
  using Noise = typename Observation<Scalar, N>::Noise;
  out.R = Noise::Zero(rows, rows);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    const Eigen::Index m = p.rows();
    out.z.segment(at, m) = p.z;
    out.H.middleRows(at, m) = p.H;
    out.R.block(at, at, m, m) = p.R;
    at += m;
  }
  out.kind = ObservationKind::stacked;
  return out;
}

/// Chi-square innovation gate: accept iff nu^T S^-1 nu <= chi2_{m}(1 - alpha).
template <typename Scalar>
bool gate(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& nu,
          const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& S, Scalar alpha) {
  const Eigen::LLT<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> llt(S);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("gate: S is not positive definite");
  const Scalar d2 = nu.dot(llt.solve(nu));
  const Scalar threshold = chi_square_quantile<Scalar>(1 - alpha, static_cast<int>(nu.size()));
  return d2 <= threshold;
}

/// Normalized estimation error squared e^T P^-1 e.
template <typename Scalar, int M>
Scalar nees(const Eigen::Matrix<Scalar, M, 1>& error, const Eigen::Matrix<Scalar, M, M>& P) {
  return error.dot(P.ldlt().solve(error));
}

using FilterState15 = FilterState<double, kErrorStates>;
using Observation15 = Observation<double, kErrorStates>;

}  // namespace cin
