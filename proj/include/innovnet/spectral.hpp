#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <vector>

#include "innovnet/errors.hpp"
#include "innovnet/model_params.hpp"

namespace innovnet {

// Spectral decomposition of an irreducible nonnegative matrix Phi in the form
//
//   Phi' = phi_star * u v' + U D V'
//
// where (phi_star, u, v) is the Perron root with right eigenvector u of Phi'
// and right eigenvector v of Phi, normalized so that v'1 = 1 and v'u = 1, and
// (U, D, V) collect the remaining eigenvalues (diagonal of D, sorted by
// descending real part) with V'U = I, V'u = 0, U'v = 0.  Consequently
// u v' + U V' = I.
struct EigenStructure {
  double phi_star = 0.0;
  std::complex<double> phi2_star{0.0, 0.0};  // largest real part among D
  Eigen::VectorXd u;
  Eigen::VectorXd v;
  Eigen::MatrixXcd U;   // n x (n-1)
  Eigen::MatrixXcd V;   // n x (n-1)
  Eigen::VectorXcd d;   // n-1 non-leading eigenvalues

  int n() const { return static_cast<int>(u.size()); }
  Eigen::MatrixXcd D() const {
    return Eigen::MatrixXcd(d.asDiagonal());
  }
  // Spectral projection I - u v' onto the non-leading invariant subspace,
  // equal to U V' but assembled from the real leading pair.
  Eigen::MatrixXd complement_projector() const {
    return Eigen::MatrixXd::Identity(n(), n()) - u * v.transpose();
  }
};

namespace detail {

inline constexpr double kSpectralTol = 1e-10;
inline constexpr double kPowerIterTol = 1e-12;
inline constexpr long kPowerIterMax = 100000;

// Leading eigenvalue of phi' by power iteration on phi' + I (the shift makes
// the Perron root strictly dominant even when other eigenvalues share its
// modulus).  Used as an independent cross-check of the dense path.
inline double perron_root_power_iteration(const Eigen::MatrixXd& phi) {
  const int n = static_cast<int>(phi.rows());
  const Eigen::MatrixXd a =
      phi.transpose() + Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(double(n)));
  double mu = 0.0;
  for (long it = 0; it < kPowerIterMax; ++it) {
    Eigen::VectorXd y = a * x;
    mu = x.dot(y);
    if ((y - mu * x).lpNorm<Eigen::Infinity>() <= kPowerIterTol * std::abs(mu)) {
      return mu - 1.0;
    }
    const double norm = y.norm();
    if (!(norm > 0.0)) break;
    x = y / norm;
  }
  throw ConvergenceFailure("power iteration did not reach tolerance 1e-12");
}

inline void check_reconstruction(const Eigen::MatrixXd& phi,
                                 const EigenStructure& e) {
  const int n = e.n();
  const double scale = 1.0 + phi.lpNorm<Eigen::Infinity>();
  Eigen::MatrixXcd rec = e.phi_star * (e.u * e.v.transpose()).cast<std::complex<double>>();
  if (n > 1) rec += e.U * e.d.asDiagonal() * e.V.transpose();
  const double res =
      (rec - phi.transpose().cast<std::complex<double>>()).cwiseAbs().maxCoeff();
  if (!(res <= kSpectralTol * scale)) {
    throw ConvergenceFailure("eigenstructure reconstruction residual " +
                             fmt(res) + " exceeds tolerance");
  }
  double ortho = std::abs(e.v.sum() - 1.0);
  ortho = std::max(ortho, std::abs(e.v.dot(e.u) - 1.0));
  if (n > 1) {
    ortho = std::max(ortho, (e.V.transpose() * e.U -
                             Eigen::MatrixXcd::Identity(n - 1, n - 1))
                                .cwiseAbs()
                                .maxCoeff());
    ortho = std::max(
        ortho,
        (e.V.transpose() * e.u.cast<std::complex<double>>()).cwiseAbs().maxCoeff());
    ortho = std::max(
        ortho,
        (e.U.transpose() * e.v.cast<std::complex<double>>()).cwiseAbs().maxCoeff());
    ortho = std::max(ortho, (e.u.cast<std::complex<double>>() * e.v.transpose() +
                             e.U * e.V.transpose() -
                             Eigen::MatrixXcd::Identity(n, n))
                                .cwiseAbs()
                                .maxCoeff());
  }
  if (!(ortho <= kSpectralTol)) {
    throw ConvergenceFailure("eigenstructure biorthogonality residual " +
                             fmt(ortho) + " exceeds tolerance");
  }
}

// Full decomposition through Eigen's dense nonsymmetric solver.  The columns
// of P are right eigenvectors of phi'; the rows of P^{-1} are the matching
// left eigenvectors, so biorthogonality holds to machine precision by
// construction.
inline EigenStructure eigen_structure_dense(const Eigen::MatrixXd& phi) {
  const int n = static_cast<int>(phi.rows());
  Eigen::EigenSolver<Eigen::MatrixXd> es(phi.transpose());
  if (es.info() != Eigen::Success) {
    throw ConvergenceFailure("dense eigensolver failed");
  }
  Eigen::MatrixXcd p = es.eigenvectors();
  Eigen::VectorXcd ev = es.eigenvalues();
  Eigen::MatrixXcd pinv = p.inverse();
  const double inv_res =
      (p * pinv - Eigen::MatrixXcd::Identity(n, n)).cwiseAbs().maxCoeff();
  if (!(inv_res <= 1e-8)) {
    throw ConvergenceFailure(
        "eigenvector matrix is numerically singular (defective input?)");
  }

  int lead = 0;
  for (int i = 1; i < n; ++i) {
    if (ev(i).real() > ev(lead).real()) lead = i;
  }
  if (!(ev(lead).real() > 0.0) ||
      std::abs(ev(lead).imag()) > kSpectralTol * std::abs(ev(lead))) {
    throw ConvergenceFailure("leading eigenvalue is not real positive");
  }

  EigenStructure out;
  out.phi_star = ev(lead).real();

  // Rotate the leading column real; adjust the matching row of the inverse by
  // the reciprocal factor so that row * column stays exactly 1.
  Eigen::VectorXcd ucol = p.col(lead);
  int imax = 0;
  for (int i = 1; i < n; ++i) {
    if (std::abs(ucol(i)) > std::abs(ucol(imax))) imax = i;
  }
  const std::complex<double> ph = ucol(imax) / std::abs(ucol(imax));
  ucol /= ph;
  Eigen::RowVectorXcd vrow = pinv.row(lead) * ph;
  if (ucol.imag().cwiseAbs().maxCoeff() > kSpectralTol ||
      vrow.imag().cwiseAbs().maxCoeff() > kSpectralTol) {
    throw ConvergenceFailure("Perron pair has a nonreal component");
  }
  Eigen::VectorXd u = ucol.real();
  Eigen::VectorXd v = vrow.real().transpose();
  if (u.maxCoeff() < 0.0) {  // global sign flip
    u = -u;
    v = -v;
  }
  if (!(u.minCoeff() > 0.0) || !(v.minCoeff() > 0.0)) {
    throw ConvergenceFailure("Perron pair is not strictly positive");
  }
  const double s = v.sum();
  out.v = v / s;
  out.u = u * s;  // preserves v'u = 1 from the matrix inverse

  // Complement, sorted by descending real part; conjugate pairs stay adjacent
  // with the +imag member first.
  std::vector<int> idx;
  for (int i = 0; i < n; ++i) {
    if (i != lead) idx.push_back(i);
  }
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (ev(a).real() != ev(b).real()) return ev(a).real() > ev(b).real();
    if (std::abs(ev(a).imag()) != std::abs(ev(b).imag())) {
      return std::abs(ev(a).imag()) < std::abs(ev(b).imag());
    }
    return ev(a).imag() > ev(b).imag();
  });
  out.U.resize(n, n - 1);
  out.V.resize(n, n - 1);
  out.d.resize(n - 1);
  for (int k = 0; k < n - 1; ++k) {
    Eigen::VectorXcd col = p.col(idx[k]);
    Eigen::RowVectorXcd row = pinv.row(idx[k]);
    // Phase convention: first entry of each U column with nonnegligible
    // modulus is rotated real positive (a plain sign convention in the real
    // case); the V column absorbs the inverse factor.
    int first = 0;
    while (first < n - 1 && std::abs(col(first)) <= 1e-12 * col.norm()) ++first;
    const std::complex<double> a = col(first) / std::abs(col(first));
    out.U.col(k) = col / a;
    out.V.col(k) = (row * a).transpose();
    out.d(k) = ev(idx[k]);
  }
  out.phi2_star = n > 1 ? out.d(0)
                        : std::complex<double>(
                              -std::numeric_limits<double>::infinity(), 0.0);
  return out;
}

// Closed forms for n = 2 in terms of the invariants r = u_1/u_2 and
// eta = phi_{12}/(phi_{12} + phi_{21}).
inline EigenStructure eigen_structure_n2(const Eigen::MatrixXd& phi) {
  const double a = phi(0, 0), b = phi(0, 1), c = phi(1, 0), d = phi(1, 1);
  const double disc = std::sqrt((a - d) * (a - d) + 4.0 * b * c);
  EigenStructure out;
  out.phi_star = 0.5 * ((a + d) + disc);
  out.phi2_star = std::complex<double>(0.5 * ((a + d) - disc), 0.0);
  const double r = c / (out.phi_star - a);
  const double eta = b / (b + c);
  const double om = 1.0 - eta;
  const double mix = om + r * r * eta;        // (1-eta) + r^2 eta
  const double nrm = std::sqrt(om * om + r * r * eta * eta);
  out.v = Eigen::Vector2d(r * eta, om) / (r * eta + om);
  out.u = Eigen::Vector2d(r, 1.0) * ((r * eta + om) / mix);
  out.U.resize(2, 1);
  out.V.resize(2, 1);
  out.U.col(0) = Eigen::Vector2cd(om / nrm, -r * eta / nrm);
  out.V.col(0) = Eigen::Vector2cd(nrm / mix, -r * nrm / mix);
  out.d.resize(1);
  out.d(0) = out.phi2_star;
  return out;
}

}  // namespace detail

// Spectral structure of an irreducible nonnegative square matrix.  n == 2 uses
// the closed forms and is cross-checked against the dense numeric path; n > 2
// uses the dense path with the Perron root independently confirmed by power
// iteration.  Every result is verified to reconstruct phi' and satisfy the
// biorthogonality contracts to 1e-10 before being returned.
inline EigenStructure eigen_structure(const Eigen::MatrixXd& phi) {
  const int n = static_cast<int>(phi.rows());
  if (n < 1 || phi.cols() != n) {
    throw std::invalid_argument("eigen_structure requires a square matrix");
  }
  if (phi.minCoeff() < -detail::kNonNegTol) {
    throw std::invalid_argument("eigen_structure requires a nonnegative matrix");
  }
  if (!is_irreducible(phi)) {
    throw std::invalid_argument("eigen_structure requires an irreducible matrix");
  }
  if (n == 1) {
    if (!(phi(0, 0) > 0.0)) {
      throw std::invalid_argument("1x1 input must be positive");
    }
    EigenStructure out;
    out.phi_star = phi(0, 0);
    out.phi2_star = std::complex<double>(
        -std::numeric_limits<double>::infinity(), 0.0);
    out.u = Eigen::VectorXd::Ones(1);
    out.v = Eigen::VectorXd::Ones(1);
    out.U.resize(1, 0);
    out.V.resize(1, 0);
    out.d.resize(0);
    return out;
  }
  if (n == 2) {
    EigenStructure cf = detail::eigen_structure_n2(phi);
    const EigenStructure num = detail::eigen_structure_dense(phi);
    const double tol = detail::kSpectralTol * (1.0 + phi.lpNorm<Eigen::Infinity>());
    if (std::abs(cf.phi_star - num.phi_star) > tol ||
        std::abs(cf.phi2_star.real() - num.phi2_star.real()) > tol ||
        (cf.u - num.u).lpNorm<Eigen::Infinity>() > tol ||
        (cf.v - num.v).lpNorm<Eigen::Infinity>() > tol) {
      throw ConvergenceFailure("closed-form and numeric spectra disagree");
    }
    detail::check_reconstruction(phi, cf);
    return cf;
  }
  EigenStructure out = detail::eigen_structure_dense(phi);
  const double pi_root = detail::perron_root_power_iteration(phi);
  if (std::abs(pi_root - out.phi_star) >
      1e-8 * std::max(1.0, out.phi_star)) {
    throw ConvergenceFailure("power iteration disagrees with dense solver");
  }
  detail::check_reconstruction(phi, out);
  return out;
}

// --- asymptotic covariance blocks ------------------------------------------------

// Projected second-moment blocks of the limiting fluctuation field.  With
// G = V' Sigma V and non-leading eigenvalues phi_h = d(h),
//
//   [S^{33}]_{h,j} = G_{h,j} / (phi_star - phi_h - phi_j)
//   [S^{13}]_{h,j} = phi_j * [S^{33}]_{h,j}
//   [S^{11}]_{h,j} = phi_h * phi_j * [S^{33}]_{h,j}
//
// and M^{ab} = U S^{ab} U'.  All three are real up to roundoff; m11 and m33
// are symmetric.  Requires the spectral gap 1/2 - Re(phi2_star)/phi_star to
// be positive, otherwise the integrals behind these blocks diverge.
struct CovarianceBlocks {
  Eigen::MatrixXd m11;
  Eigen::MatrixXd m13;  // not symmetric in general; m31 = m13'
  Eigen::MatrixXd m33;
  double gap = 0.0;
};

inline CovarianceBlocks covariance_blocks(const EigenStructure& eig,
                                          const Eigen::MatrixXd& sigma_det) {
  const int n = eig.n();
  if (sigma_det.rows() != n || sigma_det.cols() != n) {
    throw std::invalid_argument("sigma_det shape mismatch");
  }
  if ((sigma_det - sigma_det.transpose()).lpNorm<Eigen::Infinity>() >
      detail::kSpectralTol * (1.0 + sigma_det.lpNorm<Eigen::Infinity>())) {
    throw std::invalid_argument("sigma_det must be symmetric");
  }
  CovarianceBlocks out;
  out.gap = n > 1 ? 0.5 - eig.phi2_star.real() / eig.phi_star
                  : std::numeric_limits<double>::infinity();
  if (!(out.gap > 0.0)) {
    throw StabilityViolation("spectral gap " + detail::fmt(out.gap) +
                             " is not positive; fluctuation covariances diverge");
  }
  if (n == 1) {
    out.m11 = out.m13 = out.m33 = Eigen::MatrixXd::Zero(1, 1);
    return out;
  }
  const Eigen::MatrixXcd g =
      eig.V.transpose() * sigma_det.cast<std::complex<double>>() * eig.V;
  Eigen::MatrixXcd s33(n - 1, n - 1), s13(n - 1, n - 1), s11(n - 1, n - 1);
  for (int h = 0; h < n - 1; ++h) {
    for (int j = 0; j < n - 1; ++j) {
      const std::complex<double> denom = eig.phi_star - eig.d(h) - eig.d(j);
      s33(h, j) = g(h, j) / denom;
      s13(h, j) = eig.d(j) * s33(h, j);
      s11(h, j) = eig.d(h) * eig.d(j) * s33(h, j);
    }
  }
  auto realize = [&](const Eigen::MatrixXcd& s) {
    const Eigen::MatrixXcd m = eig.U * s * eig.U.transpose();
    const double im = m.imag().cwiseAbs().maxCoeff();
    const double re = m.real().cwiseAbs().maxCoeff();
    if (im > detail::kSpectralTol * (1.0 + re)) {
      throw ConvergenceFailure("covariance block has imaginary residue " +
                               detail::fmt(im));
    }
    return Eigen::MatrixXd(m.real());
  };
  out.m11 = realize(s11);
  out.m13 = realize(s13);
  out.m33 = realize(s33);
  out.m11 = 0.5 * (out.m11 + out.m11.transpose()).eval();
  out.m33 = 0.5 * (out.m33 + out.m33.transpose()).eval();
  return out;
}

// Deterministic-time CLT mode: fluctuations of the novelty counts are driven
// by the diffusion proxy Sigma = diag(u) (each process innovates at a rate
// proportional to its Perron weight); fluctuations of a single color's counts
// by Sigma = I (Bernoulli draws of bounded variance factored out separately).
enum class CltMode { gamma, w };

inline Eigen::MatrixXd sigma_det_for_mode(const EigenStructure& eig, CltMode mode) {
  const int n = eig.n();
  if (mode == CltMode::gamma) return Eigen::MatrixXd(eig.u.asDiagonal());
  return Eigen::MatrixXd::Identity(n, n);
}

// Limiting covariance (v' Sigma v / phi_star) u u' + M^{33} of the
// deterministic-time fluctuation vector, for an arbitrary symmetric Sigma.
inline Eigen::MatrixXd clt_covariance(const EigenStructure& eig,
                                      const Eigen::MatrixXd& sigma_det) {
  const CovarianceBlocks blocks = covariance_blocks(eig, sigma_det);
  const double scale = eig.v.dot(sigma_det * eig.v) / eig.phi_star;
  return scale * (eig.u * eig.u.transpose()) + blocks.m33;
}

inline Eigen::MatrixXd c_det(const EigenStructure& eig, CltMode mode) {
  return clt_covariance(eig, sigma_det_for_mode(eig, mode));
}

// --- whitening --------------------------------------------------------------------

// Rows span the range of the symmetric PSD input with T m T' = I on it.  The
// input must have rank exactly n-1 (the fluctuation covariances have a null
// direction along u); anything else throws RankDeficiency.  Eigenvalues below
// 1e-10 * lambda_max count as zero.
inline Eigen::MatrixXd whitening(const Eigen::MatrixXd& m) {
  const int n = static_cast<int>(m.rows());
  if (m.cols() != n) throw std::invalid_argument("whitening requires square input");
  if (n == 1) {
    if (std::abs(m(0, 0)) > 1e-300) {
      throw RankDeficiency("expected rank 0 for a 1x1 input, got a nonzero entry");
    }
    return Eigen::MatrixXd(0, 1);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) {
    throw ConvergenceFailure("symmetric eigensolver failed");
  }
  const Eigen::VectorXd ev = es.eigenvalues();  // ascending
  const double lmax = ev(n - 1);
  if (!(lmax > 0.0)) throw RankDeficiency("input has no positive eigenvalue");
  const double threshold = 1e-10 * lmax;
  if (ev(0) < -threshold) {
    throw RankDeficiency("input is not positive semidefinite (min eigenvalue " +
                         detail::fmt(ev(0)) + ")");
  }
  int rank = 0;
  for (int i = 0; i < n; ++i) {
    if (ev(i) > threshold) ++rank;
  }
  if (rank != n - 1) {
    throw RankDeficiency("rank " + std::to_string(rank) + " but expected " +
                         std::to_string(n - 1));
  }
  Eigen::MatrixXd t(n - 1, n);
  for (int k = 0; k < n - 1; ++k) {
    Eigen::VectorXd vec = es.eigenvectors().col(n - 1 - k);  // descending order
    int first = 0;
    while (first < n - 1 && std::abs(vec(first)) <= 1e-12) ++first;
    if (vec(first) < 0.0) vec = -vec;
    t.row(k) = vec.transpose() / std::sqrt(ev(n - 1 - k));
  }
  return t;
}

}  // namespace innovnet
