#pragma once

// Dense complex linear algebra on C^n (hbar = 1): Hermitian spectra,
// spectral projectors, matrix exponentials and unitarity diagnostics.

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "holomech/errors.hpp"

namespace holomech {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

inline constexpr Complex kI{0.0, 1.0};

// Eigenvalues ascending; eigenvector columns orthonormal, each rescaled so its
// largest-magnitude component is real and positive.
struct EigenSystem {
  RVector values;
  CMatrix vectors;
};

// One eigenspace E_k = P_k(C^n). `basis` holds block_dim orthonormal columns
// spanning the range of `projector`.
struct SpectralBlock {
  double eigenvalue = 0.0;
  CMatrix projector;
  int block_dim = 0;
  CMatrix basis;
};

bool all_finite(const CMatrix& m);
void require_square_finite(const CMatrix& m, const char* what);

double frobenius(const CMatrix& m);
double max_entry_norm(const CMatrix& m);
CMatrix commutator(const CMatrix& a, const CMatrix& b);

CMatrix pauli_x();
CMatrix pauli_y();
CMatrix pauli_z();

// True iff max |(M - M^dagger)_jk| <= tol.
bool check_hermitian(const CMatrix& m, double tol);

// Throws NonHermitianInput unless check_hermitian(h, 1e-10).
EigenSystem eig_hermitian(const CMatrix& h);

// Adjacent eigenvalues are merged while their gap is at most
// gap_tol * max(1, spectral radius). Block eigenvalue is the cluster mean.
std::vector<SpectralBlock> spectral_projectors(const CMatrix& h, double gap_tol);

// Scaling and squaring around diagonal Pade approximants of degree 3..13.
CMatrix matrix_exp(const CMatrix& a);

// exp(i * scale * K) for Hermitian K through its eigendecomposition; the
// result is unitary to rounding regardless of |scale * K|.
CMatrix exp_i_hermitian(const CMatrix& k, double scale);

// Frobenius norm of U^dagger U - I.
double unitarity_defect(const CMatrix& u);

// Unitary polar factor of U (closest unitary in Frobenius norm).
CMatrix polar_unitarize(const CMatrix& u);

}  // namespace holomech
