#include "holomech/operator_core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace holomech {

bool all_finite(const CMatrix& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      if (!std::isfinite(m(i, j).real()) || !std::isfinite(m(i, j).imag())) return false;
  return true;
}

void require_square_finite(const CMatrix& m, const char* what) {
  if (m.rows() == 0 || m.rows() != m.cols())
    throw Error(ErrorCode::DimensionMismatch,
                std::string(what) + ": expected a non-empty square matrix, got " +
                    std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  if (!all_finite(m))
    throw Error(ErrorCode::InvalidArgument, std::string(what) + ": non-finite entries");
}

double frobenius(const CMatrix& m) { return m.norm(); }

double max_entry_norm(const CMatrix& m) {
  double best = 0.0;
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) best = std::max(best, std::abs(m(i, j)));
  return best;
}

CMatrix commutator(const CMatrix& a, const CMatrix& b) { return a * b - b * a; }

CMatrix pauli_x() {
  CMatrix m(2, 2);
  m << 0.0, 1.0, 1.0, 0.0;
  return m;
}

CMatrix pauli_y() {
  CMatrix m(2, 2);
  m << 0.0, -kI, kI, 0.0;
  return m;
}

CMatrix pauli_z() {
  CMatrix m(2, 2);
  m << 1.0, 0.0, 0.0, -1.0;
  return m;
}

bool check_hermitian(const CMatrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  return max_entry_norm(m - m.adjoint()) <= tol;
}

EigenSystem eig_hermitian(const CMatrix& h) {
  require_square_finite(h, "eig_hermitian");
  if (!check_hermitian(h, 1e-10))
    throw Error(ErrorCode::NonHermitianInput,
                "eig_hermitian: max |H - H^dagger| = " + std::to_string(max_entry_norm(h - h.adjoint())));

  // Solve on the exactly Hermitian part so round-off asymmetry is ignored.
  const CMatrix sym = 0.5 * (h + h.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(sym);
  EigenSystem out{solver.eigenvalues(), solver.eigenvectors()};

  for (Eigen::Index j = 0; j < out.vectors.cols(); ++j) {
    auto col = out.vectors.col(j);
    double biggest = 0.0;
    for (Eigen::Index i = 0; i < col.size(); ++i) biggest = std::max(biggest, std::abs(col(i)));
    Eigen::Index pivot = 0;
    for (Eigen::Index i = 0; i < col.size(); ++i) {
      if (std::abs(col(i)) >= biggest * (1.0 - 1e-10)) {
        pivot = i;
        break;
      }
    }
    const Complex phase = col(pivot) / std::abs(col(pivot));
    col /= phase;
    col(pivot) = Complex(col(pivot).real(), 0.0);
  }
  return out;
}

std::vector<SpectralBlock> spectral_projectors(const CMatrix& h, double gap_tol) {
  if (!(gap_tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "spectral_projectors: gap_tol must be > 0");
  const EigenSystem es = eig_hermitian(h);
  const Eigen::Index n = es.values.size();
  const double radius = std::max(std::abs(es.values(0)), std::abs(es.values(n - 1)));
  const double threshold = gap_tol * std::max(1.0, radius);

  std::vector<SpectralBlock> blocks;
  Eigen::Index start = 0;
  for (Eigen::Index j = 1; j <= n; ++j) {
    if (j < n && es.values(j) - es.values(j - 1) <= threshold) continue;
    SpectralBlock b;
    b.block_dim = static_cast<int>(j - start);
    b.eigenvalue = es.values.segment(start, j - start).mean();
    b.basis = es.vectors.middleCols(start, j - start);
    b.projector = b.basis * b.basis.adjoint();
    blocks.push_back(std::move(b));
    start = j;
  }
  return blocks;
}

namespace {

double one_norm(const CMatrix& a) {
  return a.cwiseAbs().colwise().sum().maxCoeff();
}

constexpr std::array<double, 4> kPade3{120.0, 60.0, 12.0, 1.0};
constexpr std::array<double, 6> kPade5{30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
constexpr std::array<double, 8> kPade7{17297280.0, 8648640.0, 1995840.0, 277200.0,
                                       25200.0,    1512.0,    56.0,      1.0};
constexpr std::array<double, 10> kPade9{17643225600.0, 8821612800.0, 2075673600.0, 302702400.0,
                                        30270240.0,    2162160.0,    110880.0,     3960.0,
                                        90.0,          1.0};
constexpr std::array<double, 14> kPade13{
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
    129060195264000.0,   10559470521600.0,    670442572800.0,     33522128640.0,
    1323241920.0,        40840800.0,          960960.0,           16380.0,
    182.0,               1.0};

template <std::size_t N>
CMatrix pade_low(const CMatrix& a, const std::array<double, N>& b) {
  const Eigen::Index n = a.rows();
  const CMatrix ident = CMatrix::Identity(n, n);
  const CMatrix a2 = a * a;
  CMatrix u_even = b[1] * ident;
  CMatrix v_even = b[0] * ident;
  CMatrix power = ident;
  for (std::size_t k = 2; k < N; k += 2) {
    power = power * a2;
    u_even += b[k + 1] * power;
    v_even += b[k] * power;
  }
  const CMatrix u = a * u_even;
  return (v_even - u).partialPivLu().solve(v_even + u);
}

CMatrix pade13(const CMatrix& a) {
  const auto& b = kPade13;
  const Eigen::Index n = a.rows();
  const CMatrix ident = CMatrix::Identity(n, n);
  const CMatrix a2 = a * a;
  const CMatrix a4 = a2 * a2;
  const CMatrix a6 = a4 * a2;
  const CMatrix u =
      a * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident);
  const CMatrix v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident;
  return (v - u).partialPivLu().solve(v + u);
}

}  // namespace

CMatrix matrix_exp(const CMatrix& a) {
  require_square_finite(a, "matrix_exp");
  const double norm = one_norm(a);
  if (norm <= 1.495585217958292e-2) return pade_low(a, kPade3);
  if (norm <= 2.539398330063230e-1) return pade_low(a, kPade5);
  if (norm <= 9.504178996162932e-1) return pade_low(a, kPade7);
  if (norm <= 2.097847961257068e0) return pade_low(a, kPade9);

  constexpr double theta13 = 5.371920351148152e0;
  int squarings = 0;
  if (norm > theta13) squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm / theta13))));
  CMatrix result = pade13(a / std::ldexp(1.0, squarings));
  for (int k = 0; k < squarings; ++k) result = result * result;
  return result;
}

CMatrix exp_i_hermitian(const CMatrix& k, double scale) {
  const Eigen::Index n = k.rows();
  if (scale == 0.0 || (k.rows() == k.cols() && k.isZero(0.0))) return CMatrix::Identity(n, n);
  const EigenSystem es = eig_hermitian(k);
  CVector phases(n);
  for (Eigen::Index j = 0; j < n; ++j) phases(j) = std::exp(kI * (scale * es.values(j)));
  return es.vectors * phases.asDiagonal() * es.vectors.adjoint();
}

double unitarity_defect(const CMatrix& u) {
  return frobenius(u.adjoint() * u - CMatrix::Identity(u.cols(), u.cols()));
}

CMatrix polar_unitarize(const CMatrix& u) {
  require_square_finite(u, "polar_unitarize");
  Eigen::JacobiSVD<CMatrix> svd(u, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double smallest = svd.singularValues().minCoeff();
  if (smallest < 1e-14)
    throw Error(ErrorCode::SingularInput,
                "polar_unitarize: smallest singular value " + std::to_string(smallest) + " < 1e-14");
  return svd.matrixU() * svd.matrixV().adjoint();
}

}  // namespace holomech
