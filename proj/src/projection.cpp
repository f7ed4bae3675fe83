#include "mvrad/projection.hpp"

#include <cmath>

#include "mvrad/error.hpp"
#include "mvrad/rng.hpp"

namespace mvrad {

namespace {

constexpr double kTolerance = 1e-10;
constexpr int kMaxIterations = 100000;

void fix_sign(Vector& v) {
  Eigen::Index arg = 0;
  v.cwiseAbs().maxCoeff(&arg);
  if (v(arg) < 0.0) v = -v;
}

// Dominant eigenvector of the symmetric PSD matrix `cov`, kept orthogonal to
// `against` (if non-empty).
Vector power_iteration(const Matrix& cov, const Vector* against, Rng& rng) {
  const Eigen::Index d = cov.rows();
  Vector v(d);
  for (Eigen::Index i = 0; i < d; ++i) v(i) = rng.normal();
  auto orthogonalise = [&](Vector& x) {
    if (against) x -= against->dot(x) * (*against);
  };
  orthogonalise(v);
  v.normalize();
  for (int it = 0; it < kMaxIterations; ++it) {
    Vector next = cov * v;
    orthogonalise(next);
    const double norm = next.norm();
    if (norm < 1e-300) {
      // Remaining spectrum is zero: any orthonormal completion will do.
      return v;
    }
    next /= norm;
    if (next.dot(v) < 0.0) next = -next;
    const double change = (next - v).norm();
    v = next;
    if (change < kTolerance) break;
  }
  return v;
}

}  // namespace

Projection2d project_2d(const Matrix& data, std::uint64_t seed) {
  const Eigen::Index n = data.rows();
  const Eigen::Index d = data.cols();
  if (n < 2 || d < 2) throw Error(ErrorKind::InvalidArgument, "projection needs at least 2 rows and 2 columns");
  if (!data.allFinite()) throw Error(ErrorKind::NonFiniteValue, "projection input is not finite");

  const Eigen::RowVectorXd mean = data.colwise().mean();
  const Matrix centred = data.rowwise() - mean;
  if (centred.cwiseAbs().maxCoeff() == 0.0) throw Error(ErrorKind::DegenerateInput, "all rows are identical");

  const Matrix cov = (centred.transpose() * centred) / static_cast<double>(n - 1);
  Rng rng(seed);
  Vector first = power_iteration(cov, nullptr, rng);
  fix_sign(first);
  Vector second = power_iteration(cov, &first, rng);
  second -= first.dot(second) * first;
  second.normalize();

  // Rayleigh-Ritz on the found plane: diagonalise the 2x2 projected
  // covariance so the components are ordered even when power iteration
  // stopped short on nearly equal eigenvalues.
  Matrix basis(d, 2);
  basis.col(0) = first;
  basis.col(1) = second;
  const Eigen::Matrix2d reduced = basis.transpose() * cov * basis;
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> solver(reduced);
  Vector top = basis * solver.eigenvectors().col(1);
  Vector next = basis * solver.eigenvectors().col(0);
  fix_sign(top);
  fix_sign(next);

  Projection2d out;
  out.components.resize(d, 2);
  out.components.col(0) = top;
  out.components.col(1) = next;
  out.coords = centred * out.components;
  // Projections of centred data have zero mean up to rounding; remove it.
  out.coords.rowwise() -= out.coords.colwise().mean();
  for (int c = 0; c < 2; ++c) {
    out.variance[static_cast<std::size_t>(c)] = out.coords.col(c).squaredNorm() / static_cast<double>(n - 1);
  }
  return out;
}

}  // namespace mvrad
