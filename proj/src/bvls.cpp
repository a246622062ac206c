#include "gridsense/bvls.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <sstream>
#include <vector>

#include "gridsense/types.hpp"

namespace gridsense {

namespace {

enum Setting : int { kLower = -1, kFree = 0, kUpper = 1 };

}  // namespace

BvlsResult bvls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                double kkt_tol, int max_iterations) {
  const int n = static_cast<int>(A.cols());
  if (b.size() != A.rows())
    throw ArgumentError("bvls: rhs length does not match matrix rows");
  if (lower.size() != n || upper.size() != n)
    throw ArgumentError("bvls: bound length does not match matrix columns");
  for (int j = 0; j < n; ++j)
    if (lower[j] > upper[j]) {
      std::ostringstream os;
      os << "bvls: inconsistent bounds on variable " << j << " ("
         << lower[j] << " > " << upper[j] << ")";
      throw ArgumentError(os.str());
    }
  if (max_iterations <= 0) max_iterations = 30 + 10 * n;

  Eigen::VectorXd x(n);
  std::vector<int> setting(static_cast<size_t>(n), kFree);
  for (int j = 0; j < n; ++j) {
    x[j] = std::min(std::max(0.0, lower[j]), upper[j]);
    if (x[j] <= lower[j])
      setting[j] = kLower;
    else if (x[j] >= upper[j])
      setting[j] = kUpper;
  }

  auto free_indices = [&]() {
    std::vector<int> f;
    for (int j = 0; j < n; ++j)
      if (setting[j] == kFree) f.push_back(j);
    return f;
  };

  // least-squares over the free set, stepping back to the first bound hit
  auto optimize_free = [&]() {
    for (int guard = 0; guard <= n + 1; ++guard) {
      std::vector<int> f = free_indices();
      if (f.empty()) return;
      Eigen::MatrixXd af(A.rows(), static_cast<Eigen::Index>(f.size()));
      Eigen::VectorXd rhs = b;
      for (int j = 0; j < n; ++j)
        if (setting[j] != kFree) rhs -= A.col(j) * x[j];
      for (size_t k = 0; k < f.size(); ++k) af.col(static_cast<Eigen::Index>(k)) = A.col(f[k]);

      Eigen::VectorXd z = af.colPivHouseholderQr().solve(rhs);

      double alpha = 1.0;
      int blocker = -1;
      int blocker_side = kFree;
      for (size_t k = 0; k < f.size(); ++k) {
        int j = f[k];
        double zj = z[static_cast<Eigen::Index>(k)];
        if (zj > upper[j]) {
          double denom = zj - x[j];
          double a = denom > 0 ? (upper[j] - x[j]) / denom : 0.0;
          if (a < alpha) {
            alpha = a;
            blocker = j;
            blocker_side = kUpper;
          }
        } else if (zj < lower[j]) {
          double denom = zj - x[j];
          double a = denom < 0 ? (lower[j] - x[j]) / denom : 0.0;
          if (a < alpha) {
            alpha = a;
            blocker = j;
            blocker_side = kLower;
          }
        }
      }

      if (blocker < 0) {
        for (size_t k = 0; k < f.size(); ++k)
          x[f[k]] = z[static_cast<Eigen::Index>(k)];
        return;
      }

      for (size_t k = 0; k < f.size(); ++k) {
        int j = f[k];
        x[j] += alpha * (z[static_cast<Eigen::Index>(k)] - x[j]);
        // bind everything that landed on (or numerically crossed) a bound
        if (x[j] <= lower[j]) {
          x[j] = lower[j];
          setting[j] = kLower;
        } else if (x[j] >= upper[j]) {
          x[j] = upper[j];
          setting[j] = kUpper;
        }
      }
      x[blocker] = blocker_side == kUpper ? upper[blocker] : lower[blocker];
      setting[blocker] = blocker_side;
    }
  };

  optimize_free();

  BvlsResult result;
  int last_freed = -1;
  for (int iter = 0; iter < max_iterations; ++iter) {
    Eigen::VectorXd w = A.transpose() * (b - A * x);

    double worst = 0.0;
    int candidate = -1;
    double kkt = 0.0;
    for (int j = 0; j < n; ++j) {
      if (setting[j] == kFree) {
        kkt = std::max(kkt, std::abs(w[j]));
        continue;
      }
      if (lower[j] == upper[j]) continue;  // permanently fixed
      double violation = setting[j] == kLower ? w[j] : -w[j];
      if (violation > kkt) kkt = violation;
      if (violation > worst) {
        worst = violation;
        candidate = j;
      }
    }

    result.kkt_residual = std::max(kkt, 0.0);
    result.iterations = iter;
    if (worst <= kkt_tol || candidate < 0) {
      result.x = x;
      return result;
    }
    if (candidate == last_freed && worst <= 1e3 * kkt_tol) {
      // stalled on the same variable at noise level; accept
      result.x = x;
      return result;
    }
    setting[candidate] = kFree;
    last_freed = candidate;
    optimize_free();
  }

  std::ostringstream os;
  os << "bvls failed to satisfy the KKT conditions in " << max_iterations
     << " iterations; kkt residual " << result.kkt_residual << ", iterate [";
  for (int j = 0; j < n; ++j) os << (j ? ", " : "") << x[j];
  os << "]";
  throw NumericalError(os.str());
}

}  // namespace gridsense
