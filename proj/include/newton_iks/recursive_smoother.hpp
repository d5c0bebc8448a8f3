#pragma once

#include <vector>

#include "newton_iks/core_types.hpp"
#include "newton_iks/linearize.hpp"

namespace newton_iks {

struct SmootherOptions {
  /// Joseph-form measurement covariance update instead of P - K S K^T.
  bool joseph_form = false;
};

/// Intermediates of one forward-backward pass.
///
/// Every vector is indexed by the time step k = 0..N. Entries that do not
/// exist are left empty: predicted/updated/innovation/K/U at k = 0, and the
/// smoothing gain G at k = N.
struct SmootherPass {
  std::vector<GaussianBelief> predicted;   // x^p_k, P^p_k
  std::vector<GaussianBelief> innovation;  // mu_k, Sigma_k
  std::vector<GaussianBelief> updated;     // x^y_k, P^y_k
  std::vector<GaussianBelief> filtered;    // x^f_k, P^f_k (after the pseudo update)
  std::vector<GaussianBelief> smoothed;
  std::vector<Matrix> gain_K;
  std::vector<Matrix> gain_U;
  std::vector<Matrix> gain_G;
};

struct SmootherResult {
  Trajectory smoothed;
  SmootherPass pass;
};

/// One regularized Newton step computed as an RTS smoother over the
/// modified affine model. The pseudo update is done in information form,
///   P^f = ((P^y)^-1 + Lambda_k)^-1,  x^f = x^y + P^f Lambda_k (xh_k - x^y),
/// so Lambda_k = 0 is a no-op and Lambda_k never has to be inverted.
///
/// Throws CovarianceNotPD at the first step whose factorization fails.
SmootherResult newton_iks_iteration(const AffineAugmentedSSM& aug, const MeasurementSeq& ys,
                                    const SmootherOptions& options = {});

}  // namespace newton_iks
