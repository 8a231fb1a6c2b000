#include "dendrostate/kalman.hpp"

#include <cmath>

#include "dendrostate/conjugate.hpp"
#include "dendrostate/errors.hpp"

namespace dendrostate {

namespace {

Eigen::VectorXd sample_path_point(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                  Rng& rng) {
  if (cov.diagonal().maxCoeff() < 1e-300) return mean;
  return sample_mvn_covariance(mean, cov, rng);
}

// Symmetrize and, if needed, add escalating jitter until an LLT
// factorization succeeds. Returns the factorization of the repaired
// matrix; bumps the event counter when jitter was required.
Eigen::LLT<Eigen::MatrixXd> psd_factor(Eigen::MatrixXd& m, int* jitter_events) {
  m = 0.5 * (m + m.transpose()).eval();
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() == Eigen::Success) return llt;
  double scale = std::max(m.diagonal().cwiseAbs().maxCoeff(), 1e-30);
  for (int attempt = 0; attempt < 8; ++attempt) {
    double jitter = scale * std::pow(10.0, attempt - 13);
    Eigen::MatrixXd repaired = m + jitter * Eigen::MatrixXd::Identity(m.rows(), m.cols());
    llt.compute(repaired);
    if (llt.info() == Eigen::Success) {
      if (jitter_events) ++(*jitter_events);
      m = repaired;
      return llt;
    }
  }
  throw NumericError("kalman: covariance not repairable to positive definite");
}

}  // namespace

StateObservations window_observations(const ModelDesign& design, const Eigen::VectorXd& alpha,
                                      const WindowPlan& plan) {
  if (alpha.size() != design.n_cells()) {
    throw NumericError("window_observations: alpha length does not match design cells");
  }
  const int T = design.n_years;
  StateObservations obs;
  obs.F.resize(static_cast<std::size_t>(T));
  obs.y.resize(static_cast<std::size_t>(T));
  int hw = plan.mode == WindowPlan::Mode::windowed ? plan.half_width : 0;

  // Cells sorted by year for each target year's span.
  std::vector<std::vector<int>> cells_in_year(static_cast<std::size_t>(T));
  for (int c = 0; c < design.n_cells(); ++c) {
    cells_in_year[static_cast<std::size_t>(design.cells[static_cast<std::size_t>(c)].second)]
        .push_back(c);
  }
  for (int t = 0; t < T; ++t) {
    std::vector<int> rows;
    for (int s = std::max(0, t - hw); s <= std::min(T - 1, t + hw); ++s) {
      for (int c : cells_in_year[static_cast<std::size_t>(s)]) rows.push_back(c);
    }
    Eigen::MatrixXd F(static_cast<Eigen::Index>(rows.size()), design.climate.cols());
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      F.row(static_cast<Eigen::Index>(r)) = design.climate.row(rows[r]);
      y[static_cast<Eigen::Index>(r)] = alpha[rows[r]];
    }
    obs.F[static_cast<std::size_t>(t)] = std::move(F);
    obs.y[static_cast<std::size_t>(t)] = std::move(y);
  }
  return obs;
}

KalmanResult kalman_filter(const StateObservations& obs, const Eigen::MatrixXd& sigma_theta,
                           double tau2, const Eigen::VectorXd& m0, const Eigen::MatrixXd& C0) {
  const int T = obs.n_years();
  if (T == 0) throw NumericError("kalman_filter: no years");
  if (!(tau2 > 0)) throw NumericError("kalman_filter: tau2 must be positive");
  const Eigen::Index p = m0.size();

  KalmanResult out;
  out.pred_mean.resize(static_cast<std::size_t>(T));
  out.filt_mean.resize(static_cast<std::size_t>(T));
  out.pred_cov.resize(static_cast<std::size_t>(T));
  out.filt_cov.resize(static_cast<std::size_t>(T));

  Eigen::VectorXd m = m0;
  Eigen::MatrixXd C = C0;
  for (int t = 0; t < T; ++t) {
    // Predict: identity evolution plus random-walk noise.
    Eigen::VectorXd m_pred = m;
    Eigen::MatrixXd C_pred = C + sigma_theta;
    out.pred_mean[static_cast<std::size_t>(t)] = m_pred;
    out.pred_cov[static_cast<std::size_t>(t)] = C_pred;

    const Eigen::MatrixXd& F = obs.F[static_cast<std::size_t>(t)];
    const Eigen::VectorXd& y = obs.y[static_cast<std::size_t>(t)];
    if (F.rows() == 0) {
      m = m_pred;
      C = C_pred;
    } else {
      if (F.cols() != p) throw NumericError("kalman_filter: row dimension mismatch");
      // Information-form update: cheap for small p and many rows.
      Eigen::MatrixXd C_pred_work = C_pred;
      auto llt_pred = psd_factor(C_pred_work, &out.jitter_events);
      Eigen::MatrixXd prior_precision = llt_pred.solve(Eigen::MatrixXd::Identity(p, p));
      Eigen::MatrixXd post_precision = prior_precision + F.transpose() * F / tau2;
      Eigen::VectorXd linear = prior_precision * m_pred + F.transpose() * y / tau2;
      Eigen::MatrixXd post_precision_work = post_precision;
      auto llt_post = psd_factor(post_precision_work, &out.jitter_events);
      m = llt_post.solve(linear);
      C = llt_post.solve(Eigen::MatrixXd::Identity(p, p));
      C = 0.5 * (C + C.transpose()).eval();
    }
    out.filt_mean[static_cast<std::size_t>(t)] = m;
    out.filt_cov[static_cast<std::size_t>(t)] = C;
  }
  return out;
}

std::vector<Eigen::VectorXd> kalman_smoother(const KalmanResult& filt,
                                             const Eigen::MatrixXd& sigma_theta,
                                             std::vector<Eigen::MatrixXd>* cov_out) {
  (void)sigma_theta;  // already folded into the stored one-step-ahead covariances
  const int T = static_cast<int>(filt.filt_mean.size());
  std::vector<Eigen::VectorXd> mean(static_cast<std::size_t>(T));
  std::vector<Eigen::MatrixXd> cov(static_cast<std::size_t>(T));
  mean[static_cast<std::size_t>(T - 1)] = filt.filt_mean[static_cast<std::size_t>(T - 1)];
  cov[static_cast<std::size_t>(T - 1)] = filt.filt_cov[static_cast<std::size_t>(T - 1)];
  for (int t = T - 2; t >= 0; --t) {
    const Eigen::VectorXd& m_f = filt.filt_mean[static_cast<std::size_t>(t)];
    const Eigen::MatrixXd& C_f = filt.filt_cov[static_cast<std::size_t>(t)];
    const Eigen::VectorXd& m_pred = filt.pred_mean[static_cast<std::size_t>(t + 1)];
    const Eigen::MatrixXd& C_pred = filt.pred_cov[static_cast<std::size_t>(t + 1)];
    if (C_pred.diagonal().maxCoeff() < 1e-300) {
      // Degenerate: the state is known exactly.
      mean[static_cast<std::size_t>(t)] = m_f;
      cov[static_cast<std::size_t>(t)] = C_f;
      continue;
    }
    Eigen::MatrixXd C_pred_work = C_pred;
    auto llt = psd_factor(C_pred_work, nullptr);
    Eigen::MatrixXd G = llt.solve(C_f).transpose();  // C_f * C_pred^{-1}
    mean[static_cast<std::size_t>(t)] =
        m_f + G * (mean[static_cast<std::size_t>(t + 1)] - m_pred);
    Eigen::MatrixXd C_s =
        C_f + G * (cov[static_cast<std::size_t>(t + 1)] - C_pred) * G.transpose();
    cov[static_cast<std::size_t>(t)] = 0.5 * (C_s + C_s.transpose());
  }
  if (cov_out) *cov_out = std::move(cov);
  return mean;
}

std::vector<Eigen::VectorXd> ffbs(const KalmanResult& filt, const Eigen::MatrixXd& sigma_theta,
                                  Rng& rng) {
  (void)sigma_theta;  // already folded into the stored one-step-ahead covariances
  const int T = static_cast<int>(filt.filt_mean.size());
  std::vector<Eigen::VectorXd> path(static_cast<std::size_t>(T));
  path[static_cast<std::size_t>(T - 1)] =
      sample_path_point(filt.filt_mean[static_cast<std::size_t>(T - 1)],
                        filt.filt_cov[static_cast<std::size_t>(T - 1)], rng);
  for (int t = T - 2; t >= 0; --t) {
    const Eigen::VectorXd& m_f = filt.filt_mean[static_cast<std::size_t>(t)];
    const Eigen::MatrixXd& C_f = filt.filt_cov[static_cast<std::size_t>(t)];
    const Eigen::VectorXd& m_pred = filt.pred_mean[static_cast<std::size_t>(t + 1)];
    const Eigen::MatrixXd& C_pred = filt.pred_cov[static_cast<std::size_t>(t + 1)];
    if (C_pred.diagonal().maxCoeff() < 1e-300 || C_f.diagonal().maxCoeff() < 1e-300) {
      path[static_cast<std::size_t>(t)] = m_f;
      continue;
    }
    Eigen::MatrixXd C_pred_work = C_pred;
    auto llt = psd_factor(C_pred_work, nullptr);
    Eigen::MatrixXd G = llt.solve(C_f).transpose();  // C_f * C_pred^{-1}
    Eigen::VectorXd mean = m_f + G * (path[static_cast<std::size_t>(t + 1)] - m_pred);
    Eigen::MatrixXd cov = C_f - G * C_pred * G.transpose();
    path[static_cast<std::size_t>(t)] = sample_path_point(mean, cov, rng);
  }
  return path;
}

}  // namespace dendrostate
