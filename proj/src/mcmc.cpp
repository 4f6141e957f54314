#include "mmnl/mcmc.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "mmnl/densities.hpp"
#include "mmnl/linalg.hpp"
#include "mmnl/model.hpp"
#include "mmnl/parallel.hpp"

namespace mmnl {

void McmcConfig::validate() const {
  if (chains < 2) throw std::invalid_argument("McmcConfig: need >= 2 chains for diagnostics");
  if (iterations < 2) throw std::invalid_argument("McmcConfig: iterations must be >= 2");
  if (thin < 1) throw std::invalid_argument("McmcConfig: thin must be >= 1");
  if (!(burn_in >= 0.0) || burn_in >= 1.0) {
    throw std::invalid_argument("McmcConfig: burn_in must lie in [0, 1)");
  }
  if (!(init_rw_scale > 0.0)) {
    throw std::invalid_argument("McmcConfig: init_rw_scale must be positive");
  }
}

int McmcConfig::retained_scans() const {
  return static_cast<int>(std::floor(iterations * (1.0 - burn_in)));
}

int McmcConfig::burn_scans() const { return iterations - retained_scans(); }

int McmcConfig::retained_draws() const { return retained_scans() / thin; }

int PosteriorDraws::total_draws() const {
  int n = 0;
  for (const auto& c : chains) n += static_cast<int>(c.zeta.size());
  return n;
}

GaussianParams zeta_conditional(const std::vector<Vector>& betas, const Matrix& omega,
                                const Hyperpriors& priors) {
  const auto K = priors.mu0.size();
  const int H = static_cast<int>(betas.size());
  const Matrix sigma0_inv = spd_inverse(priors.Sigma0, "zeta_conditional Sigma0");
  const Matrix omega_inv = spd_inverse(omega, "zeta_conditional Omega");
  GaussianParams out;
  out.cov = spd_inverse(sigma0_inv + H * omega_inv, "zeta_conditional precision");
  Vector beta_sum = Vector::Zero(K);
  for (const auto& b : betas) beta_sum += b;
  out.mean = out.cov * (sigma0_inv * priors.mu0 + omega_inv * beta_sum);
  return out;
}

InvWishartParams omega_conditional(const std::vector<Vector>& betas, const Vector& zeta,
                                   const Vector& a, const Hyperpriors& priors) {
  const auto K = zeta.size();
  InvWishartParams out;
  out.df = static_cast<double>(betas.size()) + priors.nu + K - 1.0;
  out.scale = 2.0 * priors.nu * a.cwiseInverse().asDiagonal().toDenseMatrix();
  for (const auto& b : betas) {
    const Vector d = b - zeta;
    out.scale += d * d.transpose();
  }
  return out;
}

InvGammaParams a_conditional(const Matrix& omega, const Hyperpriors& priors) {
  const auto K = omega.rows();
  const Matrix omega_inv = spd_inverse(omega, "a_conditional Omega");
  InvGammaParams out;
  out.shape = Vector::Constant(K, 0.5 * (priors.nu + K));
  out.rate = (priors.nu * omega_inv.diagonal().array() + priors.A.array().pow(-2)).matrix();
  return out;
}

Vector gibbs_zeta(const std::vector<Vector>& betas, const Matrix& omega,
                  const Hyperpriors& priors, RngStream& rng) {
  const auto params = zeta_conditional(betas, omega, priors);
  return mvnormal_draw(params.mean, params.cov, rng);
}

Matrix gibbs_omega(const std::vector<Vector>& betas, const Vector& zeta,
                   const Vector& a, const Hyperpriors& priors, RngStream& rng) {
  const auto params = omega_conditional(betas, zeta, a, priors);
  return inv_wishart_draw(params.scale, params.df, rng);
}

Vector gibbs_a(const Matrix& omega, const Hyperpriors& priors, RngStream& rng) {
  const auto params = a_conditional(omega, priors);
  Vector a(params.shape.size());
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    a[k] = inv_gamma_draw(params.shape[k], params.rate[k], rng);
  }
  return a;
}

MhResult rw_metropolis_beta(const AgentData& agent, const Vector& current,
                            const Vector& zeta, const Matrix& omega, double scale,
                            RngStream& rng) {
  if (!(scale > 0.0)) {
    throw std::invalid_argument("rw_metropolis_beta: scale must be positive");
  }
  const auto target = [&](const Vector& beta) {
    return log_likelihood_agent(agent, beta) + log_mvnormal(beta, zeta, omega);
  };
  const Vector proposal = current + scale * rng.normal_vector(static_cast<int>(current.size()));
  const double log_ratio = target(proposal) - target(current);
  MhResult out;
  if (std::log(rng.uniform_pos()) < log_ratio) {
    out.beta = proposal;
    out.accepted = true;
  } else {
    out.beta = current;
    out.accepted = false;
  }
  return out;
}

namespace {

ChainDraws run_single_chain(const ChoiceDataset& dataset, const Hyperpriors& priors,
                            const McmcConfig& cfg, std::uint64_t seed, int chain) {
  const int H = dataset.H();
  const int K = dataset.K;
  const int burn = cfg.burn_scans();

  RngStream init_rng =
      RngStream::derive(seed, RngDomain::kChainInit, static_cast<std::uint64_t>(chain));
  // Overdispersed starts so the between-chain diagnostic has teeth.
  Vector zeta = priors.mu0 + init_rng.normal_vector(K);
  Matrix omega = Matrix::Identity(K, K);
  Vector a = Vector::Ones(K);
  std::vector<Vector> betas(H, zeta);

  std::vector<double> log_scale(H, std::log(cfg.init_rw_scale));
  std::vector<long> accept_count(H, 0);

  ChainDraws out;
  const int n_keep = cfg.retained_draws();
  out.zeta.reserve(n_keep);
  out.omega.reserve(n_keep);
  out.a.reserve(n_keep);

  const auto agent_key = [&](int h) {
    return (static_cast<std::uint64_t>(chain) << 32) | static_cast<std::uint64_t>(h);
  };
  const std::uint64_t global_key =
      (static_cast<std::uint64_t>(chain) << 32) | 0xffffffffULL;

  for (int scan = 1; scan <= cfg.iterations; ++scan) {
    for (int h = 0; h < H; ++h) {
      RngStream rng = RngStream::derive(seed, RngDomain::kMcmc, agent_key(h),
                                        static_cast<std::uint64_t>(scan));
      const auto mh = rw_metropolis_beta(dataset.agents[h], betas[h], zeta, omega,
                                         std::exp(log_scale[h]), rng);
      betas[h] = mh.beta;
      if (mh.accepted) ++accept_count[h];
      if (scan <= burn) {
        const double gain = 1.0 / std::pow(static_cast<double>(scan), 0.6);
        log_scale[h] += gain * ((mh.accepted ? 1.0 : 0.0) - 0.234);
      }
    }
    RngStream grng = RngStream::derive(seed, RngDomain::kMcmc, global_key,
                                       static_cast<std::uint64_t>(scan));
    zeta = gibbs_zeta(betas, omega, priors, grng);
    omega = gibbs_omega(betas, zeta, a, priors, grng);
    a = gibbs_a(omega, priors, grng);

    if (scan > burn && (scan - burn) % cfg.thin == 0 &&
        static_cast<int>(out.zeta.size()) < n_keep) {
      out.zeta.push_back(zeta);
      out.omega.push_back(omega);
      out.a.push_back(a);
      if (cfg.keep_betas) {
        Matrix stacked(H, K);
        for (int h = 0; h < H; ++h) stacked.row(h) = betas[h].transpose();
        out.betas.push_back(std::move(stacked));
      }
    }
  }
  out.acceptance_rate.resize(H);
  for (int h = 0; h < H; ++h) {
    out.acceptance_rate[h] = static_cast<double>(accept_count[h]) / cfg.iterations;
  }
  return out;
}

}  // namespace

PosteriorDraws run_chains(const ChoiceDataset& dataset, const Hyperpriors& priors,
                          const McmcConfig& cfg, std::uint64_t seed, int threads) {
  dataset.validate();
  priors.validate(dataset.K);
  cfg.validate();
  PosteriorDraws draws;
  draws.K = dataset.K;
  draws.H = dataset.H();
  draws.chains.resize(cfg.chains);
  parallel_for(static_cast<std::size_t>(cfg.chains), threads, [&](std::size_t c) {
    draws.chains[c] =
        run_single_chain(dataset, priors, cfg, seed, static_cast<int>(c));
  });
  return draws;
}

double gelman_rubin(const std::vector<std::vector<double>>& chain_series) {
  const int m = static_cast<int>(chain_series.size());
  if (m < 2) throw std::invalid_argument("gelman_rubin: need >= 2 chains");
  const std::size_t n = chain_series.front().size();
  if (n < 4) throw std::invalid_argument("gelman_rubin: chains shorter than 4");
  for (const auto& s : chain_series) {
    if (s.size() != n) throw std::invalid_argument("gelman_rubin: unequal chain lengths");
  }
  const double dn = static_cast<double>(n);
  std::vector<double> means(m);
  double w = 0.0;
  for (int j = 0; j < m; ++j) {
    double mean = 0.0;
    for (double v : chain_series[j]) mean += v;
    mean /= dn;
    means[j] = mean;
    double ss = 0.0;
    for (double v : chain_series[j]) ss += (v - mean) * (v - mean);
    w += ss / (dn - 1.0);
  }
  w /= m;
  double grand = 0.0;
  for (double v : means) grand += v;
  grand /= m;
  double b_over_n = 0.0;
  for (double v : means) b_over_n += (v - grand) * (v - grand);
  b_over_n /= (m - 1.0);

  if (w == 0.0) {
    return b_over_n == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  }
  const double var_plus = (dn - 1.0) / dn * w + b_over_n;
  return std::sqrt(var_plus / w);
}

std::vector<PsrfEntry> psrf_report(const PosteriorDraws& draws) {
  std::vector<PsrfEntry> report;
  const int K = draws.K;
  const auto series_for = [&](const std::function<double(const ChainDraws&, int)>& get) {
    std::vector<std::vector<double>> series(draws.chains.size());
    for (std::size_t c = 0; c < draws.chains.size(); ++c) {
      const int n = static_cast<int>(draws.chains[c].zeta.size());
      series[c].resize(n);
      for (int d = 0; d < n; ++d) series[c][d] = get(draws.chains[c], d);
    }
    return series;
  };
  for (int k = 0; k < K; ++k) {
    PsrfEntry entry;
    entry.name = "zeta_" + std::to_string(k + 1);
    entry.psrf = gelman_rubin(
        series_for([k](const ChainDraws& c, int d) { return c.zeta[d][k]; }));
    report.push_back(std::move(entry));
  }
  for (int k = 0; k < K; ++k) {
    PsrfEntry entry;
    entry.name = "omega_" + std::to_string(k + 1) + std::to_string(k + 1);
    entry.psrf = gelman_rubin(
        series_for([k](const ChainDraws& c, int d) { return c.omega[d](k, k); }));
    report.push_back(std::move(entry));
  }
  return report;
}

}  // namespace mmnl
