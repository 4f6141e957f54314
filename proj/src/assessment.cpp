#include "mmnl/assessment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "mmnl/errors.hpp"
#include "mmnl/linalg.hpp"
#include "mmnl/model.hpp"
#include "mmnl/parallel.hpp"

namespace mmnl {

namespace {

constexpr double kProbFloor = 1e-300;

// Average softmax probabilities over `draws` samples beta ~ N(zeta, Omega).
Vector pcd_at(const Matrix& x_new, const Vector& zeta, const Matrix& omega,
              int draws, RngStream& rng) {
  const auto llt = spd_cholesky(omega, "pcd Omega");
  const int K = static_cast<int>(zeta.size());
  Vector acc = Vector::Zero(x_new.rows());
  for (int i = 0; i < draws; ++i) {
    const Vector beta = zeta + llt.matrixL() * rng.normal_vector(K);
    acc += choice_probabilities(x_new, beta);
  }
  return acc / static_cast<double>(draws);
}

}  // namespace

Vector true_pcd(const Matrix& x_new, const Vector& zeta, const Matrix& omega,
                int draws, RngStream& rng) {
  if (draws < 1) throw std::invalid_argument("true_pcd: draws must be >= 1");
  if (omega.isZero(0.0)) return choice_probabilities(x_new, zeta);
  return pcd_at(x_new, zeta, omega, draws, rng);
}

Vector estimated_pcd(const Matrix& x_new, const PosteriorSource& source, int outer,
                     int inner, RngStream& rng, PcdDiagnostics* diag) {
  if (outer < 1 || inner < 1) {
    throw std::invalid_argument("estimated_pcd: outer and inner must be >= 1");
  }
  PcdDiagnostics local_diag;
  PcdDiagnostics& d = diag ? *diag : local_diag;

  if (const auto* tp = std::get_if<TrueParams>(&source)) {
    return true_pcd(x_new, tp->zeta, tp->Omega, inner, rng);
  }

  Vector acc = Vector::Zero(x_new.rows());
  int used = 0;
  if (const auto* vb = std::get_if<VariationalPosterior>(&source)) {
    const auto& g = vb->global;
    const auto zeta_llt = spd_cholesky(g.Sigma_zeta, "estimated_pcd Sigma_zeta");
    const int K = static_cast<int>(g.mu_zeta.size());
    for (int r = 0; r < outer; ++r) {
      const Vector zeta = g.mu_zeta + zeta_llt.matrixL() * rng.normal_vector(K);
      Matrix omega;
      bool ok = false;
      for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
        try {
          omega = inv_wishart_draw(g.Upsilon, g.omega, rng);
          ok = true;
        } catch (const NumericalError&) {
          ++d.omega_resamples;
        }
      }
      if (!ok) throw NumericalError("estimated_pcd: could not draw an SPD Omega");
      acc += pcd_at(x_new, zeta, omega, inner, rng);
      ++used;
    }
  } else {
    const auto& mc = std::get<McmcPosterior>(source);
    std::vector<std::pair<const Vector*, const Matrix*>> flat;
    for (const auto& chain : mc.draws.chains) {
      for (std::size_t i = 0; i < chain.zeta.size(); ++i) {
        flat.emplace_back(&chain.zeta[i], &chain.omega[i]);
      }
    }
    if (flat.empty()) throw std::invalid_argument("estimated_pcd: empty draws");
    const int total = static_cast<int>(flat.size());
    const int take = std::min(outer, total);
    for (int i = 0; i < take; ++i) {
      const int idx = static_cast<int>(
          static_cast<long long>(i) * total / take);
      acc += pcd_at(x_new, *flat[idx].first, *flat[idx].second, inner, rng);
      ++used;
    }
  }
  return acc / static_cast<double>(used);
}

double tv_distance(const Vector& p, const Vector& q) {
  if (p.size() != q.size()) throw std::invalid_argument("tv_distance: size mismatch");
  const auto check = [](const Vector& v, const char* name) {
    if (std::abs(v.sum() - 1.0) > 1e-8 || v.minCoeff() < -1e-12) {
      throw std::invalid_argument(std::string("tv_distance: ") + name +
                                  " is not a probability vector");
    }
  };
  check(p, "p");
  check(q, "q");
  return 0.5 * (p - q).cwiseAbs().sum();
}

double predictive_loglik(const PosteriorSource& source,
                         const std::vector<AgentData>& test_agents, int outer,
                         int inner, std::uint64_t seed, int threads) {
  std::vector<std::pair<int, int>> events;
  for (int i = 0; i < static_cast<int>(test_agents.size()); ++i) {
    for (int t = 0; t < test_agents[i].num_events(); ++t) events.emplace_back(i, t);
  }
  std::vector<double> per_event(events.size(), 0.0);
  parallel_for(events.size(), threads, [&](std::size_t e) {
    const auto [i, t] = events[e];
    const auto& agent = test_agents[i];
    const auto& ev = agent.events[t];
    RngStream rng = RngStream::derive(seed, RngDomain::kAssessment,
                                      static_cast<std::uint64_t>(agent.agent_id),
                                      static_cast<std::uint64_t>(t));
    const Vector pcd = estimated_pcd(ev.x, source, outer, inner, rng);
    per_event[e] = std::log(std::max(pcd[ev.chosen], kProbFloor));
  });
  return pairwise_sum<double>(per_event.size(),
                              [&](std::size_t e) { return per_event[e]; }, 0.0);
}

std::vector<std::vector<int>> kfold_split(const ChoiceDataset& dataset, int k,
                                          std::uint64_t seed) {
  const int H = dataset.H();
  if (k < 1 || k > H) throw std::invalid_argument("kfold_split: need 1 <= k <= H");
  RngStream rng = RngStream::derive(seed, RngDomain::kAssessment, 0x6f1dULL,
                                    static_cast<std::uint64_t>(k));
  std::vector<int> order = sample_without_replacement(H, H, rng);
  std::vector<std::vector<int>> folds(k);
  const int base = H / k;
  const int extra = H % k;
  int pos = 0;
  for (int f = 0; f < k; ++f) {
    const int size = base + (f < extra ? 1 : 0);
    folds[f].assign(order.begin() + pos, order.begin() + pos + size);
    std::sort(folds[f].begin(), folds[f].end());
    pos += size;
  }
  return folds;
}

TvSummary summarize_tv(std::vector<double> values) {
  TvSummary s;
  s.count = static_cast<int>(values.size());
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  const auto quantile = [&](double p) {
    const double pos = p * (values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
    const double frac = pos - lo;
    return values[lo] * (1.0 - frac) + values[hi] * frac;
  };
  s.min = values.front();
  s.q1 = quantile(0.25);
  s.median = quantile(0.5);
  s.q3 = quantile(0.75);
  s.max = values.back();
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) /
           static_cast<double>(values.size());
  return s;
}

}  // namespace mmnl
