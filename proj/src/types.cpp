#include "mmnl/types.hpp"

#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <Eigen/Cholesky>

#include "mmnl/linalg.hpp"

namespace mmnl {

void ChoiceDataset::validate() const {
  if (J < 2) throw std::invalid_argument("ChoiceDataset: J must be >= 2");
  if (K < 1) throw std::invalid_argument("ChoiceDataset: K must be >= 1");
  if (agents.empty()) throw std::invalid_argument("ChoiceDataset: H must be >= 1");
  std::unordered_set<std::int64_t> ids;
  for (const auto& agent : agents) {
    if (!ids.insert(agent.agent_id).second) {
      std::ostringstream os;
      os << "ChoiceDataset: duplicate agent id " << agent.agent_id;
      throw std::invalid_argument(os.str());
    }
    for (const auto& ev : agent.events) {
      if (ev.x.rows() != J || ev.x.cols() != K) {
        std::ostringstream os;
        os << "ChoiceDataset: agent " << agent.agent_id << " event "
           << ev.event_id << " has matrix " << ev.x.rows() << "x" << ev.x.cols()
           << ", expected " << J << "x" << K;
        throw std::invalid_argument(os.str());
      }
      if (!ev.x.allFinite()) {
        std::ostringstream os;
        os << "ChoiceDataset: agent " << agent.agent_id << " event "
           << ev.event_id << " has non-finite covariates";
        throw std::invalid_argument(os.str());
      }
      if (ev.chosen < 0 || ev.chosen >= J) {
        std::ostringstream os;
        os << "ChoiceDataset: agent " << agent.agent_id << " event "
           << ev.event_id << " chose alternative " << ev.chosen
           << " outside [0," << J << ")";
        throw std::invalid_argument(os.str());
      }
    }
  }
}

Hyperpriors Hyperpriors::vague(int K) {
  Hyperpriors p;
  p.mu0 = Vector::Zero(K);
  p.Sigma0 = 1e6 * Matrix::Identity(K, K);
  p.nu = 2.0;
  p.A = Vector::Constant(K, 1e3);
  return p;
}

void Hyperpriors::validate(int K) const {
  if (mu0.size() != K || A.size() != K || Sigma0.rows() != K || Sigma0.cols() != K) {
    throw std::invalid_argument("Hyperpriors: dimension mismatch");
  }
  if (!(nu > 0.0)) throw std::invalid_argument("Hyperpriors: nu must be positive");
  if ((A.array() <= 0.0).any()) {
    throw std::invalid_argument("Hyperpriors: A must be positive");
  }
  Eigen::LLT<Matrix> llt(Sigma0);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("Hyperpriors: Sigma0 must admit a Cholesky factorization");
  }
}

GlobalVarParams GlobalVarParams::init(int H, int K, const Hyperpriors& priors) {
  priors.validate(K);
  GlobalVarParams g;
  g.omega = H + priors.nu + K - 1.0;
  g.b = Vector::Constant(K, 0.5 * (priors.nu + K));
  g.mu_zeta = Vector::Zero(K);
  g.Sigma_zeta = 0.01 * Matrix::Identity(K, K);
  g.c = g.b;
  g.set_upsilon((g.omega - K + 1.0) * Matrix::Identity(K, K));
  return g;
}

void GlobalVarParams::set_upsilon(Matrix upsilon) {
  Upsilon = std::move(upsilon);
  refresh_upsilon_inv();
}

void GlobalVarParams::refresh_upsilon_inv() {
  const auto K = Upsilon.rows();
  Eigen::LLT<Matrix> llt(Upsilon);
  if (llt.info() != Eigen::Success) {
    const double jitter = 1e-10 * Upsilon.trace() / static_cast<double>(K);
    Upsilon += jitter * Matrix::Identity(K, K);
    ++jitter_events;
    llt = spd_cholesky(Upsilon, "GlobalVarParams::Upsilon (after jitter)");
  }
  upsilon_inv = llt.solve(Matrix::Identity(K, K));
}

}  // namespace mmnl
