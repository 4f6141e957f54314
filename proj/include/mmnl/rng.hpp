#ifndef MMNL_RNG_HPP
#define MMNL_RNG_HPP

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace mmnl {

// Stream domains keep unrelated consumers of randomness independent of each
// other (e.g. minibatch sampling never perturbs the SLR draws).
enum class RngDomain : std::uint64_t {
  kLocalBackend = 1,
  kMinibatch = 2,
  kSimulation = 3,
  kMcmc = 4,
  kAssessment = 5,
  kChainInit = 6,
};

std::uint64_t splitmix64(std::uint64_t& state);

// Counter-seeded xoshiro256++ stream with explicitly coded distributions.
// The standard library engines are portable but its distributions are not;
// everything here is pinned so runs are bit-reproducible across platforms
// and thread counts.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  // Derives an independent stream from (master seed, domain, key a, key b),
  // e.g. (seed, kLocalBackend, agent_id, sweep index).
  static RngStream derive(std::uint64_t master, RngDomain domain,
                          std::uint64_t a = 0, std::uint64_t b = 0);

  std::uint64_t next_u64();

  // Uniform on [0,1) with 53-bit resolution.
  double uniform();
  // Uniform on (0,1); safe as a log() argument.
  double uniform_pos();
  // Uniform integer on [0, n), n >= 1, via rejection (unbiased).
  std::uint64_t uniform_int(std::uint64_t n);

  double normal();  // standard normal, Box-Muller
  Eigen::VectorXd normal_vector(int n);

  // Gamma(shape, rate) by Marsaglia-Tsang; shape > 0, rate > 0.
  double gamma(double shape, double rate);
  double chi_square(double df);

 private:
  std::uint64_t s_[4];
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

// Draws m distinct indices from {0,...,n-1} by partial Fisher-Yates.
std::vector<int> sample_without_replacement(int n, int m, RngStream& rng);

}  // namespace mmnl

#endif  // MMNL_RNG_HPP
