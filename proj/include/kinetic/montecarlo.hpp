#pragma once

#include "kinetic/fourier.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace kinetic {

// Independent stream per (seed, index): mt19937_64 seeded through a splitmix64 hash.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t index);
  // Uniform on (0, 1) built from the top 53 bits, never 0 or 1.
  double uniform();
  double exponential(double rate);

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

enum class McInitial { Stationary, CosineTimesG };

struct McInitialSpec {
  McInitial kind = McInitial::CosineTimesG;
  double power = 2.0;  // g proportional to sigma^power
};

// Continuous-time jump process: free flight, thinning at the majorant rate, post-jump
// velocity with density k(v', v) / sigma(v). Built-in kernels use continuum velocities;
// tabulated kernels jump between grid nodes.
class JumpProcess {
 public:
  explicit JumpProcess(const Model& model);

  double majorant() const { return majorant_; }
  double sigma(double v) const;
  double post_jump(double v, RngStream& rng) const;
  double initial_velocity(const McInitialSpec& spec, RngStream& rng) const;
  bool grid_restricted() const { return !model_->kernel.is_builtin(); }
  const Model& model() const { return *model_; }

 private:
  const Model* model_;
  double majorant_ = 0.0;
  std::vector<std::vector<double>> column_cdf_;  // tabulated kernels
  std::vector<double> psi_cdf_;                  // discrete Psi, for stationary starts on any kernel
  int grid_index(double v) const;
  double sample_cell(const std::vector<double>& cdf, RngStream& rng) const;
};

struct Ensemble {
  double t = 0.0;
  std::vector<double> x;
  std::vector<double> v;
};

struct McOptions {
  long long n_particles = 100000;
  std::vector<double> snapshots{20.0};
  std::uint64_t seed = 7;
  int block_size = 4096;
  int threads = 1;
};

// One ensemble per snapshot time; deterministic in (seed, block_size) for any thread count.
std::vector<Ensemble> simulate(const JumpProcess& process, const McInitialSpec& init, const McOptions& opt);

// Waiting times between accepted jumps of one particle started at v0.
std::vector<double> interarrival_sample(const JumpProcess& process, double v0, int count, std::uint64_t seed);

// Bin probabilities on [0,1) x [-vmax, vmax], row-major in x then v.
struct BinnedReference {
  int nx = 0;
  int nv = 0;
  double vmax = 1.0;
  std::vector<double> prob;
};

// Exact x-bin integrals of a band-limited field and grid-cell sums in v; needs n_v % nv == 0.
BinnedReference bin_field(const Model& model, const StateField& f, int nx, int nv);

struct DistanceEstimate {
  double estimate = 0.0;
  double error_bar = 0.0;  // delete-one-group jackknife
  int groups = 0;
  long long particles = 0;
};

// sum_b |n_b / N - q_b| against the reference; biased upward by the counting noise.
DistanceEstimate empirical_distance(const Ensemble& ens, const BinnedReference& ref, int groups = 20);
// E sum_b |n_b / N - r_b| for n ~ Binomial(N, q_b), evaluated with the exact pmf.
double expected_histogram_distance(const std::vector<double>& q, const std::vector<double>& r, long long n);

struct MarginalTest {
  double distance = 0.0;
  double error_aggregate = 0.0;  // sum_b sqrt(r_b (1 - r_b) / N)
  bool pass = false;
};

// Velocity-marginal histogram against reference cell probabilities r (nv uniform bins).
MarginalTest velocity_marginal_test(const Ensemble& ens, const std::vector<double>& r, double vmax, double factor = 3.0);

struct ChiSquare {
  double statistic = 0.0;
  int dof = 0;
  double critical = 0.0;
  bool pass = false;
};

// Post-jump velocities from v_pre against the separable law sigma~(v') / int sigma~.
ChiSquare post_jump_chi_square(const JumpProcess& process, double v_pre, int samples, int bins, std::uint64_t seed,
                               double level_z = 2.3263478740408408);

}  // namespace kinetic
