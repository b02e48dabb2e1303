#pragma once

// Euler-Maruyama ensemble kernels. Replicas are independent, so the parallel
// drivers split work over replicas only; every replica is advanced by the same
// per-replica routine, which makes parallel and serial output bit-identical.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "chaoslab/coefficients.hpp"
#include "chaoslab/kernels/pairwise_series.hpp"

namespace chaoslab::kernels {

struct StepPlan {
  int N = 1;
  int dim = 1;
  double dt = 1e-4;
  std::uint64_t seed = 0;
  bool include_self = true;
  std::int64_t first_step = 0;
  std::int64_t steps = 0;
};

// Scratch space reused across steps of one replica.
struct ReplicaWorkspace {
  std::vector<double> cosv, sinv;
  std::vector<double> moments_c, moments_s;
  std::vector<std::uint64_t> cached_block;
  std::vector<double> cached_normals;
  std::vector<double> noise, next;
  std::vector<double> u0, u1, z0, z1;
};

// Normals 2*block and 2*block+1 of the dynamics stream of (replica, particle).
std::array<double, 2> dynamics_normal_pair(std::uint64_t seed, std::uint32_t replica, std::uint32_t particle,
                                           std::uint64_t block) noexcept;

// O(N * waves) step using ensemble moments of the trigonometric fields.
void advance_replica_fast(const PairwiseSeries& series, const StepPlan& plan, std::uint32_t replica,
                          std::span<double> positions, ReplicaWorkspace& ws);

// One step of one replica with caller-supplied standard normals (N * dim).
// The same code the drivers run; exposed for equivariance tests.
void fast_step(const PairwiseSeries& series, int N, double dt, bool include_self, std::span<double> positions,
               std::span<const double> noise, ReplicaWorkspace& ws);

// Direct O(N^2) step through em_step; the readable reference.
void advance_replica_reference(const CoefficientSet& cs, const StepPlan& plan, std::uint32_t replica,
                               std::span<double> positions, ReplicaWorkspace& ws);

// positions holds R replicas of N * dim coordinates.
void advance_ensemble_parallel(const PairwiseSeries& series, const StepPlan& plan, std::span<double> positions,
                               int workers = 0);
void advance_ensemble_serial(const PairwiseSeries& series, const StepPlan& plan, std::span<double> positions);
void advance_ensemble_reference(const CoefficientSet& cs, const StepPlan& plan, std::span<double> positions,
                                int workers = 0);

}  // namespace chaoslab::kernels
