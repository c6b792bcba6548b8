#pragma once

#include <array>
#include <cstdint>
#include <variant>
#include <vector>

#include "misspec/geometry.hpp"
#include "misspec/problems.hpp"
#include "misspec/solvers.hpp"

namespace misspec::edisp {

/// c(g) = a g^2 + b g.
struct QuadraticCost {
  double a;
  double b;
};

/// c(g) = max_j (slope_j g + intercept_j), j = 0..2; theta order is
/// (slope_0, intercept_0, slope_1, intercept_1, slope_2, intercept_2).
struct MaxLinearCost {
  std::array<double, 6> theta;

  double slope(int j) const { return theta[2 * j]; }
  double intercept(int j) const { return theta[2 * j + 1]; }
};

using Cost = std::variant<QuadraticCost, MaxLinearCost>;

/// Generator data in model power units.
struct GeneratorSpec {
  double capacity;
  double ramp_up;
  double ramp_down;
  Cost true_cost;
};

enum class CostForm { quadratic, max3linear };

/// Generators of the five-unit test system (capacity, ramp limits in MW),
/// repeated cyclically for N > 5 and rescaled to units of `unit_mw` MW.
/// Default costs are quadratic with a = 10 and b = 1 + (i mod 5).
std::vector<GeneratorSpec> table_generators(std::size_t N, double unit_mw = 10.0);

/// Replace every cost by a convex max of three linear pieces with slopes
/// base_slopes * (1 + 0.1 (i mod 5)) and breakpoints at 1/3 and 2/3 of
/// capacity, continuous and zero at g = 0.
std::vector<GeneratorSpec> with_max_linear_costs(std::vector<GeneratorSpec> gens,
                                                 std::array<double, 3> base_slopes = {5.0, 15.0, 30.0});

/// Replace every cost by a g^2 + b g with a = a_base (1 + a_step (i mod 5)).
std::vector<GeneratorSpec> with_quadratic_costs(std::vector<GeneratorSpec> gens, double a_base, double a_step,
                                                double b);

/// Demand d_t uniform in [lo, hi] * total capacity.
Vec sample_demand(const std::vector<GeneratorSpec>& gens, Index T, std::uint64_t seed, double lo = 0.4,
                  double hi = 0.8);

/// Economic dispatch instance; variable g_{i,t} lives at index i*T + t.
struct DispatchInstance {
  std::vector<GeneratorSpec> gens;
  Index T = 0;
  Vec demand;
  /// Balance and ramp rows in A g >= b form, capacity as box bounds.
  FeasibleSet feasible_set = FeasibleSet::whole_space(0);

  Index N() const { return static_cast<Index>(gens.size()); }
  Index var(Index i, Index t) const { return i * T + t; }
};

DispatchInstance make_instance(std::vector<GeneratorSpec> gens, Index T, Vec demand);

/// True cost parameters stacked per generator: (a_i, b_i) or the six
/// max-linear parameters.
Vec true_theta(const std::vector<GeneratorSpec>& gens, CostForm form);

struct CostProblem {
  MisspecifiedObjective objective;
  FeasibleSet set = FeasibleSet::whole_space(0);
};

/// f(g, theta) = sum_t sum_i c_i(g_{i,t}; theta_i). The quadratic form
/// declares eta_f = 2 min a_i and G_fx = 2 max a_i from the true costs;
/// max3linear declares M_subgrad = sqrt(N T) (max |slope| + theta_margin).
CostProblem build_cost_misspecified(const DispatchInstance& inst, CostForm form, double theta_margin = 0.0);

struct CostSample {
  std::size_t generator;
  int piece;  // segment of a max-linear cost the sample was drawn from (0 for quadratic)
  double output;
  double cost;
};

/// P samples per generator (per segment for max-linear costs): output
/// uniform on [0, capacity] (or on the segment), cost = true cost + N(0, noise_sd^2).
std::vector<CostSample> sample_cost_data(const std::vector<GeneratorSpec>& gens, std::size_t P, double noise_sd,
                                         std::uint64_t seed);

/// Least-squares learning of the cost parameters, block diagonal over
/// generators (and segments). Quadratic form uses the 1/(N P) scaling.
LearningProblem build_cost_learning(const std::vector<GeneratorSpec>& gens, const std::vector<CostSample>& samples,
                                    CostForm form);

/// y_i = true_demand + N(0, noise_sd^2 I), i = 1..count.
std::vector<Vec> sample_demand_observations(const Vec& true_demand, std::size_t count, double noise_sd,
                                            std::uint64_t seed);

struct DemandProblem {
  MisspecifiedMap map;
  /// Nonnegative orthant over z = (g, lambda).
  FeasibleSet Z = FeasibleSet::nonneg_orthant(0);
  LearningProblem learning;
  /// Constraint count m of h(g) >= 0: T balance, N T capacity, 2 N (T-1) ramp rows.
  Index constraint_count = 0;
  Index generation_dim = 0;
};

/// KKT map of the dispatch problem with known quadratic costs and unknown
/// demand: F(z; d) = (grad c(g) - grad h^T lambda ; h(g; d)). The learning
/// problem is L(d) = (1/S) sum_i ||d - y_i||^2 over d >= 0.
DemandProblem build_demand_misspecified(const std::vector<GeneratorSpec>& gens, Index T,
                                        const std::vector<Vec>& demand_samples);

struct GapValue {
  double value;
  /// F(z; theta) >= -1e-9 componentwise, i.e. F lies in the dual cone.
  bool dual_feasible;
};

/// Modified gap F(z; theta)^T z of the orthant VI.
GapValue gap(const MisspecifiedMap& map, const Vec& theta, const Vec& z);

/// Reference optimum of the max-linear dispatch problem at parameters
/// theta: the epigraph LP is solved through its monotone KKT system with a
/// long extragradient run. `certified_gap` is the final duality gap.
struct LpReference {
  Reference ref;
  double certified_gap;
  double primal_residual;
};
LpReference max_linear_reference(const DispatchInstance& inst, const Vec& theta, long max_iterations = 2'000'000,
                                 double tolerance = 1e-9);

}  // namespace misspec::edisp
