#include "misspec/edisp.hpp"

#include <cmath>
#include <memory>
#include <random>
#include <string>

#include <Eigen/Sparse>

#include "misspec/errors.hpp"

namespace misspec::edisp {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

struct Unit {
  double capacity_mw;
  double ramp_up_mw;
  double ramp_down_mw;
};

constexpr std::array<Unit, 5> kTestSystem = {{
    {40.0, 20.0, 20.0},
    {40.0, 20.0, 20.0},
    {35.0, 18.0, 18.0},
    {50.0, 25.0, 25.0},
    {40.0, 20.0, 20.0},
}};

const QuadraticCost& quadratic(const GeneratorSpec& g) {
  const auto* q = std::get_if<QuadraticCost>(&g.true_cost);
  if (!q) throw std::invalid_argument("edisp: generator does not have a quadratic cost");
  return *q;
}

const MaxLinearCost& max_linear(const GeneratorSpec& g) {
  const auto* m = std::get_if<MaxLinearCost>(&g.true_cost);
  if (!m) throw std::invalid_argument("edisp: generator does not have a max-linear cost");
  return *m;
}

double piece_max(const double* th, double g) {
  return std::max({th[0] * g + th[1], th[2] * g + th[3], th[4] * g + th[5]});
}

// Lowest-index active piece.
int active_piece(const double* th, double g) {
  int arg = 0;
  double best = th[0] * g + th[1];
  for (int j = 1; j < 3; ++j) {
    const double v = th[2 * j] * g + th[2 * j + 1];
    if (v > best) {
      best = v;
      arg = j;
    }
  }
  return arg;
}

// Breakpoints of a convex max-linear cost on [0, capacity]; segment j is
// [bp[j], bp[j+1]].
std::array<double, 4> segments(const MaxLinearCost& c, double capacity) {
  std::array<double, 4> bp{0.0, 0.0, 0.0, capacity};
  for (int j = 0; j < 2; ++j) {
    const double ds = c.slope(j + 1) - c.slope(j);
    if (!(ds > 0.0)) throw std::invalid_argument("edisp: max-linear slopes must be strictly increasing");
    bp[j + 1] = (c.intercept(j) - c.intercept(j + 1)) / ds;
  }
  if (!(0.0 < bp[1] && bp[1] < bp[2] && bp[2] < capacity)) {
    throw std::invalid_argument("edisp: every linear piece must be active on part of [0, capacity]");
  }
  return bp;
}

void validate(const std::vector<GeneratorSpec>& gens) {
  if (gens.empty()) throw std::invalid_argument("edisp: no generators");
  for (const auto& g : gens) {
    if (!(g.capacity > 0.0)) throw std::invalid_argument("edisp: capacity must be positive");
    if (!(g.ramp_up >= 0.0) || !(g.ramp_down >= 0.0)) throw std::invalid_argument("edisp: ramp limits must be >= 0");
    if (const auto* q = std::get_if<QuadraticCost>(&g.true_cost); q && !(q->a > 0.0)) {
      throw std::invalid_argument("edisp: quadratic cost coefficient must be positive");
    }
  }
}

// Rows of h(g) >= 0 written as A g >= b. With capacity rows included this is
// the constraint system of the KKT map; without, the polyhedron rows.
struct Constraints {
  std::vector<Triplet> entries;
  Vec b;
  std::vector<Index> balance_rows;
  Index rows = 0;
};

Constraints dispatch_rows(const std::vector<GeneratorSpec>& gens, Index T, const Vec& demand, bool capacity_rows,
                          Index col_offset = 0, Index row_offset = 0) {
  const Index N = static_cast<Index>(gens.size());
  Constraints c;
  std::vector<double> rhs;
  auto row = [&](double b) {
    rhs.push_back(b);
    return row_offset + c.rows++;
  };
  for (Index t = 0; t < T; ++t) {
    const Index r = row(demand(t));
    c.balance_rows.push_back(r);
    for (Index i = 0; i < N; ++i) c.entries.emplace_back(r, col_offset + i * T + t, 1.0);
  }
  if (capacity_rows) {
    for (Index i = 0; i < N; ++i) {
      for (Index t = 0; t < T; ++t) c.entries.emplace_back(row(-gens[i].capacity), col_offset + i * T + t, -1.0);
    }
  }
  for (Index i = 0; i < N; ++i) {
    for (Index t = 1; t < T; ++t) {
      const Index up = row(-gens[i].ramp_up);  // g_{t-1} - g_t >= -r_up
      c.entries.emplace_back(up, col_offset + i * T + t, -1.0);
      c.entries.emplace_back(up, col_offset + i * T + t - 1, 1.0);
      const Index down = row(-gens[i].ramp_down);  // g_t - g_{t-1} >= -r_down
      c.entries.emplace_back(down, col_offset + i * T + t, 1.0);
      c.entries.emplace_back(down, col_offset + i * T + t - 1, -1.0);
    }
  }
  c.b = Eigen::Map<Vec>(rhs.data(), static_cast<Index>(rhs.size()));
  return c;
}

double sparse_spectral_norm(const SpMat& m) {
  return spectral_norm(Mat(m));
}

struct LpSolution {
  Vec y;
  Vec lam;
  double gap;
  double primal_residual;
  double dual_residual;
};

struct KktError {
  double gap;
  double primal;
  double dual;
  double total() const { return std::sqrt(gap * gap + primal * primal + dual * dual); }
};

// min c^T y s.t. A y >= b, y >= 0, through extragradient on the monotone
// KKT map (c - A^T lam, A y - b) over the orthant. Rows and columns are
// Ruiz-equilibrated first, and the iteration restarts from its running
// average whenever the KKT error has dropped enough, which makes the
// convergence linear on LPs.
LpSolution solve_lp(const SpMat& A_in, const Vec& b_in, const Vec& c_in, long max_iterations, double tolerance) {
  const Index m = A_in.rows();
  const Index n = A_in.cols();
  Vec dr = Vec::Ones(m);
  Vec dc = Vec::Ones(n);
  SpMat A = A_in;
  for (int pass = 0; pass < 20; ++pass) {
    Vec rmax = Vec::Zero(m);
    Vec cmax = Vec::Zero(n);
    for (Index k = 0; k < A.outerSize(); ++k) {
      for (SpMat::InnerIterator it(A, k); it; ++it) {
        rmax(it.row()) = std::max(rmax(it.row()), std::abs(it.value()));
        cmax(it.col()) = std::max(cmax(it.col()), std::abs(it.value()));
      }
    }
    const Vec sr = rmax.unaryExpr([](double v) { return v > 0.0 ? 1.0 / std::sqrt(v) : 1.0; });
    const Vec sc = cmax.unaryExpr([](double v) { return v > 0.0 ? 1.0 / std::sqrt(v) : 1.0; });
    A = sr.asDiagonal() * A * sc.asDiagonal();
    dr = dr.cwiseProduct(sr);
    dc = dc.cwiseProduct(sc);
  }
  A.makeCompressed();
  const SpMat At = A.transpose();
  const Vec b = dr.cwiseProduct(b_in);
  const Vec c = dc.cwiseProduct(c_in);

  // Errors are measured on the original problem.
  auto kkt = [&](const Vec& y, const Vec& lam) {
    const Vec yo = dc.cwiseProduct(y);
    const Vec lo = dr.cwiseProduct(lam);
    const double primal = c_in.dot(yo);
    const double scale = 1.0 + std::abs(primal);
    return KktError{std::abs(primal - b_in.dot(lo)) / scale, (b_in - A_in * yo).cwiseMax(0.0).norm() / scale,
                    (A_in.transpose() * lo - c_in).cwiseMax(0.0).norm() / scale};
  };

  const double tau = 0.9 / sparse_spectral_norm(A);
  Vec y = Vec::Zero(n);
  Vec lam = Vec::Zero(m);
  Vec y_sum = Vec::Zero(n);
  Vec lam_sum = Vec::Zero(m);
  long averaged = 0;
  double restart_error = kkt(y, lam).total();
  constexpr long kCheckEvery = 64;
  for (long it = 1; it <= max_iterations; ++it) {
    const Vec y_half = (y - tau * (c - At * lam)).cwiseMax(0.0);
    const Vec l_half = (lam - tau * (A * y - b)).cwiseMax(0.0);
    y = (y - tau * (c - At * l_half)).cwiseMax(0.0);
    lam = (lam - tau * (A * y_half - b)).cwiseMax(0.0);
    y_sum += y_half;
    lam_sum += l_half;
    ++averaged;
    if (it % kCheckEvery != 0 && it != max_iterations) continue;

    const Vec y_avg = y_sum / static_cast<double>(averaged);
    const Vec l_avg = lam_sum / static_cast<double>(averaged);
    const KktError cur = kkt(y, lam);
    const KktError avg = kkt(y_avg, l_avg);
    const bool use_avg = avg.total() < cur.total();
    const KktError best = use_avg ? avg : cur;
    if (std::max({best.gap, best.primal, best.dual}) <= tolerance) {
      return {dc.cwiseProduct(use_avg ? y_avg : y), dr.cwiseProduct(use_avg ? l_avg : lam), best.gap, best.primal,
              best.dual};
    }
    if (best.total() <= 0.2 * restart_error || averaged >= 64 * kCheckEvery) {
      if (use_avg) {
        y = y_avg;
        lam = l_avg;
      }
      y_sum.setZero();
      lam_sum.setZero();
      averaged = 0;
      restart_error = best.total();
    }
  }
  const KktError fin = kkt(y, lam);
  return {dc.cwiseProduct(y), dr.cwiseProduct(lam), fin.gap, fin.primal, fin.dual};
}

}  // namespace

std::vector<GeneratorSpec> table_generators(std::size_t N, double unit_mw) {
  if (N == 0) throw std::invalid_argument("table_generators: N must be positive");
  if (!(unit_mw > 0.0)) throw std::invalid_argument("table_generators: unit_mw must be positive");
  std::vector<GeneratorSpec> gens;
  gens.reserve(N);
  for (std::size_t i = 0; i < N; ++i) {
    const Unit& u = kTestSystem[i % kTestSystem.size()];
    gens.push_back({u.capacity_mw / unit_mw, u.ramp_up_mw / unit_mw, u.ramp_down_mw / unit_mw,
                    QuadraticCost{10.0, 1.0 + static_cast<double>(i % 5)}});
  }
  return gens;
}

std::vector<GeneratorSpec> with_max_linear_costs(std::vector<GeneratorSpec> gens, std::array<double, 3> base_slopes) {
  for (std::size_t i = 0; i < gens.size(); ++i) {
    const double f = 1.0 + 0.1 * static_cast<double>(i % 5);
    const double cap = gens[i].capacity;
    const double b1 = cap / 3.0;
    const double b2 = 2.0 * cap / 3.0;
    MaxLinearCost c{};
    c.theta[0] = base_slopes[0] * f;
    c.theta[1] = 0.0;
    c.theta[2] = base_slopes[1] * f;
    c.theta[3] = c.theta[1] + (c.theta[0] - c.theta[2]) * b1;
    c.theta[4] = base_slopes[2] * f;
    c.theta[5] = c.theta[3] + (c.theta[2] - c.theta[4]) * b2;
    gens[i].true_cost = c;
  }
  return gens;
}

std::vector<GeneratorSpec> with_quadratic_costs(std::vector<GeneratorSpec> gens, double a_base, double a_step,
                                                double b) {
  for (std::size_t i = 0; i < gens.size(); ++i) {
    gens[i].true_cost = QuadraticCost{a_base * (1.0 + a_step * static_cast<double>(i % 5)), b};
  }
  return gens;
}

Vec sample_demand(const std::vector<GeneratorSpec>& gens, Index T, std::uint64_t seed, double lo, double hi) {
  if (T < 1) throw std::invalid_argument("sample_demand: T must be >= 1");
  if (!(0.0 <= lo && lo <= hi && hi <= 1.0)) throw std::invalid_argument("sample_demand: need 0 <= lo <= hi <= 1");
  double total = 0.0;
  for (const auto& g : gens) total += g.capacity;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo * total, hi * total);
  Vec d(T);
  for (Index t = 0; t < T; ++t) d(t) = u(rng);
  return d;
}

DispatchInstance make_instance(std::vector<GeneratorSpec> gens, Index T, Vec demand) {
  validate(gens);
  if (T < 1) throw std::invalid_argument("make_instance: T must be >= 1");
  if (demand.size() != T) throw DimensionMismatch("make_instance: demand length != T");
  double total = 0.0;
  for (const auto& g : gens) total += g.capacity;
  if (demand.maxCoeff() > total) throw std::invalid_argument("make_instance: demand exceeds total capacity (infeasible)");

  const Index N = static_cast<Index>(gens.size());
  const Constraints rows = dispatch_rows(gens, T, demand, /*capacity_rows=*/false);
  SpMat A(rows.rows, N * T);
  A.setFromTriplets(rows.entries.begin(), rows.entries.end());
  Vec lower = Vec::Zero(N * T);
  Vec upper(N * T);
  for (Index i = 0; i < N; ++i) upper.segment(i * T, T).setConstant(gens[i].capacity);

  DispatchInstance inst;
  inst.T = T;
  inst.demand = std::move(demand);
  inst.feasible_set = FeasibleSet::polyhedron(Mat(A), rows.b, lower, upper);
  inst.gens = std::move(gens);
  return inst;
}

Vec true_theta(const std::vector<GeneratorSpec>& gens, CostForm form) {
  const Index per = form == CostForm::quadratic ? 2 : 6;
  Vec th(per * static_cast<Index>(gens.size()));
  for (std::size_t i = 0; i < gens.size(); ++i) {
    const Index o = per * static_cast<Index>(i);
    if (form == CostForm::quadratic) {
      th(o) = quadratic(gens[i]).a;
      th(o + 1) = quadratic(gens[i]).b;
    } else {
      const auto& c = max_linear(gens[i]);
      for (int j = 0; j < 6; ++j) th(o + j) = c.theta[j];
    }
  }
  return th;
}

CostProblem build_cost_misspecified(const DispatchInstance& inst, CostForm form, double theta_margin) {
  const Index N = inst.N();
  const Index T = inst.T;
  const double Td = static_cast<double>(T);
  std::vector<double> caps;
  for (const auto& g : inst.gens) caps.push_back(g.capacity);
  auto capv = std::make_shared<const std::vector<double>>(caps);

  CostProblem out;
  out.set = inst.feasible_set;
  MisspecifiedObjective& obj = out.objective;
  obj.x_dim = N * T;

  if (form == CostForm::quadratic) {
    obj.theta_dim = 2 * N;
    obj.smooth = true;
    double amin = std::numeric_limits<double>::infinity();
    double amax = 0.0;
    double gft = 0.0;
    double lft = 0.0;
    double msq = 0.0;
    for (Index i = 0; i < N; ++i) {
      const auto& q = quadratic(inst.gens[i]);
      const double c = caps[i];
      amin = std::min(amin, q.a);
      amax = std::max(amax, q.a);
      gft = std::max(gft, std::sqrt(Td * (4.0 * c * c + 1.0)));
      lft += Td * Td * (c * c * c * c + c * c);
      msq += Td * std::pow(2.0 * q.a * c + std::abs(q.b), 2);
    }
    obj.constants.eta_f = 2.0 * amin;
    obj.constants.G_fx = 2.0 * amax;
    obj.constants.G_ftheta = gft;
    obj.constants.L_theta = gft;
    obj.constants.L_ftheta = std::sqrt(lft);
    obj.constants.M_subgrad = std::sqrt(msq);
    obj.eval = [N, T](const Vec& g, const Vec& th) {
      double total = 0.0;
      for (Index i = 0; i < N; ++i) {
        const double a = th(2 * i);
        const double b = th(2 * i + 1);
        for (Index t = 0; t < T; ++t) {
          const double x = g(i * T + t);
          total += a * x * x + b * x;
        }
      }
      return total;
    };
    obj.grad_x = [N, T](const Vec& g, const Vec& th) -> Vec {
      Vec d(N * T);
      for (Index i = 0; i < N; ++i) {
        for (Index t = 0; t < T; ++t) d(i * T + t) = 2.0 * th(2 * i) * g(i * T + t) + th(2 * i + 1);
      }
      return d;
    };
  } else {
    obj.theta_dim = 6 * N;
    obj.smooth = false;
    double smax = 0.0;
    double lft = 0.0;
    for (Index i = 0; i < N; ++i) {
      const auto& c = max_linear(inst.gens[i]);
      for (int j = 0; j < 3; ++j) smax = std::max(smax, std::abs(c.slope(j)));
      lft += Td * Td * (caps[i] * caps[i] + 1.0);
    }
    obj.constants.M_subgrad = std::sqrt(static_cast<double>(N * T)) * (smax + theta_margin);
    obj.constants.L_ftheta = std::sqrt(lft);
    obj.eval = [N, T](const Vec& g, const Vec& th) {
      double total = 0.0;
      for (Index i = 0; i < N; ++i) {
        for (Index t = 0; t < T; ++t) total += piece_max(th.data() + 6 * i, g(i * T + t));
      }
      return total;
    };
    obj.grad_x = [N, T](const Vec& g, const Vec& th) -> Vec {
      Vec d(N * T);
      for (Index i = 0; i < N; ++i) {
        const double* p = th.data() + 6 * i;
        for (Index t = 0; t < T; ++t) d(i * T + t) = p[2 * active_piece(p, g(i * T + t))];
      }
      return d;
    };
  }
  return out;
}

std::vector<CostSample> sample_cost_data(const std::vector<GeneratorSpec>& gens, std::size_t P, double noise_sd,
                                         std::uint64_t seed) {
  if (P < 2) throw std::invalid_argument("sample_cost_data: need P >= 2 samples");
  if (!(noise_sd >= 0.0)) throw std::invalid_argument("sample_cost_data: noise_sd must be >= 0");
  validate(gens);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<CostSample> out;
  for (std::size_t i = 0; i < gens.size(); ++i) {
    const auto& gen = gens[i];
    if (const auto* q = std::get_if<QuadraticCost>(&gen.true_cost)) {
      std::uniform_real_distribution<double> u(0.0, gen.capacity);
      for (std::size_t j = 0; j < P; ++j) {
        const double g = u(rng);
        const double xi = noise_sd * noise(rng);
        out.push_back({i, 0, g, q->a * g * g + q->b * g + xi});
      }
    } else {
      const auto& c = std::get<MaxLinearCost>(gen.true_cost);
      const auto bp = segments(c, gen.capacity);
      for (int piece = 0; piece < 3; ++piece) {
        std::uniform_real_distribution<double> u(bp[piece], bp[piece + 1]);
        for (std::size_t j = 0; j < P; ++j) {
          const double g = u(rng);
          const double xi = noise_sd * noise(rng);
          out.push_back({i, piece, g, c.slope(piece) * g + c.intercept(piece) + xi});
        }
      }
    }
  }
  return out;
}

LearningProblem build_cost_learning(const std::vector<GeneratorSpec>& gens, const std::vector<CostSample>& samples,
                                    CostForm form) {
  const std::size_t N = gens.size();
  const int pieces = form == CostForm::quadratic ? 1 : 3;
  std::vector<std::vector<const CostSample*>> groups(N * pieces);
  for (const auto& s : samples) {
    if (s.generator >= N || s.piece < 0 || s.piece >= pieces) throw std::invalid_argument("build_cost_learning: sample out of range");
    groups[s.generator * pieces + s.piece].push_back(&s);
  }
  std::vector<LsqBlock> blocks;
  for (const auto& grp : groups) {
    if (grp.size() < 2) throw std::invalid_argument("build_cost_learning: every block needs at least two samples");
    LsqBlock b{Mat(static_cast<Index>(grp.size()), 2), Vec(static_cast<Index>(grp.size()))};
    for (std::size_t j = 0; j < grp.size(); ++j) {
      const double g = grp[j]->output;
      const auto r = static_cast<Index>(j);
      if (form == CostForm::quadratic) {
        b.design(r, 0) = g * g;
        b.design(r, 1) = g;
      } else {
        b.design(r, 0) = g;
        b.design(r, 1) = 1.0;
      }
      b.response(r) = grp[j]->cost;
    }
    blocks.push_back(std::move(b));
  }
  return make_block_lsq_learning(blocks, static_cast<double>(samples.size()));
}

std::vector<Vec> sample_demand_observations(const Vec& true_demand, std::size_t count, double noise_sd,
                                            std::uint64_t seed) {
  if (count == 0) throw std::invalid_argument("sample_demand_observations: need at least one sample");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<Vec> ys;
  ys.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    Vec y(true_demand.size());
    for (Index t = 0; t < y.size(); ++t) y(t) = true_demand(t) + noise_sd * noise(rng);
    ys.push_back(std::move(y));
  }
  return ys;
}

DemandProblem build_demand_misspecified(const std::vector<GeneratorSpec>& gens, Index T,
                                        const std::vector<Vec>& demand_samples) {
  validate(gens);
  if (demand_samples.empty()) throw std::invalid_argument("build_demand_misspecified: no demand samples");
  for (const auto& y : demand_samples) {
    if (y.size() != T) throw DimensionMismatch("build_demand_misspecified: demand sample length != T");
  }
  const Index N = static_cast<Index>(gens.size());
  const Index ng = N * T;

  // Learning: L(d) = (1/S) sum ||d - y_i||^2 on d >= 0; minimizer is the
  // (clipped) sample mean.
  Vec mean = Vec::Zero(T);
  for (const auto& y : demand_samples) mean += y;
  mean /= static_cast<double>(demand_samples.size());
  double total = 0.0;
  for (const auto& g : gens) total += g.capacity;
  if (mean.maxCoeff() > total) throw std::invalid_argument("build_demand_misspecified: demand exceeds total capacity");

  auto ys = std::make_shared<const std::vector<Vec>>(demand_samples);
  LearningProblem lp;
  lp.set = FeasibleSet::nonneg_orthant(T);
  lp.truth = mean.cwiseMax(0.0);
  lp.constants.eta_g = 2.0;
  lp.constants.G_g = 2.0;
  lp.eval = [ys](const Vec& d) {
    double s = 0.0;
    for (const auto& y : *ys) s += (d - y).squaredNorm();
    return s / static_cast<double>(ys->size());
  };
  lp.grad = [mean](const Vec& d) -> Vec { return 2.0 * (d - mean); };

  // h(g; d) = A g - b(d) with the demand entering the balance rows only.
  const Constraints rows = dispatch_rows(gens, T, Vec::Zero(T), /*capacity_rows=*/true);
  const Index m = rows.rows;
  SpMat A(m, ng);
  A.setFromTriplets(rows.entries.begin(), rows.entries.end());

  // Monotone affine map: z -> [[Q, -A^T], [A, 0]] z + c - E d.
  std::vector<Triplet> kkt;
  Vec lin = Vec::Zero(ng + m);
  for (Index i = 0; i < N; ++i) {
    const auto& q = quadratic(gens[i]);
    for (Index t = 0; t < T; ++t) {
      kkt.emplace_back(i * T + t, i * T + t, 2.0 * q.a);
      lin(i * T + t) = q.b;
    }
  }
  for (Index k = 0; k < A.outerSize(); ++k) {
    for (SpMat::InnerIterator it(A, k); it; ++it) {
      kkt.emplace_back(ng + it.row(), it.col(), it.value());
      kkt.emplace_back(it.col(), ng + it.row(), -it.value());
    }
  }
  lin.tail(m) = -rows.b;  // balance entries of b are zero here; demand added through theta
  SpMat K(ng + m, ng + m);
  K.setFromTriplets(kkt.begin(), kkt.end());
  K.makeCompressed();

  auto kmat = std::make_shared<const SpMat>(K);
  auto offset = std::make_shared<const Vec>(lin);
  auto balance = std::make_shared<const std::vector<Index>>(rows.balance_rows);

  DemandProblem out;
  out.constraint_count = m;
  out.generation_dim = ng;
  out.Z = FeasibleSet::nonneg_orthant(ng + m);
  out.map.x_dim = ng + m;
  out.map.theta_dim = T;
  out.map.constants.L_Fx = sparse_spectral_norm(K);
  out.map.constants.L_Ftheta = 1.0;
  out.map.eval = [kmat, offset, balance, ng](const Vec& z, const Vec& d) -> Vec {
    Vec F = *kmat * z + *offset;
    for (std::size_t t = 0; t < balance->size(); ++t) F(ng + (*balance)[t]) -= d(static_cast<Index>(t));
    return F;
  };
  out.learning = std::move(lp);
  return out;
}

GapValue gap(const MisspecifiedMap& map, const Vec& theta, const Vec& z) {
  if (z.size() != map.x_dim) throw DimensionMismatch("gap: z has the wrong dimension");
  if (theta.size() != map.theta_dim) throw DimensionMismatch("gap: theta has the wrong dimension");
  const Vec F = map.eval(z, theta);
  return {F.dot(z), F.size() == 0 || F.minCoeff() >= -1e-9};
}

LpReference max_linear_reference(const DispatchInstance& inst, const Vec& theta, long max_iterations, double tolerance) {
  const Index N = inst.N();
  const Index T = inst.T;
  const Index ng = N * T;
  if (theta.size() != 6 * N) throw DimensionMismatch("max_linear_reference: theta must have 6 N entries");

  // Variables y = (g, s) >= 0 with s_{it} = c_i(g_{it}) - c_i(0) at the optimum.
  // Rows: pieces s - slope_j g >= intercept_j - c_i(0), then the dispatch rows
  // with capacity.
  std::vector<Triplet> entries;
  std::vector<double> rhs;
  Vec base(N);
  for (Index i = 0; i < N; ++i) {
    const double* p = theta.data() + 6 * i;
    base(i) = std::max({p[1], p[3], p[5]});
    for (Index t = 0; t < T; ++t) {
      for (int j = 0; j < 3; ++j) {
        const auto r = static_cast<Index>(rhs.size());
        entries.emplace_back(r, ng + i * T + t, 1.0);
        entries.emplace_back(r, i * T + t, -p[2 * j]);
        rhs.push_back(p[2 * j + 1] - base(i));
      }
    }
  }
  const Index piece_rows = static_cast<Index>(rhs.size());
  const Constraints disp = dispatch_rows(inst.gens, T, inst.demand, /*capacity_rows=*/true, 0, piece_rows);
  entries.insert(entries.end(), disp.entries.begin(), disp.entries.end());
  const Index m = piece_rows + disp.rows;
  Vec b(m);
  b.head(piece_rows) = Eigen::Map<Vec>(rhs.data(), piece_rows);
  b.tail(disp.rows) = disp.b;
  SpMat A(m, 2 * ng);
  A.setFromTriplets(entries.begin(), entries.end());
  A.makeCompressed();
  Vec c = Vec::Zero(2 * ng);
  c.tail(ng).setOnes();

  const LpSolution sol = solve_lp(A, b, c, max_iterations, tolerance);
  const Vec& y = sol.y;
  const double gap_value = sol.gap;
  const double primal_res = sol.primal_residual;

  Vec g = inst.feasible_set.project(y.head(ng));
  double f = 0.0;
  for (Index i = 0; i < N; ++i) {
    for (Index t = 0; t < T; ++t) f += piece_max(theta.data() + 6 * i, g(i * T + t));
  }
  return {Reference{g, f}, gap_value, primal_res};
}

}  // namespace misspec::edisp
