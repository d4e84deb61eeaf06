#include "lowrank/mdp_core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <Eigen/LU>

namespace lowrank {

namespace {

constexpr double kClampDrift = 1e-6;
constexpr double kRowDriftError = 1e-6;
constexpr double kResidualTol = 1e-10;

void require_gamma(double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0, 1)");
}

void check_stochastic(const TransitionTable& table) {
  for (Eigen::Index r = 0; r < table.p.rows(); ++r) {
    const double drift = std::abs(table.p.row(r).sum() - 1.0);
    if (drift > kRowDriftError || table.p.row(r).minCoeff() < 0.0) {
      std::ostringstream os;
      os << "non-stochastic transition row (s=" << r / table.n_actions
         << ", a=" << r % table.n_actions << ", drift=" << drift << ")";
      throw std::invalid_argument(os.str());
    }
  }
}

Vector solve_with_residual(const Matrix& system, const Vector& rhs) {
  Eigen::PartialPivLU<Matrix> lu(system);
  Vector x = lu.solve(rhs);
  // One round of iterative refinement before giving up.
  Vector residual = rhs - system * x;
  if (residual.lpNorm<Eigen::Infinity>() > kResidualTol) {
    x += lu.solve(residual);
    residual = rhs - system * x;
  }
  if (!std::isfinite(residual.lpNorm<Eigen::Infinity>()) ||
      residual.lpNorm<Eigen::Infinity>() > kResidualTol) {
    throw std::runtime_error("linear solve residual above tolerance");
  }
  return x;
}

}  // namespace

TransitionTable::TransitionTable(int states, int actions, Matrix probs)
    : n_states(states), n_actions(actions), p(std::move(probs)) {
  if (p.rows() != static_cast<Eigen::Index>(states) * actions || p.cols() != states) {
    throw std::invalid_argument("transition table shape mismatch");
  }
}

TransitionTable factored_table(const Matrix& mu, const Matrix& phi, int n_states, int n_actions) {
  if (mu.rows() != n_states || phi.rows() != static_cast<Eigen::Index>(n_states) * n_actions ||
      mu.cols() != phi.cols()) {
    throw std::invalid_argument("factorization shape mismatch");
  }
  Matrix p = phi * mu.transpose();
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    auto row = p.row(r);
    row = row.cwiseMax(0.0);
    const double sum = row.sum();
    if (std::abs(sum - 1.0) > 1e-12 && std::abs(sum - 1.0) <= kClampDrift && sum > 0.0) {
      row /= sum;
    }
  }
  return TransitionTable(n_states, n_actions, std::move(p));
}

LowRankMdp::LowRankMdp(int n_states, int n_actions, int dim, double gamma, Vector init_dist,
                       Matrix phi, Matrix mu)
    : n_states_(n_states),
      n_actions_(n_actions),
      dim_(dim),
      gamma_(gamma),
      init_dist_(std::move(init_dist)),
      phi_(std::move(phi)),
      mu_(std::move(mu)) {
  if (n_states <= 0 || n_actions <= 0 || dim <= 0) {
    throw std::invalid_argument("LowRankMdp: sizes must be positive");
  }
  require_gamma(gamma);
  if (init_dist_.size() != n_states) throw std::invalid_argument("LowRankMdp: init_dist size");
  if (phi_.rows() != static_cast<Eigen::Index>(n_states) * n_actions || phi_.cols() != dim) {
    throw std::invalid_argument("LowRankMdp: phi must be (S*A) x d");
  }
  if (mu_.rows() != n_states || mu_.cols() != dim) {
    throw std::invalid_argument("LowRankMdp: mu must be S x d");
  }
  table_ = factored_table(mu_, phi_, n_states, n_actions);
}

Policy::Policy(Matrix probs) : probs_(std::move(probs)) {
  for (Eigen::Index s = 0; s < probs_.rows(); ++s) {
    if (probs_.row(s).minCoeff() < 0.0 || std::abs(probs_.row(s).sum() - 1.0) > 1e-12) {
      throw std::invalid_argument("Policy: row " + std::to_string(s) + " is not on the simplex");
    }
  }
}

Policy Policy::uniform(int n_states, int n_actions) {
  return Policy(Matrix::Constant(n_states, n_actions, 1.0 / n_actions));
}

Policy Policy::deterministic(const std::vector<int>& actions, int n_actions) {
  Matrix probs = Matrix::Zero(static_cast<Eigen::Index>(actions.size()), n_actions);
  for (std::size_t s = 0; s < actions.size(); ++s) {
    if (actions[s] < 0 || actions[s] >= n_actions) throw std::out_of_range("Policy: action index");
    probs(static_cast<Eigen::Index>(s), actions[s]) = 1.0;
  }
  return Policy(std::move(probs));
}

LossFunction::LossFunction(Matrix values) : values_(std::move(values)) {
  if (values_.size() > 0 && (values_.minCoeff() < 0.0 || values_.maxCoeff() > 1.0)) {
    throw std::invalid_argument("LossFunction: entries must lie in [0, 1]");
  }
}

Vector transition_prob(const LowRankMdp& mdp, int s, int a) {
  if (s < 0 || s >= mdp.n_states() || a < 0 || a >= mdp.n_actions()) {
    throw std::out_of_range("transition_prob: state or action out of range");
  }
  return mdp.table().row(s, a).transpose();
}

// --- validation ------------------------------------------------------------

bool ValidationReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

const ValidationCheck* ValidationReport::find(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

std::string ValidationReport::to_string() const {
  std::ostringstream os;
  os.precision(10);
  for (const auto& c : checks) {
    os << (c.passed ? "PASS " : "FAIL ") << c.name << ": worst=" << c.worst << " limit=" << c.limit;
    if (!c.witness.empty()) os << " at " << c.witness;
    os << "\n";
  }
  if (regularity_bound_only) {
    os << "WARNING mu_regularity: bound-only (S > " << kExactRegularityMaxStates
       << "), exact supremum not computed\n";
  }
  return os.str();
}

RegularityResult mu_regularity(const Matrix& mu) {
  const auto n = static_cast<int>(mu.rows());
  RegularityResult result;
  if (n > kExactRegularityMaxStates) {
    double sq = 0.0;
    for (Eigen::Index j = 0; j < mu.cols(); ++j) {
      const double col = mu.col(j).cwiseAbs().sum();
      sq += col * col;
    }
    result.value = std::sqrt(sq);
    result.bound_only = true;
    return result;
  }
  // The norm is convex in g, so its maximum over the box sits at a vertex.
  // Walk all 2^S vertices in Gray-code order, flipping one state at a time.
  Vector acc = Vector::Zero(mu.cols());
  std::uint32_t gray = 0;
  std::uint32_t best_mask = 0;
  double best = 0.0;
  const std::uint32_t total = 1u << n;
  for (std::uint32_t i = 1; i < total; ++i) {
    const int bit = __builtin_ctz(i);
    gray ^= (1u << bit);
    if (gray & (1u << bit)) {
      acc += mu.row(bit).transpose();
    } else {
      acc -= mu.row(bit).transpose();
    }
    const double norm = acc.norm();
    if (norm > best) {
      best = norm;
      best_mask = gray;
    }
  }
  result.value = best;
  result.maximizer.resize(static_cast<std::size_t>(n));
  for (int s = 0; s < n; ++s) result.maximizer[static_cast<std::size_t>(s)] = (best_mask >> s) & 1u;
  return result;
}

ValidationReport validate_factorization(const Matrix& mu, const Matrix& phi, int n_states,
                                        int n_actions) {
  ValidationReport report;
  if (mu.rows() != n_states || phi.rows() != static_cast<Eigen::Index>(n_states) * n_actions ||
      mu.cols() != phi.cols()) {
    report.checks.push_back({"shape", false, 0.0, 0.0, "mu/phi dimensions disagree"});
    return report;
  }
  const auto dim = static_cast<double>(mu.cols());
  auto pair_name = [n_actions](Eigen::Index r) {
    return "(s=" + std::to_string(r / n_actions) + ", a=" + std::to_string(r % n_actions) + ")";
  };

  ValidationCheck norm{"phi_norm", true, 0.0, 1.0 + 1e-12, ""};
  for (Eigen::Index r = 0; r < phi.rows(); ++r) {
    const double v = phi.row(r).norm();
    if (v > norm.worst) {
      norm.worst = v;
      norm.witness = pair_name(r);
    }
  }
  norm.passed = norm.worst <= norm.limit;
  report.checks.push_back(norm);

  const Matrix raw = phi * mu.transpose();
  ValidationCheck rows{"row_sum", true, 0.0, 1e-9, ""};
  ValidationCheck nonneg{"nonnegative", true, 0.0, 1e-12, ""};
  for (Eigen::Index r = 0; r < raw.rows(); ++r) {
    const double drift = std::abs(raw.row(r).sum() - 1.0);
    if (drift > rows.worst) {
      rows.worst = drift;
      rows.witness = pair_name(r);
    }
    Eigen::Index col = 0;
    const double lo = raw.row(r).minCoeff(&col);
    if (-lo > nonneg.worst) {
      nonneg.worst = -lo;
      nonneg.witness = pair_name(r) + " -> s'=" + std::to_string(col);
    }
  }
  rows.passed = rows.worst <= rows.limit;
  nonneg.passed = nonneg.worst <= nonneg.limit;
  report.checks.push_back(rows);
  report.checks.push_back(nonneg);

  const RegularityResult reg = mu_regularity(mu);
  ValidationCheck regularity{"mu_regularity", true, reg.value, std::sqrt(dim) + 1e-9, ""};
  if (reg.bound_only) {
    regularity.witness = "bound-only";
  } else {
    std::string g = "g=";
    for (int bit : reg.maximizer) g += static_cast<char>('0' + bit);
    regularity.witness = g;
  }
  regularity.passed = reg.value <= regularity.limit;
  report.regularity_bound_only = reg.bound_only;
  report.checks.push_back(regularity);
  return report;
}

ValidationReport validate_low_rank(const LowRankMdp& mdp) {
  ValidationReport report =
      validate_factorization(mdp.mu(), mdp.phi(), mdp.n_states(), mdp.n_actions());
  const Vector& d0 = mdp.init_dist();
  ValidationCheck init{"init_dist", true, std::abs(d0.sum() - 1.0), 1e-12, ""};
  Eigen::Index at = 0;
  const double lo = d0.minCoeff(&at);
  if (lo < 0.0) {
    init.worst = std::max(init.worst, -lo);
    init.witness = "s=" + std::to_string(at);
  }
  init.passed = init.worst <= init.limit && lo >= 0.0;
  report.checks.push_back(init);
  return report;
}

// --- exact dynamic programming ---------------------------------------------

Matrix policy_transition(const TransitionTable& table, const Policy& policy) {
  const int S = table.n_states;
  const int A = table.n_actions;
  if (policy.n_states() != S || policy.n_actions() != A) {
    throw std::invalid_argument("policy shape does not match transition table");
  }
  Matrix p_pi = Matrix::Zero(S, S);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      const double w = policy(s, a);
      if (w != 0.0) p_pi.row(s) += w * table.row(s, a);
    }
  }
  return p_pi;
}

ValueTables policy_evaluation(const TransitionTable& table, const Matrix& loss, const Policy& policy,
                              double gamma) {
  require_gamma(gamma);
  check_stochastic(table);
  const int S = table.n_states;
  const int A = table.n_actions;
  if (loss.rows() != S || loss.cols() != A) throw std::invalid_argument("loss shape mismatch");
  const Matrix p_pi = policy_transition(table, policy);
  const Vector loss_pi = (policy.probs().cwiseProduct(loss)).rowwise().sum();
  const Matrix system = Matrix::Identity(S, S) - gamma * p_pi;

  ValueTables out;
  out.v = solve_with_residual(system, loss_pi);
  const Vector next = table.p * out.v;  // (S*A)-vector of E[V(s')]
  out.q.resize(S, A);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) out.q(s, a) = loss(s, a) + gamma * next(table.row_index(s, a));
  }
  return out;
}

double initial_value(const ValueTables& values, const Vector& init_dist) {
  return init_dist.dot(values.v);
}

namespace {

std::vector<int> greedy_actions(const Matrix& q) {
  std::vector<int> actions(static_cast<std::size_t>(q.rows()));
  for (Eigen::Index s = 0; s < q.rows(); ++s) {
    const double best = q.row(s).minCoeff();
    const double slack = 1e-12 * (1.0 + std::abs(best));
    int pick = 0;
    for (Eigen::Index a = 0; a < q.cols(); ++a) {
      if (q(s, a) <= best + slack) {
        pick = static_cast<int>(a);
        break;
      }
    }
    actions[static_cast<std::size_t>(s)] = pick;
  }
  return actions;
}

}  // namespace

OptimalSolution value_iteration(const TransitionTable& table, const Matrix& loss, double gamma,
                                double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("value_iteration: tol must be positive");
  require_gamma(gamma);
  check_stochastic(table);
  const int S = table.n_states;
  const int A = table.n_actions;
  if (loss.rows() != S || loss.cols() != A) throw std::invalid_argument("loss shape mismatch");

  Vector v = Vector::Zero(S);
  Matrix q(S, A);
  const double stop = gamma > 0.0 ? tol * (1.0 - gamma) / gamma : 0.0;
  for (int iter = 0; iter < 1000000; ++iter) {
    const Vector next = table.p * v;
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) q(s, a) = loss(s, a) + gamma * next(table.row_index(s, a));
    }
    const Vector v_new = q.rowwise().minCoeff();
    const double change = (v_new - v).lpNorm<Eigen::Infinity>();
    v = v_new;
    if (change <= stop) break;
  }

  // Polish: evaluate the greedy policy exactly and improve until stable.
  std::vector<int> actions = greedy_actions(q);
  ValueTables values;
  for (int round = 0; round < 100; ++round) {
    values = policy_evaluation(table, loss, Policy::deterministic(actions, A), gamma);
    std::vector<int> improved = actions;
    for (int s = 0; s < S; ++s) {
      const double current = values.q(s, actions[static_cast<std::size_t>(s)]);
      const double best = values.q.row(s).minCoeff();
      // Switch only on strict improvement; otherwise keep the lowest tied index.
      if (best < current - 1e-12 * (1.0 + std::abs(current))) {
        improved[static_cast<std::size_t>(s)] = greedy_actions(values.q.row(s))[0];
      }
    }
    if (improved == actions) break;
    actions = std::move(improved);
  }
  // Canonical tie-breaking on the exact values.
  std::vector<int> canonical = greedy_actions(values.q);
  if (canonical != actions) {
    actions = std::move(canonical);
    values = policy_evaluation(table, loss, Policy::deterministic(actions, A), gamma);
  }
  return OptimalSolution{std::move(values), actions, Policy::deterministic(actions, A)};
}

OccupancyMeasure occupancy_measure(const TransitionTable& table, const Policy& policy,
                                   const Vector& init_dist, double gamma) {
  require_gamma(gamma);
  check_stochastic(table);
  const int S = table.n_states;
  if (init_dist.size() != S) throw std::invalid_argument("init_dist size mismatch");
  const Matrix p_pi = policy_transition(table, policy);
  const Matrix system = (Matrix::Identity(S, S) - gamma * p_pi).transpose();
  OccupancyMeasure out;
  out.s = solve_with_residual(system, (1.0 - gamma) * init_dist);
  out.s = out.s.cwiseMax(0.0);
  out.sa = out.s.asDiagonal() * policy.probs();
  return out;
}

// --- sampling --------------------------------------------------------------

int roll_in_cap(double gamma) {
  require_gamma(gamma);
  return static_cast<int>(std::ceil(std::log(1e6) / (1.0 - gamma)));
}

RollInResult roll_in_sample(const LowRankMdp& mdp, const Policy& policy, RngStream& rng) {
  const double gamma = mdp.gamma();
  const int cap = roll_in_cap(gamma);
  RollInResult out;
  out.state = rng.categorical(mdp.init_dist());
  while (true) {
    if (!rng.bernoulli(gamma)) return out;
    if (out.steps >= cap) {
      out.truncated = true;
      return out;
    }
    const int a = rng.categorical(policy.probs().row(out.state).transpose());
    out.state = step_sample(mdp.table(), out.state, a, rng);
    ++out.steps;
  }
}

int step_sample(const TransitionTable& table, int s, int a, RngStream& rng) {
  if (s < 0 || s >= table.n_states || a < 0 || a >= table.n_actions) {
    throw std::out_of_range("step_sample: state or action out of range");
  }
  return rng.categorical(table.row(s, a).transpose());
}

// --- generators ------------------------------------------------------------

namespace {

Vector dirichlet(int n, double concentration, RngStream& rng) {
  Vector x(n);
  for (int i = 0; i < n; ++i) x[i] = rng.gamma(concentration);
  const double total = x.sum();
  if (total <= 0.0) {
    x.setZero();
    x[rng.uniform_int(n)] = 1.0;
    return x;
  }
  return x / total;
}

}  // namespace

LowRankMdp random_low_rank(int n_states, int n_actions, int dim, double gamma, RngStream& rng,
                           double phi_concentration, double mu_concentration) {
  Matrix phi(static_cast<Eigen::Index>(n_states) * n_actions, dim);
  for (Eigen::Index r = 0; r < phi.rows(); ++r) {
    phi.row(r) = dirichlet(dim, phi_concentration, rng).transpose();
  }
  Matrix mu(n_states, dim);
  for (int j = 0; j < dim; ++j) mu.col(j) = dirichlet(n_states, mu_concentration, rng);
  Vector init = Vector::Constant(n_states, 1.0 / n_states);
  return LowRankMdp(n_states, n_actions, dim, gamma, std::move(init), std::move(phi), std::move(mu));
}

LossFunction random_loss(int n_states, int n_actions, RngStream& rng) {
  Matrix values(n_states, n_actions);
  for (Eigen::Index i = 0; i < values.size(); ++i) values.data()[i] = rng.uniform();
  return LossFunction(std::move(values));
}

}  // namespace lowrank
