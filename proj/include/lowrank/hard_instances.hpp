#pragma once

#include <optional>
#include <string>

#include "lowrank/mdp_core.hpp"

namespace lowrank {

/// Hidden (second-level state, action) pair that tilts the good-state odds.
struct HardTarget {
  int i_star = 0;  // 0-based index into the second-level states s_{2,1..d-4}
  int a_star = 0;  // 0-based action index
};

struct HardInstanceParams {
  int d = 8;
  int S = 12;
  int A = 5;
  int K = 2000;
  double gamma = 0.9;
  double epsilon = 0.1;
  std::optional<HardTarget> target;
};

/// Throws std::invalid_argument naming the first violated constraint.
void check_params(const HardInstanceParams& params);

/// Index map of the lower-bound family.
///
/// States: s_{1,1} = 0, s_{2,i} = i (i = 1..d-4), s^g = d-3, s^b = d-2,
/// s^o = d-1, outliers s^o_j = d-1+j (j = 1..S-d).
/// Feature coordinates (0-based): e_0..e_{d-5} route to s_{2,i}, d-4 is the
/// good-state coordinate, d-3 the bad-state coordinate, d-2 the hub s^o and
/// d-1 the outlier block.
struct HardLayout {
  int d = 0;
  int S = 0;

  int s11() const { return 0; }
  int s2(int i) const { return 1 + i; }  // i in [0, d-4)
  int good() const { return d - 3; }
  int bad() const { return d - 2; }
  int hub() const { return d - 1; }
  int outlier(int j) const { return d + j; }  // j in [0, S-d)
  int n_second() const { return d - 4; }
  int n_outliers() const { return S - d; }
  bool is_outlier(int s) const { return s >= d && s < S; }

  int coord_good() const { return d - 4; }
  int coord_bad() const { return d - 3; }
  int coord_hub() const { return d - 2; }
  int coord_outlier() const { return d - 1; }
};

struct HardInstance {
  HardInstanceParams params;
  HardLayout layout;
  LowRankMdp mdp;
  LossFunction reward;  // r(s,a) = 1{s = s^g} + 1/2 * 1{s in S_O}
  LossFunction loss;    // 1 - r
};

/// Builds M_0 (no target) or M_(i*, a*). The outlier block places the
/// 1/(S-d) scale on mu rather than on phi so that the mu-regularity bound
/// sqrt(d) holds for every S >= d + 1; the kernel is the one listed.
HardInstance build_hard_instance(const HardInstanceParams& params);

/// (1/(2 sqrt 2)) (1 - 1/((d-4)A)) sqrt((d-4)A/K). Requires K >= 2(d-4)A and
/// (d-4)A >= 2.
double lower_bound_epsilon(int d, int A, int K);

/// Reward-space optimal value at s_{1,1}: gamma^2/(1-gamma) (1/2 + eps).
double optimal_value_closed_form(double gamma, double epsilon);

/// Reward-space value at s_{1,1} for a policy that reaches (s_{2,i*}, a*) at
/// step two with probability `reach`.
double policy_value_closed_form(double gamma, double epsilon, double reach);

/// pi(a_{i*} | s_{1,1}) * pi(a* | s_{2,i*}).
double reach_probability(const HardInstance& instance, const Policy& policy);

/// KL between the tilted and the reference good/bad row.
double per_row_kl(double epsilon);

}  // namespace lowrank
