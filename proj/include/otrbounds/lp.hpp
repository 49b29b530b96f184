#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "otrbounds/core.hpp"

namespace otr {

struct LinearProgram {
  enum class Sense { Maximize, Minimize };
  enum class Relation { LessEq, GreaterEq };

  struct EqualityRow {
    std::vector<double> coeffs;
    double rhs = 0.0;
  };
  struct InequalityRow {
    std::vector<double> coeffs;
    double rhs = 0.0;
    Relation relation = Relation::LessEq;
  };

  std::size_t num_vars = 0;
  std::vector<double> objective;
  Sense sense = Sense::Maximize;
  std::vector<EqualityRow> equalities;
  std::vector<InequalityRow> inequalities;
  std::vector<double> var_lower;  // empty: all 0; -inf entries make a variable free below
  std::vector<double> var_upper;  // empty: all +inf
};

struct LpSolution {
  enum class Status { Optimal, Infeasible, Unbounded };
  Status status = Status::Infeasible;
  double value = 0.0;
  std::vector<double> point;  // original variables, valid iff Optimal
  long iterations = 0;
};

struct VertexInfo {
  std::vector<double> point;
  double objective = 0.0;
};

namespace lp_tol {
inline constexpr double kPivot = 1e-10;
inline constexpr double kReducedCost = 1e-9;
inline constexpr double kPhase1 = 1e-8;          // scaled units
inline constexpr double kScaledResidual = 1e-8;  // certification, scaled rows
inline constexpr double kRawResidual = 1e-7;     // certification, raw rows
inline constexpr double kVertexFeasible = 1e-9;
inline constexpr double kVertexDedup = 1e-9;
inline constexpr double kCleanupPivot = 1e-7;
}  // namespace lp_tol

namespace detail {

struct VarMap {
  enum class Kind { Shifted, Mirrored, Split };
  Kind kind = Kind::Shifted;
  std::size_t col = 0;
  std::size_t neg_col = 0;  // Split only
  double offset = 0.0;      // Shifted: x = offset + x'; Mirrored: x = offset - x'
};

// max c.x', A x' = b, x' >= 0, rows scaled to unit max coefficient, b >= 0
struct StandardForm {
  std::size_t num_cols = 0;
  std::size_t num_structural = 0;  // columns before slacks
  std::vector<std::vector<double>> rows;
  std::vector<double> rhs;
  std::vector<double> cost;  // scaled internal objective, 0 on slacks
  double cost_scale = 1.0;
  double cost_const = 0.0;  // internal-units constant absorbed by bound shifts
  double sense_sign = 1.0;  // +1 Maximize, -1 Minimize
  std::vector<VarMap> var_map;
};

inline void validate_lp_shape(const LinearProgram& lp) {
  auto bad = [](const char* msg) { throw std::invalid_argument(msg); };
  if (lp.num_vars == 0) bad("linear program has no variables");
  if (lp.objective.size() != lp.num_vars) bad("objective length does not match num_vars");
  for (double c : lp.objective)
    if (!std::isfinite(c)) bad("objective coefficients must be finite");
  for (const auto& row : lp.equalities) {
    if (row.coeffs.size() != lp.num_vars) bad("equality row length does not match num_vars");
    if (!std::isfinite(row.rhs)) bad("equality rhs must be finite");
    for (double a : row.coeffs)
      if (!std::isfinite(a)) bad("equality coefficients must be finite");
  }
  for (const auto& row : lp.inequalities) {
    if (row.coeffs.size() != lp.num_vars) bad("inequality row length does not match num_vars");
    if (!std::isfinite(row.rhs)) bad("inequality rhs must be finite");
    for (double a : row.coeffs)
      if (!std::isfinite(a)) bad("inequality coefficients must be finite");
  }
  if (!lp.var_lower.empty() && lp.var_lower.size() != lp.num_vars)
    bad("var_lower length does not match num_vars");
  if (!lp.var_upper.empty() && lp.var_upper.size() != lp.num_vars)
    bad("var_upper length does not match num_vars");
  const double inf = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < lp.num_vars; ++i) {
    double lo = lp.var_lower.empty() ? 0.0 : lp.var_lower[i];
    double hi = lp.var_upper.empty() ? inf : lp.var_upper[i];
    if (std::isnan(lo) || std::isnan(hi) || lo == inf || hi == -inf) bad("invalid variable bound");
    if (lo > hi) bad("variable lower bound exceeds upper bound");
  }
}

inline StandardForm build_standard_form(const LinearProgram& lp) {
  const double inf = std::numeric_limits<double>::infinity();
  StandardForm sf;
  sf.sense_sign = lp.sense == LinearProgram::Sense::Maximize ? 1.0 : -1.0;
  sf.var_map.resize(lp.num_vars);

  std::vector<std::pair<std::size_t, double>> extra_ub;
  std::size_t next_col = 0;
  for (std::size_t i = 0; i < lp.num_vars; ++i) {
    double lo = lp.var_lower.empty() ? 0.0 : lp.var_lower[i];
    double hi = lp.var_upper.empty() ? inf : lp.var_upper[i];
    VarMap& vm = sf.var_map[i];
    if (lo != -inf) {
      vm.kind = VarMap::Kind::Shifted;
      vm.col = next_col++;
      vm.offset = lo;
      if (hi != inf) extra_ub.emplace_back(vm.col, hi - lo);
    } else if (hi != inf) {
      vm.kind = VarMap::Kind::Mirrored;
      vm.col = next_col++;
      vm.offset = hi;
    } else {
      vm.kind = VarMap::Kind::Split;
      vm.col = next_col++;
      vm.neg_col = next_col++;
    }
  }
  sf.num_structural = next_col;

  auto transform_row = [&](const std::vector<double>& coeffs, double rhs) {
    std::vector<double> out(sf.num_structural, 0.0);
    double r = rhs;
    for (std::size_t i = 0; i < lp.num_vars; ++i) {
      double a = coeffs[i];
      if (a == 0.0) continue;
      const VarMap& vm = sf.var_map[i];
      switch (vm.kind) {
        case VarMap::Kind::Shifted:
          out[vm.col] += a;
          r -= a * vm.offset;
          break;
        case VarMap::Kind::Mirrored:
          out[vm.col] -= a;
          r -= a * vm.offset;
          break;
        case VarMap::Kind::Split:
          out[vm.col] += a;
          out[vm.neg_col] -= a;
          break;
      }
    }
    return std::make_pair(out, r);
  };

  sf.cost.assign(sf.num_structural, 0.0);
  for (std::size_t i = 0; i < lp.num_vars; ++i) {
    double c = sf.sense_sign * lp.objective[i];
    const VarMap& vm = sf.var_map[i];
    switch (vm.kind) {
      case VarMap::Kind::Shifted:
        sf.cost[vm.col] += c;
        sf.cost_const += c * vm.offset;
        break;
      case VarMap::Kind::Mirrored:
        sf.cost[vm.col] -= c;
        sf.cost_const += c * vm.offset;
        break;
      case VarMap::Kind::Split:
        sf.cost[vm.col] += c;
        sf.cost[vm.neg_col] -= c;
        break;
    }
  }
  sf.cost_scale = 0.0;
  for (double c : sf.cost) sf.cost_scale = std::max(sf.cost_scale, std::fabs(c));
  if (sf.cost_scale == 0.0) sf.cost_scale = 1.0;
  for (double& c : sf.cost) c /= sf.cost_scale;

  struct PendingRow {
    std::vector<double> coeffs;
    double rhs;
    bool equality;
  };
  std::vector<PendingRow> pending;
  for (const auto& row : lp.equalities) {
    auto [coeffs, rhs] = transform_row(row.coeffs, row.rhs);
    pending.push_back({std::move(coeffs), rhs, true});
  }
  for (const auto& row : lp.inequalities) {
    auto [coeffs, rhs] = transform_row(row.coeffs, row.rhs);
    if (row.relation == LinearProgram::Relation::GreaterEq) {
      for (double& a : coeffs) a = -a;
      rhs = -rhs;
    }
    pending.push_back({std::move(coeffs), rhs, false});
  }
  for (auto& [col, ub] : extra_ub) {
    std::vector<double> coeffs(sf.num_structural, 0.0);
    coeffs[col] = 1.0;
    pending.push_back({std::move(coeffs), ub, false});
  }

  std::size_t num_slacks = 0;
  for (const auto& row : pending)
    if (!row.equality) ++num_slacks;
  sf.num_cols = sf.num_structural + num_slacks;
  sf.cost.resize(sf.num_cols, 0.0);

  std::size_t slack = sf.num_structural;
  for (auto& row : pending) {
    double scale = 0.0;
    for (double a : row.coeffs) scale = std::max(scale, std::fabs(a));
    if (scale == 0.0) scale = 1.0;
    std::vector<double> full(sf.num_cols, 0.0);
    for (std::size_t j = 0; j < sf.num_structural; ++j) full[j] = row.coeffs[j] / scale;
    double rhs = row.rhs / scale;
    if (!row.equality) full[slack++] = 1.0;
    if (rhs < 0.0) {
      for (double& a : full) a = -a;
      rhs = -rhs;
    }
    sf.rows.push_back(std::move(full));
    sf.rhs.push_back(rhs);
  }
  return sf;
}

inline std::vector<double> map_back(const StandardForm& sf, const std::vector<double>& x_std,
                                    std::size_t num_vars) {
  std::vector<double> x(num_vars, 0.0);
  for (std::size_t i = 0; i < num_vars; ++i) {
    const VarMap& vm = sf.var_map[i];
    switch (vm.kind) {
      case VarMap::Kind::Shifted:
        x[i] = vm.offset + x_std[vm.col];
        break;
      case VarMap::Kind::Mirrored:
        x[i] = vm.offset - x_std[vm.col];
        break;
      case VarMap::Kind::Split:
        x[i] = x_std[vm.col] - x_std[vm.neg_col];
        break;
    }
  }
  return x;
}

inline void certify_raw(const LinearProgram& lp, const std::vector<double>& x) {
  const double tol = lp_tol::kRawResidual;
  auto dot = [&](const std::vector<double>& coeffs) {
    double s = 0.0;
    for (std::size_t j = 0; j < coeffs.size(); ++j) s += coeffs[j] * x[j];
    return s;
  };
  for (const auto& row : lp.equalities)
    if (std::fabs(dot(row.coeffs) - row.rhs) > tol)
      throw Error("lp solution failed raw equality certification");
  for (const auto& row : lp.inequalities) {
    double v = dot(row.coeffs);
    bool ok = row.relation == LinearProgram::Relation::LessEq ? v <= row.rhs + tol
                                                              : v >= row.rhs - tol;
    if (!ok) throw Error("lp solution failed raw inequality certification");
  }
  const double inf = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < lp.num_vars; ++i) {
    double lo = lp.var_lower.empty() ? 0.0 : lp.var_lower[i];
    double hi = lp.var_upper.empty() ? inf : lp.var_upper[i];
    if (x[i] < lo - tol || x[i] > hi + tol)
      throw Error("lp solution failed variable bound certification");
  }
}

}  // namespace detail

inline LpSolution solve(const LinearProgram& lp) {
  detail::validate_lp_shape(lp);
  detail::StandardForm sf = detail::build_standard_form(lp);
  const std::size_t m = sf.rows.size();
  const std::size_t n = sf.num_cols;
  const std::size_t nt = n + m;  // artificial columns appended

  LpSolution sol;
  if (m == 0) {
    // no constraints: optimum is at the variable bounds or unbounded
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> x(lp.num_vars, 0.0);
    double sign = sf.sense_sign;
    for (std::size_t i = 0; i < lp.num_vars; ++i) {
      double lo = lp.var_lower.empty() ? 0.0 : lp.var_lower[i];
      double hi = lp.var_upper.empty() ? inf : lp.var_upper[i];
      double c = sign * lp.objective[i];
      if (c > 0.0) {
        if (hi == inf) {
          sol.status = LpSolution::Status::Unbounded;
          return sol;
        }
        x[i] = hi;
      } else if (c < 0.0) {
        if (lo == -inf) {
          sol.status = LpSolution::Status::Unbounded;
          return sol;
        }
        x[i] = lo;
      } else {
        x[i] = lo != -inf ? lo : (hi != inf ? hi : 0.0);
      }
    }
    sol.status = LpSolution::Status::Optimal;
    sol.point = x;
    sol.value = 0.0;
    for (std::size_t i = 0; i < lp.num_vars; ++i) sol.value += lp.objective[i] * x[i];
    return sol;
  }

  std::vector<std::vector<double>> a(m, std::vector<double>(nt, 0.0));
  std::vector<double> b = sf.rhs;
  std::vector<std::size_t> basis(m);
  std::vector<char> is_basic(nt, 0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) a[i][j] = sf.rows[i][j];
    a[i][n + i] = 1.0;
    basis[i] = n + i;
    is_basic[n + i] = 1;
  }

  const long max_iters =
      50 * static_cast<long>(lp.num_vars + lp.equalities.size() + lp.inequalities.size());
  long iters = 0;

  auto pivot = [&](std::size_t row, std::size_t col) {
    double p = a[row][col];
    for (std::size_t j = 0; j < nt; ++j) a[row][j] /= p;
    b[row] /= p;
    a[row][col] = 1.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (i == row) continue;
      double f = a[i][col];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < nt; ++j) a[i][j] -= f * a[row][j];
      a[i][col] = 0.0;
      b[i] -= f * b[row];
      if (b[i] < 0.0 && b[i] > -1e-9) b[i] = 0.0;
    }
    is_basic[basis[row]] = 0;
    basis[row] = col;
    is_basic[col] = 1;
    ++iters;
  };

  // Bland's rule: entering = lowest eligible index, leaving = lowest basis index among ties
  auto run_phase = [&](const std::vector<double>& cost, std::size_t active_cols,
                       bool phase_one) -> bool {
    // returns false iff unbounded
    for (;;) {
      if (iters >= max_iters)
        throw MaxIterationsExceeded("simplex iteration cap reached (" + std::to_string(max_iters) +
                                    ")");
      std::size_t entering = nt;
      for (std::size_t j = 0; j < active_cols; ++j) {
        if (is_basic[j]) continue;
        double rc = cost[j];
        for (std::size_t i = 0; i < m; ++i) {
          double cb = cost[basis[i]];
          if (cb != 0.0) rc -= cb * a[i][j];
        }
        if (rc > lp_tol::kReducedCost) {
          entering = j;
          break;
        }
      }
      if (entering == nt) return true;  // optimal for this phase

      std::size_t leave = m;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < m; ++i) {
        if (a[i][entering] > lp_tol::kPivot) {
          double ratio = b[i] / a[i][entering];
          if (ratio < best_ratio - 1e-12 ||
              (std::fabs(ratio - best_ratio) <= 1e-12 && (leave == m || basis[i] < basis[leave]))) {
            best_ratio = ratio;
            leave = i;
          }
        }
      }
      if (leave == m) {
        if (phase_one) throw Error("phase-1 objective unbounded: numerical failure");
        return false;
      }
      pivot(leave, entering);
    }
  };

  // phase 1: drive artificial variables to zero
  std::vector<double> cost1(nt, 0.0);
  for (std::size_t j = n; j < nt; ++j) cost1[j] = -1.0;
  run_phase(cost1, nt, true);

  double infeasibility = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    if (basis[i] >= n) infeasibility += b[i];
  if (infeasibility > lp_tol::kPhase1) {
    sol.status = LpSolution::Status::Infeasible;
    sol.iterations = iters;
    return sol;
  }

  // pivot remaining artificials out; a row with no usable entry is redundant and inert
  for (std::size_t i = 0; i < m; ++i) {
    if (basis[i] < n) continue;
    std::size_t col = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (!is_basic[j] && std::fabs(a[i][j]) > lp_tol::kCleanupPivot) {
        col = j;
        break;
      }
    }
    if (col < n) pivot(i, col);
  }

  std::vector<double> cost2(nt, 0.0);
  for (std::size_t j = 0; j < n; ++j) cost2[j] = sf.cost[j];
  bool bounded = run_phase(cost2, n, false);
  if (!bounded) {
    sol.status = LpSolution::Status::Unbounded;
    sol.iterations = iters;
    return sol;
  }

  std::vector<double> x_std(n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    if (basis[i] < n)
      x_std[basis[i]] = b[i];
    else if (b[i] > lp_tol::kPhase1)
      throw Error("artificial variable remained positive after optimization");
  }

  for (std::size_t i = 0; i < m; ++i) {
    double lhs = 0.0;
    for (std::size_t j = 0; j < n; ++j) lhs += sf.rows[i][j] * x_std[j];
    if (std::fabs(lhs - sf.rhs[i]) > lp_tol::kScaledResidual)
      throw Error("lp solution failed scaled feasibility certification");
  }

  std::vector<double> x = detail::map_back(sf, x_std, lp.num_vars);
  detail::certify_raw(lp, x);

  double value = 0.0;
  for (std::size_t i = 0; i < lp.num_vars; ++i) value += lp.objective[i] * x[i];
  double z_scaled = 0.0;
  for (std::size_t i = 0; i < m; ++i) z_scaled += cost2[basis[i]] * b[i];
  double value_tab = sf.sense_sign * (z_scaled * sf.cost_scale + sf.cost_const);
  if (std::fabs(value_tab - value) > 1e-9 * std::max(1.0, std::fabs(value)))
    throw Error("lp objective value failed consistency certification");

  sol.status = LpSolution::Status::Optimal;
  sol.value = value;
  sol.point = std::move(x);
  sol.iterations = iters;
  return sol;
}

// all basic feasible solutions of the constraint system, mapped to original variables
inline std::vector<VertexInfo> enumerate_vertices(const LinearProgram& lp) {
  detail::validate_lp_shape(lp);
  if (lp.num_vars > 12)
    throw DimensionTooLarge("vertex enumeration supports at most 12 variables, got " +
                            std::to_string(lp.num_vars));
  detail::StandardForm sf = detail::build_standard_form(lp);
  const std::size_t m = sf.rows.size();
  const std::size_t n = sf.num_cols;

  // row-reduce to an independent system; inconsistency means an empty polytope
  std::vector<std::vector<double>> e = sf.rows;
  std::vector<double> f = sf.rhs;
  std::size_t rank = 0;
  for (std::size_t col = 0; col < n && rank < m; ++col) {
    std::size_t piv = rank;
    for (std::size_t i = rank + 1; i < m; ++i)
      if (std::fabs(e[i][col]) > std::fabs(e[piv][col])) piv = i;
    if (std::fabs(e[piv][col]) <= 1e-10) continue;
    std::swap(e[piv], e[rank]);
    std::swap(f[piv], f[rank]);
    double p = e[rank][col];
    for (std::size_t j = 0; j < n; ++j) e[rank][j] /= p;
    f[rank] /= p;
    for (std::size_t i = 0; i < m; ++i) {
      if (i == rank) continue;
      double fac = e[i][col];
      if (fac == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) e[i][j] -= fac * e[rank][j];
      f[i] -= fac * f[rank];
    }
    ++rank;
  }
  for (std::size_t i = rank; i < m; ++i)
    if (std::fabs(f[i]) > 1e-9) return {};  // 0 = nonzero: no feasible point

  std::vector<VertexInfo> out;
  if (rank == 0) return out;
  if (rank > n) return out;

  std::vector<std::size_t> comb(rank);
  for (std::size_t i = 0; i < rank; ++i) comb[i] = i;

  std::vector<std::vector<double>> mat(rank, std::vector<double>(rank + 1, 0.0));
  for (;;) {
    for (std::size_t i = 0; i < rank; ++i) {
      for (std::size_t j = 0; j < rank; ++j) mat[i][j] = e[i][comb[j]];
      mat[i][rank] = f[i];
    }
    bool singular = false;
    for (std::size_t col = 0; col < rank && !singular; ++col) {
      std::size_t piv = col;
      for (std::size_t i = col + 1; i < rank; ++i)
        if (std::fabs(mat[i][col]) > std::fabs(mat[piv][col])) piv = i;
      if (std::fabs(mat[piv][col]) <= lp_tol::kPivot) {
        singular = true;
        break;
      }
      std::swap(mat[piv], mat[col]);
      for (std::size_t i = col + 1; i < rank; ++i) {
        double fac = mat[i][col] / mat[col][col];
        if (fac == 0.0) continue;
        for (std::size_t j = col; j <= rank; ++j) mat[i][j] -= fac * mat[col][j];
      }
    }
    if (!singular) {
      std::vector<double> xb(rank, 0.0);
      bool feasible = true;
      for (std::size_t i = rank; i-- > 0;) {
        double s = mat[i][rank];
        for (std::size_t j = i + 1; j < rank; ++j) s -= mat[i][j] * xb[j];
        xb[i] = s / mat[i][i];
        if (xb[i] < -lp_tol::kVertexFeasible) {
          feasible = false;
          break;
        }
      }
      if (feasible) {
        std::vector<double> x_std(n, 0.0);
        for (std::size_t j = 0; j < rank; ++j) x_std[comb[j]] = std::max(xb[j], 0.0);
        std::vector<double> x = detail::map_back(sf, x_std, lp.num_vars);
        bool dup = false;
        for (const auto& v : out) {
          double dist = 0.0;
          for (std::size_t i = 0; i < x.size(); ++i)
            dist = std::max(dist, std::fabs(v.point[i] - x[i]));
          if (dist <= lp_tol::kVertexDedup) {
            dup = true;
            break;
          }
        }
        if (!dup) {
          double obj = 0.0;
          for (std::size_t i = 0; i < x.size(); ++i) obj += lp.objective[i] * x[i];
          out.push_back({std::move(x), obj});
        }
      }
    }

    // next combination in lexicographic order
    std::size_t i = rank;
    while (i-- > 0) {
      if (comb[i] != i + n - rank) {
        ++comb[i];
        for (std::size_t j = i + 1; j < rank; ++j) comb[j] = comb[j - 1] + 1;
        break;
      }
      if (i == 0) return out;
    }
    if (rank == 0) return out;
  }
}

}  // namespace otr
