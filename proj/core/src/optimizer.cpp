#include "pivio/optimizer.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "pivio/errors.hpp"

namespace pivio {

const Keyframe* KeyframeGraph::find(int id) const {
  for (const Keyframe& kf : keyframes) {
    if (kf.id == id) return &kf;
  }
  return nullptr;
}

int WindowProblem::free_count() const {
  int n = 0;
  for (const char f : fixed) n += f ? 0 : 1;
  return n;
}

namespace {

double beta_for(ResidualKind kind, double gamma) {
  switch (kind) {
    case ResidualKind::gyro: return gamma;
    case ResidualKind::reproj: return 1.0 - gamma;
    default: return 1.0;
  }
}

int kind_index(ResidualKind k) { return static_cast<int>(k); }

struct Linearization {
  // column offset per local pose index, -1 for fixed
  std::vector<int> col_of;
  int n_cols = 0;
  // block normal equations
  std::map<std::pair<int, int>, Mat6> h;  // upper triangle, col_i <= col_j
  VecX g;
  int deactivated = 0;
  // dense reference path data
  std::vector<Eigen::Matrix<double, 3, Eigen::Dynamic>> dense_rows;
  std::vector<Vec3> dense_res;
  std::vector<int> dense_dims;
};

Linearization linearize(const WindowProblem& p, const std::vector<Transform>& poses,
                        bool keep_dense) {
  Linearization lin;
  lin.col_of.assign(p.poses.size(), -1);
  int col = 0;
  for (size_t i = 0; i < p.poses.size(); ++i) {
    if (!p.fixed[i]) {
      lin.col_of[i] = col;
      col += 6;
    }
  }
  lin.n_cols = col;
  lin.g = VecX::Zero(col);

  EvalContext ctx{p.rig, p.refs};
  for (const ResidualBlock& block : p.blocks) {
    const Transform& pose_i = poses[block.pose_i];
    const Transform* pose_j = block.pose_j >= 0 ? &poses[block.pose_j] : nullptr;
    const BlockEval ev = evaluate_block(block, pose_i, pose_j, ctx, true);
    if (!ev.active) {
      ++lin.deactivated;
      continue;
    }
    const int d = ev.dim;
    const Vec3 e = block.alpha * ev.residual;
    const double s = e.head(d).norm();
    const double w = robust_weight(block.robustifier, s, block.huber_delta);
    const double sw = std::sqrt(w);

    const int ci = lin.col_of[block.pose_i];
    const int cj = block.pose_j >= 0 ? lin.col_of[block.pose_j] : -1;
    const Eigen::Matrix<double, 3, 6> ji = sw * block.alpha * ev.j_i;
    const Eigen::Matrix<double, 3, 6> jj = sw * block.alpha * ev.j_j;
    const Vec3 ew = sw * e;

    if (ci >= 0) {
      lin.g.segment<6>(ci) += ji.topRows(d).transpose() * ew.head(d);
      lin.h[{ci, ci}] += ji.topRows(d).transpose() * ji.topRows(d);
    }
    if (cj >= 0) {
      lin.g.segment<6>(cj) += jj.topRows(d).transpose() * ew.head(d);
      lin.h[{cj, cj}] += jj.topRows(d).transpose() * jj.topRows(d);
    }
    if (ci >= 0 && cj >= 0) {
      if (ci <= cj) {
        lin.h[{ci, cj}] += ji.topRows(d).transpose() * jj.topRows(d);
      } else {
        lin.h[{cj, ci}] += jj.topRows(d).transpose() * ji.topRows(d);
      }
    }
    if (keep_dense) {
      Eigen::Matrix<double, 3, Eigen::Dynamic> row =
          Eigen::Matrix<double, 3, Eigen::Dynamic>::Zero(3, lin.n_cols);
      if (ci >= 0) row.middleCols<6>(ci) = ji;
      if (cj >= 0) row.middleCols<6>(cj) = jj;
      lin.dense_rows.push_back(std::move(row));
      lin.dense_res.push_back(ew);
      lin.dense_dims.push_back(d);
    }
  }
  return lin;
}

VecX damped_diagonal(const VecX& diag, double lambda) {
  const double dmax = diag.size() ? diag.maxCoeff() : 0.0;
  VecX d = diag;
  for (int i = 0; i < d.size(); ++i) {
    d(i) = lambda * std::max(d(i), 1e-10 * dmax + 1e-300);
  }
  return d;
}

VecX solve_sparse(const Linearization& lin, double lambda) {
  const int n = lin.n_cols;
  VecX diag = VecX::Zero(n);
  for (const auto& [key, blockm] : lin.h) {
    if (key.first == key.second) diag.segment<6>(key.first) += blockm.diagonal();
  }
  const VecX damp = damped_diagonal(diag, lambda);

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(lin.h.size() * 36 + n);
  for (const auto& [key, blockm] : lin.h) {
    for (int r = 0; r < 6; ++r) {
      for (int c = 0; c < 6; ++c) {
        const int gr = key.first + r;
        const int gc = key.second + c;
        if (key.first == key.second && gr > gc) continue;  // keep upper triangle
        trip.emplace_back(gr, gc, blockm(r, c));
      }
    }
  }
  for (int i = 0; i < n; ++i) trip.emplace_back(i, i, damp(i));

  Eigen::SparseMatrix<double> h(n, n);
  h.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Upper> ldlt;
  ldlt.compute(h);
  if (ldlt.info() != Eigen::Success) {
    throw NumericalError("sparse normal equations factorization failed");
  }
  return ldlt.solve(-lin.g);
}

VecX solve_dense(const Linearization& lin, double lambda) {
  const int n = lin.n_cols;
  int rows = 0;
  for (const int d : lin.dense_dims) rows += d;
  MatX j(rows, n);
  VecX e(rows);
  int r = 0;
  for (size_t k = 0; k < lin.dense_rows.size(); ++k) {
    const int d = lin.dense_dims[k];
    j.middleRows(r, d) = lin.dense_rows[k].topRows(d);
    e.segment(r, d) = lin.dense_res[k].head(d);
    r += d;
  }
  MatX h = j.transpose() * j;
  const VecX damp = damped_diagonal(h.diagonal(), lambda);
  h.diagonal() += damp;
  const VecX g = j.transpose() * e;
  return h.ldlt().solve(-g);
}

void apply_step(const WindowProblem& p, const std::vector<int>& col_of,
                const VecX& step, std::vector<Transform>& poses) {
  for (size_t i = 0; i < poses.size(); ++i) {
    const int c = col_of[i];
    if (c < 0) continue;
    poses[i] = poses[i] * exp_se3(Twist::from_vector(step.segment<6>(c)));
  }
}

}  // namespace

WindowProblem build_problem(const KeyframeGraph& graph, int first, int last,
                            const ResidualStatistics& stats, double gamma,
                            const StereoRig* rig, const WorldReferences& refs,
                            double huber_delta) {
  if (graph.keyframes.empty() || first < 0 ||
      last >= static_cast<int>(graph.keyframes.size()) || first > last) {
    throw ConfigError("build_problem: empty or out-of-range window");
  }

  WindowProblem p;
  p.rig = rig;
  p.refs = refs;
  p.gamma = gamma;

  std::unordered_map<int, int> local;  // keyframe id -> local index
  for (int k = first; k <= last; ++k) {
    const Keyframe& kf = graph.keyframes[k];
    local[kf.id] = static_cast<int>(p.poses.size());
    p.keyframe_ids.push_back(kf.id);
    p.poses.push_back(kf.pose);
    p.fixed.push_back(k == first ? 1 : 0);
  }

  const auto anchor_index = [&](int kf_id) {
    const auto it = local.find(kf_id);
    if (it != local.end()) return it->second;
    const Keyframe* kf = graph.find(kf_id);
    if (!kf) {
      throw ConfigError("landmark anchored at unknown keyframe " + std::to_string(kf_id));
    }
    const int idx = static_cast<int>(p.poses.size());
    local[kf_id] = idx;
    p.keyframe_ids.push_back(kf_id);
    p.poses.push_back(kf->pose);
    p.fixed.push_back(1);  // outside the window: held fixed
    return idx;
  };

  for (int k = first; k <= last; ++k) {
    const Keyframe& kf = graph.keyframes[k];
    const int idx = local.at(kf.id);

    ResidualBlock pivot;
    pivot.kind = ResidualKind::pivot;
    pivot.pose_i = idx;
    pivot.alpha = scale_factor(ResidualKind::pivot,
                               {stats.entry(ResidualKind::pivot).mean,
                                stats.entry(ResidualKind::pivot).variance, 1,
                                stats.entry(ResidualKind::pivot).unit},
                               beta_for(ResidualKind::pivot, gamma));
    p.blocks.push_back(pivot);

    ResidualBlock accel;
    accel.kind = ResidualKind::accel;
    accel.pose_i = idx;
    accel.vector_meas = kf.gravity_in_c;
    accel.alpha = scale_factor(ResidualKind::accel,
                               {stats.entry(ResidualKind::accel).mean,
                                stats.entry(ResidualKind::accel).variance, 1,
                                stats.entry(ResidualKind::accel).unit},
                               beta_for(ResidualKind::accel, gamma));
    p.blocks.push_back(accel);

    ResidualBlock mag;
    mag.kind = ResidualKind::mag;
    mag.pose_i = idx;
    mag.vector_meas = kf.mag_in_c;
    mag.alpha = scale_factor(ResidualKind::mag,
                             {stats.entry(ResidualKind::mag).mean,
                              stats.entry(ResidualKind::mag).variance, 1,
                              stats.entry(ResidualKind::mag).unit},
                             beta_for(ResidualKind::mag, gamma));
    p.blocks.push_back(mag);

    if (k > first) {
      ResidualBlock gyro;
      gyro.kind = ResidualKind::gyro;
      gyro.pose_i = local.at(graph.keyframes[k - 1].id);
      gyro.pose_j = idx;
      gyro.gyro_delta = kf.gyro_link.delta;
      gyro.alpha = scale_factor(ResidualKind::gyro,
                                {stats.entry(ResidualKind::gyro).mean,
                                 stats.entry(ResidualKind::gyro).variance, 1,
                                 stats.entry(ResidualKind::gyro).unit},
                                beta_for(ResidualKind::gyro, gamma));
      p.blocks.push_back(gyro);
    }

    const int n_reproj = static_cast<int>(kf.observations.size());
    if (n_reproj == 0) continue;
    const double alpha_reproj =
        scale_factor(ResidualKind::reproj,
                     {stats.entry(ResidualKind::reproj).mean,
                      stats.entry(ResidualKind::reproj).variance, n_reproj,
                      stats.entry(ResidualKind::reproj).unit},
                     beta_for(ResidualKind::reproj, gamma));
    for (const Observation& obs : kf.observations) {
      const auto lm_it = graph.landmarks.find(obs.landmark);
      if (lm_it == graph.landmarks.end()) {
        throw ConfigError("observation of unknown landmark " + std::to_string(obs.landmark));
      }
      ResidualBlock reproj;
      reproj.kind = ResidualKind::reproj;
      reproj.pose_i = idx;
      reproj.pose_j = anchor_index(lm_it->second.anchor_keyframe);
      reproj.pixel = obs.pixel;
      reproj.lens = obs.lens;
      reproj.landmark_in_anchor = lm_it->second.position_in_anchor;
      reproj.alpha = alpha_reproj;
      reproj.robustifier = Robustifier::huber;
      reproj.huber_delta = huber_delta;
      p.blocks.push_back(reproj);
    }
  }
  return p;
}

std::array<double, 5> cost_breakdown(const WindowProblem& problem,
                                     const std::vector<Transform>& poses) {
  std::array<double, 5> f{};
  EvalContext ctx{problem.rig, problem.refs};
  for (const ResidualBlock& block : problem.blocks) {
    const Transform* pose_j = block.pose_j >= 0 ? &poses[block.pose_j] : nullptr;
    const BlockEval ev = evaluate_block(block, poses[block.pose_i], pose_j, ctx, false);
    if (!ev.active) continue;
    const double s = (block.alpha * ev.residual.head(ev.dim)).norm();
    f[kind_index(block.kind)] += robust_cost(block.robustifier, s, block.huber_delta);
  }
  return f;
}

std::array<double, 5> delta_f(const WindowProblem& problem,
                              const std::vector<Transform>& before,
                              const std::vector<Transform>& after) {
  const auto fb = cost_breakdown(problem, before);
  const auto fa = cost_breakdown(problem, after);
  std::array<double, 5> d{};
  for (int i = 0; i < 5; ++i) d[i] = fa[i] - fb[i];
  return d;
}

std::array<double, 5> SolveReport::delta_f() const {
  std::array<double, 5> d{};
  for (int i = 0; i < 5; ++i) d[i] = cost_after[i] - cost_before[i];
  return d;
}

VecX lm_step(const WindowProblem& problem, const std::vector<Transform>& poses,
             double lambda, bool dense) {
  const Linearization lin = linearize(problem, poses, dense);
  return dense ? solve_dense(lin, lambda) : solve_sparse(lin, lambda);
}

double reduced_hessian_min_eigenvalue(const WindowProblem& problem,
                                      const std::vector<Transform>& poses) {
  const Linearization lin = linearize(problem, poses, false);
  MatX h = MatX::Zero(lin.n_cols, lin.n_cols);
  for (const auto& [key, blockm] : lin.h) {
    h.block<6, 6>(key.first, key.second) += blockm;
    if (key.first != key.second) {
      h.block<6, 6>(key.second, key.first) += blockm.transpose();
    }
  }
  const Eigen::SelfAdjointEigenSolver<MatX> eig(0.5 * (h + h.transpose()));
  return eig.eigenvalues()(0);
}

SolveReport solve(WindowProblem& problem, const SolveOptions& opts) {
  SolveReport report;
  auto total = [](const std::array<double, 5>& f) {
    double s = 0.0;
    for (const double v : f) s += v;
    return s;
  };

  report.cost_before = cost_breakdown(problem, problem.poses);
  double cost = total(report.cost_before);
  if (!std::isfinite(cost)) {
    throw NumericalError("non-finite cost at the start of the solve");
  }
  report.cost_history.push_back(cost);

  double lambda = opts.initial_lambda;
  std::vector<int> col_of;

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    const Linearization lin = linearize(problem, problem.poses, opts.use_dense);
    report.deactivated_blocks = lin.deactivated;
    col_of = lin.col_of;
    if (lin.n_cols == 0) {
      report.termination = "no_free_parameters";
      break;
    }
    if (lin.g.lpNorm<Eigen::Infinity>() < opts.gradient_tol) {
      report.termination = "gradient";
      break;
    }

    bool accepted = false;
    while (lambda <= opts.lambda_max) {
      const VecX step = opts.use_dense ? solve_dense(lin, lambda) : solve_sparse(lin, lambda);
      std::vector<Transform> candidate = problem.poses;
      apply_step(problem, lin.col_of, step, candidate);
      const double c_new = total(cost_breakdown(problem, candidate));
      if (std::isfinite(c_new) && c_new < cost) {
        problem.poses = std::move(candidate);
        const double decrease = cost - c_new;
        cost = c_new;
        report.cost_history.push_back(cost);
        lambda = std::max(lambda / opts.lambda_down, 1e-14);
        accepted = true;
        ++report.iterations;
        if (decrease < opts.relative_cost_tol * std::max(cost, 1e-300)) {
          report.termination = "relative_cost_decrease";
        }
        break;
      }
      lambda *= opts.lambda_up;
    }
    if (!accepted) {
      report.termination = "damping_overflow";
      report.success = false;
      report.cost_after = cost_breakdown(problem, problem.poses);
      return report;
    }
    if (!report.termination.empty()) break;
  }
  if (report.termination.empty()) report.termination = "max_iterations";
  report.success = true;
  report.cost_after = cost_breakdown(problem, problem.poses);
  return report;
}

}  // namespace pivio
