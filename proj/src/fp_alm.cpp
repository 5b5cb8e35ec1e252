#include "mecslice/fp_alm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace mecslice {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Index = Eigen::Index;
inline Index I(std::size_t i) { return static_cast<Index>(i); }

/// Interference received at each cell on each subchannel from the
/// transmitted powers p of users served elsewhere: cells x subchannels.
Eigen::MatrixXd cell_interference(const Scenario& s, const Eigen::MatrixXd& p) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(I(s.num_cells()), I(s.num_subchannels()));
  for (std::size_t v = 0; v < s.num_users(); ++v) {
    const std::size_t home = s.user(v).serving_server;
    for (std::size_t i = 0; i < s.num_cells(); ++i) {
      if (i == home) continue;
      for (std::size_t n = 0; n < s.num_subchannels(); ++n)
        out(I(i), I(n)) += p(I(v), I(n)) * s.gain(v, i, n);
    }
  }
  return out;
}

double offloaded_bits(const Scenario& s, const Eigen::MatrixXd& y, std::size_t u) {
  double share = 0.0;
  for (Index j = 1; j < y.cols(); ++j) share += y(I(u), j);
  return share * s.user(u).task.size_bits;
}

double penalty(double mult, double residual, double psi) {
  const double shifted = std::max(0.0, mult + psi * residual);
  return (shifted * shifted - mult * mult) / (2.0 * psi);
}

}  // namespace

AlmState AlmState::zeros(const Scenario& s, double psi) {
  AlmState a;
  const Index u = I(s.num_users()), n = I(s.num_subchannels()),
              m = I(s.num_cells()), k = I(s.num_slices());
  a.theta = Eigen::VectorXd::Zero(u);
  a.delta = Eigen::VectorXd::Zero(k);
  a.phi = Eigen::MatrixXd::Zero(n, m);
  a.xi = Eigen::MatrixXd::Zero(u, n);
  a.bigxi = Eigen::MatrixXd::Zero(u, n);
  a.chi = Eigen::VectorXd::Zero(k);
  a.psi = psi;
  return a;
}

double AlmResiduals::max_violation() const {
  double v = 0.0;
  const auto upd = [&v](const auto& m) {
    if (m.size() > 0) v = std::max(v, m.maxCoeff());
  };
  upd(power);
  upd(compute);
  upd(reuse);
  upd(binary);
  upd(coupling);
  upd(spectrum);
  return v;
}

AlmResiduals alm_residuals(const Scenario& s, const AllocationState& a,
                           BlockMask blocks) {
  const std::size_t nu = s.num_users(), nn = s.num_subchannels(),
                    nm = s.num_cells(), nk = s.num_slices();
  AlmResiduals r;
  // Rows of frozen blocks stay zero so they never drive multiplier updates.
  r.power = Eigen::VectorXd::Zero(I(nu));
  r.compute = Eigen::VectorXd::Zero(I(nk));
  r.reuse = Eigen::MatrixXd::Zero(I(nn), I(nm));
  r.binary = Eigen::MatrixXd::Zero(I(nu), I(nn));
  r.coupling = Eigen::MatrixXd::Zero(I(nu), I(nn));
  r.spectrum = Eigen::VectorXd::Zero(I(nk));

  if (blocks.power) {
    for (std::size_t u = 0; u < nu; ++u) {
      const double pmax = s.user(u).max_power;
      double load = 0.0;
      for (std::size_t n = 0; n < nn; ++n) load += a.p(I(u), I(n)) / pmax;
      r.power(I(u)) = load - 1.0;
    }
  }
  if (blocks.x) {
    for (std::size_t u = 0; u < nu; ++u) {
      const double pmax = s.user(u).max_power;
      for (std::size_t n = 0; n < nn; ++n) {
        const double x = a.x(I(u), I(n));
        r.binary(I(u), I(n)) = x - x * x;
        r.coupling(I(u), I(n)) = a.p(I(u), I(n)) / pmax - x;
      }
    }
    for (std::size_t j = 0; j < nm; ++j)
      for (std::size_t n = 0; n < nn; ++n) {
        double held = 0.0;
        for (std::size_t u : s.cell_members(j)) held += a.x(I(u), I(n));
        r.reuse(I(n), I(j)) = held - 1.0;
      }
    const double total_sub = static_cast<double>(nm * nn);
    for (std::size_t k = 0; k < nk; ++k) {
      double held = 0.0;
      for (std::size_t u : s.slice_members(k))
        for (std::size_t n = 0; n < nn; ++n) held += a.x(I(u), I(n));
      r.spectrum(I(k)) = held - s.slices()[k].bandwidth_share * total_sub;
    }
  }
  if (blocks.compute) {
    const double total_speed = s.total_server_capacity();
    for (std::size_t k = 0; k < nk; ++k) {
      double speed = 0.0;
      for (std::size_t u : s.slice_members(k))
        for (std::size_t j = 0; j < nm; ++j) speed += a.f(I(u), I(j));
      r.compute(I(k)) = speed / total_speed - s.slices()[k].compute_share;
    }
  }
  return r;
}

AlmState update_multipliers(const AlmState& alm, const AlmResiduals& res) {
  AlmState out = alm;
  const double psi = alm.psi;
  const auto step = [psi](auto& mult, const auto& residual) {
    mult = (mult + psi * residual).cwiseMax(0.0);
  };
  step(out.theta, res.power);
  step(out.delta, res.compute);
  step(out.phi, res.reuse);
  step(out.xi, res.binary);
  step(out.bigxi, res.coupling);
  step(out.chi, res.spectrum);
  return out;
}

double transformed_rate(const Scenario& s, const AllocationState& a,
                        const FpAuxiliary& aux, std::size_t u, std::size_t n) {
  const std::size_t home = s.user(u).serving_server;
  double interf = 0.0;
  for (std::size_t v = 0; v < s.num_users(); ++v)
    if (s.user(v).serving_server != home) interf += a.p(I(v), I(n)) * s.gain(v, home, n);
  const double z = aux.z(I(u), I(n));
  const double inner = 2.0 * z * std::sqrt(s.gain(u, home, n) * a.p(I(u), I(n))) -
                       z * z * (interf + s.channel().noise_power);
  return s.channel().subchannel_bandwidth * std::log2(1.0 + std::max(0.0, inner));
}

double transformed_objective(const Scenario& s, const AllocationState& a,
                             const Eigen::MatrixXd& y, const FpAuxiliary& aux) {
  const Eigen::MatrixXd interf = cell_interference(s, a.p);
  const double noise = s.channel().noise_power;
  const double bw = s.channel().subchannel_bandwidth;
  double total = 0.0;
  for (std::size_t u = 0; u < s.num_users(); ++u) {
    const User& us = s.user(u);
    const SliceSla& sl = s.slice_of(u);
    const double cycles = us.task.cycles();
    double term = y(I(u), 0) * cycles / us.local_cpu - sl.delay_target;

    const double w = offloaded_bits(s, y, u);
    if (w > 0.0) {
      double rhat = 0.0;
      for (std::size_t n = 0; n < s.num_subchannels(); ++n) {
        const double z = aux.z(I(u), I(n));
        const double inner =
            2.0 * z * std::sqrt(s.gain(u, us.serving_server, n) * a.p(I(u), I(n))) -
            z * z * (interf(I(us.serving_server), I(n)) + noise);
        rhat += bw * std::log2(1.0 + std::max(0.0, inner));
      }
      if (rhat <= 0.0) return kInf;
      const double t = aux.t(I(u));
      term += t * w * w + 1.0 / (4.0 * t * rhat * rhat);
    }
    for (std::size_t j = 0; j < s.num_cells(); ++j) {
      const double share = y(I(u), I(j + 1));
      if (share <= 0.0) continue;
      if (j != us.serving_server) term += share * s.handoff(us.serving_server, j);
      const double speed = a.f(I(u), I(j));
      if (speed <= 0.0) return kInf;
      term += share * cycles / speed;
    }
    total += sl.lambda * term;
  }
  return total;
}

double augmented_lagrangian(const Scenario& s, const AllocationState& a,
                            const Eigen::MatrixXd& y, const FpAuxiliary& aux,
                            const AlmState& alm, BlockMask blocks) {
  double value = transformed_objective(s, a, y, aux);
  const AlmResiduals r = alm_residuals(s, a, blocks);
  const double psi = alm.psi;
  const auto add = [&](const auto& mult, const auto& res) {
    for (Index i = 0; i < mult.size(); ++i)
      value += penalty(mult.data()[i], res.data()[i], psi);
  };
  if (blocks.power) add(alm.theta, r.power);
  if (blocks.x) {
    add(alm.phi, r.reuse);
    add(alm.xi, r.binary);
    add(alm.bigxi, r.coupling);
    add(alm.chi, r.spectrum);
  }
  if (blocks.compute) add(alm.delta, r.compute);
  return value;
}

FpAuxiliary update_slacks(const Scenario& s, const AllocationState& a,
                          const Eigen::MatrixXd& y) {
  FpAuxiliary aux;
  aux.z = Eigen::MatrixXd::Zero(I(s.num_users()), I(s.num_subchannels()));
  aux.t = Eigen::VectorXd::Ones(I(s.num_users()));
  const Eigen::MatrixXd interf = cell_interference(s, a.p);
  const double noise = s.channel().noise_power;
  const double bw = s.channel().subchannel_bandwidth;
  for (std::size_t u = 0; u < s.num_users(); ++u) {
    const std::size_t home = s.user(u).serving_server;
    double r = 0.0;
    for (std::size_t n = 0; n < s.num_subchannels(); ++n) {
      const double p = a.p(I(u), I(n));
      if (p <= 0.0) continue;
      const double h = s.gain(u, home, n);
      const double denom = interf(I(home), I(n)) + noise;
      aux.z(I(u), I(n)) = std::sqrt(p * h) / denom;
      r += bw * std::log2(1.0 + p * h / denom);
    }
    const double w = offloaded_bits(s, y, u);
    if (w > 0.0 && r > 0.0) aux.t(I(u)) = 1.0 / (2.0 * w * r);
  }
  return aux;
}

AllocationState effective_state(const AllocationState& a) {
  AllocationState out = a;
  for (Index i = 0; i < out.x.size(); ++i)
    if (out.p.data()[i] > 0.0) out.x.data()[i] = 1.0;
  return out;
}

double relaxed_objective(const Scenario& s, const AllocationState& a,
                         const Eigen::MatrixXd& y) {
  AllocationState eff = effective_state(a);
  eff.y = y;
  return objective(s, eff);
}

// ---------------------------------------------------------------------------
// AlmProblem

AlmProblem::AlmProblem(const Scenario& s, const Eigen::MatrixXd& y,
                       const FpAuxiliary& aux, const AlmState& alm,
                       BlockMask blocks)
    : s_(s),
      y_(y),
      aux_(aux),
      alm_(alm),
      blocks_(blocks),
      n_users_(s.num_users()),
      n_sub_(s.num_subchannels()),
      n_cells_(s.num_cells()),
      size_(static_cast<Index>(2 * n_users_ * n_sub_ + n_users_ * n_cells_)),
      total_speed_(s.total_server_capacity()),
      offloaded_bits_(n_users_, 0.0),
      constant_(n_users_, 0.0),
      compute_coef_(Eigen::MatrixXd::Zero(I(n_users_), I(n_cells_))) {
  for (std::size_t u = 0; u < n_users_; ++u) {
    const User& us = s.user(u);
    const SliceSla& sl = s.slice_of(u);
    const double cycles = us.task.cycles();
    offloaded_bits_[u] = offloaded_bits(s, y, u);
    double c = y(I(u), 0) * cycles / us.local_cpu - sl.delay_target;
    for (std::size_t j = 0; j < n_cells_; ++j) {
      const double share = y(I(u), I(j + 1));
      if (share <= 0.0) continue;
      if (j != us.serving_server) c += share * s.handoff(us.serving_server, j);
      compute_coef_(I(u), I(j)) = sl.lambda * share * cycles / total_speed_;
    }
    constant_[u] = sl.lambda * c;
  }
}

Eigen::VectorXd AlmProblem::pack(const AllocationState& a) const {
  Eigen::VectorXd v(size_);
  for (std::size_t u = 0; u < n_users_; ++u) {
    const double pmax = s_.user(u).max_power;
    for (std::size_t n = 0; n < n_sub_; ++n) {
      v(ix(u, n)) = a.x(I(u), I(n));
      v(ia(u, n)) = std::sqrt(std::max(0.0, a.p(I(u), I(n))) / pmax);
    }
    for (std::size_t j = 0; j < n_cells_; ++j) v(ig(u, j)) = a.f(I(u), I(j)) / total_speed_;
  }
  return v;
}

AllocationState AlmProblem::unpack(const Eigen::VectorXd& v,
                                   const AllocationState& like) const {
  AllocationState a = like;
  a.y = y_;
  for (std::size_t u = 0; u < n_users_; ++u) {
    const double pmax = s_.user(u).max_power;
    for (std::size_t n = 0; n < n_sub_; ++n) {
      a.x(I(u), I(n)) = v(ix(u, n));
      const double amp = v(ia(u, n));
      a.p(I(u), I(n)) = pmax * amp * amp;
    }
    for (std::size_t j = 0; j < n_cells_; ++j) a.f(I(u), I(j)) = v(ig(u, j)) * total_speed_;
  }
  return a;
}

void AlmProblem::project(Eigen::VectorXd& v) const {
  const Index block = I(n_users_ * n_sub_);
  const bool anchored = anchor_.size() == size_;
  if (blocks_.x) {
    v.head(block) = v.head(block).cwiseMax(0.0).cwiseMin(1.0);
  } else if (anchored) {
    v.head(block) = anchor_.head(block);
  }
  if (!blocks_.power) {
    if (anchored) v.segment(block, block) = anchor_.segment(block, block);
  } else if (blocks_.x) {
    v.segment(block, block) = v.segment(block, block).cwiseMax(0.0).cwiseMin(1.0);
  } else {
    for (Index i = 0; i < block; ++i)
      v(block + i) = std::clamp(v(block + i), 0.0, std::sqrt(std::max(0.0, v(i))));
  }
  if (blocks_.compute) {
    for (std::size_t u = 0; u < n_users_; ++u) {
      const double cap = s_.slice_of(u).compute_share;
      for (std::size_t j = 0; j < n_cells_; ++j)
        v(ig(u, j)) = std::clamp(v(ig(u, j)), 0.0, cap);
    }
  } else if (anchored) {
    v.tail(size_ - 2 * block) = anchor_.tail(size_ - 2 * block);
  }
}

double AlmProblem::value(const Eigen::VectorXd& v) const {
  return evaluate(v, nullptr, true);
}

double AlmProblem::value_and_gradient(const Eigen::VectorXd& v,
                                      Eigen::VectorXd& grad) const {
  grad.setZero(size_);
  return evaluate(v, &grad, true);
}

double AlmProblem::objective_part(const Eigen::VectorXd& v) const {
  return evaluate(v, nullptr, false);
}

double AlmProblem::evaluate(const Eigen::VectorXd& v, Eigen::VectorXd* grad,
                            bool with_penalty) const {
  const double noise = s_.channel().noise_power;
  const double bw = s_.channel().subchannel_bandwidth;
  const double dlog = bw / std::log(2.0);

  // Interference at each cell from the transmitted powers.
  Eigen::MatrixXd interf = Eigen::MatrixXd::Zero(I(n_cells_), I(n_sub_));
  for (std::size_t u = 0; u < n_users_; ++u) {
    const std::size_t home = s_.user(u).serving_server;
    const double pmax = s_.user(u).max_power;
    for (std::size_t n = 0; n < n_sub_; ++n) {
      const double amp = v(ia(u, n));
      const double p = pmax * amp * amp;
      if (p == 0.0) continue;
      for (std::size_t i = 0; i < n_cells_; ++i)
        if (i != home) interf(I(i), I(n)) += p * s_.gain(u, i, n);
    }
  }

  double total = 0.0;
  // d value / d interference at (cell, subchannel)
  Eigen::MatrixXd dinterf;
  if (grad) dinterf = Eigen::MatrixXd::Zero(I(n_cells_), I(n_sub_));
  std::vector<double> de(n_sub_);

  for (std::size_t u = 0; u < n_users_; ++u) {
    total += constant_[u];
    const double w = offloaded_bits_[u];
    if (w <= 0.0) continue;
    const User& us = s_.user(u);
    const std::size_t home = us.serving_server;
    const double lambda = s_.slice_of(u).lambda;
    double rhat = 0.0;
    for (std::size_t n = 0; n < n_sub_; ++n) {
      const double z = aux_.z(I(u), I(n));
      const double amp_coef = 2.0 * z * std::sqrt(s_.gain(u, home, n) * us.max_power);
      const double e = amp_coef * v(ia(u, n)) -
                       z * z * (interf(I(home), I(n)) + noise);
      if (e > 0.0) {
        rhat += bw * std::log2(1.0 + e);
        de[n] = dlog / (1.0 + e);
      } else {
        de[n] = 0.0;
      }
    }
    if (rhat <= 0.0) return kInf;
    const double t = aux_.t(I(u));
    total += lambda * (t * w * w + 1.0 / (4.0 * t * rhat * rhat));
    if (grad) {
      const double d_rhat = -lambda / (2.0 * t * rhat * rhat * rhat);
      for (std::size_t n = 0; n < n_sub_; ++n) {
        if (de[n] == 0.0) continue;
        const double z = aux_.z(I(u), I(n));
        const double amp_coef = 2.0 * z * std::sqrt(s_.gain(u, home, n) * us.max_power);
        (*grad)(ia(u, n)) += d_rhat * de[n] * amp_coef;
        dinterf(I(home), I(n)) -= d_rhat * de[n] * z * z;
      }
    }
  }

  if (grad) {
    for (std::size_t u = 0; u < n_users_; ++u) {
      const std::size_t home = s_.user(u).serving_server;
      const double pmax = s_.user(u).max_power;
      for (std::size_t n = 0; n < n_sub_; ++n) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n_cells_; ++i)
          if (i != home) acc += dinterf(I(i), I(n)) * s_.gain(u, i, n);
        (*grad)(ia(u, n)) += acc * 2.0 * pmax * v(ia(u, n));
      }
    }
  }

  for (std::size_t u = 0; u < n_users_; ++u)
    for (std::size_t j = 0; j < n_cells_; ++j) {
      const double c = compute_coef_(I(u), I(j));
      if (c <= 0.0) continue;
      const double g = v(ig(u, j));
      if (g <= 0.0) return kInf;
      total += c / g;
      if (grad) (*grad)(ig(u, j)) -= c / (g * g);
    }

  if (with_penalty) {
    const double psi = alm_.psi;
    // Adds the penalty of one row and returns its gradient weight.
    const auto row = [&](double mult, double residual) {
      const double shifted = std::max(0.0, mult + psi * residual);
      total += (shifted * shifted - mult * mult) / (2.0 * psi);
      return shifted;
    };

    if (blocks_.power) {
      for (std::size_t u = 0; u < n_users_; ++u) {
        double load = 0.0;
        for (std::size_t n = 0; n < n_sub_; ++n) load += v(ia(u, n)) * v(ia(u, n));
        const double wt = row(alm_.theta(I(u)), load - 1.0);
        if (grad && wt != 0.0)
          for (std::size_t n = 0; n < n_sub_; ++n) (*grad)(ia(u, n)) += wt * 2.0 * v(ia(u, n));
      }
    }
    if (blocks_.x) {
      for (std::size_t u = 0; u < n_users_; ++u)
        for (std::size_t n = 0; n < n_sub_; ++n) {
          const double x = v(ix(u, n));
          const double amp = v(ia(u, n));
          const double wb = row(alm_.xi(I(u), I(n)), x - x * x);
          const double wc = row(alm_.bigxi(I(u), I(n)), amp * amp - x);
          if (grad) {
            (*grad)(ix(u, n)) += wb * (1.0 - 2.0 * x) - wc;
            (*grad)(ia(u, n)) += wc * 2.0 * amp;
          }
        }
      for (std::size_t j = 0; j < n_cells_; ++j)
        for (std::size_t n = 0; n < n_sub_; ++n) {
          double held = 0.0;
          for (std::size_t u : s_.cell_members(j)) held += v(ix(u, n));
          const double wt = row(alm_.phi(I(n), I(j)), held - 1.0);
          if (grad && wt != 0.0)
            for (std::size_t u : s_.cell_members(j)) (*grad)(ix(u, n)) += wt;
        }
      const double total_sub = static_cast<double>(n_cells_ * n_sub_);
      for (std::size_t k = 0; k < s_.num_slices(); ++k) {
        double held = 0.0;
        for (std::size_t u : s_.slice_members(k))
          for (std::size_t n = 0; n < n_sub_; ++n) held += v(ix(u, n));
        const double wt =
            row(alm_.chi(I(k)), held - s_.slices()[k].bandwidth_share * total_sub);
        if (grad && wt != 0.0)
          for (std::size_t u : s_.slice_members(k))
            for (std::size_t n = 0; n < n_sub_; ++n) (*grad)(ix(u, n)) += wt;
      }
    }
    if (blocks_.compute) {
      for (std::size_t k = 0; k < s_.num_slices(); ++k) {
        double speed = 0.0;
        for (std::size_t u : s_.slice_members(k))
          for (std::size_t j = 0; j < n_cells_; ++j) speed += v(ig(u, j));
        const double wt = row(alm_.delta(I(k)), speed - s_.slices()[k].compute_share);
        if (grad && wt != 0.0)
          for (std::size_t u : s_.slice_members(k))
            for (std::size_t j = 0; j < n_cells_; ++j) (*grad)(ig(u, j)) += wt;
      }
    }
  }

  if (grad) {
    const Index block = I(n_users_ * n_sub_);
    if (!blocks_.x) grad->head(block).setZero();
    if (!blocks_.power) grad->segment(block, block).setZero();
    if (!blocks_.compute) grad->tail(size_ - 2 * block).setZero();
  }
  return total;
}

// ---------------------------------------------------------------------------

InnerResult inner_minimize(const Scenario& s, const Eigen::MatrixXd& y,
                           const FpAuxiliary& aux, const AlmState& alm,
                           const AllocationState& start, const InnerOptions& opts,
                           BlockMask blocks) {
  AlmProblem prob(s, y, aux, alm, blocks);
  Eigen::VectorXd v = prob.pack(start);
  prob.set_anchor(v);
  prob.project(v);

  InnerResult out;
  Eigen::VectorXd grad;
  double fv = prob.value_and_gradient(v, grad);
  if (!std::isfinite(fv)) {
    out.state = start;
    out.state.y = y;
    out.value = fv;
    return out;
  }
  for (Index i = 0; i < grad.size(); ++i)
    if (!std::isfinite(grad(i))) throw NonFiniteGradient(i);

  const auto pg_norm = [&](const Eigen::VectorXd& at, const Eigen::VectorXd& g) {
    Eigen::VectorXd probe = at - g;
    prob.project(probe);
    return (probe - at).lpNorm<Eigen::Infinity>();
  };

  double step = 1.0;
  Eigen::VectorXd trial, trial_grad;
  int it = 0;
  double pgn = pg_norm(v, grad);
  for (; it < opts.max_iters && pgn > opts.tol; ++it) {
    double alpha = step;
    bool accepted = false;
    double f_trial = 0.0;
    for (int bt = 0; bt < 60; ++bt) {
      trial = v - alpha * grad;
      prob.project(trial);
      const double decrease = grad.dot(trial - v);
      f_trial = prob.value(trial);
      if (std::isfinite(f_trial) && f_trial <= fv + opts.armijo * decrease) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;

    f_trial = prob.value_and_gradient(trial, trial_grad);
    for (Index i = 0; i < trial_grad.size(); ++i)
      if (!std::isfinite(trial_grad(i))) throw NonFiniteGradient(i);

    if (opts.spectral_step) {
      const Eigen::VectorXd ds = trial - v;
      const Eigen::VectorXd dg = trial_grad - grad;
      const double sy = ds.dot(dg);
      step = sy > 0.0 ? std::clamp(ds.squaredNorm() / sy, 1e-12, 1e12)
                      : std::min(alpha * 4.0, 1e12);
    } else {
      step = 1.0;
    }
    v.swap(trial);
    grad.swap(trial_grad);
    fv = f_trial;
    pgn = pg_norm(v, grad);
  }

  out.state = prob.unpack(v, start);
  out.iterations = it;
  out.value = fv;
  out.projected_gradient_norm = pgn;
  return out;
}

P2Result solve_p2(const Scenario& s, const Eigen::MatrixXd& y,
                  const AllocationState& start, const P2Options& opts,
                  const AlmState* warm) {
  P2Result out;
  AllocationState state = start;
  state.y = y;
  FpAuxiliary aux = update_slacks(s, state, y);
  AlmState alm = warm ? *warm : AlmState::zeros(s, opts.psi_init);
  double prev_obj = transformed_objective(s, state, y, aux);

  // Best iterate within the feasibility tolerance, by the relaxed objective.
  double best_obj = kInf;
  if (alm_residuals(s, state, opts.blocks).max_violation() <= opts.feas_tol) {
    best_obj = relaxed_objective(s, state, y);
    out.state = state;
  }

  for (int fp = 1; fp <= opts.max_fp_iters; ++fp) {
    double prev_viol = kInf;
    int rounds = 0, inner_total = 0;
    AlmResiduals res;
    while (rounds < opts.max_alm_rounds) {
      InnerResult inner = inner_minimize(s, y, aux, alm, state, opts.inner, opts.blocks);
      state = std::move(inner.state);
      inner_total += inner.iterations;
      ++rounds;
      res = alm_residuals(s, state, opts.blocks);
      const double viol = res.max_violation();
      alm = update_multipliers(alm, res);
      if (viol <= opts.feas_tol) break;
      if (viol > opts.shrink * prev_viol)
        alm.psi = std::min(alm.psi * opts.psi_growth, opts.psi_max);
      prev_viol = viol;
    }

    aux = update_slacks(s, state, y);
    const double obj = transformed_objective(s, state, y, aux);
    TraceRow row;
    row.fp_iter = fp;
    row.alm_rounds = rounds;
    row.inner_iters = inner_total;
    row.transformed_obj = obj;
    row.true_obj = relaxed_objective(s, state, y);
    row.residuals = res;
    row.psi = alm.psi;
    out.trace.rows.push_back(row);

    const bool feasible = res.max_violation() <= opts.feas_tol;
    if (feasible && row.true_obj < best_obj) {
      best_obj = row.true_obj;
      out.state = state;
    }
    if (std::isfinite(obj) && std::isfinite(prev_obj) && feasible &&
        std::abs(obj - prev_obj) <= opts.obj_tol * std::max(1.0, std::abs(prev_obj))) {
      out.converged = true;
      break;
    }
    prev_obj = obj;
  }
  out.multipliers = alm;
  if (!std::isfinite(best_obj)) out.state = std::move(state);
  return out;
}

void write_trace_csv(std::ostream& out, const RunTrace& trace) {
  out << "outer_iter,fp_iter,alm_rounds,inner_iters,transformed_obj,true_obj,"
         "viol_power,viol_compute,viol_reuse,viol_binary,viol_coupling,"
         "viol_spectrum,psi\n";
  const auto old_precision = out.precision(17);
  const auto mx = [](const auto& m) { return m.size() > 0 ? std::max(0.0, m.maxCoeff()) : 0.0; };
  for (const TraceRow& r : trace.rows) {
    out << r.outer_iter << ',' << r.fp_iter << ',' << r.alm_rounds << ','
        << r.inner_iters << ',' << r.transformed_obj << ',' << r.true_obj << ','
        << mx(r.residuals.power) << ',' << mx(r.residuals.compute) << ','
        << mx(r.residuals.reuse) << ',' << mx(r.residuals.binary) << ','
        << mx(r.residuals.coupling) << ',' << mx(r.residuals.spectrum) << ','
        << r.psi << '\n';
  }
  out.precision(old_precision);
}

}  // namespace mecslice
