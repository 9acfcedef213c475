#include "themes/edm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace themes::edm {

namespace {

struct Forward {
  Matrix xn;      // standardized inputs
  Matrix hidden;  // tanh activations
  Matrix logits;
};

Forward forward(const PolicyNet& net, const Matrix& x) {
  if (x.cols() != net.input_dim()) throw ArgumentError("state dimension does not match policy input");
  Forward f;
  f.xn = (x.rowwise() - net.input_shift.transpose()).array().rowwise() / net.input_scale.transpose().array();
  f.hidden = ((f.xn * net.w1.transpose()).rowwise() + net.b1.transpose()).array().tanh();
  f.logits = (f.hidden * net.w2.transpose()).rowwise() + net.b2.transpose();
  return f;
}

Matrix softmax_rows(const Matrix& logits) {
  const Vector lse = logsumexp_rows(logits);
  return (logits.colwise() - lse).array().exp();
}

// Accumulates parameter gradients for dL/dlogits = g into `grad`.
void backward(const PolicyNet& net, const Forward& f, const Matrix& g, Vector& grad) {
  const auto H = net.hidden();
  const auto m = net.input_dim();
  const auto A = net.actions();
  const Matrix dz1 = (g * net.w2).array() * (1.0 - f.hidden.array().square());
  Eigen::Index o = 0;
  Eigen::Map<Matrix>(grad.data() + o, H, m) += dz1.transpose() * f.xn;
  o += H * m;
  grad.segment(o, H) += dz1.colwise().sum().transpose();
  o += H;
  Eigen::Map<Matrix>(grad.data() + o, A, H) += g.transpose() * f.hidden;
  o += A * H;
  grad.segment(o, A) += g.colwise().sum().transpose();
}

struct Adam {
  Vector m1, m2;
  long t = 0;
  double lr, b1 = 0.9, b2 = 0.999, eps = 1e-8;

  Adam(std::size_t n, double lr_) : m1(Vector::Zero(static_cast<Eigen::Index>(n))), m2(Vector::Zero(static_cast<Eigen::Index>(n))), lr(lr_) {}

  void step(Vector& params, const Vector& grad) {
    ++t;
    m1 = b1 * m1 + (1.0 - b1) * grad;
    m2 = b2 * m2 + (1.0 - b2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
    params.array() -= lr * (m1.array() / c1) / ((m2.array() / c2).sqrt() + eps);
  }
};

}  // namespace

Vector logsumexp_rows(const Matrix& a) {
  const Vector mx = a.rowwise().maxCoeff();
  return mx.array() + (a.colwise() - mx).array().exp().rowwise().sum().log();
}

PolicyNet PolicyNet::initialize(int m, int hidden, int actions, std::uint64_t seed) {
  if (m < 1 || hidden < 1 || actions < 2) throw ArgumentError("invalid policy network shape");
  Rng rng(seed);
  PolicyNet net;
  const double r1 = std::sqrt(6.0 / (m + hidden));
  const double r2 = std::sqrt(6.0 / (hidden + actions));
  net.w1 = Matrix(hidden, m);
  for (Eigen::Index i = 0; i < net.w1.size(); ++i) net.w1.data()[i] = rng.uniform(-r1, r1);
  net.b1 = Vector::Zero(hidden);
  net.w2 = Matrix(actions, hidden);
  for (Eigen::Index i = 0; i < net.w2.size(); ++i) net.w2.data()[i] = rng.uniform(-r2, r2);
  net.b2 = Vector::Zero(actions);
  net.input_shift = Vector::Zero(m);
  net.input_scale = Vector::Ones(m);
  return net;
}

Matrix PolicyNet::logits(const Matrix& x) const { return forward(*this, x).logits; }

Matrix PolicyNet::log_probs(const Matrix& x) const {
  const Matrix f = logits(x);
  return f.colwise() - logsumexp_rows(f);
}

Matrix PolicyNet::probs(const Matrix& x) const { return softmax_rows(logits(x)); }

Vector PolicyNet::energy(const Matrix& x) const { return -logsumexp_rows(logits(x)); }

Matrix PolicyNet::energy_gradient(const Matrix& x) const {
  const Forward f = forward(*this, x);
  const Matrix g = -softmax_rows(f.logits);
  const Matrix dz1 = (g * w2).array() * (1.0 - f.hidden.array().square());
  return (dz1 * w1).array().rowwise() / input_scale.transpose().array();
}

std::size_t PolicyNet::parameter_count() const noexcept {
  return static_cast<std::size_t>(w1.size() + b1.size() + w2.size() + b2.size());
}

Vector PolicyNet::parameters() const {
  Vector p(static_cast<Eigen::Index>(parameter_count()));
  p << Eigen::Map<const Vector>(w1.data(), w1.size()), b1, Eigen::Map<const Vector>(w2.data(), w2.size()), b2;
  return p;
}

void PolicyNet::set_parameters(const Vector& flat) {
  if (static_cast<std::size_t>(flat.size()) != parameter_count()) throw ArgumentError("parameter vector size mismatch");
  Eigen::Index o = 0;
  w1 = Eigen::Map<const Matrix>(flat.data() + o, w1.rows(), w1.cols());
  o += w1.size();
  b1 = flat.segment(o, b1.size());
  o += b1.size();
  w2 = Eigen::Map<const Matrix>(flat.data() + o, w2.rows(), w2.cols());
  o += w2.size();
  b2 = flat.segment(o, b2.size());
}

void WeightedDemos::validate(int action_count) const {
  if (actions.empty()) throw ArgumentError("no demonstrations");
  if (static_cast<std::size_t>(states.rows()) != actions.size() || weights.size() != actions.size())
    throw ArgumentError("demonstration arrays are misaligned");
  double total = 0.0;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (actions[i] < 0 || actions[i] >= action_count) throw ArgumentError("action out of range");
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) throw ArgumentError("weights must be finite and non-negative");
    total += weights[i];
  }
  if (!(total > 0.0)) throw ArgumentError("total demonstration weight is zero");
}

void EdmConfig::validate() const {
  if (hidden < 1 || sgld_steps < 1 || replay_buffer_size < 1 || epochs < 0 || batch_size < 1 || negative_batch_size < 1)
    throw ConfigurationError("EDM sizes must be positive");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigurationError("alpha must be finite and non-negative");
  if (!(sgld_step_size > 0.0) || !(sgld_noise_scale > 0.0) || !(learning_rate > 0.0))
    throw ConfigurationError("EDM step sizes must be positive");
  if (!(reinit_prob >= 0.0 && reinit_prob <= 1.0)) throw ConfigurationError("reinit_prob must lie in [0, 1]");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigurationError("gamma must lie in [0, 1)");
}

double bc_loss(const Matrix& states, std::span<const int> actions, std::span<const double> weights, const PolicyNet& net) {
  if (static_cast<std::size_t>(states.rows()) != actions.size() || actions.size() != weights.size())
    throw ArgumentError("batch arrays are misaligned");
  const Matrix lp = net.log_probs(states);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (!(weights[i] >= 0.0)) throw ArgumentError("weights must be non-negative");
    num -= weights[i] * lp(static_cast<Eigen::Index>(i), actions[i]);
    den += weights[i];
  }
  if (!(den > 0.0)) throw ArgumentError("total weight is zero");
  return num / den;
}

double occupancy_loss(const Matrix& demo_states, const Matrix& negative_states, const PolicyNet& net,
                      std::optional<std::span<const double>> demo_weights) {
  if (demo_states.rows() == 0 || negative_states.rows() == 0) throw ArgumentError("occupancy loss needs non-empty batches");
  const Vector ed = net.energy(demo_states);
  double demo_mean = 0.0;
  if (demo_weights) {
    double den = 0.0;
    for (Eigen::Index i = 0; i < ed.size(); ++i) {
      demo_mean += (*demo_weights)[static_cast<std::size_t>(i)] * ed(i);
      den += (*demo_weights)[static_cast<std::size_t>(i)];
    }
    if (!(den > 0.0)) throw ArgumentError("total weight is zero");
    demo_mean /= den;
  } else {
    demo_mean = ed.mean();
  }
  return demo_mean - net.energy(negative_states).mean();
}

LossGradient composite_loss(const PolicyNet& net, const Matrix& states, std::span<const int> actions,
                            std::span<const double> weights, const Matrix& negatives, double alpha) {
  const auto B = states.rows();
  if (static_cast<std::size_t>(B) != actions.size() || actions.size() != weights.size())
    throw ArgumentError("batch arrays are misaligned");
  double wsum = 0.0;
  for (double w : weights) wsum += w;
  if (!(wsum > 0.0)) throw ArgumentError("total weight is zero");

  LossGradient out;
  out.gradient = Vector::Zero(static_cast<Eigen::Index>(net.parameter_count()));
  const Forward f = forward(net, states);
  const Vector lse = logsumexp_rows(f.logits);
  const Matrix p = (f.logits.colwise() - lse).array().exp();

  Matrix g = Matrix::Zero(B, net.actions());
  for (Eigen::Index i = 0; i < B; ++i) {
    const double w = weights[static_cast<std::size_t>(i)] / wsum;
    const int a = actions[static_cast<std::size_t>(i)];
    out.bc -= w * (f.logits(i, a) - lse(i));
    g.row(i) = w * p.row(i);
    g(i, a) -= w;
    if (alpha != 0.0) {
      out.occupancy -= w * lse(i);  // energy = -lse
      g.row(i) -= alpha * w * p.row(i);
    }
  }
  backward(net, f, g, out.gradient);

  if (alpha != 0.0) {
    if (negatives.rows() == 0) throw ArgumentError("occupancy loss needs negative samples");
    const Forward fn = forward(net, negatives);
    const Vector lse_n = logsumexp_rows(fn.logits);
    const Matrix pn = (fn.logits.colwise() - lse_n).array().exp();
    const double inv = 1.0 / static_cast<double>(negatives.rows());
    out.occupancy += lse_n.mean();  // minus mean energy of negatives
    backward(net, fn, (alpha * inv) * pn, out.gradient);
  }
  out.total = out.bc + alpha * out.occupancy;
  return out;
}

TrainResult train(const WeightedDemos& demos, int action_count, const EdmConfig& config,
                  const std::optional<PolicyNet>& init) {
  config.validate();
  demos.validate(action_count);
  const auto N = demos.size();
  const auto m = static_cast<int>(demos.states.cols());

  TrainResult res;
  if (init) {
    if (init->input_dim() != m || init->actions() != action_count)
      throw ArgumentError("initial policy shape does not match demonstrations");
    res.net = *init;
  } else {
    res.net = PolicyNet::initialize(m, config.hidden, action_count, config.seed);
    double wsum = 0.0;
    Vector mean = Vector::Zero(m);
    for (std::size_t i = 0; i < N; ++i) {
      mean += demos.weights[i] * demos.states.row(static_cast<Eigen::Index>(i)).transpose();
      wsum += demos.weights[i];
    }
    mean /= wsum;
    Vector var = Vector::Zero(m);
    for (std::size_t i = 0; i < N; ++i)
      var += demos.weights[i] * (demos.states.row(static_cast<Eigen::Index>(i)).transpose() - mean).cwiseAbs2();
    var /= wsum;
    res.net.input_shift = mean;
    res.net.input_scale = var.cwiseSqrt().unaryExpr([](double s) { return s > 1e-8 ? s : 1.0; });
  }

  Vector params = res.net.parameters();
  Adam opt(res.net.parameter_count(), config.learning_rate);
  Rng batch_rng(derive_seed(config.seed, {0xba7cu}));
  const bool use_occupancy = config.alpha != 0.0;

  std::vector<double> sampling_weights = demos.weights;
  Matrix buffer;
  Rng buffer_rng(derive_seed(config.seed, {0xb0ffu}));
  if (use_occupancy) {
    buffer.resize(config.replay_buffer_size, m);
    for (int i = 0; i < config.replay_buffer_size; ++i)
      buffer.row(i) = demos.states.row(static_cast<Eigen::Index>(buffer_rng.categorical(sampling_weights)));
  }

  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), 0);
  const auto bsz = static_cast<std::size_t>(config.batch_size);
  long batch_counter = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    batch_rng.shuffle(order);
    double epoch_total = 0.0, epoch_bc = 0.0, epoch_w = 0.0;
    for (std::size_t start = 0; start < N; start += bsz) {
      const auto end = std::min(N, start + bsz);
      const auto B = static_cast<Eigen::Index>(end - start);
      Matrix xb(B, m);
      std::vector<int> ab(static_cast<std::size_t>(B));
      std::vector<double> wb(static_cast<std::size_t>(B));
      double wsum = 0.0;
      for (Eigen::Index i = 0; i < B; ++i) {
        const auto idx = order[start + static_cast<std::size_t>(i)];
        xb.row(i) = demos.states.row(static_cast<Eigen::Index>(idx));
        ab[static_cast<std::size_t>(i)] = demos.actions[idx];
        wb[static_cast<std::size_t>(i)] = demos.weights[idx];
        wsum += demos.weights[idx];
      }
      ++batch_counter;
      if (!(wsum > 0.0)) continue;

      Matrix negatives;
      std::vector<int> slots;
      if (use_occupancy) {
        const int nb = config.negative_batch_size;
        negatives.resize(nb, m);
        slots.resize(static_cast<std::size_t>(nb));
        for (int j = 0; j < nb; ++j) {
          const auto slot = static_cast<int>(buffer_rng.index(static_cast<std::size_t>(config.replay_buffer_size)));
          slots[static_cast<std::size_t>(j)] = slot;
          if (buffer_rng.bernoulli(config.reinit_prob))
            buffer.row(slot) = demos.states.row(static_cast<Eigen::Index>(buffer_rng.categorical(sampling_weights)));
          negatives.row(j) = buffer.row(slot);
        }
        negatives = sgld_sample(res.net, std::move(negatives), config.sgld_steps, config.sgld_step_size,
                                config.sgld_noise_scale,
                                derive_seed(config.seed, {0x5a1du, static_cast<std::uint64_t>(batch_counter)}));
        for (int j = 0; j < nb; ++j) buffer.row(slots[static_cast<std::size_t>(j)]) = negatives.row(j);
      }

      const auto lg = composite_loss(res.net, xb, ab, wb, negatives, config.alpha);
      if (!std::isfinite(lg.total) || !lg.gradient.allFinite()) throw TrainingError("loss diverged", epoch);
      opt.step(params, lg.gradient);
      res.net.set_parameters(params);
      epoch_total += wsum * lg.total;
      epoch_bc += wsum * lg.bc;
      epoch_w += wsum;
    }
    res.loss_trace.push_back(epoch_w > 0.0 ? epoch_total / epoch_w : 0.0);
    res.bc_trace.push_back(epoch_w > 0.0 ? epoch_bc / epoch_w : 0.0);
    if (!std::isfinite(res.loss_trace.back())) throw TrainingError("loss diverged", epoch);
  }
  return res;
}

}  // namespace themes::edm
