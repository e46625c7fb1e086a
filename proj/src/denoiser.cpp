#include "nadd/denoiser.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <string>

namespace nadd {

namespace {

constexpr std::array<char, 8> kMagic{'N', 'A', 'D', 'D', 'N', 'E', 'T', '1'};

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("truncated network file");
  return v;
}

Eigen::VectorXd network_input(const Preconditioning& pre, const Sample& x, double sigma) {
  Eigen::VectorXd in(x.size() + 1);
  in.head(x.size()) = pre.c_in(sigma) * x;
  in[x.size()] = pre.c_noise(sigma);
  return in;
}

}  // namespace

MiniNetwork::MiniNetwork(std::vector<int> widths, std::uint64_t seed) : widths_(std::move(widths)), seed_(seed) {
  if (widths_.size() < 2) throw std::invalid_argument("network needs input and output widths");
  for (int w : widths_) {
    if (w < 1) throw std::invalid_argument("network widths must be positive");
  }
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const int fan_in = widths_[l];
    const int fan_out = widths_[l + 1];
    const double scale = std::sqrt(1.0 / fan_in);
    Matrix w(fan_out, fan_in);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = scale * normal(rng);
    weights_.push_back(std::move(w));
    biases_.push_back(Eigen::VectorXd::Zero(fan_out));
  }
}

Eigen::Index MiniNetwork::parameter_count() const {
  Eigen::Index n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) n += weights_[l].size() + biases_[l].size();
  return n;
}

Eigen::VectorXd MiniNetwork::forward(const Eigen::VectorXd& input) const {
  Eigen::VectorXd a = input;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    a = weights_[l] * a + biases_[l];
    if (l + 1 < weights_.size()) a = a.array().tanh().matrix();
  }
  return a;
}

Matrix MiniNetwork::input_jacobian(const Eigen::VectorXd& input) const {
  Eigen::VectorXd a = input;
  Matrix jac = Matrix::Identity(input.size(), input.size());
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    a = weights_[l] * a + biases_[l];
    jac = weights_[l] * jac;
    if (l + 1 < weights_.size()) {
      a = a.array().tanh().matrix();
      jac = (1.0 - a.array().square()).matrix().asDiagonal() * jac;
    }
  }
  return jac;
}

void MiniNetwork::accumulate_gradient(const Eigen::VectorXd& input, const Eigen::VectorXd& upstream,
                                      Eigen::VectorXd& grad) const {
  // Forward pass keeping activations.
  std::vector<Eigen::VectorXd> acts{input};
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::VectorXd z = weights_[l] * acts.back() + biases_[l];
    if (l + 1 < weights_.size()) z = z.array().tanh().matrix();
    acts.push_back(std::move(z));
  }
  // Flat layout per layer: W (column-major) then b.
  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    offsets.push_back(off);
    off += weights_[l].size() + biases_[l].size();
  }
  Eigen::VectorXd delta = upstream;
  for (std::size_t l = weights_.size(); l-- > 0;) {
    if (l + 1 < weights_.size()) delta = (delta.array() * (1.0 - acts[l + 1].array().square())).matrix();
    const Eigen::Index o = offsets[l];
    const Eigen::Index wn = weights_[l].size();
    Eigen::Map<Matrix> gw(grad.data() + o, weights_[l].rows(), weights_[l].cols());
    gw.noalias() += delta * acts[l].transpose();
    grad.segment(o + wn, biases_[l].size()) += delta;
    delta = weights_[l].transpose() * delta;
  }
}

Eigen::VectorXd MiniNetwork::parameters() const {
  Eigen::VectorXd flat(parameter_count());
  Eigen::Index o = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    flat.segment(o, weights_[l].size()) = Eigen::Map<const Eigen::VectorXd>(weights_[l].data(), weights_[l].size());
    o += weights_[l].size();
    flat.segment(o, biases_[l].size()) = biases_[l];
    o += biases_[l].size();
  }
  return flat;
}

void MiniNetwork::set_parameters(const Eigen::VectorXd& flat) {
  if (flat.size() != parameter_count()) throw std::invalid_argument("parameter vector has the wrong length");
  Eigen::Index o = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::Map<Eigen::VectorXd>(weights_[l].data(), weights_[l].size()) = flat.segment(o, weights_[l].size());
    o += weights_[l].size();
    biases_[l] = flat.segment(o, biases_[l].size());
    o += biases_[l].size();
  }
}

void MiniNetwork::save(const std::filesystem::path& path, double sigma_data) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(kMagic.data(), kMagic.size());
  write_pod(out, static_cast<std::uint32_t>(output_dim()));
  write_pod(out, static_cast<std::uint32_t>(widths_.size()));
  for (int w : widths_) write_pod(out, static_cast<std::uint32_t>(w));
  write_pod(out, seed_);
  write_pod(out, sigma_data);
  const Eigen::VectorXd flat = parameters();
  write_pod(out, static_cast<std::uint64_t>(flat.size()));
  out.write(reinterpret_cast<const char*>(flat.data()), static_cast<std::streamsize>(flat.size() * sizeof(double)));
}

std::pair<MiniNetwork, double> MiniNetwork::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw std::runtime_error(path.string() + " is not a network file");
  const auto dim = read_pod<std::uint32_t>(in);
  const auto n_widths = read_pod<std::uint32_t>(in);
  if (n_widths < 2 || n_widths > 64) throw std::runtime_error("corrupt network header");
  std::vector<int> widths;
  for (std::uint32_t i = 0; i < n_widths; ++i) widths.push_back(static_cast<int>(read_pod<std::uint32_t>(in)));
  if (static_cast<std::uint32_t>(widths.back()) != dim) throw std::runtime_error("corrupt network header");
  const auto seed = read_pod<std::uint64_t>(in);
  const auto sigma_data = read_pod<double>(in);
  MiniNetwork net(widths, seed);
  const auto count = read_pod<std::uint64_t>(in);
  if (static_cast<Eigen::Index>(count) != net.parameter_count()) throw std::runtime_error("parameter count mismatch");
  Eigen::VectorXd flat(static_cast<Eigen::Index>(count));
  in.read(reinterpret_cast<char*>(flat.data()), static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw std::runtime_error("truncated network file");
  net.set_parameters(flat);
  return {std::move(net), sigma_data};
}

Denoiser Denoiser::exact(GaussianMixture mixture) {
  return Denoiser(std::make_shared<const Payload>(std::move(mixture)));
}

Denoiser Denoiser::learned(MiniNetwork network, Preconditioning precond) {
  if (network.input_dim() != network.output_dim() + 1) {
    throw std::invalid_argument("denoiser network input must be (x, noise embedding)");
  }
  return Denoiser(std::make_shared<const Payload>(Learned{std::move(network), precond}));
}

Denoiser::Kind Denoiser::kind() const { return payload_->index() == 0 ? Kind::exact : Kind::learned; }

int Denoiser::dim() const {
  if (const auto* m = mixture()) return m->dim();
  return network()->output_dim();
}

const GaussianMixture* Denoiser::mixture() const { return std::get_if<GaussianMixture>(payload_.get()); }

const MiniNetwork* Denoiser::network() const {
  const auto* l = std::get_if<Learned>(payload_.get());
  return l ? &l->network : nullptr;
}

const Preconditioning* Denoiser::preconditioning() const {
  const auto* l = std::get_if<Learned>(payload_.get());
  return l ? &l->precond : nullptr;
}

Sample Denoiser::evaluate(const Sample& x, double sigma) const {
  if (!(sigma >= 0.0)) throw std::invalid_argument("denoiser: sigma must be non-negative");
  if (const auto* m = mixture()) return exact_denoiser(*m, x, sigma);
  const auto& l = std::get<Learned>(*payload_);
  if (sigma == 0.0) return x;
  return l.precond.c_skip(sigma) * x + l.precond.c_out(sigma) * l.network.forward(network_input(l.precond, x, sigma));
}

Matrix Denoiser::jacobian(const Sample& x, double sigma) const {
  if (const auto* m = mixture()) return exact_denoiser_jacobian(*m, x, sigma);
  const auto& l = std::get<Learned>(*payload_);
  const Eigen::Index d = x.size();
  if (sigma == 0.0) return Matrix::Identity(d, d);
  const Matrix jf = l.network.input_jacobian(network_input(l.precond, x, sigma));
  return l.precond.c_skip(sigma) * Matrix::Identity(d, d) +
         l.precond.c_out(sigma) * l.precond.c_in(sigma) * jf.leftCols(d);
}

TrainingBatch TrainingBatch::draw(const GaussianMixture& mix, double t_min, double t_max, int size, Rng& rng) {
  TrainingBatch b;
  std::uniform_real_distribution<double> log_t(std::log(t_min), std::log(t_max));
  for (int i = 0; i < size; ++i) {
    b.clean.push_back(sample_one(mix, rng).x);
    b.noise.push_back(standard_normal(rng, mix.dim()));
    b.sigma.push_back(std::exp(log_t(rng)));
  }
  return b;
}

double denoising_loss(const MiniNetwork& net, const Preconditioning& pre, const TrainingBatch& batch,
                      Eigen::VectorXd* gradient) {
  if (gradient) *gradient = Eigen::VectorXd::Zero(net.parameter_count());
  const double inv_n = 1.0 / static_cast<double>(batch.clean.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.clean.size(); ++i) {
    const double s = batch.sigma[i];
    const Sample xt = batch.clean[i] + s * batch.noise[i];
    const Eigen::VectorXd in = network_input(pre, xt, s);
    const Sample resid = pre.c_skip(s) * xt + pre.c_out(s) * net.forward(in) - batch.clean[i];
    loss += resid.squaredNorm() * inv_n;
    if (gradient) net.accumulate_gradient(in, 2.0 * inv_n * pre.c_out(s) * resid, *gradient);
  }
  return loss;
}

double skip_only_loss(const Preconditioning& pre, const TrainingBatch& batch) {
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.clean.size(); ++i) {
    const double s = batch.sigma[i];
    const Sample xt = batch.clean[i] + s * batch.noise[i];
    loss += (pre.c_skip(s) * xt - batch.clean[i]).squaredNorm();
  }
  return loss / static_cast<double>(batch.clean.size());
}

TrainResult train(const GaussianMixture& mix, const TimeGrid& grid, const NetworkSpec& spec, int steps,
                  std::uint64_t seed) {
  if (steps < 1) throw std::invalid_argument("train: steps must be >= 1");
  if (spec.batch_size < 1 || !(spec.learning_rate > 0.0)) throw std::invalid_argument("train: bad network spec");
  std::vector<int> widths{mix.dim() + 1};
  widths.insert(widths.end(), spec.hidden.begin(), spec.hidden.end());
  widths.push_back(mix.dim());
  MiniNetwork net(widths, seed);
  const Preconditioning pre{spec.sigma_data};

  Rng rng(derive_seed(seed, 1));
  Eigen::VectorXd params = net.parameters();
  Eigen::VectorXd grad;
  for (int step = 0; step < steps; ++step) {
    const auto batch = TrainingBatch::draw(mix, grid.t_min(), grid.t_max(), spec.batch_size, rng);
    const double loss = denoising_loss(net, pre, batch, &grad);
    if (!std::isfinite(loss) || !grad.allFinite()) {
      throw TrainingFailure("training diverged at step " + std::to_string(step));
    }
    params -= spec.learning_rate * grad;
    net.set_parameters(params);
  }

  Rng held_out(derive_seed(seed, 2));
  const auto eval = TrainingBatch::draw(mix, grid.t_min(), grid.t_max(), 4096, held_out);
  const double final_loss = denoising_loss(net, pre, eval);
  if (!std::isfinite(final_loss)) throw TrainingFailure("training produced a non-finite loss");
  const double baseline = skip_only_loss(pre, eval);
  return {Denoiser::learned(std::move(net), pre), final_loss, baseline};
}

}  // namespace nadd
