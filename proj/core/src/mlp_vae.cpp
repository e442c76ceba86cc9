#include "disentangle/mlp_vae.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "disentangle/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "model serialization assumes a little-endian host");

namespace disent {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

DenseLayer glorot_layer(int out, int in, Rng& rng) {
  DenseLayer l;
  l.w.resize(out, in);
  const double limit = std::sqrt(6.0 / (in + out));
  for (int r = 0; r < out; ++r)
    for (int c = 0; c < in; ++c)
      l.w(r, c) = (2.0 * rng.uniform() - 1.0) * limit;
  l.b = Eigen::VectorXd::Zero(out);
  return l;
}

// x: batch x in, layer maps rows through w x + b.
Eigen::MatrixXd affine(const DenseLayer& l, const Eigen::MatrixXd& x) {
  return (x * l.w.transpose()).rowwise() + l.b.transpose();
}

struct ForwardCache {
  std::vector<Eigen::MatrixXd> enc_acts;  // input, then each tanh activation
  Eigen::MatrixXd mu, lv, sd, z;
  std::vector<Eigen::MatrixXd> dec_acts;  // z, then each tanh activation
  Eigen::MatrixXd xhat;
};

void forward(const MlpVae& net, const Eigen::MatrixXd& batch,
             const Eigen::MatrixXd* eps, ForwardCache& fc) {
  fc.enc_acts.clear();
  fc.enc_acts.push_back(batch);
  for (const auto& l : net.enc_hidden)
    fc.enc_acts.push_back(affine(l, fc.enc_acts.back()).array().tanh());
  fc.mu = affine(net.enc_mean, fc.enc_acts.back());
  fc.lv = affine(net.enc_logvar, fc.enc_acts.back());
  if (!eps) return;
  fc.sd = (0.5 * fc.lv).array().exp();
  fc.z = fc.mu + fc.sd.cwiseProduct(*eps);

  fc.dec_acts.clear();
  fc.dec_acts.push_back(fc.z);
  for (std::size_t i = 0; i + 1 < net.dec.size(); ++i)
    fc.dec_acts.push_back(affine(net.dec[i], fc.dec_acts.back()).array().tanh());
  fc.xhat = affine(net.dec.back(), fc.dec_acts.back());
}

void check_net(const MlpVae& net) {
  if (net.enc_mean.w.size() == 0 || net.enc_logvar.w.size() == 0 ||
      net.dec.empty())
    throw std::invalid_argument("MlpVae: incomplete network");
  if (net.enc_mean.w.rows() != net.enc_logvar.w.rows() ||
      net.enc_mean.w.cols() != net.enc_logvar.w.cols())
    throw std::invalid_argument("MlpVae: encoder heads disagree");
}

}  // namespace

MlpVae MlpVae::build(int input_dim, int latent_dim,
                     const std::vector<int>& hidden, std::uint64_t seed) {
  if (input_dim < 1 || latent_dim < 1)
    throw std::invalid_argument("MlpVae::build: dimensions must be positive");
  for (int h : hidden)
    if (h < 1) throw std::invalid_argument("MlpVae::build: bad hidden width");

  Rng rng(derive_seed(seed, "mlp-init"));
  MlpVae net;
  int prev = input_dim;
  for (int h : hidden) {
    net.enc_hidden.push_back(glorot_layer(h, prev, rng));
    prev = h;
  }
  net.enc_mean = glorot_layer(latent_dim, prev, rng);
  net.enc_logvar = glorot_layer(latent_dim, prev, rng);

  prev = latent_dim;
  for (auto it = hidden.rbegin(); it != hidden.rend(); ++it) {
    net.dec.push_back(glorot_layer(*it, prev, rng));
    prev = *it;
  }
  net.dec.push_back(glorot_layer(input_dim, prev, rng));
  return net;
}

std::vector<DenseLayer*> layer_list(MlpVae& net) {
  std::vector<DenseLayer*> out;
  for (auto& l : net.enc_hidden) out.push_back(&l);
  out.push_back(&net.enc_mean);
  out.push_back(&net.enc_logvar);
  for (auto& l : net.dec) out.push_back(&l);
  return out;
}

std::vector<const DenseLayer*> layer_list(const MlpVae& net) {
  std::vector<const DenseLayer*> out;
  for (const auto& l : net.enc_hidden) out.push_back(&l);
  out.push_back(&net.enc_mean);
  out.push_back(&net.enc_logvar);
  for (const auto& l : net.dec) out.push_back(&l);
  return out;
}

MlpVae zeros_like(const MlpVae& net) {
  MlpVae z = net;
  for (DenseLayer* l : layer_list(z)) {
    l->w.setZero();
    l->b.setZero();
  }
  return z;
}

GaussianMoments forward_encode(const MlpVae& net, const Eigen::VectorXd& x) {
  check_net(net);
  if (x.size() != net.input_dim())
    throw std::invalid_argument("forward_encode: input dimension mismatch");
  auto [mu, lv] = encode_batch(net, x.transpose());
  GaussianMoments g;
  g.mean = mu.row(0);
  g.cov = lv.row(0).array().exp().matrix().asDiagonal();
  return g;
}

Eigen::VectorXd reparameterize(const GaussianMoments& g,
                               const Eigen::VectorXd& eps) {
  if (eps.size() != g.mean.size() || g.cov.rows() != g.mean.size())
    throw std::invalid_argument("reparameterize: dimension mismatch");
  return g.mean + g.cov.diagonal().array().sqrt().matrix().cwiseProduct(eps);
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> encode_batch(
    const MlpVae& net, const Eigen::MatrixXd& x) {
  check_net(net);
  ForwardCache fc;
  forward(net, x, nullptr, fc);
  return {std::move(fc.mu), std::move(fc.lv)};
}

Eigen::MatrixXd decode_batch(const MlpVae& net, const Eigen::MatrixXd& z) {
  check_net(net);
  Eigen::MatrixXd h = z;
  for (std::size_t i = 0; i + 1 < net.dec.size(); ++i)
    h = affine(net.dec[i], h).array().tanh();
  return affine(net.dec.back(), h);
}

double loss_and_grad(const MlpVae& net, const Eigen::MatrixXd& batch,
                     double beta, const Eigen::MatrixXd& eps, MlpVae* grads) {
  check_net(net);
  const auto bs = batch.rows();
  if (bs < 1 || batch.cols() != net.input_dim())
    throw std::invalid_argument("loss_and_grad: bad batch shape");
  if (eps.rows() != bs || eps.cols() != net.latent_dim())
    throw std::invalid_argument("loss_and_grad: bad eps shape");

  ForwardCache fc;
  forward(net, batch, &eps, fc);

  Eigen::MatrixXd resid = fc.xhat - batch;
  double recon = -0.5 * resid.squaredNorm() / bs -
                 0.5 * net.input_dim() * kLog2Pi;
  Eigen::ArrayXXd lv = fc.lv.array();
  double kl = 0.5 * (fc.mu.array().square() + lv.exp() - lv - 1.0).sum() / bs;
  double obj = recon - beta * kl;
  if (!std::isfinite(obj))
    throw std::runtime_error("loss_and_grad: objective is not finite");
  if (!grads) return obj;

  // Reuse the caller's gradient storage; every block below is assigned, so
  // only the layer structure has to match. Replacing the object wholesale
  // would invalidate pointers a training loop may hold into it.
  if (grads->enc_hidden.size() != net.enc_hidden.size() ||
      grads->dec.size() != net.dec.size())
    *grads = zeros_like(net);

  // decoder, output layer first
  Eigen::MatrixXd d_out = -resid / static_cast<double>(bs);
  for (std::size_t i = net.dec.size(); i-- > 0;) {
    const Eigen::MatrixXd& below = fc.dec_acts[i];
    grads->dec[i].w = d_out.transpose() * below;
    grads->dec[i].b = d_out.colwise().sum();
    if (i == 0) {
      d_out = d_out * net.dec[i].w;  // gradient at z
    } else {
      d_out = (d_out * net.dec[i].w).cwiseProduct(
          (1.0 - below.array().square()).matrix());
    }
  }

  // split the z gradient into the two heads, add the KL terms
  Eigen::MatrixXd d_mu = d_out - (beta / bs) * fc.mu;
  Eigen::MatrixXd d_lv = 0.5 * d_out.cwiseProduct(eps).cwiseProduct(fc.sd) -
                         (beta / (2.0 * bs)) * (lv.exp() - 1.0).matrix();

  const Eigen::MatrixXd& top = fc.enc_acts.back();
  grads->enc_mean.w = d_mu.transpose() * top;
  grads->enc_mean.b = d_mu.colwise().sum();
  grads->enc_logvar.w = d_lv.transpose() * top;
  grads->enc_logvar.b = d_lv.colwise().sum();

  Eigen::MatrixXd d_h = d_mu * net.enc_mean.w + d_lv * net.enc_logvar.w;
  for (std::size_t i = net.enc_hidden.size(); i-- > 0;) {
    d_h = d_h.cwiseProduct(
        (1.0 - fc.enc_acts[i + 1].array().square()).matrix());
    grads->enc_hidden[i].w = d_h.transpose() * fc.enc_acts[i];
    grads->enc_hidden[i].b = d_h.colwise().sum();
    if (i > 0) d_h = d_h * net.enc_hidden[i].w;
  }
  return obj;
}

TrainResult train(MlpVae net, const Eigen::MatrixXd& data,
                  const TrainConfig& cfg) {
  check_net(net);
  const auto n = data.rows();
  if (n < 1 || data.cols() != net.input_dim())
    throw std::invalid_argument("train: bad data shape");
  if (cfg.epochs < 0 || cfg.batch_size < 1 || !(cfg.beta > 0))
    throw std::invalid_argument("train: bad config");

  Rng shuffle_rng(derive_seed(cfg.seed, "train-shuffle"));
  Rng eps_rng(derive_seed(cfg.seed, "train-eps"));

  MlpVae m1 = zeros_like(net);
  MlpVae m2 = zeros_like(net);
  MlpVae grads = zeros_like(net);
  auto net_l = layer_list(net);
  auto m1_l = layer_list(m1);
  auto m2_l = layer_list(m2);
  auto g_l = layer_list(grads);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  TrainResult out;
  out.loss_trace.reserve(cfg.epochs);
  long long t = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_sum = 0.0;

    for (Eigen::Index at = 0; at < n; at += cfg.batch_size) {
      const auto bs = std::min<Eigen::Index>(cfg.batch_size, n - at);
      Eigen::MatrixXd batch(bs, data.cols());
      for (Eigen::Index i = 0; i < bs; ++i)
        batch.row(i) = data.row(order[at + i]);
      Eigen::MatrixXd eps = eps_rng.normal_matrix(static_cast<int>(bs),
                                                  net.latent_dim());

      double loss;
      try {
        loss = loss_and_grad(net, batch, cfg.beta, eps, &grads);
      } catch (const std::runtime_error& e) {
        throw std::runtime_error("train: diverged at epoch " +
                                 std::to_string(epoch) + " (" + e.what() + ")");
      }
      epoch_sum += loss * bs;

      ++t;
      const double bc1 = 1.0 - std::pow(cfg.adam_beta1, t);
      const double bc2 = 1.0 - std::pow(cfg.adam_beta2, t);
      auto update = [&](auto& p, const auto& g, auto& mm, auto& vv) {
        mm = cfg.adam_beta1 * mm + (1.0 - cfg.adam_beta1) * g;
        vv = (cfg.adam_beta2 * vv.array() +
              (1.0 - cfg.adam_beta2) * g.array().square())
                 .matrix();
        p.array() += cfg.lr * (mm.array() / bc1) /
                     ((vv.array() / bc2).sqrt() + cfg.adam_eps);
      };
      for (std::size_t l = 0; l < net_l.size(); ++l) {
        update(net_l[l]->w, g_l[l]->w, m1_l[l]->w, m2_l[l]->w);
        update(net_l[l]->b, g_l[l]->b, m1_l[l]->b, m2_l[l]->b);
      }
    }
    out.loss_trace.push_back(epoch_sum / static_cast<double>(n));
  }
  out.net = std::move(net);
  return out;
}

namespace {

// All signed permutations of k latent coordinates, as (index, sign) pairs.
std::vector<std::vector<std::pair<int, double>>> signed_perms(int k) {
  std::vector<int> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<std::vector<std::pair<int, double>>> out;
  do {
    for (unsigned mask = 0; mask < (1u << k); ++mask) {
      std::vector<std::pair<int, double>> cand(k);
      for (int j = 0; j < k; ++j)
        cand[j] = {idx[j], (mask >> j) & 1u ? -1.0 : 1.0};
      out.push_back(std::move(cand));
    }
  } while (std::next_permutation(idx.begin(), idx.end()));
  return out;
}

double mean_tie(const Eigen::MatrixXd& mu, const Eigen::MatrixXd& lv,
                const Eigen::MatrixXd& pos, const PosteriorMap& truth,
                const std::vector<std::pair<int, double>>& gauge,
                Eigen::Index rows) {
  const int k = static_cast<int>(mu.cols());
  double total = 0.0;
  GaussianMoments q, target;
  q.mean.resize(k);
  q.cov = Eigen::MatrixXd::Zero(k, k);
  target.cov = truth.cov;
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (int j = 0; j < k; ++j) {
      q.mean[j] = gauge[j].second * mu(i, gauge[j].first);
      q.cov(j, j) = std::exp(lv(i, gauge[j].first));
    }
    target.mean = truth.mean_map * pos.row(i).transpose();
    total += gaussian_kl(q, target);
  }
  return total / static_cast<double>(rows);
}

}  // namespace

DeepSweepRecord evaluate(const MlpVae& net, const MixingModel& m,
                         const Eigen::MatrixXd& images,
                         const Eigen::MatrixXd& positions,
                         const TrainConfig& cfg, int realization) {
  check_net(net);
  const auto n = images.rows();
  const int k = net.latent_dim();
  if (n < 1 || images.cols() != net.input_dim())
    throw std::invalid_argument("evaluate: bad image matrix");
  if (positions.rows() != n || positions.cols() != m.data_dim())
    throw std::invalid_argument("evaluate: bad position matrix");
  if (m.source_dim() != k)
    throw std::invalid_argument("evaluate: latent/source dimension mismatch");
  if (k > 4)
    throw std::invalid_argument("evaluate: gauge search supports k <= 4");
  if (cfg.mc_samples_eval < 1)
    throw std::invalid_argument("evaluate: mc_samples_eval must be positive");

  auto [mu, lv] = encode_batch(net, images);

  // conditional independence loss, closed per-sample form
  Eigen::ArrayXXd lva = lv.array();
  double ci =
      0.5 * (mu.array().square() + lva.exp() - lva - 1.0).sum() / double(n);

  // reconstruction objective, latent draws batched through the decoder
  Rng rng(derive_seed(cfg.seed, "deep-eval", static_cast<std::uint64_t>(realization)));
  const int draws = cfg.mc_samples_eval;
  double recon = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::MatrixXd eps = rng.normal_matrix(draws, k);
    Eigen::MatrixXd z =
        (eps.array().rowwise() * (0.5 * lv.row(i)).array().exp()).matrix();
    z.rowwise() += mu.row(i);
    Eigen::MatrixXd xhat = decode_batch(net, z);
    recon += -0.5 * (xhat.rowwise() - images.row(i)).squaredNorm() / draws;
  }
  recon = recon / static_cast<double>(n) - 0.5 * net.input_dim() * kLog2Pi;

  // true inference error after the best signed relabeling of the latents
  PosteriorMap truth = ground_truth_posterior(m);
  const Eigen::Index align = std::min<Eigen::Index>(n, 256);
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::pair<int, double>> best_gauge;
  for (const auto& gauge : signed_perms(k)) {
    double v = mean_tie(mu, lv, positions, truth, gauge, align);
    if (v < best) {
      best = v;
      best_gauge = gauge;
    }
  }
  double tie = mean_tie(mu, lv, positions, truth, best_gauge, n);

  DeepSweepRecord rec;
  rec.beta = cfg.beta;
  rec.recon = recon;
  rec.ci_loss = ci;
  rec.elbo = recon - ci;
  rec.tie = tie;
  rec.realization = realization;
  return rec;
}

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t get_u32(std::ifstream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw std::runtime_error("load_model: truncated file");
  return v;
}

}  // namespace

void save_model(const MlpVae& net, const std::filesystem::path& path) {
  check_net(net);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_model: cannot open " + path.string());
  out.write("BVAE", 4);
  put_u32(out, 1);  // version
  auto layers = layer_list(net);
  put_u32(out, static_cast<std::uint32_t>(layers.size()));
  for (const DenseLayer* l : layers) {
    put_u32(out, static_cast<std::uint32_t>(l->w.rows()));
    put_u32(out, static_cast<std::uint32_t>(l->w.cols()));
    for (Eigen::Index r = 0; r < l->w.rows(); ++r)
      for (Eigen::Index c = 0; c < l->w.cols(); ++c) {
        double v = l->w(r, c);
        out.write(reinterpret_cast<const char*>(&v), sizeof v);
      }
    out.write(reinterpret_cast<const char*>(l->b.data()),
              static_cast<std::streamsize>(sizeof(double) * l->b.size()));
  }
  if (!out) throw std::runtime_error("save_model: write failed for " + path.string());
}

MlpVae load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_model: cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "BVAE", 4) != 0)
    throw std::runtime_error("load_model: bad magic in " + path.string());
  if (get_u32(in) != 1)
    throw std::runtime_error("load_model: unsupported version in " + path.string());
  const std::uint32_t count = get_u32(in);
  if (count < 3 || (count - 3) % 2 != 0)
    throw std::runtime_error("load_model: bad layer count in " + path.string());

  std::vector<DenseLayer> layers(count);
  for (auto& l : layers) {
    const std::uint32_t rows = get_u32(in);
    const std::uint32_t cols = get_u32(in);
    if (rows == 0 || cols == 0 ||
        static_cast<std::uint64_t>(rows) * cols > (1u << 28))
      throw std::runtime_error("load_model: bad layer shape in " + path.string());
    l.w.resize(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t c = 0; c < cols; ++c) {
        double v;
        in.read(reinterpret_cast<char*>(&v), sizeof v);
        l.w(r, c) = v;
      }
    l.b.resize(rows);
    in.read(reinterpret_cast<char*>(l.b.data()),
            static_cast<std::streamsize>(sizeof(double) * rows));
    if (!in) throw std::runtime_error("load_model: truncated file " + path.string());
  }
  if (in.peek() != std::ifstream::traits_type::eof())
    throw std::runtime_error("load_model: trailing bytes in " + path.string());

  // Fixed layout: enc hidden stack, two heads, mirrored decoder stack with
  // its extra output layer, so enc count = (total - 3) / 2.
  const std::uint32_t n_enc = (count - 3) / 2;
  MlpVae net;
  std::size_t at = 0;
  for (std::uint32_t i = 0; i < n_enc; ++i) net.enc_hidden.push_back(layers[at++]);
  net.enc_mean = layers[at++];
  net.enc_logvar = layers[at++];
  while (at < layers.size()) net.dec.push_back(layers[at++]);

  // shape audit: heads agree, stacks chain, decoder mirrors back to input
  if (net.enc_mean.w.rows() != net.enc_logvar.w.rows() ||
      net.enc_mean.w.cols() != net.enc_logvar.w.cols())
    throw std::runtime_error("load_model: head shape mismatch in " + path.string());
  auto chain_ok = [](const std::vector<DenseLayer>& ls) {
    for (std::size_t i = 1; i < ls.size(); ++i)
      if (ls[i].w.cols() != ls[i - 1].w.rows()) return false;
    return true;
  };
  if (!chain_ok(net.enc_hidden) || !chain_ok(net.dec))
    throw std::runtime_error("load_model: layer chain mismatch in " + path.string());
  if (!net.enc_hidden.empty() &&
      net.enc_mean.w.cols() != net.enc_hidden.back().w.rows())
    throw std::runtime_error("load_model: head/stack mismatch in " + path.string());
  if (net.dec.front().w.cols() != net.enc_mean.w.rows() ||
      net.dec.back().w.rows() != net.input_dim())
    throw std::runtime_error("load_model: decoder shape mismatch in " + path.string());
  return net;
}

}  // namespace disent
