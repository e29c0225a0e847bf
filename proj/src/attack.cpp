#include "nopeek/attack.hpp"

#include <cmath>
#include <cstdio>

#include "json.hpp"
#include "nopeek/autodiff.hpp"
#include "nopeek/byteio.hpp"
#include "nopeek/errors.hpp"
#include "nopeek/kernels.hpp"
#include "nopeek/rng.hpp"
#include "nopeek/stats.hpp"
#include "nopeek/wire.hpp"

namespace nopeek {

LeakedPairSet make_pair_set(const Matrix& z, const Matrix& x, std::uint64_t seed, double leak_fraction) {
  require(z.rows() == x.rows(), ErrorCode::kDimension, "Z and X differ in sample count");
  require(z.rows() >= 10, ErrorCode::kSampleSize, "need at least 10 held-out samples for a 90/10 split");
  require(leak_fraction > 0.0 && leak_fraction <= 1.0, ErrorCode::kConfig, "leak_fraction must be in (0, 1]");
  Rng rng = Rng::substream(seed, "split");
  const std::vector<std::size_t> perm = rng.permutation(z.rows());
  const std::size_t n_test = (z.rows() + 5) / 10;
  const std::size_t n_pool = z.rows() - n_test;
  const auto n_train = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(leak_fraction * double(n_pool))));
  LeakedPairSet p;
  p.leak_fraction = leak_fraction;
  p.test_ids.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
  p.train_ids.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_test),
                     perm.begin() + static_cast<std::ptrdiff_t>(n_test + n_train));
  p.z_train = gather_rows(z, p.train_ids);
  p.x_train = gather_rows(x, p.train_ids);
  p.z_test = gather_rows(z, p.test_ids);
  p.x_test = gather_rows(x, p.test_ids);
  return p;
}

LeakedPairSet harvest_pairs(const SplitModel& model, const Matrix& x_holdout, std::uint64_t seed, double leak_fraction) {
  require(x_holdout.rows() > 0, ErrorCode::kSampleSize, "no held-out data to harvest");
  return make_pair_set(forward_client(model, x_holdout), x_holdout, seed, leak_fraction);
}

std::vector<std::size_t> decoder_widths(std::size_t dz, std::size_t input_dim) {
  std::vector<std::size_t> w;
  for (std::size_t h = 2 * dz; h < input_dim; h *= 2) w.push_back(h);
  return w;
}

Decoder make_decoder(std::size_t dz, std::size_t input_dim, std::uint64_t seed) {
  Decoder d;
  std::vector<std::size_t> dims = {dz};
  for (std::size_t w : decoder_widths(dz, input_dim)) dims.push_back(w);
  dims.push_back(input_dim);
  Rng rng = Rng::substream(seed, "attacker");
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const double bound = 1.0 / std::sqrt(double(dims[i]));
    d.weights.push_back(rng_uniform(rng, dims[i], dims[i + 1], -bound, bound));
    d.biases.push_back(rng_uniform(rng, 1, dims[i + 1], -bound, bound));
  }
  d.z_mean.assign(dz, 0.0);
  d.z_scale.assign(dz, 1.0);
  return d;
}

namespace {

Matrix standardize(const Decoder& d, const Matrix& z) {
  require(z.cols() == d.in_dim(), ErrorCode::kDimension, "decoder expects dz = " + std::to_string(d.in_dim()));
  Matrix out = z;
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t j = 0; j < z.cols(); ++j) out(i, j) = (z(i, j) - d.z_mean[j]) / d.z_scale[j];
  return out;
}

ad::Var decoder_forward(const std::vector<ad::Var>& params, ad::Var h) {
  const std::size_t n_layers = params.size() / 2;
  for (std::size_t l = 0; l < n_layers; ++l) {
    h = ad::add_row(ad::matmul(h, params[2 * l]), params[2 * l + 1]);
    if (l + 1 < n_layers) h = ad::relu(h);
  }
  return h;
}

std::vector<Matrix*> decoder_params(Decoder& d) {
  std::vector<Matrix*> p;
  for (std::size_t l = 0; l < d.weights.size(); ++l) {
    p.push_back(&d.weights[l]);
    p.push_back(&d.biases[l]);
  }
  return p;
}

}  // namespace

Matrix decode(const Decoder& d, const Matrix& z) {
  Matrix h = standardize(d, z);
  for (std::size_t l = 0; l < d.weights.size(); ++l) {
    h = kernels::matmul(h, d.weights[l]);
    for (std::size_t i = 0; i < h.rows(); ++i)
      for (std::size_t j = 0; j < h.cols(); ++j) {
        h(i, j) += d.biases[l](0, j);
        if (l + 1 < d.weights.size() && h(i, j) < 0.0) h(i, j) = 0.0;
      }
  }
  return h;
}

AttackTraining train_attacker(const LeakedPairSet& pairs, const AttackOptions& opt) {
  require(pairs.z_train.rows() > 0, ErrorCode::kSampleSize, "no attacker-train pairs");
  require(opt.batch_size >= 1 && opt.epochs >= 1, ErrorCode::kConfig, "attack batch_size and epochs must be >= 1");
  AttackTraining out;
  Decoder& dec = out.decoder;
  dec = make_decoder(pairs.z_train.cols(), pairs.x_train.cols(), opt.seed);
  const std::size_t n = pairs.z_train.rows();
  for (std::size_t j = 0; j < pairs.z_train.cols(); ++j) {
    double m = 0.0, v = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += pairs.z_train(i, j);
    m /= double(n);
    for (std::size_t i = 0; i < n; ++i) v += (pairs.z_train(i, j) - m) * (pairs.z_train(i, j) - m);
    const double sd = std::sqrt(v / double(n));
    dec.z_mean[j] = m;
    dec.z_scale[j] = sd > 1e-12 ? sd : 1.0;
  }
  const Matrix zs = standardize(dec, pairs.z_train);

  std::vector<Matrix*> params = decoder_params(dec);
  std::vector<const Matrix*> cparams(params.begin(), params.end());
  AdamState adam = make_adam(cparams, opt.lr, opt.lr_decay);
  Rng shuffle = Rng::substream(opt.seed, "attacker-shuffle");
  const std::size_t bs = std::min(opt.batch_size, n);

  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    const std::vector<std::size_t> perm = shuffle.permutation(n);
    double total = 0.0;
    for (std::size_t b = 0; b < n; b += bs) {
      const std::span<const std::size_t> rows(perm.data() + b, std::min(bs, n - b));
      ad::Tape tape;
      std::vector<ad::Var> vars;
      for (Matrix* p : params) vars.push_back(tape.variable(*p));
      ad::Var xhat = decoder_forward(vars, tape.constant(gather_rows(zs, rows)));
      ad::Var loss = ad::scale(ad::sum_squares(ad::sub(xhat, tape.constant(gather_rows(pairs.x_train, rows)))),
                               1.0 / double(rows.size() * pairs.x_train.cols()));
      tape.backward(loss);
      const double lv = loss.value()(0, 0);
      require(std::isfinite(lv), ErrorCode::kTraining,
              "attacker loss diverged at epoch " + std::to_string(epoch) + " (try a smaller attack_lr)");
      std::vector<const Matrix*> grads;
      for (ad::Var v : vars) grads.push_back(&v.grad());
      adam_step(adam, params, grads);
      total += lv * double(rows.size());
    }
    adam_end_epoch(adam);
    out.epoch_losses.push_back(total / double(n));
  }
  return out;
}

AttackReport score_reconstruction(const Matrix& x, const Matrix& x_hat, const Matrix& x_train) {
  require(x.rows() == x_hat.rows() && x.cols() == x_hat.cols(), ErrorCode::kDimension, "reconstruction shape");
  require(x.rows() > 0 && x_train.rows() > 0, ErrorCode::kSampleSize, "empty attack evaluation");
  AttackReport r;
  r.n_train = x_train.rows();
  std::vector<double> mu(x.cols(), 0.0);
  for (std::size_t i = 0; i < x_train.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) mu[j] += x_train(i, j);
  for (double& m : mu) m /= double(x_train.rows());
  double se = 0.0, se_mean = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) {
      const double e = x(i, j) - x_hat(i, j);
      s += e * e;
      se_mean += (x(i, j) - mu[j]) * (x(i, j) - mu[j]);
    }
    se += s;
    r.sample_ids.push_back(i);
    r.l2_error.push_back(std::sqrt(s));
  }
  const double cells = double(x.rows() * x.cols());
  r.mse = se / cells;
  r.mean_predictor_mse = se_mean / cells;
  r.mean_l2 = mean(r.l2_error);
  r.median_l2 = median(r.l2_error);
  r.q1_l2 = quantile(r.l2_error, 0.25);
  r.q3_l2 = quantile(r.l2_error, 0.75);
  return r;
}

AttackReport evaluate_attack(const Decoder& d, const LeakedPairSet& pairs) {
  AttackReport r = score_reconstruction(pairs.x_test, decode(d, pairs.z_test), pairs.x_train);
  if (pairs.test_ids.size() == r.sample_ids.size()) r.sample_ids = pairs.test_ids;
  return r;
}

std::string attack_csv(const AttackReport& r) {
  std::string out = "sample_id,l2_error\n";
  char buf[64];
  for (std::size_t i = 0; i < r.l2_error.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", r.sample_ids[i], r.l2_error[i]);
    out += buf;
  }
  return out;
}

std::string attack_json(const AttackReport& r) {
  nlohmann::ordered_json j;
  j["n_train"] = r.n_train;
  j["n_test"] = r.l2_error.size();
  j["mse"] = r.mse;
  j["mean_predictor_mse"] = r.mean_predictor_mse;
  j["mean"] = r.mean_l2;
  j["median"] = r.median_l2;
  j["q1"] = r.q1_l2;
  j["q3"] = r.q3_l2;
  return j.dump(2) + "\n";
}

std::vector<std::uint8_t> encode_pairs(const Matrix& z, const Matrix& x) {
  require(z.rows() == x.rows(), ErrorCode::kDimension, "Z and X differ in sample count");
  byteio::Writer w;
  w.str("NPKP");
  w.u32(static_cast<std::uint32_t>(z.rows()));
  for (std::size_t i = 0; i < z.rows(); ++i) {
    wire::encode_tensor(w, wire::Tensor::from_matrix(slice_rows(z, i, i + 1), wire::DType::kF64));
    wire::encode_tensor(w, wire::Tensor::from_matrix(slice_rows(x, i, i + 1), wire::DType::kF64));
  }
  return w.take();
}

std::pair<Matrix, Matrix> decode_pairs(std::span<const std::uint8_t> bytes) {
  byteio::Reader r(bytes, ErrorCode::kFormat);
  require(r.str(4) == "NPKP", ErrorCode::kFormat, "not a pair dump (bad magic)");
  const std::uint32_t count = r.u32();
  require(count > 0, ErrorCode::kFormat, "empty pair dump");
  Matrix z, x;
  for (std::uint32_t i = 0; i < count; ++i) {
    Matrix zi, xi;
    try {
      zi = wire::decode_tensor(r).to_matrix();
      xi = wire::decode_tensor(r).to_matrix();
    } catch (const Error& e) {
      fail(ErrorCode::kFormat, std::string("pair ") + std::to_string(i) + ": " + e.what());
    }
    require(zi.rows() == 1 && xi.rows() == 1, ErrorCode::kFormat, "pair tensors must be single rows");
    if (i == 0) {
      z = Matrix(count, zi.cols());
      x = Matrix(count, xi.cols());
    }
    require(zi.cols() == z.cols() && xi.cols() == x.cols(), ErrorCode::kFormat, "inconsistent pair widths");
    for (std::size_t j = 0; j < z.cols(); ++j) z(i, j) = zi(0, j);
    for (std::size_t j = 0; j < x.cols(); ++j) x(i, j) = xi(0, j);
  }
  require(r.at_end(), ErrorCode::kFormat, "trailing bytes after pair dump");
  return {z, x};
}

}  // namespace nopeek
