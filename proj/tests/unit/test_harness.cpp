#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "json.hpp"
#include "nopeek/dataset.hpp"
#include "nopeek/errors.hpp"
#include "nopeek/experiment.hpp"
#include "nopeek/images.hpp"
#include "nopeek/stats.hpp"

using namespace nopeek;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kContract;
}

std::vector<std::uint8_t> cifar_fixture() {
  std::vector<std::uint8_t> b(2 * 3073);
  b[0] = 3;
  b[3073] = 9;
  for (std::size_t i = 0; i < 3072; ++i) {
    b[1 + i] = static_cast<std::uint8_t>(i % 256);
    b[3074 + i] = static_cast<std::uint8_t>(255 - i % 256);
  }
  return b;
}

std::vector<std::uint8_t> read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("nopeek_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

SessionConfig blob_config(std::uint64_t seed) {
  SessionConfig cfg;
  cfg.dataset = "blobs";
  cfg.epochs = 15;
  cfg.batch_size = 32;
  cfg.n_train = 256;
  cfg.n_holdout = 128;
  cfg.attack_epochs = 40;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("cifar-10 binary records") {
  const auto bytes = cifar_fixture();
  const Dataset d = decode_cifar10(bytes);
  CHECK(d.size() == 2);
  CHECK(d.dim() == 3072);
  const Attribute& label = d.attribute("class");
  CHECK(label.labels == decltype(label.labels){3, 9});
  CHECK(label.classes == 10);
  CHECK(d.image->height == 32);
  CHECK(d.image->channels == 3);
  CHECK(d.image->planar);
  CHECK(d.x(0, 1) == 1.0 / 255.0);
  CHECK(d.x(1, 0) == 1.0);

  const fs::path dir = scratch("cifar");
  const fs::path file = dir / "data_batch.bin";
  std::ofstream(file, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  const Dataset loaded = load_cifar10_bin(file.string());
  std::vector<std::uint8_t> back;
  for (std::size_t r = 0; r < loaded.size(); ++r) {
    back.push_back(static_cast<std::uint8_t>(loaded.attribute("class").labels[r]));
    for (double v : loaded.x.row(r)) back.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
  }
  CHECK(back == bytes);

  auto cut = bytes;
  cut.pop_back();
  CHECK(code_of([&] { decode_cifar10(cut); }) == ErrorCode::kFormat);
  auto bad_label = bytes;
  bad_label[0] = 10;
  CHECK(code_of([&] { decode_cifar10(bad_label); }) == ErrorCode::kFormat);
  CHECK(code_of([&] { load_cifar10_bin((dir / "missing.bin").string()); }) == ErrorCode::kIo);
  fs::remove_all(dir);
}

TEST_CASE("synthetic datasets") {
  CHECK(gen_synthetic("blobs", 64, 3).x == gen_synthetic("blobs", 64, 3).x);
  CHECK_FALSE(gen_synthetic("blobs", 64, 3).x == gen_synthetic("blobs", 64, 4).x);
  const Dataset s = gen_synthetic("stripes", 50, 5);
  CHECK(s.dim() == 256);
  CHECK(s.image->height == 16);
  for (double v : s.x.data()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK(s.x == gen_synthetic("stripes", 50, 5).x);
  const Dataset b = gen_synthetic("blobs", 64, 3);
  for (const char* name : {"class", "parity", "quadrant"}) CHECK(b.attribute(name).labels.size() == 64);
  CHECK(b.attribute("parity").classes == 2);
  CHECK(code_of([&] { b.attribute("age"); }) == ErrorCode::kConfig);
  CHECK(code_of([] { gen_synthetic("faces", 64, 0); }) == ErrorCode::kConfig);
  CHECK(code_of([] { gen_synthetic("blobs", 3, 0); }) == ErrorCode::kSampleSize);
}

TEST_CASE("well separated blobs are linearly separable") {
  BlobOptions opt;
  opt.separation = 10.0;
  Dataset d = gen_blobs(800, 6, opt);
  auto [train, test] = split_dataset(d, 400, 400, 1);
  const Dataset fit = train;
  Dataset* parts[] = {&train, &test};
  standardize(fit, parts);
  const double acc = linear_probe_accuracy(train.x, train.attribute("class").onehot, test.x,
                                           test.attribute("class").onehot);
  MESSAGE("probe accuracy " << acc);
  CHECK(acc > 0.99);
}

TEST_CASE("normalization and splits") {
  const Dataset d = gen_synthetic("blobs", 100, 7);
  const Normalization n = fit_normalization(d.x);
  const Matrix z = apply_normalization(d.x, n);
  const Normalization after = fit_normalization(z);
  for (std::size_t j = 0; j < z.cols(); ++j) {
    CHECK(std::abs(after.mean[j]) < 1e-12);
    CHECK(std::abs(after.stddev[j] - 1.0) < 1e-12);
  }
  CHECK(max_abs(invert_normalization(z, n) - d.x) < 1e-12);
  Matrix constant(5, 2, 3.0);
  CHECK(max_abs(apply_normalization(constant, fit_normalization(constant))) == 0.0);

  auto [a, b] = split_dataset(d, 60, 40, 2);
  CHECK(a.size() == 60);
  CHECK(b.size() == 40);
  CHECK(a.attribute("class").onehot.rows() == 60);
  CHECK(split_dataset(d, 60, 40, 2).first.x == a.x);
  CHECK(code_of([&] { split_dataset(d, 80, 40, 2); }) == ErrorCode::kConfig);
}

TEST_CASE("dataset container round trip") {
  Dataset d = gen_synthetic("stripes", 12, 8);
  const Dataset fit = d;
  Dataset* parts[] = {&d};
  standardize(fit, parts);
  const auto bytes = encode_dataset(d);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "NPKD");
  const Dataset back = decode_dataset(bytes);
  CHECK(back.x == d.x);
  CHECK(back.name == d.name);
  CHECK(back.image == d.image);
  CHECK(back.norm.mean == d.norm.mean);
  CHECK(back.attributes.size() == d.attributes.size());
  CHECK(back.attribute("class").onehot == d.attribute("class").onehot);
  CHECK(encode_dataset(back) == bytes);
  auto cut = bytes;
  cut.resize(cut.size() / 2);
  CHECK(code_of([&] { decode_dataset(cut); }) == ErrorCode::kFormat);
}

TEST_CASE("ppm output") {
  const std::vector<std::uint8_t> rgb(2 * 3 * 3, 7);
  const auto ppm = encode_ppm(2, 3, rgb);
  const std::string header = "P6\n2 3\n255\n";
  CHECK(std::string(ppm.begin(), ppm.begin() + long(header.size())) == header);
  CHECK(ppm.size() == header.size() + rgb.size());

  const ImageShape shape{4, 4, 1, false};
  const std::vector<double> flat(16, 0.3);
  for (std::uint8_t v : activation_rgb(flat, shape)) CHECK(v == 128);
  std::vector<double> ramp(16);
  for (std::size_t i = 0; i < 16; ++i) ramp[i] = double(i);
  const auto px = activation_rgb(ramp, shape);
  CHECK(px.size() == 48);
  CHECK(px[0] == 0);
  CHECK(px[45] == 255);
  CHECK(px[46] == 255);
}

TEST_CASE("activation dumps") {
  const Dataset d = gen_synthetic("stripes", 6, 9);
  SessionConfig cfg;
  cfg.hidden = {16, 8, 8};
  const HeadSpec heads[] = {{"class", 4}};
  const SplitModel m = build_model(d.dim(), ModelConfig{cfg.hidden, 5, {}}, heads, 1);
  const fs::path dir = scratch("dump");
  // Layer 0 is the flatten (identity), so the dump is the input image.
  const auto paths = dump_activation_images(m, d, 1, dir.string(), 3);
  REQUIRE(paths.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(fs::path(paths[i]).filename() == "act_" + std::to_string(i) + ".ppm");
    CHECK(read_file(paths[i]) == encode_ppm(16, 16, activation_rgb(d.x.row(i), *d.image)));
  }
  CHECK(code_of([&] { dump_activation_images(m, d, 2, dir.string(), 1); }) == ErrorCode::kConfig);
  fs::remove_all(dir);
}

TEST_CASE("experiment reports") {
  const SessionConfig cfg = blob_config(3);
  const Dataset data = gen_synthetic("blobs", cfg.n_train + cfg.n_holdout, cfg.seed);
  const ExperimentReport r = run_experiment(cfg, data);
  CHECK(r.rows.size() == cfg.epochs);
  const std::string csv = epochs_csv(r);
  CHECK(csv.rfind("epoch,train_loss,acc_class,dcor_xz,dcor_yz\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == long(cfg.epochs) + 1);
  for (const EpochRow& row : r.rows) {
    CHECK(std::isfinite(row.train_loss));
    CHECK(std::isfinite(row.dcor_xz));
  }
  CHECK(r.attacked);
  const auto j = nlohmann::json::parse(summary_json(r));
  CHECK(j.contains("config"));
  CHECK(j["seed"] == cfg.seed);

  const ExperimentReport again = run_experiment(cfg, data);
  CHECK(epochs_csv(again) == csv);
  CHECK(attack_csv(again.attack) == attack_csv(r.attack));
  CHECK(attack_json(attack_experiment(r, data)) == attack_json(r.attack));
  SessionConfig noisy = cfg;
  noisy.noise_scale = 2.0;
  ExperimentOptions no_attack;
  no_attack.run_attack = false;
  CHECK(attack_json(attack_experiment(run_experiment(noisy, data, no_attack), data)) ==
        attack_json(run_experiment(noisy, data).attack));

  const fs::path dir = scratch("report");
  write_report(r, dir.string());
  CHECK(read_file(dir / "epochs.csv") == std::vector<std::uint8_t>(csv.begin(), csv.end()));
  CHECK(fs::exists(dir / "summary.json"));
  CHECK(fs::exists(dir / "attack.csv"));
  CHECK_FALSE(fs::exists(dir / "burnin.csv"));
  fs::remove_all(dir);

  const SweepReport single = sweep_alpha(SessionConfig(cfg), data, {0.0});
  SessionConfig base = cfg;
  base.weights.alpha1 = 0.0;
  CHECK(epochs_csv(single.reports[0]) == epochs_csv(run_experiment(base, data)));
  const std::string sweep = sweep_csv(single);
  CHECK(sweep.rfind("alpha,accuracy,dcor_xz,attacker_mse\n", 0) == 0);
  CHECK(std::count(sweep.begin(), sweep.end(), '\n') == 2);
}

TEST_CASE("paired runs: nopeek lowers dcor, training alone lowers it too") {
  std::vector<double> base_final, base_initial, nopeek_final, base_acc, nopeek_acc;
  ExperimentOptions opt;
  opt.run_attack = false;
  for (std::uint64_t s = 0; s < 20; ++s) {
    SessionConfig cfg = blob_config(s);
    const Dataset data = gen_synthetic("blobs", cfg.n_train + cfg.n_holdout, s);
    cfg.weights.alpha1 = 0.0;
    const ExperimentReport b = run_experiment(cfg, data, opt);
    cfg.weights.alpha1 = 0.5;
    const ExperimentReport n = run_experiment(cfg, data, opt);
    base_initial.push_back(b.initial_dcor_xz);
    base_final.push_back(b.final_dcor_xz());
    nopeek_final.push_back(n.final_dcor_xz());
    base_acc.push_back(b.test_accuracy[0]);
    nopeek_acc.push_back(n.test_accuracy[0]);
  }
  MESSAGE("median dcor: initial " << median(base_initial) << ", baseline " << median(base_final) << ", nopeek "
                                  << median(nopeek_final) << "; accuracy " << median(base_acc) << " vs "
                                  << median(nopeek_acc));
  CHECK(median(base_final) <= median(base_initial));
  CHECK(median(nopeek_final) < median(base_final));
  CHECK(median(base_acc) - median(nopeek_acc) < 0.10);
}

TEST_CASE("alpha sweep traces a privacy-utility curve") {
  const std::vector<double> alphas = {0.0, 0.1, 0.5, 1.0, 2.0};
  std::vector<std::vector<double>> mse(alphas.size()), dc(alphas.size());
  for (std::uint64_t s = 0; s < 5; ++s) {
    SessionConfig cfg = blob_config(100 + s);
    const Dataset data = gen_synthetic("blobs", cfg.n_train + cfg.n_holdout, cfg.seed);
    const SweepReport sw = sweep_alpha(cfg, data, alphas);
    for (std::size_t a = 0; a < alphas.size(); ++a) {
      mse[a].push_back(sw.reports[a].attack.mse);
      dc[a].push_back(sw.reports[a].final_dcor_xz());
    }
  }
  std::size_t mse_inversions = 0, dcor_inversions = 0;
  for (std::size_t a = 1; a < alphas.size(); ++a) {
    MESSAGE("alpha " << alphas[a] << ": median mse " << median(mse[a]) << ", median dcor " << median(dc[a]));
    mse_inversions += median(mse[a]) < median(mse[a - 1]);
    dcor_inversions += median(dc[a]) > median(dc[a - 1]);
  }
  CHECK(mse_inversions <= 1);
  CHECK(dcor_inversions <= 1);
}
