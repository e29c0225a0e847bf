// nopeek: split-learning client/server, experiment harness and attack testbed.
#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "nopeek/attack.hpp"
#include "nopeek/byteio.hpp"
#include "nopeek/checkpoint.hpp"
#include "nopeek/config.hpp"
#include "nopeek/dataset.hpp"
#include "nopeek/experiment.hpp"
#include "nopeek/images.hpp"
#include "nopeek/logging.hpp"
#include "nopeek/splitnet.hpp"
#include "nopeek/stats.hpp"

namespace fs = std::filesystem;
using namespace nopeek;

namespace {

void write_text(const fs::path& p, const std::string& s) {
  byteio::write_file(p.string(), std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

std::string read_text(const fs::path& p) {
  const auto b = byteio::read_file(p.string());
  return std::string(b.begin(), b.end());
}

SessionConfig config_with_overrides(const std::string& path, const std::vector<std::string>& sets) {
  SessionConfig cfg = path.empty() ? SessionConfig{} : load_config(path);
  for (const std::string& kv : sets) {
    const auto eq = kv.find('=');
    require(eq != std::string::npos, ErrorCode::kConfig, "--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

/// The dataset a command works on: a file, or one generated from the config.
Dataset experiment_data(const SessionConfig& cfg, const std::string& path) {
  if (!path.empty()) return load_dataset(path);
  return gen_synthetic(cfg.dataset, cfg.n_train + cfg.n_holdout, cfg.seed);
}

std::vector<double> parse_alphas(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      require(used == item.size(), ErrorCode::kConfig, "bad alpha '" + item + "'");
    } catch (const std::logic_error&) {
      fail(ErrorCode::kConfig, "bad alpha '" + item + "'");
    }
  }
  require(!out.empty(), ErrorCode::kConfig, "--alphas is empty");
  return out;
}

void print_epochs(const std::vector<EpochMetrics>& epochs) {
  for (const EpochMetrics& e : epochs) {
    std::printf("epoch %zu loss %.6f acc", e.epoch, e.train_loss);
    for (double a : e.head_accuracy) std::printf(" %.4f", a);
    std::printf("\n");
  }
}

}  // namespace

int main(int argc, char** argv) {
  init_logging();
  CLI::App app{"NoPeek split learning: leakage-reduced training and reconstruction attacks"};
  app.require_subcommand(1);

  std::string config_path, data_path, out_dir = "out", addr = "127.0.0.1:5555";
  std::vector<std::string> sets;
  std::uint16_t port = 5555;
  auto add_config = [&](CLI::App* c, bool required) {
    auto* o = c->add_option("--config", config_path, "flat key = value config file");
    if (required) o->required();
    c->add_option("--set", sets, "override a config key (key=value, repeatable)");
  };

  auto* server = app.add_subcommand("server", "serve the server half of one session over TCP");
  server->add_option("--port", port, "listen port")->required();
  add_config(server, true);

  auto* client = app.add_subcommand("client", "run the client half of a session against a server");
  client->add_option("--addr", addr, "server host:port")->required();
  add_config(client, true);
  client->add_option("--data", data_path, "NPKD dataset (training rows)")->required();
  client->add_option("--out", out_dir, "directory for the client checkpoint and log");

  std::string kind = "blobs", cifar;
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  std::string out_file = "data.npkd";
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset (or convert CIFAR-10) to NPKD");
  gen->add_option("--kind", kind, "blobs | stripes")->check(CLI::IsMember({"blobs", "stripes"}));
  gen->add_option("--n", n, "sample count");
  gen->add_option("--seed", seed, "master seed");
  gen->add_option("--cifar", cifar, "convert this CIFAR-10 binary batch instead");
  gen->add_option("--out", out_file, "output file");

  auto* burn = app.add_subcommand("burnin", "run client-side burn-in alone and write its trace");
  add_config(burn, false);
  burn->add_option("--data", data_path, "NPKD dataset (default: generated from the config)");
  burn->add_option("--out", out_file, "trace CSV")->default_val("burnin.csv");

  bool unsplit = false, no_attack = false;
  std::string probe;
  auto* train = app.add_subcommand("train", "train a client/server pair in-process and attack the result");
  add_config(train, false);
  train->add_option("--data", data_path, "NPKD dataset (default: generated from the config)");
  train->add_option("--out", out_dir, "report directory");
  train->add_flag("--unsplit", unsplit, "use the single-process reference trainer");
  train->add_flag("--no-attack", no_attack, "skip the reconstruction attack");
  train->add_option("--probe", probe, "attribute for a post-hoc linear probe on Z");

  std::string pairs_path, shape_text;
  std::size_t images = 0;
  auto* attack = app.add_subcommand("attack", "train the reconstruction attacker on a pair dump");
  add_config(attack, false);
  attack->add_option("--pairs", pairs_path, "NPKP pair dump")->required();
  attack->add_option("--out", out_dir, "report directory");
  attack->add_option("--images", images, "write this many side-by-side PPMs");
  attack->add_option("--shape", shape_text, "image shape h,w,c for --images");

  std::string alphas_text = "0,0.1,0.5,1,2";
  auto* sweep = app.add_subcommand("sweep", "alpha1 sweep: the privacy-utility curve");
  add_config(sweep, false);
  sweep->add_option("--data", data_path, "NPKD dataset (default: generated from the config)");
  sweep->add_option("--alphas", alphas_text, "comma-separated alpha1 values");
  sweep->add_option("--out", out_dir, "report directory");

  std::string ckpt_path;
  std::size_t layer = 0, count = 8;
  auto* dump = app.add_subcommand("dump-activations", "write layer activations as PPM images");
  dump->add_option("--checkpoint", ckpt_path, "NPKM model")->required();
  dump->add_option("--data", data_path, "NPKD dataset")->required();
  dump->add_option("--layer", layer, "dump the output of the first L layers (0 = input)");
  dump->add_option("--count", count, "number of samples");
  dump->add_option("--out", out_dir, "image directory");

  std::string report_dir;
  auto* report = app.add_subcommand("report", "summarise a report directory");
  report->add_option("dir", report_dir, "directory written by train or sweep")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*server) {
      const SessionConfig cfg = config_with_overrides(config_path, sets);
      auto t = TcpTransport::accept_one(port);
      const ServerLog log = run_server(cfg, *t);
      print_epochs(log.epochs);
    } else if (*client) {
      SessionConfig cfg = config_with_overrides(config_path, sets);
      fs::create_directories(out_dir);
      cfg.checkpoint = (fs::path(out_dir) / "client.npkm").string();
      Dataset d = load_dataset(data_path);
      Dataset* self[] = {&d};
      standardize(d, self);
      auto t = TcpTransport::connect(addr, cfg.port);
      const ClientLog log = run_client(cfg, d, *t);
      save_checkpoint(log.model, cfg.checkpoint);
      print_epochs(log.epochs);
    } else if (*gen) {
      const Dataset d = cifar.empty() ? gen_synthetic(kind, n, seed) : load_cifar10_bin(cifar);
      save_dataset(d, out_file);
      std::printf("%s: %zu x %zu, attributes:", out_file.c_str(), d.size(), d.dim());
      for (const Attribute& a : d.attributes) std::printf(" %s(%zu)", a.name.c_str(), a.classes);
      std::printf("\n");
    } else if (*burn) {
      SessionConfig cfg = config_with_overrides(config_path, sets);
      if (cfg.burnin_mode == BurninMode::kOff) cfg.burnin_mode = BurninMode::kAscent;
      Dataset d = experiment_data(cfg, data_path);
      Dataset* self[] = {&d};
      standardize(d, self);
      std::vector<HeadSpec> heads;
      for (const std::string& h : cfg.heads) heads.push_back({h, d.attribute(h).classes});
      SplitModel model = make_session_model(cfg, d.dim(), heads);
      const auto r = client_burnin(cfg, d, model);
      write_text(out_file, burnin_trace_csv(r->trace));
      const auto& tr = r->trace;
      std::printf("iterations %zu: f %.6f -> %.6f, dcor(X,Z) %.4f -> %.4f, dcor(Y,Z) %.4f -> %.4f\n",
                  tr.size() - 1, tr.front().f, tr.back().f, tr.front().dcor_xz, tr.back().dcor_xz, tr.front().dcor_yz,
                  tr.back().dcor_yz);
    } else if (*train) {
      const SessionConfig cfg = config_with_overrides(config_path, sets);
      const Dataset d = experiment_data(cfg, data_path);
      ExperimentOptions opt;
      opt.split = !unsplit;
      opt.run_attack = !no_attack;
      opt.probe_attribute = probe;
      const ExperimentReport r = run_experiment(cfg, d, opt);
      write_report(r, out_dir);
      save_checkpoint(r.model, (fs::path(out_dir) / "model.npkm").string());
      // Held-out (Z, x) pairs as released on the wire, for `nopeek attack`.
      auto [tr, hold] = split_dataset(d, cfg.n_train, cfg.n_holdout, cfg.seed);
      Dataset* both[] = {&tr, &hold};
      standardize(tr, both);
      byteio::write_file((fs::path(out_dir) / "pairs.npkp").string(),
                         encode_pairs(released_activations(cfg, r.model, hold.x), hold.x));
      std::cout << read_text(fs::path(out_dir) / "summary.json");
    } else if (*attack) {
      const SessionConfig cfg = config_with_overrides(config_path, sets);
      const auto [z, x] = decode_pairs(byteio::read_file(pairs_path));
      const LeakedPairSet pairs = make_pair_set(z, x, cfg.seed, cfg.leak_fraction);
      AttackOptions ao{cfg.attack_epochs, cfg.attack_lr, 0.95, cfg.attack_batch, cfg.seed};
      const AttackTraining trained = train_attacker(pairs, ao);
      const AttackReport rep = evaluate_attack(trained.decoder, pairs);
      fs::create_directories(out_dir);
      write_text(fs::path(out_dir) / "attack.csv", attack_csv(rep));
      write_text(fs::path(out_dir) / "attack.json", attack_json(rep));
      if (images > 0) {
        ImageShape shape;
        require(std::sscanf(shape_text.c_str(), "%zu,%zu,%zu", &shape.height, &shape.width, &shape.channels) == 3,
                ErrorCode::kConfig, "--shape must be h,w,c");
        const Matrix xhat = decode(trained.decoder, pairs.z_test);
        for (std::size_t i = 0; i < std::min(images, xhat.rows()); ++i)
          byteio::write_file((fs::path(out_dir) / ("recon_" + std::to_string(i) + ".ppm")).string(),
                             side_by_side_ppm(pairs.x_test.row(i), xhat.row(i), shape));
      }
      std::cout << attack_json(rep);
    } else if (*sweep) {
      const SessionConfig cfg = config_with_overrides(config_path, sets);
      const Dataset d = experiment_data(cfg, data_path);
      const SweepReport s = sweep_alpha(cfg, d, parse_alphas(alphas_text));
      fs::create_directories(out_dir);
      for (std::size_t i = 0; i < s.alphas.size(); ++i)
        write_report(s.reports[i], (fs::path(out_dir) / ("alpha_" + std::to_string(i))).string());
      write_text(fs::path(out_dir) / "sweep.csv", sweep_csv(s));
      std::cout << sweep_csv(s);
    } else if (*dump) {
      const SplitModel m = load_checkpoint(ckpt_path);
      const Dataset d = load_dataset(data_path);
      for (const std::string& p : dump_activation_images(m, d, layer, out_dir, count)) std::printf("%s\n", p.c_str());
    } else if (*report) {
      const fs::path dir(report_dir);
      if (fs::exists(dir / "sweep.csv")) std::cout << read_text(dir / "sweep.csv");
      if (fs::exists(dir / "summary.json")) {
        const auto j = nlohmann::json::parse(read_text(dir / "summary.json"));
        std::printf("seed %s alpha1 %s\n", j["seed"].dump().c_str(), j["alpha1"].dump().c_str());
        for (const auto& [head, acc] : j["test_accuracy"].items())
          std::printf("  test accuracy %-10s %.4f\n", head.c_str(), acc.get<double>());
        std::printf("  dcor(X,Z) %.4f -> %.4f\n", j["initial_dcor_xz"].get<double>(), j["final_dcor_xz"].get<double>());
        if (j.contains("attack"))
          std::printf("  attacker mse %.4f (mean-predictor bound %.4f)\n", j["attack"]["mse"].get<double>(),
                      j["attack"]["mean_predictor_mse"].get<double>());
      }
      require(fs::exists(dir / "sweep.csv") || fs::exists(dir / "summary.json"), ErrorCode::kConfig,
              "no report found in " + report_dir);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "nopeek: %s\n", e.what());
    return exit_status(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "nopeek: %s\n", e.what());
    return 1;
  }
  return 0;
}
