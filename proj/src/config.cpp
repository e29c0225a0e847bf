#include "nopeek/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "nopeek/errors.hpp"

namespace nopeek {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  require(ec == std::errc() && ptr == v.data() + v.size(), ErrorCode::kConfig,
          "bad value '" + std::string(v) + "' for " + std::string(key));
  return out;
}

double parse_real(std::string_view key, std::string_view v) {
  const double d = parse_number<double>(key, v);
  require(std::isfinite(d), ErrorCode::kConfig, std::string(key) + " must be finite");
  return d;
}

std::vector<std::string> split_list(std::string_view v) {
  std::vector<std::string> out;
  while (!v.empty()) {
    const auto c = v.find(',');
    const auto item = trim(v.substr(0, c));
    if (!item.empty()) out.emplace_back(item);
    if (c == std::string_view::npos) break;
    v.remove_prefix(c + 1);
  }
  return out;
}

std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void SessionConfig::validate() const {
  weights.validate();
  require(weights.alpha2 > 0.0, ErrorCode::kConfig, "alpha2 must be > 0 for training");
  require(epochs >= 1, ErrorCode::kConfig, "epochs must be >= 1");
  require(batch_size >= 2, ErrorCode::kConfig, "batch_size must be >= 2 (dcor needs pairs)");
  require(!hidden.empty(), ErrorCode::kConfig, "hidden must list at least one width");
  for (std::size_t h : hidden) require(h >= 1, ErrorCode::kConfig, "hidden widths must be >= 1");
  // flatten + (dense, relu) per hidden width
  const std::size_t n_layers = 1 + 2 * hidden.size();
  require(split_index >= 2 && split_index < n_layers, ErrorCode::kConfig,
          "split_index must be in [2, " + std::to_string(n_layers - 1) + "]");
  require(lr > 0.0, ErrorCode::kConfig, "lr must be > 0");
  require(lr_decay > 0.0 && lr_decay <= 1.0, ErrorCode::kConfig, "lr_decay must be in (0, 1]");
  require(burnin_samples >= 3, ErrorCode::kConfig, "burnin_samples must be >= 3");
  require(noise_scale >= 0.0, ErrorCode::kConfig, "noise_scale must be >= 0");
  require(!heads.empty(), ErrorCode::kConfig, "at least one head is required");
  for (const auto& h : heads)
    require(h != protect, ErrorCode::kConfig, "protected attribute '" + protect + "' is also a head");
  require(n_train >= 4 && n_holdout >= 10, ErrorCode::kConfig, "n_train >= 4 and n_holdout >= 10 required");
  require(dcor_eval_samples >= 3, ErrorCode::kConfig, "dcor_eval_samples must be >= 3");
  require(attack_epochs >= 1 && attack_batch >= 1 && attack_lr > 0.0, ErrorCode::kConfig, "bad attack budget");
  require(leak_fraction > 0.0 && leak_fraction <= 1.0, ErrorCode::kConfig, "leak_fraction must be in (0, 1]");
}

void set_config_value(SessionConfig& c, std::string_view key, std::string_view v) {
  using std::size_t;
  auto sz = [&] { return parse_number<size_t>(key, v); };
  if (key == "alpha1") c.weights.alpha1 = parse_real(key, v);
  else if (key == "alpha2") c.weights.alpha2 = parse_real(key, v);
  else if (key == "epochs") c.epochs = sz();
  else if (key == "batch_size") c.batch_size = sz();
  else if (key == "split_index") c.split_index = sz();
  else if (key == "hidden") {
    c.hidden.clear();
    for (const auto& s : split_list(v)) c.hidden.push_back(parse_number<size_t>(key, s));
  } else if (key == "lr") c.lr = parse_real(key, v);
  else if (key == "lr_decay") c.lr_decay = parse_real(key, v);
  else if (key == "burnin_mode") c.burnin_mode = parse_burnin_mode(v);
  else if (key == "burnin_iters") c.burnin_iters = sz();
  else if (key == "burnin_samples") c.burnin_samples = sz();
  else if (key == "prefit_steps") c.prefit_steps = sz();
  else if (key == "noise_scale") c.noise_scale = parse_real(key, v);
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, v);
  else if (key == "heads") c.heads = split_list(v);
  else if (key == "protect") c.protect = std::string(v);
  else if (key == "exclude_binary_protected") {
    if (v == "true" || v == "1") c.exclude_binary_protected = true;
    else if (v == "false" || v == "0") c.exclude_binary_protected = false;
    else fail(ErrorCode::kConfig, "exclude_binary_protected must be true or false");
  }
  else if (key == "wire_dtype") {
    if (v == "f32") c.wire_dtype = wire::DType::kF32;
    else if (v == "f64") c.wire_dtype = wire::DType::kF64;
    else fail(ErrorCode::kConfig, "wire_dtype must be f32 or f64");
  } else if (key == "addr") c.addr = std::string(v);
  else if (key == "port") c.port = parse_number<std::uint16_t>(key, v);
  else if (key == "checkpoint") c.checkpoint = std::string(v);
  else if (key == "n_train") c.n_train = sz();
  else if (key == "n_holdout") c.n_holdout = sz();
  else if (key == "dataset") c.dataset = std::string(v);
  else if (key == "dcor_eval_samples") c.dcor_eval_samples = sz();
  else if (key == "attack_epochs") c.attack_epochs = sz();
  else if (key == "attack_lr") c.attack_lr = parse_real(key, v);
  else if (key == "attack_batch") c.attack_batch = sz();
  else if (key == "leak_fraction") c.leak_fraction = parse_real(key, v);
  else fail(ErrorCode::kConfig, "unknown config key '" + std::string(key) + "'");
}

SessionConfig parse_config(std::string_view text) {
  SessionConfig cfg;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string_view::npos, ErrorCode::kConfig,
            "line " + std::to_string(line_no) + ": expected key = value");
    try {
      set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      fail(ErrorCode::kConfig, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

SessionConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kConfig, "cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_text(const SessionConfig& c) {
  std::ostringstream o;
  auto join = [](const auto& xs) {
    std::ostringstream s;
    for (std::size_t i = 0; i < xs.size(); ++i) s << (i ? "," : "") << xs[i];
    return s.str();
  };
  o << "alpha1 = " << fmt_real(c.weights.alpha1) << "\n"
    << "alpha2 = " << fmt_real(c.weights.alpha2) << "\n"
    << "epochs = " << c.epochs << "\n"
    << "batch_size = " << c.batch_size << "\n"
    << "split_index = " << c.split_index << "\n"
    << "hidden = " << join(c.hidden) << "\n"
    << "lr = " << fmt_real(c.lr) << "\n"
    << "lr_decay = " << fmt_real(c.lr_decay) << "\n"
    << "burnin_mode = " << to_string(c.burnin_mode) << "\n"
    << "burnin_iters = " << c.burnin_iters << "\n"
    << "burnin_samples = " << c.burnin_samples << "\n"
    << "prefit_steps = " << c.prefit_steps << "\n"
    << "noise_scale = " << fmt_real(c.noise_scale) << "\n"
    << "seed = " << c.seed << "\n"
    << "heads = " << join(c.heads) << "\n";
  if (!c.protect.empty()) o << "protect = " << c.protect << "\n";
  o << "exclude_binary_protected = " << (c.exclude_binary_protected ? "true" : "false") << "\n";
  o << "wire_dtype = " << (c.wire_dtype == wire::DType::kF64 ? "f64" : "f32") << "\n"
    << "addr = " << c.addr << "\n"
    << "port = " << c.port << "\n"
    << "checkpoint = " << c.checkpoint << "\n"
    << "n_train = " << c.n_train << "\n"
    << "n_holdout = " << c.n_holdout << "\n"
    << "dataset = " << c.dataset << "\n"
    << "dcor_eval_samples = " << c.dcor_eval_samples << "\n"
    << "attack_epochs = " << c.attack_epochs << "\n"
    << "attack_lr = " << fmt_real(c.attack_lr) << "\n"
    << "attack_batch = " << c.attack_batch << "\n"
    << "leak_fraction = " << fmt_real(c.leak_fraction) << "\n";
  return o.str();
}

}  // namespace nopeek
