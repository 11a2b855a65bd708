#include "dal/config.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace dal {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(std::size_t line_no, const std::string& field, const std::string& why) {
  throw ConfigError("config line " + std::to_string(line_no) + ", field '" + field + "': " +
                    why);
}

double parse_real(std::size_t line_no, const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    fail(line_no, key, "expected a real number, got '" + v + "'");
  }
}

std::uint64_t parse_uint(std::size_t line_no, const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
    const std::uint64_t u = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return u;
  } catch (const std::exception&) {
    fail(line_no, key, "expected a non-negative integer, got '" + v + "'");
  }
}

bool parse_bool(std::size_t line_no, const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail(line_no, key, "expected true/false, got '" + v + "'");
}

std::vector<std::pair<std::size_t, double>> parse_milestones(std::size_t line_no,
                                                             const std::string& key,
                                                             const std::string& v) {
  std::vector<std::pair<std::size_t, double>> out;
  std::istringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) fail(line_no, key, "expected epoch:factor, got '" + item + "'");
    out.emplace_back(parse_uint(line_no, key, trim(item.substr(0, colon))),
                     parse_real(line_no, key, trim(item.substr(colon + 1))));
  }
  return out;
}

}  // namespace

RunConfig parse_config(std::istream& in) {
  RunConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (value.empty()) fail(line_no, key, "empty value");

    if (key == "n_id") cfg.gen.n_id = parse_uint(line_no, key, value);
    else if (key == "samples_per_id") cfg.gen.samples_per_id = parse_uint(line_no, key, value);
    else if (key == "d_latent_id") cfg.gen.d_latent_id = parse_uint(line_no, key, value);
    else if (key == "d_in") cfg.gen.d_in = parse_uint(line_no, key, value);
    else if (key == "age_min") cfg.gen.age_min = parse_real(line_no, key, value);
    else if (key == "age_max") cfg.gen.age_max = parse_real(line_no, key, value);
    else if (key == "mixing_seed") cfg.gen.mixing_seed = parse_uint(line_no, key, value);
    else if (key == "noise_stddev") cfg.gen.noise_stddev = parse_real(line_no, key, value);
    else if (key == "lambda1") cfg.train.lambda1 = parse_real(line_no, key, value);
    else if (key == "lambda2") cfg.train.lambda2 = parse_real(line_no, key, value);
    else if (key == "margin_m") cfg.train.cosface.margin_m = parse_real(line_no, key, value);
    else if (key == "scale_s") cfg.train.cosface.scale_s = parse_real(line_no, key, value);
    else if (key == "epsilon") cfg.train.epsilon = parse_real(line_no, key, value);
    else if (key == "batch_size") cfg.train.batch_size = parse_uint(line_no, key, value);
    else if (key == "max_phase_iters") cfg.train.max_phase_iters = parse_uint(line_no, key, value);
    else if (key == "min_phase_iters") cfg.train.min_phase_iters = parse_uint(line_no, key, value);
    else if (key == "epochs") cfg.train.epochs = parse_uint(line_no, key, value);
    else if (key == "lr") cfg.train.lr = parse_real(line_no, key, value);
    else if (key == "lr_milestones") cfg.train.lr_milestones = parse_milestones(line_no, key, value);
    else if (key == "seed") cfg.train.seed = parse_uint(line_no, key, value);
    else if (key == "start_with_max") cfg.train.start_with_max = parse_bool(line_no, key, value);
    else if (key == "d_feat") cfg.train.model.d_feat = parse_uint(line_no, key, value);
    else if (key == "rfm_output_relu") cfg.train.model.rfm_output_relu = parse_bool(line_no, key, value);
    else if (key == "test_fraction") cfg.test_fraction = parse_real(line_no, key, value);
    else if (key == "mode") {
      const auto m = parse_mode(value);
      if (!m) fail(line_no, key, "expected baseline/plus_age/plus_age_dal, got '" + value + "'");
      cfg.train.mode = *m;
    } else {
      fail(line_no, key, "unknown key");
    }
  }
  cfg.train.model.d_in = cfg.gen.d_in;
  try {
    cfg.gen.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0))
    throw ConfigError("config field 'test_fraction': must be in (0,1)");
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  return parse_config(in);
}

void write_config(const RunConfig& cfg, std::ostream& out) {
  out << "n_id = " << cfg.gen.n_id << '\n';
  out << "samples_per_id = " << cfg.gen.samples_per_id << '\n';
  out << "d_latent_id = " << cfg.gen.d_latent_id << '\n';
  out << "d_in = " << cfg.gen.d_in << '\n';
  out << "age_min = " << format_double(cfg.gen.age_min) << '\n';
  out << "age_max = " << format_double(cfg.gen.age_max) << '\n';
  out << "mixing_seed = " << cfg.gen.mixing_seed << '\n';
  out << "noise_stddev = " << format_double(cfg.gen.noise_stddev) << '\n';
  out << "lambda1 = " << format_double(cfg.train.lambda1) << '\n';
  out << "lambda2 = " << format_double(cfg.train.lambda2) << '\n';
  out << "margin_m = " << format_double(cfg.train.cosface.margin_m) << '\n';
  out << "scale_s = " << format_double(cfg.train.cosface.scale_s) << '\n';
  out << "epsilon = " << format_double(cfg.train.epsilon) << '\n';
  out << "batch_size = " << cfg.train.batch_size << '\n';
  out << "max_phase_iters = " << cfg.train.max_phase_iters << '\n';
  out << "min_phase_iters = " << cfg.train.min_phase_iters << '\n';
  out << "epochs = " << cfg.train.epochs << '\n';
  out << "lr = " << format_double(cfg.train.lr) << '\n';
  if (!cfg.train.lr_milestones.empty()) {
    out << "lr_milestones = ";
    for (std::size_t i = 0; i < cfg.train.lr_milestones.size(); ++i) {
      if (i) out << ',';
      out << cfg.train.lr_milestones[i].first << ':'
          << format_double(cfg.train.lr_milestones[i].second);
    }
    out << '\n';
  }
  out << "seed = " << cfg.train.seed << '\n';
  out << "mode = " << mode_name(cfg.train.mode) << '\n';
  out << "start_with_max = " << (cfg.train.start_with_max ? "true" : "false") << '\n';
  out << "d_feat = " << cfg.train.model.d_feat << '\n';
  out << "rfm_output_relu = " << (cfg.train.model.rfm_output_relu ? "true" : "false") << '\n';
  out << "test_fraction = " << format_double(cfg.test_fraction) << '\n';
}

}  // namespace dal
