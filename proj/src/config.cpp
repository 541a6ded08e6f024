#include "wan/config.hpp"

#include <cstdio>
#include <fstream>
#include <optional>
#include <set>

#include "wan/common.hpp"

namespace wan::config {
namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    double v = std::stod(value, &used);
    check(used == value.size(), "config key `" + key + "` has trailing junk");
    return v;
  } catch (const ContractViolation&) {
    throw;
  } catch (const std::exception&) {
    throw ContractViolation("config key `" + key + "` must be numeric, got `" + value + "`");
  }
}

int64_t parse_int(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    int64_t v = std::stoll(value, &used);
    check(used == value.size(), "config key `" + key + "` has trailing junk");
    return v;
  } catch (const ContractViolation&) {
    throw;
  } catch (const std::exception&) {
    throw ContractViolation("config key `" + key + "` must be an integer, got `" + value + "`");
  }
}

}  // namespace

const char* mode_name(Mode mode) {
  switch (mode) {
    case Mode::SourceOnly: return "source_only";
    case Mode::Osa: return "osa";
    case Mode::Lta: return "lta";
    case Mode::OsWan: return "os_wan";
    case Mode::LtWan: return "lt_wan";
    case Mode::Finetune: return "finetune";
  }
  throw ContractViolation("unreachable mode");
}

Mode mode_from_name(const std::string& name) {
  if (name == "source_only") return Mode::SourceOnly;
  if (name == "osa") return Mode::Osa;
  if (name == "lta") return Mode::Lta;
  if (name == "os_wan") return Mode::OsWan;
  if (name == "lt_wan") return Mode::LtWan;
  if (name == "finetune") return Mode::Finetune;
  throw ContractViolation("unknown mode `" + name + "`");
}

AdaptConfig parse_config(const std::string& text) {
  AdaptConfig c;
  std::optional<double> lr_disc, lambda, alpha;
  std::set<std::string> seen;

  size_t start = 0;
  while (start <= text.size()) {
    size_t end = text.find('\n', start);
    std::string line =
        text.substr(start, end == std::string::npos ? std::string::npos : end - start);
    start = end == std::string::npos ? text.size() + 1 : end + 1;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    size_t first = line.find_first_not_of(' ');
    if (first == std::string::npos || line[first] == '#') continue;
    line = line.substr(first);

    size_t eq = line.find('=');
    check(eq != std::string::npos, "config line is not key=value: `" + line + "`");
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    check(seen.insert(key).second, "duplicate config key `" + key + "`");

    if (key == "mode") {
      c.mode = mode_from_name(value);
    } else if (key == "lr_generator") {
      c.lr_generator = parse_double(key, value);
    } else if (key == "lr_discriminator") {
      lr_disc = parse_double(key, value);
    } else if (key == "lr_adversarial") {
      c.lr_adversarial = parse_double(key, value);
    } else if (key == "lambda_adv") {
      lambda = parse_double(key, value);
    } else if (key == "alpha_hd") {
      alpha = parse_double(key, value);
    } else if (key == "beta1") {
      c.beta1 = parse_double(key, value);
    } else if (key == "beta2") {
      c.beta2 = parse_double(key, value);
    } else if (key == "weight_decay") {
      c.weight_decay = parse_double(key, value);
    } else if (key == "batch_size") {
      c.batch_size = parse_int(key, value);
    } else if (key == "max_steps") {
      c.max_steps = parse_int(key, value);
    } else if (key == "seed") {
      c.seed = static_cast<uint64_t>(parse_int(key, value));
    } else if (key == "eval_every") {
      c.eval_every = parse_int(key, value);
    } else if (key == "base_filters") {
      c.base_filters = parse_int(key, value);
    } else if (key == "source_manifest") {
      c.source_manifest = value;
    } else if (key == "target_manifest") {
      c.target_manifest = value;
    } else {
      throw ContractViolation("unknown config key `" + key + "`");
    }
  }

  c.lr_discriminator = lr_disc.value_or(is_latent(c.mode) ? 1e-5 : 1e-4);
  c.lambda_adv = lambda.value_or(!is_adversarial(c.mode) ? 0.0
                                 : is_latent(c.mode)     ? 0.01
                                                         : 0.1);
  c.alpha_hd = alpha.value_or(is_wan(c.mode) ? 0.1 : 0.0);
  validate(c);
  return c;
}

AdaptConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config(text);
}

std::string serialize_config(const AdaptConfig& c) {
  std::string out;
  out += std::string("mode=") + mode_name(c.mode) + "\n";
  out += "lr_generator=" + format_double(c.lr_generator) + "\n";
  out += "lr_discriminator=" + format_double(c.lr_discriminator) + "\n";
  out += "lr_adversarial=" + format_double(c.lr_adversarial) + "\n";
  out += "lambda_adv=" + format_double(c.lambda_adv) + "\n";
  out += "alpha_hd=" + format_double(c.alpha_hd) + "\n";
  out += "beta1=" + format_double(c.beta1) + "\n";
  out += "beta2=" + format_double(c.beta2) + "\n";
  out += "weight_decay=" + format_double(c.weight_decay) + "\n";
  out += "batch_size=" + std::to_string(c.batch_size) + "\n";
  out += "max_steps=" + std::to_string(c.max_steps) + "\n";
  out += "seed=" + std::to_string(c.seed) + "\n";
  out += "eval_every=" + std::to_string(c.eval_every) + "\n";
  out += "base_filters=" + std::to_string(c.base_filters) + "\n";
  out += "source_manifest=" + c.source_manifest + "\n";
  out += "target_manifest=" + c.target_manifest + "\n";
  return out;
}

void validate(const AdaptConfig& c) {
  check(c.lr_generator > 0.0, "lr_generator must be positive");
  check(c.lr_discriminator > 0.0, "lr_discriminator must be positive");
  check(c.lr_adversarial > 0.0, "lr_adversarial must be positive");
  check(c.lambda_adv >= 0.0, "lambda_adv must be non-negative");
  check(c.alpha_hd >= 0.0, "alpha_hd must be non-negative");
  check(c.beta1 > 0.0 && c.beta1 < 1.0, "beta1 must lie in (0,1)");
  check(c.beta2 > 0.0 && c.beta2 < 1.0, "beta2 must lie in (0,1)");
  check(c.weight_decay >= 0.0, "weight_decay must be non-negative");
  check(c.batch_size >= 1, "batch_size must be at least 1");
  check(c.max_steps >= 0, "max_steps must be non-negative");
  check(c.eval_every >= 0, "eval_every must be non-negative");
  check(c.base_filters >= 1, "base_filters must be at least 1");
  if (!is_adversarial(c.mode))
    check(c.lambda_adv == 0.0,
          std::string("lambda_adv must be 0 for mode ") + mode_name(c.mode));
  if (!is_wan(c.mode))
    check(c.alpha_hd == 0.0, std::string("alpha_hd must be 0 for mode ") + mode_name(c.mode));
}

}  // namespace wan::config
