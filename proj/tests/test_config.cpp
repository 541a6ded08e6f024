#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "wan/common.hpp"
#include "wan/config.hpp"

using namespace wan;
using config::AdaptConfig;
using config::Mode;

TEST_CASE("mode names round-trip and bad names are rejected") {
  for (Mode m : {Mode::SourceOnly, Mode::Osa, Mode::Lta, Mode::OsWan, Mode::LtWan, Mode::Finetune})
    CHECK(config::mode_from_name(config::mode_name(m)) == m);
  CHECK_THROWS_WITH_AS(config::mode_from_name("oswan"), doctest::Contains("oswan"),
                       ContractViolation);
}

TEST_CASE("unset fields resolve to mode-dependent defaults") {
  AdaptConfig os = config::parse_config("mode=os_wan\n");
  CHECK(os.lr_discriminator == 1e-4);
  CHECK(os.lambda_adv == 0.1);
  CHECK(os.alpha_hd == 0.1);

  AdaptConfig lt = config::parse_config("mode=lt_wan\n");
  CHECK(lt.lr_discriminator == 1e-5);
  CHECK(lt.lambda_adv == 0.01);
  CHECK(lt.alpha_hd == 0.1);

  AdaptConfig lta = config::parse_config("mode=lta\n");
  CHECK(lta.lr_discriminator == 1e-5);
  CHECK(lta.lambda_adv == 0.01);
  CHECK(lta.alpha_hd == 0.0);

  AdaptConfig base = config::parse_config("mode=source_only\n");
  CHECK(base.lr_discriminator == 1e-4);
  CHECK(base.lambda_adv == 0.0);
  CHECK(base.alpha_hd == 0.0);

  // explicit values beat the mode default
  AdaptConfig pinned = config::parse_config("mode=os_wan\nlambda_adv=0\nalpha_hd=0\n");
  CHECK(pinned.lambda_adv == 0.0);
  CHECK(pinned.alpha_hd == 0.0);
}

TEST_CASE("parse of serialize is the identity for every mode") {
  Rng rng(77);
  for (Mode m : {Mode::SourceOnly, Mode::Osa, Mode::Lta, Mode::OsWan, Mode::LtWan, Mode::Finetune}) {
    AdaptConfig c;
    c.mode = m;
    c.lr_generator = rng.uniform(1e-5, 1e-2);
    c.lr_discriminator = rng.uniform(1e-6, 1e-3);
    c.lr_adversarial = rng.uniform(1e-7, 1e-4);
    c.lambda_adv = config::is_adversarial(m) ? rng.uniform(0.001, 0.5) : 0.0;
    c.alpha_hd = config::is_wan(m) ? rng.uniform(0.01, 0.5) : 0.0;
    c.beta1 = 0.9;
    c.beta2 = 0.999;
    c.weight_decay = 1e-7;
    c.batch_size = 4;
    c.max_steps = 123;
    c.seed = 987654321;
    c.eval_every = 25;
    c.base_filters = 16;
    c.source_manifest = "data/source_manifest.csv";
    c.target_manifest = "data/target_manifest.csv";
    AdaptConfig back = config::parse_config(config::serialize_config(c));
    CHECK(back == c);
  }
}

TEST_CASE("parser rejects malformed input by naming the offender") {
  CHECK_THROWS_WITH_AS(config::parse_config("mode=osa\nlearning_rate=3\n"),
                       doctest::Contains("learning_rate"), ContractViolation);
  CHECK_THROWS_WITH_AS(config::parse_config("mode=osa\nseed=1\nseed=2\n"),
                       doctest::Contains("seed"), ContractViolation);
  CHECK_THROWS_WITH_AS(config::parse_config("mode=osa\nbatch_size=two\n"),
                       doctest::Contains("batch_size"), ContractViolation);
  CHECK_THROWS_AS(config::parse_config("mode=warp_drive\n"), ContractViolation);
  CHECK_THROWS_AS(config::parse_config("just some words\n"), ContractViolation);
}

TEST_CASE("parser tolerates comments, blank lines, and CRLF") {
  AdaptConfig c = config::parse_config(
      "# adaptation run\r\n"
      "\r\n"
      "mode=lta\r\n"
      "max_steps=7   \r\n"
      "# trailing comment\n");
  CHECK(c.mode == Mode::Lta);
  CHECK(c.max_steps == 7);
}

TEST_CASE("validate pins loss weights to the mode family") {
  AdaptConfig c;
  c.mode = Mode::SourceOnly;
  config::validate(c);

  c.lambda_adv = 0.1;
  CHECK_THROWS_WITH_AS(config::validate(c), doctest::Contains("lambda_adv"), ContractViolation);
  c.lambda_adv = 0.0;

  c.alpha_hd = 0.1;
  CHECK_THROWS_WITH_AS(config::validate(c), doctest::Contains("alpha_hd"), ContractViolation);
  c.alpha_hd = 0.0;

  c.mode = Mode::Osa;
  c.lambda_adv = 0.1;
  config::validate(c);
  c.alpha_hd = 0.2;  // osa is adversarial but not weak-label aware
  CHECK_THROWS_AS(config::validate(c), ContractViolation);
}

TEST_CASE("validate rejects degenerate numeric settings") {
  AdaptConfig c;
  c.lr_generator = 0.0;
  CHECK_THROWS_AS(config::validate(c), ContractViolation);
  c = AdaptConfig{};
  c.beta1 = 1.0;
  CHECK_THROWS_AS(config::validate(c), ContractViolation);
  c = AdaptConfig{};
  c.beta2 = -0.1;
  CHECK_THROWS_AS(config::validate(c), ContractViolation);
  c = AdaptConfig{};
  c.batch_size = 0;
  CHECK_THROWS_AS(config::validate(c), ContractViolation);
  c = AdaptConfig{};
  c.max_steps = -1;
  CHECK_THROWS_AS(config::validate(c), ContractViolation);
  c = AdaptConfig{};
  c.base_filters = 0;
  CHECK_THROWS_AS(config::validate(c), ContractViolation);
  c = AdaptConfig{};
  c.lambda_adv = -0.5;
  c.mode = Mode::Osa;
  CHECK_THROWS_AS(config::validate(c), ContractViolation);
}

TEST_CASE("config file loader distinguishes missing files from bad content") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "wan_config_io";
  fs::remove_all(dir);
  fs::create_directories(dir);

  CHECK_THROWS_AS(config::parse_config_file((dir / "absent.cfg").string()), IoError);

  std::ofstream((dir / "good.cfg")) << "mode=finetune\nmax_steps=11\n";
  AdaptConfig c = config::parse_config_file((dir / "good.cfg").string());
  CHECK(c.mode == Mode::Finetune);
  CHECK(c.max_steps == 11);
}
