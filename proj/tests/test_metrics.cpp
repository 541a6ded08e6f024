#include <filesystem>

#include "doctest.h"
#include "wan/common.hpp"
#include "wan/metrics.hpp"
#include "wan/synth.hpp"

using namespace wan;
namespace fs = std::filesystem;

TEST_CASE("confusion matches a hand-enumerated 4x4 case") {
  // pred probabilities and truth laid out row-major; counted by hand:
  // tp where pred>=0.5 and truth 1, etc.
  Tensor pred = Tensor::from_data({1, 4, 4}, {0.9, 0.1, 0.5, 0.4,    //
                                              0.6, 0.2, 0.8, 0.49,   //
                                              0.0, 1.0, 0.51, 0.3,   //
                                              0.7, 0.05, 0.5, 0.45});
  Tensor mask = Tensor::from_data({1, 4, 4}, {1, 0, 1, 1,  //
                                              0, 0, 1, 0,  //
                                              1, 1, 0, 0,  //
                                              1, 1, 1, 0});
  metrics::ConfusionCounts c = metrics::confusion(pred, mask);
  CHECK(c.tp == 6);  // 0.9, 0.5, 0.8, 1.0, 0.7, and the trailing 0.5 on a 1
  CHECK(c.fp == 2);  // 0.6 and 0.51 land on 0s
  CHECK(c.fn == 3);  // 0.4, 0.0, 0.05 land on 1s
  CHECK(c.tn == 5);
  CHECK(c.total() == 16);
}

TEST_CASE("confusion tie convention and rejection rules") {
  Tensor half = Tensor::full({2, 3, 3}, 0.5);
  Tensor mask = Tensor::zeros({2, 3, 3});
  metrics::ConfusionCounts c = metrics::confusion(half, mask);
  CHECK(c.fp == 18);  // every 0.5 counts as positive
  CHECK(c.tn == 0);

  Tensor exact = Tensor::from_data({1, 2}, {1.0, 0.0});
  Tensor truth = Tensor::from_data({1, 2}, {1.0, 0.0});
  metrics::ConfusionCounts perfect = metrics::confusion(exact, truth);
  CHECK(perfect.fp == 0);
  CHECK(perfect.fn == 0);

  CHECK_THROWS_AS(metrics::confusion(half, Tensor::zeros({1, 3, 3})), ContractViolation);
  CHECK_THROWS_AS(metrics::confusion(half, Tensor::full({2, 3, 3}, 0.5)), ContractViolation);
}

TEST_CASE("iou and f1 reference values") {
  metrics::ConfusionCounts identical{50, 0, 0, 14};
  CHECK(metrics::iou(identical) == 1.0);
  CHECK(metrics::f1(identical) == 1.0);

  metrics::ConfusionCounts disjoint{0, 30, 30, 4};
  CHECK(metrics::iou(disjoint) == 0.0);
  CHECK(metrics::f1(disjoint) == 0.0);

  // pred = left half, gt = full image: tp = half, fn = half, fp = 0
  metrics::ConfusionCounts half{128, 0, 128, 0};
  CHECK(metrics::iou(half) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(metrics::f1(half) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

  metrics::ConfusionCounts empty{0, 0, 0, 100};
  CHECK(metrics::iou(empty) == 1.0);
  CHECK(metrics::f1(empty) == 1.0);
}

TEST_CASE("f1 equals 2*iou/(1+iou) on 1000 random count sets") {
  Rng rng(401);
  for (int trial = 0; trial < 1000; ++trial) {
    metrics::ConfusionCounts c;
    c.tp = static_cast<uint64_t>(rng.uniform_int(1000));
    c.fp = static_cast<uint64_t>(rng.uniform_int(1000));
    c.fn = static_cast<uint64_t>(rng.uniform_int(1000));
    c.tn = static_cast<uint64_t>(rng.uniform_int(1000));
    const double i = metrics::iou(c);
    const double f = metrics::f1(c);
    CHECK(f == doctest::Approx(2.0 * i / (1.0 + i)).epsilon(1e-12));
    CHECK(i >= 0.0);
    CHECK(i <= f);
    CHECK(f <= 1.0);
  }
}

TEST_CASE("micro-average pools counts instead of averaging per-image metrics") {
  // sample A perfect (tp 4), sample B fully wrong (fp 1, fn 1)
  metrics::ConfusionCounts a{4, 0, 0, 0};
  metrics::ConfusionCounts b{0, 1, 1, 2};
  metrics::ConfusionCounts pooled = a;
  pooled += b;
  const double pooled_iou = metrics::iou(pooled);
  CHECK(pooled_iou == doctest::Approx(4.0 / 6.0).epsilon(1e-15));
  const double mean_of_ious = (metrics::iou(a) + metrics::iou(b)) / 2.0;
  CHECK(mean_of_ious == 0.5);
  CHECK(pooled_iou != mean_of_ious);
}

TEST_CASE("evaluate_dataset pools per-sample counts and is deterministic") {
  synth::SyntheticDomainSpec src = synth::default_source_spec();
  synth::SyntheticDomainSpec tgt = synth::default_target_spec();
  src.patch_size = tgt.patch_size = 32;
  src.scale_min = tgt.scale_min = 6;
  src.scale_max = tgt.scale_max = 12;
  fs::path dir = fs::temp_directory_path() / "wan_metrics_eval";
  fs::remove_all(dir);
  auto [sm, tm] = synth::synth_generate(src, tgt, {0, 5, 0}, dir.string());

  Rng rng(402);
  models::Generator gen(2, rng);

  metrics::EvalReport r1 = metrics::evaluate_dataset(gen, sm, "val", 2);
  metrics::EvalReport r2 = metrics::evaluate_dataset(gen, sm, "val", 4);
  CHECK(r1.counts.tp == r2.counts.tp);  // batch partitioning cannot change counts
  CHECK(r1.counts.fp == r2.counts.fp);
  CHECK(r1.counts.fn == r2.counts.fn);
  CHECK(r1.counts.tn == r2.counts.tn);
  CHECK(r1.iou_value == r2.iou_value);

  // oracle: accumulate confusion sample by sample
  metrics::ConfusionCounts oracle;
  {
    NoGradGuard ng;
    for (const auto& e : dataset::split_entries(sm, "val")) {
      Tensor img = dataset::load_image(sm, e);
      Tensor mask = dataset::load_mask(sm, e);
      Tensor seg = gen.forward(dataset::stack({img})).seg;
      oracle += metrics::confusion(seg, dataset::stack({mask}));
    }
  }
  CHECK(r1.counts.tp == oracle.tp);
  CHECK(r1.counts.fp == oracle.fp);
  CHECK(r1.counts.fn == oracle.fn);
  CHECK(r1.counts.tn == oracle.tn);
  CHECK(r1.counts.total() == 5u * 32u * 32u);

  CHECK_THROWS_AS(metrics::evaluate_dataset(gen, sm, "test", 2), ContractViolation);
}

TEST_CASE("evaluate_dataset refuses unmasked samples") {
  fs::path dir = fs::temp_directory_path() / "wan_metrics_unmasked";
  fs::remove_all(dir);
  fs::create_directories(dir);
  pnm::Image img;
  img.height = img.width = 16;
  img.channels = 3;
  img.data.assign(16 * 16 * 3, 100);
  pnm::write_pnm((dir / "x.ppm").string(), img);
  dataset::write_manifest((dir / "m.csv").string(), {{"x.ppm", "val", 0, ""}});
  dataset::Manifest m = dataset::read_manifest((dir / "m.csv").string());

  Rng rng(403);
  models::Generator gen(2, rng);
  CHECK_THROWS_AS(metrics::evaluate_dataset(gen, m, "val", 1), ContractViolation);
}

TEST_CASE("eval report CSV appends rows and round-trips") {
  fs::path dir = fs::temp_directory_path() / "wan_metrics_csv";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::string path = (dir / "report.csv").string();

  metrics::EvalReport r;
  r.dataset = "synth";
  r.split = "test";
  r.method = "baseline";
  r.counts = {10, 2, 3, 85};
  r.iou_value = metrics::iou(r.counts);
  r.f1_value = metrics::f1(r.counts);
  r.checkpoint_hash = "00000000deadbeef";
  metrics::append_eval_report(path, r);
  r.method = "lt_wan";
  r.counts = {12, 1, 1, 86};
  r.iou_value = metrics::iou(r.counts);
  r.f1_value = metrics::f1(r.counts);
  metrics::append_eval_report(path, r);

  std::vector<metrics::EvalReport> rows = metrics::read_eval_reports(path);
  REQUIRE(rows.size() == 2);  // append, not overwrite
  CHECK(rows[0].method == "baseline");
  CHECK(rows[1].method == "lt_wan");
  CHECK(rows[0].counts.tp == 10);
  CHECK(rows[1].counts.tn == 86);
  CHECK(rows[0].iou_value == doctest::Approx(10.0 / 15.0).epsilon(1e-15));
  CHECK(rows[1].checkpoint_hash == "00000000deadbeef");
}
