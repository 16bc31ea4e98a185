#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>

#include "deeplk/evalkit.hpp"
#include "helpers.hpp"

using namespace deeplk;
using Catch::Matchers::WithinAbs;

TEST_CASE("iou", "[evalkit]") {
  const Box a{10, 10, 4, 6};
  SECTION("identical boxes") { REQUIRE(iou(a, a) == 1.0); }
  SECTION("disjoint boxes") {
    REQUIRE(iou(a, Box{100, 100, 4, 6}) == 0.0);
    REQUIRE(iou(a, Box{14, 10, 4, 6}) == 0.0);  // touching edges only
  }
  SECTION("unit squares overlapping half their area") {
    const Box u1{0.5, 0.5, 1, 1};
    const Box u2{1.0, 0.5, 1, 1};
    REQUIRE_THAT(iou(u1, u2), WithinAbs(1.0 / 3.0, 1e-12));
  }
  SECTION("symmetric and bounded") {
    Rng rng(1);
    for (int i = 0; i < 100; ++i) {
      const Box p{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(0.1, 8),
                  rng.uniform(0.1, 8)};
      const Box q{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(0.1, 8),
                  rng.uniform(0.1, 8)};
      const double v = iou(p, q);
      REQUIRE(v == iou(q, p));
      REQUIRE(v >= 0.0);
      REQUIRE(v <= 1.0);
    }
  }
  SECTION("rejects degenerate boxes") {
    REQUIRE_THROWS_AS(iou(a, Box{0, 0, 0, 1}), std::invalid_argument);
  }
}

TEST_CASE("success_curve", "[evalkit]") {
  const Box b{10, 10, 5, 5};
  SECTION("perfect predictions hit the strict-inequality ceiling") {
    const std::vector<Box> boxes(7, b);
    const SuccessCurve c = success_curve(boxes, boxes);
    REQUIRE_THAT(c.auc, WithinAbs(100.0 / 101.0, 1e-12));
    REQUIRE(c.success_at_050 == 1.0);
    REQUIRE(c.success[100] == 0.0);  // IoU > 1.0 never holds
    REQUIRE(c.success[0] == 1.0);
  }
  SECTION("disjoint predictions score zero") {
    const std::vector<Box> pred(5, Box{100, 100, 5, 5});
    const std::vector<Box> gt(5, b);
    const SuccessCurve c = success_curve(pred, gt);
    REQUIRE(c.auc == 0.0);
    REQUIRE(c.success_at_050 == 0.0);
  }
  SECTION("non-increasing in the threshold") {
    Rng rng(3);
    std::vector<Box> pred, gt;
    for (int i = 0; i < 40; ++i) {
      gt.push_back(Box{rng.uniform(0, 50), rng.uniform(0, 50), 8, 8});
      Box p = gt.back();
      p.cx += rng.uniform(-6, 6);
      p.cy += rng.uniform(-6, 6);
      pred.push_back(p);
    }
    const SuccessCurve c = success_curve(pred, gt);
    for (int k = 1; k <= 100; ++k) REQUIRE(c.success[k] <= c.success[k - 1]);
    REQUIRE(c.auc >= 0.0);
    REQUIRE(c.auc <= 1.0);
  }
  SECTION("length mismatch is rejected") {
    REQUIRE_THROWS_AS(success_curve(std::vector<Box>(2, b), std::vector<Box>(3, b)),
                      std::invalid_argument);
  }
}

TEST_CASE("synth_sequence", "[evalkit]") {
  SECTION("zero motion scales give a static sequence with constant gt") {
    SynthConfig cfg;
    cfg.frames = 4;
    cfg.b_x = 0.0;
    cfg.b_s = 0.0;
    cfg.seed = 9;
    const SynthSequence seq = synth_sequence(cfg);
    for (int t = 1; t < 4; ++t) {
      REQUIRE(seq.frames[t].data == seq.frames[0].data);
      REQUIRE(seq.gt[t].cx == seq.gt[0].cx);
      REQUIRE(seq.gt[t].w == seq.gt[0].w);
    }
  }
  SECTION("fixed seed reproduces frames bit for bit") {
    SynthConfig cfg;
    cfg.frames = 5;
    cfg.seed = 21;
    const SynthSequence a = synth_sequence(cfg);
    const SynthSequence b = synth_sequence(cfg);
    for (int t = 0; t < 5; ++t) REQUIRE(a.frames[t].data == b.frames[t].data);
  }
  SECTION("gt boxes stay inside the frame under heavy motion") {
    SynthConfig cfg;
    cfg.frames = 60;
    cfg.seed = 33;
    cfg.b_x = 0.25;
    cfg.b_s = 0.1;
    const SynthSequence seq = synth_sequence(cfg);
    for (const Box& b : seq.gt) {
      REQUIRE(b.x1() >= 0.0);
      REQUIRE(b.y1() >= 0.0);
      REQUIRE(b.x2() <= cfg.width - 1.0);
      REQUIRE(b.y2() <= cfg.height - 1.0);
      REQUIRE(b.w > 0.0);
    }
  }
  SECTION("self-evaluation of generated gt hits the auc ceiling") {
    SynthConfig cfg;
    cfg.frames = 12;
    cfg.seed = 4;
    const SynthSequence seq = synth_sequence(cfg);
    const SuccessCurve c = success_curve(seq.gt, seq.gt);
    REQUIRE_THAT(c.auc, WithinAbs(100.0 / 101.0, 1e-12));
  }
  SECTION("brightness drift changes pixel values over time") {
    SynthConfig cfg;
    cfg.frames = 8;
    cfg.seed = 13;
    cfg.b_x = 0.0;
    cfg.b_s = 0.0;
    cfg.brightness_drift = 0.1;
    const SynthSequence seq = synth_sequence(cfg);
    REQUIRE(seq.frames[2].data != seq.frames[0].data);
  }
}

TEST_CASE("sequence io", "[evalkit]") {
  testutil::TempDir tmp("deeplk-seq");

  SECTION("write then load round trip") {
    SynthConfig cfg;
    cfg.frames = 3;
    cfg.seed = 55;
    cfg.fps = 240.0;
    const SynthSequence seq = synth_sequence(cfg);
    write_sequence(tmp.str("s"), seq);
    const LoadedSequence loaded = load_sequence(tmp.str("s"));
    REQUIRE(loaded.size() == 3);
    REQUIRE(loaded.fps == 240.0);
    REQUIRE(loaded.gt.size() == 3);
    for (int t = 0; t < 3; ++t) {
      REQUIRE_THAT(loaded.gt[t].cx, WithinAbs(seq.gt[t].cx, 1e-5));
      REQUIRE_THAT(loaded.gt[t].w, WithinAbs(seq.gt[t].w, 1e-5));
      const Image f = loaded.frame(t);
      REQUIRE(f.rows == seq.frames[t].rows);
      // 8-bit quantization on write
      for (std::size_t i = 0; i < f.data.size(); ++i)
        REQUIRE_THAT(f.data[i], WithinAbs(seq.frames[t].data[i], 0.5 / 255.0 + 1e-9));
    }
  }

  SECTION("top-left corner convention on load") {
    std::filesystem::create_directories(tmp.str("g"));
    std::ofstream gt(tmp.str("g/groundtruth.txt"));
    gt << "10, 20, 30, 40\n";
    gt.close();
    const std::vector<Box> boxes = load_boxes(tmp.str("g/groundtruth.txt"));
    REQUIRE(boxes.size() == 1);
    REQUIRE_THAT(boxes[0].cx, WithinAbs(25.0, 1e-12));
    REQUIRE_THAT(boxes[0].cy, WithinAbs(40.0, 1e-12));
    REQUIRE(boxes[0].w == 30.0);
    REQUIRE(boxes[0].h == 40.0);
  }

  SECTION("malformed lines report their line number") {
    std::filesystem::create_directories(tmp.str("h"));
    std::ofstream gt(tmp.str("h/groundtruth.txt"));
    gt << "1,2,3,4\nbroken line\n";
    gt.close();
    REQUIRE_THROWS_WITH(load_boxes(tmp.str("h/groundtruth.txt")),
                        Catch::Matchers::ContainsSubstring(":2"));
  }

  SECTION("frame/gt count mismatch is fatal") {
    SynthConfig cfg;
    cfg.frames = 3;
    const SynthSequence seq = synth_sequence(cfg);
    write_sequence(tmp.str("m"), seq);
    std::ofstream gt(tmp.str("m/groundtruth.txt"), std::ios::app);
    gt << "1,1,5,5\n";
    gt.close();
    REQUIRE_THROWS_AS(load_sequence(tmp.str("m")), DataError);
  }

  SECTION("results round trip within 1e-6") {
    std::vector<Box> boxes{Box{1.2345678, 2.5, 3.25, 4.125},
                           Box{-7.5, 100.0, 12.0, 8.5}};
    std::vector<bool> failed{false, true};
    write_results(tmp.str("results.txt"), boxes, failed);
    const auto [rb, rf] = read_results(tmp.str("results.txt"));
    REQUIRE(rb.size() == 2);
    REQUIRE(rf[0] == false);
    REQUIRE(rf[1] == true);
    for (int i = 0; i < 2; ++i) {
      REQUIRE_THAT(rb[i].cx, WithinAbs(boxes[i].cx, 1e-6));
      REQUIRE_THAT(rb[i].cy, WithinAbs(boxes[i].cy, 1e-6));
      REQUIRE_THAT(rb[i].w, WithinAbs(boxes[i].w, 1e-6));
      REQUIRE_THAT(rb[i].h, WithinAbs(boxes[i].h, 1e-6));
    }
  }
}

TEST_CASE("cost_curve", "[evalkit]") {
  Rng rng(61);
  const Image img = make_blurred_noise(96, 96, 1, rng);
  const Box box{48.0, 48.0, 24.0, 24.0};
  const Patch tpl = crop_resize(img, box, 2.0, 32);

  SECTION("global minimum at zero shift for any extractor") {
    for (const auto kind :
         {ExtractorKind::kIdentity, ExtractorKind::kGradChannels}) {
      FeatureParams params;
      params.kind = kind;
      const auto curve = cost_curve(params, tpl, img, 2.0, 8.0, 0.5);
      REQUIRE(curve.size() == 33);
      double min_ssd = 1e300;
      double min_shift = 99;
      for (const auto& p : curve)
        if (p.ssd < min_ssd) {
          min_ssd = p.ssd;
          min_shift = p.shift;
        }
      REQUIRE(min_shift == 0.0);
      REQUIRE_THAT(min_ssd, WithinAbs(0.0, 1e-18));
    }
  }

  SECTION("periodic texture yields multiple raw-pixel minima") {
    Rng nrng(7);
    const Image noise = make_blurred_noise(96, 96, 1, nrng);
    const Image grating = testutil::grating_image(96, 96, 4.0, 0.0, 0.35, noise, 0.1);
    const Patch gt_tpl = crop_resize(grating, box, 2.0, 32);
    const FeatureParams identity{};  // identity extractor
    const auto curve = cost_curve(identity, gt_tpl, grating, 2.0, 8.0, 0.5);
    REQUIRE(count_local_minima(curve) >= 2);
  }

  SECTION("local minimum counting is strict") {
    std::vector<CostCurvePoint> vee{{-1, 3}, {0, 1}, {1, 3}};
    REQUIRE(count_local_minima(vee) == 1);
    std::vector<CostCurvePoint> flat{{-1, 1}, {0, 1}, {1, 1}};
    REQUIRE(count_local_minima(flat) == 0);
  }

  SECTION("csv output has the documented header") {
    const FeatureParams identity{};  // identity extractor
    const auto curve = cost_curve(identity, tpl, img, 2.0, 2.0, 1.0);
    std::ostringstream out;
    write_cost_csv(out, curve);
    REQUIRE(out.str().substr(0, 10) == "shift,ssd\n");
  }
}
