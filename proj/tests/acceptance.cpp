// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance            all criteria
//   acceptance --only 4   a subset (repeatable)

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "avwnet/commands.hpp"
#include "support/oracles.hpp"
#include "support/scenes.hpp"

using namespace avwnet;
using oracle::grad_check;
using oracle::random_tensor;

namespace {

const fs::path kScratch = AVWNET_TEST_SCRATCH;

fs::path fresh(const std::string& name) {
  const fs::path p = kScratch / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

int avw(const std::string& args, const fs::path& log) {
  const std::string cmd =
      "\"" + std::string(AVWNET_BIN) + "\" " + args + " > " + q(log) + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Collects failed conditions for one criterion.
struct Verdict {
  std::vector<std::string> failures;
  std::ostringstream detail;

  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  bool passed() const { return failures.empty(); }
};

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

// ---- 1 ----------------------------------------------------------------------

void gradient_suite(Verdict& v) {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  double worst = 0;
  std::string worst_name;
  auto check = [&](const std::string& name, const oracle::GradCheck& r, double tol) {
    v.expect(r.checked > 0, name + ": nothing checked");
    v.expect(r.max_rel < tol, name + ": max rel " + fmt(r.max_rel) + " (" + r.worst + ")");
    if (r.max_rel > worst) {
      worst = r.max_rel;
      worst_name = name;
    }
  };
  auto probe = [&](Shape s) { return random_tensor(std::move(s), rng, false); };

  const Tensor x = random_tensor({2, 2, 6, 6}, rng);
  const Tensor w3 = random_tensor({3, 2, 3, 3}, rng);
  const Tensor w1 = random_tensor({3, 2, 1, 1}, rng);
  const Tensor b = random_tensor({3}, rng);
  const Tensor p3 = probe({2, 3, 6, 6});
  check("conv2d 3x3", grad_check([&] { return oracle::probe_loss(conv2d(x, w3, b, 1), p3); }, {x, w3, b}), 1e-4);
  check("conv2d 1x1", grad_check([&] { return oracle::probe_loss(conv2d(x, w1, b, 0), p3); }, {x, w1, b}), 1e-4);
  const Tensor ps = probe({2, 3, 3, 3});
  check("conv2d stride 2",
        grad_check([&] { return oracle::probe_loss(conv2d(x, w3, b, 1, 2), ps); }, {x, w3, b}), 1e-4);
  const Tensor ph = probe({2, 2, 3, 3});
  check("max_pool2d", grad_check([&] { return oracle::probe_loss(max_pool2d(x), ph); }, {x}), 1e-4);
  check("avg_pool2d", grad_check([&] { return oracle::probe_loss(avg_pool2d(x), ph); }, {x}), 1e-4);
  const Tensor pu = probe({2, 2, 12, 12});
  check("upsample_nearest",
        grad_check([&] { return oracle::probe_loss(upsample_nearest(x), pu); }, {x}), 1e-4);

  const Tensor xb = random_tensor({2, 3, 4, 4}, rng);
  const Tensor gamma = random_tensor({3}, rng, true, 0.5, 1.5);
  const Tensor beta = random_tensor({3}, rng);
  const Tensor pb = probe({2, 3, 4, 4});
  BatchNormStats stats;
  check("batch_norm train", grad_check([&] {
          return oracle::probe_loss(batch_norm(xb, gamma, beta, stats, BatchNormMode::train), pb);
        }, {xb, gamma, beta}), 1e-4);
  check("batch_norm eval", grad_check([&] {
          return oracle::probe_loss(batch_norm(xb, gamma, beta, stats, BatchNormMode::eval), pb);
        }, {xb, gamma, beta}), 1e-4);

  const Tensor px = probe({2, 2, 6, 6});
  check("relu", grad_check([&] { return oracle::probe_loss(relu(x), px); }, {x}), 1e-4);
  check("sigmoid", grad_check([&] { return oracle::probe_loss(sigmoid(x), px); }, {x}), 1e-4);
  check("scale", grad_check([&] { return oracle::probe_loss(scale(x, 0.3), px); }, {x}), 1e-4);
  const Tensor gate = random_tensor({2, 1, 6, 6}, rng);
  check("add", grad_check([&] { return oracle::probe_loss(add(x, gate), px); }, {x, gate}), 1e-4);
  check("mul", grad_check([&] { return oracle::probe_loss(mul(x, gate), px); }, {x, gate}), 1e-4);
  const Tensor y = random_tensor({2, 1, 6, 6}, rng);
  const Tensor pc = probe({2, 3, 6, 6});
  check("concat_channels",
        grad_check([&] { return oracle::probe_loss(concat_channels(x, y), pc); }, {x, y}), 1e-4);
  const Tensor pl = probe({2, 1, 6, 6});
  check("slice_channels",
        grad_check([&] { return oracle::probe_loss(slice_channels(x, 1, 1), pl); }, {x}), 1e-4);
  check("mean", grad_check([&] { return mean(x * x); }, {x}), 1e-4);

  const Tensor pred = random_tensor({2, 1, 6, 6}, rng, true, 0.05, 0.95);
  std::vector<double> t(72), wt(72), mk(72);
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = rng() % 2;
    wt[i] = 0.6 + 0.3 * (rng() % 2);
    mk[i] = rng() % 4 != 0;
  }
  const Tensor target = Tensor::from_values({2, 1, 6, 6}, t);
  const Tensor weight = Tensor::from_values({2, 1, 6, 6}, wt);
  const Tensor mask = Tensor::from_values({2, 1, 6, 6}, mk);
  check("focal_loss", grad_check([&] { return focal_loss(pred, target, weight, mask, 2.0); }, {pred}),
        1e-4);

  // End to end: phi(2,4) attention W-Net, every parameter.
  UNetConfig block;
  block.depth = 2;
  block.base_filters = 4;
  WNetModel model(WNetConfig::from_block(block), PreprocessConfig{}, 17);
  const Tensor image = random_tensor({2, 3, 16, 16}, rng, false, -2, 2);
  std::vector<double> tt(512), tw(512, 0.8);
  for (auto& e : tt) e = rng() % 2;
  const Tensor t2 = Tensor::from_values({2, 1, 16, 16}, tt);
  const Tensor w2 = Tensor::from_values({2, 1, 16, 16}, tw);
  const auto r = grad_check([&] {
    const WNetOutput out = model.forward(image, BatchNormMode::train);
    return add(focal_loss(out.second.probability, t2, w2, Tensor(), 2.0),
               focal_loss(out.first.probability, t2, w2, Tensor(), 2.0));
  }, model.parameters());
  v.expect(r.checked == static_cast<std::size_t>(model.parameter_count()),
           "end-to-end check skipped parameters");
  v.expect(r.max_rel < 1e-3, "attention W-Net: max rel " + fmt(r.max_rel) + " (" + r.worst + ")");

  const double elapsed = seconds_since(t0);
  v.expect(elapsed < 120, "runtime " + fmt(elapsed) + " s");
  v.detail << "primitives max rel " << fmt(worst, 3) << " (" << worst_name << "), phi(2,4) W-Net "
           << r.checked << " params max rel " << fmt(r.max_rel, 3) << ", " << fmt(elapsed, 3)
           << " s";
}

// ---- 2 ----------------------------------------------------------------------

void focal_oracle(Verdict& v) {
  std::mt19937_64 rng(202);
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    const Shape s{1 + static_cast<std::int64_t>(rng() % 3), 1, 4 + static_cast<std::int64_t>(rng() % 5), 5};
    const Tensor p = random_tensor(s, rng, false, 1e-4, 1 - 1e-4);
    const auto n = static_cast<std::size_t>(element_count(s));
    std::vector<double> y(n);
    for (auto& e : y) e = rng() % 2;
    const Tensor target = Tensor::from_values(s, y);
    const double loss =
        focal_loss(p, target, Tensor::full(s, 0.5), Tensor(), 0.0).item();
    double bce = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const double pk = p.values()[k];
      bce -= y[k] ? std::log(pk) : std::log(1 - pk);
    }
    bce /= static_cast<double>(n);
    worst = std::max(worst, std::abs(loss - 0.5 * bce));
  }
  v.expect(worst < 1e-12, "gamma 0 vs 0.5 BCE off by " + fmt(worst));

  const double point = focal_loss(Tensor::full({1, 1, 1, 1}, 0.5), Tensor::full({1, 1, 1, 1}, 1.0),
                                  Tensor::full({1, 1, 1, 1}, 0.8), Tensor(), 2.0)
                           .item();
  const double expect = 0.8 * 0.25 * std::log(2.0);
  v.expect(std::abs(point - expect) < 1e-12, "analytic point " + fmt(point, 17));
  v.detail << "max |focal - 0.5 BCE| " << fmt(worst, 3) << " over 100 tensors, analytic point error "
           << fmt(std::abs(point - expect), 3);
}

// ---- 3 ----------------------------------------------------------------------

void parameter_counts(Verdict& v) {
  UNetConfig plain;
  plain.use_attention = false;
  UNetConfig att;
  const std::int64_t unet = count_parameters(plain);
  const std::int64_t wnet = count_parameters(WNetConfig::from_block(plain));
  const std::int64_t att_wnet = count_parameters(WNetConfig::from_block(att));
  v.expect(unet == 34417, "plain phi(3,8) count " + std::to_string(unet));
  v.expect(std::abs(unet - 34000) <= 0.15 * 34000, "plain count outside 34000 +- 15%");
  v.expect(wnet == 68914, "plain W-Net count " + std::to_string(wnet));
  v.expect(att_wnet == 69950, "attention W-Net count " + std::to_string(att_wnet));
  v.expect(wnet > 68000 && att_wnet > 68000, "W-Net not above 68000");
  std::mt19937_64 rng(3);
  v.expect(UNet(plain, rng).parameter_count() == unet, "instantiated UNet differs from count");
  v.expect(WNetModel(WNetConfig::from_block(att), PreprocessConfig{}, 1).parameter_count() ==
               att_wnet,
           "instantiated W-Net differs from count");
  v.detail << "phi(3,8) UNet " << unet << ", W-Net " << wnet << ", attention W-Net " << att_wnet;
}

// ---- 4 ----------------------------------------------------------------------

void desk_scale_learning(Verdict& v) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path root = fresh("c4");
  std::ostringstream log;

  RunConfig base = default_run_config();
  base.verbosity = 0;
  base.synth.seed = 7;
  cmd_synth(base, root / "corpus", log);

  // The validation split cmd_train holds out, as its own corpus.
  const DatasetManifest manifest = load_manifest(root / "corpus", DatasetKind::synthetic);
  const auto [train_part, val_part] = split_dataset(load_samples(manifest), base.train.seed);
  v.expect(train_part.size() == 20 && val_part.size() == 5, "split is not 20/5");
  write_corpus(root / "val", val_part, DatasetKind::synthetic);

  std::map<bool, TieredMetrics> scores;
  std::ostringstream epochs;
  for (bool attention : {true, false}) {
    RunConfig cfg = base;
    cfg.model.use_attention = attention;
    const std::string tag = attention ? "att" : "plain";
    for (VesselKind kind : {VesselKind::artery, VesselKind::vein}) {
      cfg.train.vessel_kind = kind;
      const TrainArtifacts art = cmd_train(cfg, {root / "corpus"}, root / tag / kind_name(kind), log);
      v.expect(art.result.epochs_run <= 200, "more than 200 epochs");
      epochs << ' ' << tag << '/' << kind_name(kind) << ' ' << art.result.best_epoch << '/'
             << art.result.epochs_run;
    }
    cmd_predict(cfg, root / tag / "artery" / "model.avwn", root / tag / "vein" / "model.avwn",
                {root / "val"}, root / tag / "pred", false, log);
    scores[attention] =
        cmd_evaluate(cfg, root / tag / "pred", {root / "val"}, root / tag / "eval", log);
  }

  const double t1 = scores[true][Tier::all_vessel].macro_f1.mean;
  const double t2 = scores[true][Tier::centerline].macro_f1.mean;
  v.expect(t1 >= 0.85, "tier-1 macro F1 " + fmt(t1));
  v.expect(t2 >= 0.70, "tier-2 macro F1 " + fmt(t2));
  for (Tier tier : {Tier::all_vessel, Tier::centerline}) {
    const double gap = scores[false][tier].macro_f1.mean - scores[true][tier].macro_f1.mean;
    v.expect(gap <= 0.02, std::string("attention-off ahead by ") + fmt(gap) + " on " +
                              tier_name(tier));
  }
  const double elapsed = seconds_since(t0);
  v.expect(elapsed < 1800, "runtime " + fmt(elapsed) + " s");
  v.detail << "attention tier-1 " << fmt(t1, 3) << " tier-2 " << fmt(t2, 3) << "; off tier-1 "
           << fmt(scores[false][Tier::all_vessel].macro_f1.mean, 3) << " tier-2 "
           << fmt(scores[false][Tier::centerline].macro_f1.mean, 3) << "; best/run epochs"
           << epochs.str() << "; " << fmt(elapsed / 60, 3) << " min";
}

// ---- 5 ----------------------------------------------------------------------

bool subset(const Mask& a, const Mask& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] && !b[i]) return false;
  }
  return true;
}

void metrics_oracle(Verdict& v) {
  std::mt19937_64 rng(505);
  int mismatches = 0, nesting = 0;
  for (int i = 0; i < 50; ++i) {
    const auto s = scenes::random_scene(32, rng);
    const Mask* fov = i % 4 == 0 ? nullptr : &s.fov;
    Mask vessels(32, 32);
    for (std::size_t k = 0; k < vessels.size(); ++k) vessels[k] = is_vessel(s.truth[k]);
    const Mask skeleton = skeletonize(vessels);
    for (bool restrict : {true, false}) {
      EvaluationOptions opt;
      opt.restrict_to_discovered = restrict;
      const auto ref = oracle::tally(s.pred, s.truth, fov, skeleton, restrict);
      const ImageEvaluation ev = evaluate_image(s.pred, s.truth, fov, opt);
      for (int t = 0; t < 3; ++t) {
        for (std::size_t c = 0; c < 4; ++c) {
          mismatches += !(ev.tiers[t].counts.per_class[c] == ref.counts[t][c]);
        }
        mismatches += ev.tiers[t].counts.pixels != ref.pixels[t];
      }
      const TierRegions reg = build_regions(s.pred, s.truth, fov, opt);
      nesting += !subset(reg.centerline_wide, reg.centerline) ||
                 !subset(reg.centerline, vessels) || !subset(vessels, reg.all_vessel);
    }
  }
  v.expect(mismatches == 0, std::to_string(mismatches) + " count mismatches");
  v.expect(nesting == 0, std::to_string(nesting) + " nesting violations");
  v.detail << "50 scenes x 2 centerline modes, " << mismatches << " mismatches, " << nesting
           << " nesting violations";
}

// ---- 6 ----------------------------------------------------------------------

void fusion_properties(Verdict& v) {
  FusionConfig cfg;
  std::mt19937_64 rng(606);
  std::uniform_real_distribution<double> u(0, 1), c(0.05, 20);
  int bad_total = 0, bad_swap = 0, bad_scale = 0, scaled = 0;
  for (int i = 0; i < 100000; ++i) {
    const double pa = u(rng), pv = u(rng), k = c(rng);
    const VesselClass got = fuse_pixel(pa, pv, cfg);
    int hits = 0;
    for (VesselClass cls : kAllClasses) hits += got == cls;
    bad_total += hits != 1;
    const VesselClass swapped = fuse_pixel(pv, pa, cfg);
    const VesselClass mirror = got == VesselClass::artery ? VesselClass::vein
                               : got == VesselClass::vein ? VesselClass::artery
                                                          : got;
    bad_swap += swapped != mirror;
    // The band is relative, so scaling both keeps the class while both
    // scaled values stay above the vessel threshold decision.
    if (std::max(pa, pv) >= cfg.vessel_threshold && std::max(pa, pv) * k >= cfg.vessel_threshold) {
      ++scaled;
      bad_scale += fuse_pixel(pa * k, pv * k, cfg) != got;
    }
  }
  v.expect(bad_total == 0, std::to_string(bad_total) + " non-exclusive results");
  v.expect(bad_swap == 0, std::to_string(bad_swap) + " swap violations");
  v.expect(bad_scale == 0, std::to_string(bad_scale) + " scale violations");

  FusionConfig low;
  low.vessel_threshold = 0.4;
  v.expect(fuse_pixel(0.9, 0.5, cfg) == VesselClass::artery, "(0.9, 0.5) is not artery");
  v.expect(fuse_pixel(0.50, 0.45, low) == VesselClass::uncertain, "(0.50, 0.45) is not uncertain");
  v.expect(fuse_pixel(0.1, 0.1, cfg) == VesselClass::background, "(0.1, 0.1) is not background");
  v.detail << "1e5 triples (" << scaled << " scale pairs), 3 rule examples";
}

// ---- 7 ----------------------------------------------------------------------

void determinism(Verdict& v) {
  const fs::path root = fresh("c7");
  const std::string small = " --size 32 --epochs 6 --patience 3 -v 0";
  auto run = [&](const fs::path& dir) {
    const fs::path logf = dir / "cli.log";
    fs::create_directories(dir);
    bool ok = avw("synth --seed 21 --count 8 --size 48 -v 0 -o " + q(dir / "corpus"), logf) == 0;
    for (const char* kind : {"artery", "vein"}) {
      ok = ok && avw("train --data " + q(dir / "corpus") + " --vessel " + kind + " --seed 5" +
                         small + " -o " + q(dir / kind),
                     logf) == 0;
    }
    ok = ok && avw("predict --data " + q(dir / "corpus") + " --artery " +
                       q(dir / "artery" / "model.avwn") + " --vein " +
                       q(dir / "vein" / "model.avwn") + " -v 0 -o " + q(dir / "pred"),
                   logf) == 0;
    ok = ok && avw("evaluate --pred " + q(dir / "pred") + " --truth " + q(dir / "corpus") +
                       " -v 0 -o " + q(dir / "eval"),
                   logf) == 0;
    if (!ok) v.expect(false, "pipeline failed: " + slurp(logf));
  };
  run(root / "a");
  run(root / "b");
  if (!v.passed()) return;

  int compared = 0;
  auto same = [&](const fs::path& rel) {
    ++compared;
    const std::string a = slurp(root / "a" / rel);
    v.expect(!a.empty(), rel.string() + " is empty");
    v.expect(a == slurp(root / "b" / rel), rel.string() + " differs");
  };
  same("artery/model.avwn");
  same("vein/model.avwn");
  same("artery/train_log.csv");
  same("vein/train_log.csv");
  same("eval/metrics.csv");
  same("eval/metrics.txt");
  for (const auto& e : fs::directory_iterator(root / "a" / "pred")) {
    if (e.is_directory()) same(fs::path("pred") / e.path().filename() / "fused.png");
  }
  v.detail << compared << " artifacts byte-identical across two runs";
}

// ---- 8 ----------------------------------------------------------------------

void round_trips(Verdict& v) {
  const fs::path root = fresh("c8");
  SynthConfig sc;
  sc.count = 12;
  sc.size = 64;
  sc.seed = 808;
  const auto samples = generate_synthetic(sc);
  const DatasetManifest m = write_corpus(root / "corpus", samples, DatasetKind::synthetic);
  const auto loaded = load_samples(load_manifest(root / "corpus", DatasetKind::synthetic));
  v.expect(loaded.size() == samples.size(), "corpus size changed");
  std::int64_t label_pixels = 0;
  for (std::size_t i = 0; i < std::min(loaded.size(), samples.size()); ++i) {
    const auto& a = samples[i];
    const auto& b = loaded[i];
    v.expect(a.source_id == b.source_id, "id order changed");
    v.expect(a.rgb == b.rgb, a.source_id + ": image changed");
    v.expect(b.label && *a.label == *b.label, a.source_id + ": label changed");
    v.expect(b.fov_mask && *a.fov_mask == *b.fov_mask, a.source_id + ": mask changed");
    v.expect(decode_av_label(encode_colors(*a.label)) == *a.label, a.source_id + ": codec");
    label_pixels += static_cast<std::int64_t>(a.label->size());
  }

  int checkpoints = 0;
  for (bool attention : {true, false}) {
    for (bool ds : {false, true}) {
      UNetConfig block;
      block.use_attention = attention;
      block.deep_supervision = ds;
      WNetModel model(WNetConfig::from_block(block), PreprocessConfig{}, 9 + checkpoints);
      // Non-trivial batch-norm statistics.
      std::mt19937_64 rng(checkpoints);
      model.forward(random_tensor({2, 3, 32, 32}, rng, false), BatchNormMode::train);
      CheckpointMeta meta;
      meta.wnet = model.config();
      meta.model_seed = 0xFFFFFFFFFFFFFFFFull - checkpoints;
      meta.best_val_loss = 0.1 + 1e-17 * checkpoints;
      const fs::path file = root / ("m" + std::to_string(checkpoints) + ".avwn");
      save_checkpoint(file, model, meta);
      LoadedCheckpoint back = load_checkpoint(file);
      const auto bytes = serialize_checkpoint(model, meta);
      v.expect(serialize_checkpoint(back.model, back.meta) == bytes, "re-serialized bytes differ");
      const auto pa = model.parameters(), pb = back.model.parameters();
      bool exact = pa.size() == pb.size();
      for (std::size_t i = 0; exact && i < pa.size(); ++i) {
        exact = std::equal(pa[i].values().begin(), pa[i].values().end(), pb[i].values().begin());
      }
      v.expect(exact, "weights differ after load");
      v.expect(back.meta.model_seed == meta.model_seed, "seed changed");
      v.expect(back.meta.best_val_loss == meta.best_val_loss, "validation loss changed");
      const Tensor x = random_tensor({1, 3, 32, 32}, rng, false);
      NoGradGuard ng;
      const auto ya = model.forward(x, BatchNormMode::eval).second.probability;
      const auto yb = back.model.forward(x, BatchNormMode::eval).second.probability;
      v.expect(std::equal(ya.values().begin(), ya.values().end(), yb.values().begin()),
               "eval outputs differ after load");
      ++checkpoints;
    }
  }
  v.detail << m.samples.size() << " samples (" << label_pixels << " label pixels), "
           << checkpoints << " checkpoints bit-exact";
}

// ---- 9 ----------------------------------------------------------------------

void drive_smoke(Verdict& v) {
  const fs::path root = fresh("c9");
  const fs::path data = root / "drive";
  for (const char* d : {"images", "av", "mask"}) fs::create_directories(data / d);
  SynthConfig sc;
  sc.count = 5;
  sc.size = 128;
  sc.seed = 909;
  int n = 21;
  for (const auto& s : generate_synthetic(sc)) {
    const std::string id = std::to_string(n++) + "_training";
    write_rgb(data / "images" / (id + ".tif"), resize_bilinear(s.rgb, kDriveRows, kDriveCols));
    write_label(data / "av" / (id + ".png"), resize_nearest(*s.label, kDriveRows, kDriveCols));
    write_mask(data / "mask" / (id + "_mask.png"),
               resize_nearest(*s.fov_mask, kDriveRows, kDriveCols));
  }
  const fs::path logf = root / "cli.log";
  const std::string src = " --kind drive --data " + q(data);
  bool ok = true;
  for (const char* kind : {"artery", "vein"}) {
    ok = ok && avw(std::string("train") + src + " --vessel " + kind +
                       " --size 128 --epochs 2 --patience 1 -v 0 -o " + q(root / kind),
                   logf) == 0;
  }
  ok = ok && avw("predict" + src + " --artery " + q(root / "artery" / "model.avwn") + " --vein " +
                     q(root / "vein" / "model.avwn") + " -v 0 -o " + q(root / "pred"),
                 logf) == 0;
  ok = ok && avw("evaluate --kind drive --truth " + q(data) + " --pred " + q(root / "pred") +
                     " -v 0 -o " + q(root / "eval"),
                 logf) == 0;
  if (!ok) {
    v.expect(false, "pipeline failed: " + slurp(logf));
    return;
  }
  for (const char* kind : {"artery", "vein"}) {
    const std::string log = slurp(root / kind / "train_log.csv");
    int epochs = 0;
    std::istringstream lines(log);
    for (std::string line; std::getline(lines, line);) epochs += !line.empty() && std::isdigit(static_cast<unsigned char>(line[0]));
    v.expect(epochs >= 2, std::string(kind) + " trained " + std::to_string(epochs) + " epochs");
  }
  int images = 0;
  for (const auto& e : fs::directory_iterator(root / "pred")) {
    if (!e.is_directory()) continue;
    ++images;
    const LabelMap fused = read_label(e.path() / "fused.png");
    v.expect(fused.rows() == kDriveRows && fused.cols() == kDriveCols,
             e.path().filename().string() + " not at native resolution");
    v.expect(read_probability(e.path() / "p_artery.png").rows() == kDriveRows, "p_artery size");
  }
  v.expect(images == 5, std::to_string(images) + " predictions");
  const std::string csv = slurp(root / "eval" / "metrics.csv");
  int rows = 0, bad = 0;
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  v.expect(line == "tier,class,accuracy_mean,accuracy_std,f1_mean,f1_std,pixels,images",
           "metrics header");
  while (std::getline(lines, line)) {
    ++rows;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 8) {
      ++bad;
      continue;
    }
    for (int k = 2; k < 6; ++k) {
      const double x = std::stod(f[k]);
      bad += !(x >= 0 && x <= 1);
    }
  }
  v.expect(rows == 15 && bad == 0, "metrics.csv malformed");
  v.detail << images << " DRIVE-format images at " << kDriveCols << "x" << kDriveRows
           << ", trained at 128, metrics well-formed";
}

struct Criterion {
  int id;
  const char* name;
  std::function<void(Verdict&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  app.add_option("--only", only, "Run only these criteria (1-9)")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria = {
      {1, "gradient suite", gradient_suite},
      {2, "focal-loss oracle", focal_oracle},
      {3, "parameter counts", parameter_counts},
      {4, "desk-scale learning", desk_scale_learning},
      {5, "metrics oracle", metrics_oracle},
      {6, "fusion properties", fusion_properties},
      {7, "determinism", determinism},
      {8, "format round trips", round_trips},
      {9, "DRIVE-format smoke test", drive_smoke},
  };
  const std::set<int> wanted(only.begin(), only.end());
  int failed = 0;
  for (const auto& c : criteria) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(v);
    } catch (const std::exception& e) {
      v.expect(false, std::string("exception: ") + e.what());
    }
    const double secs = seconds_since(t0);
    std::cout << (v.passed() ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name
              << ") [" << fmt(secs, 3) << " s]: " << v.detail.str();
    for (const auto& f : v.failures) std::cout << "\n    - " << f;
    std::cout << std::endl;
    failed += !v.passed();
  }
  return failed == 0 ? 0 : 1;
}
