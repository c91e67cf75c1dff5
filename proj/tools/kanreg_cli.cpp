#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include <CLI11.hpp>

#include "kanreg/diffcore.hpp"
#include "kanreg/io.hpp"
#include "kanreg/metrics.hpp"
#include "kanreg/registration.hpp"
#include "kanreg/synthetic.hpp"

namespace fs = std::filesystem;
using namespace kanreg;

namespace {

Mask load_or_full_mask(const Manifest& m, const std::array<int, 3>& dims) {
  return m.mask_path.empty() ? Mask::full(dims) : read_mask(m.mask_path);
}

SeedMetrics metrics_for_run(const Manifest& m, const RegistrationResult& run,
                            const Volume& fixed, const Mask& mask) {
  SeedMetrics sm;
  sm.seed = run.seed;
  sm.final_total = run.history.empty() ? 0.0 : run.history.back().total;
  sm.seconds = run.seconds;
  sm.njd_pct = njd(run.field, fixed.dims, &mask);
  if (!m.landmarks_fixed.empty() && !m.landmarks_moving.empty()) {
    TreResult t = tre(read_landmarks(m.landmarks_fixed),
                      read_landmarks(m.landmarks_moving), run.model, fixed.dims,
                      fixed.spacing);
    sm.tre_mean = t.mean;
    sm.tre_std = t.stddev;
  }
  if (!m.labels_fixed.empty() && !m.labels_moving.empty()) {
    LabelVolume lf = read_labels(m.labels_fixed);
    LabelVolume lm = read_labels(m.labels_moving);
    Volume lm_vol;
    lm_vol.dims = lm.dims;
    lm_vol.spacing = lm.spacing;
    lm_vol.data.assign(lm.labels.begin(), lm.labels.end());
    Volume warped = warp_dense(lm_vol, run.model, Interp::Nearest);
    LabelVolume wl;
    wl.dims = lf.dims;
    wl.spacing = lf.spacing;
    wl.labels.resize(warped.data.size());
    for (std::size_t i = 0; i < warped.data.size(); ++i)
      wl.labels[i] = static_cast<int>(std::lround(warped.data[i]));
    sm.dice_mean = dice(wl, lf).mean;
    sm.hd95_mm = hd95_mean(wl, lf);
  }
  return sm;
}

int cmd_register(const std::string& manifest_path) {
  Manifest m = read_manifest(manifest_path);
  Volume fixed = read_volume(m.fixed_path);
  Volume moving = read_volume(m.moving_path);
  Mask mask = load_or_full_mask(m, fixed.dims);
  fs::create_directories(m.output_dir);

  MultiSeedReport report = run_seeds(fixed, moving, mask, m.config, m.seeds);
  std::vector<SeedMetrics> rows;
  bool any_fail = false;
  for (const auto& run : report.runs) {
    std::string tag = "seed" + std::to_string(run.seed);
    if (!run.ok) {
      any_fail = true;
      std::cerr << "run " << tag << " failed: " << run.error << '\n';
      continue;
    }
    fs::path dir = m.output_dir;
    write_history_csv((dir / (tag + "_history.csv")).string(), run.history);
    save_model(run.model, (dir / (tag + "_model.kanr")).string());
    write_field((dir / (tag + "_field.mhd")).string(), run.field, fixed.dims,
                fixed.spacing);
    Volume warped = warp_dense(moving, run.model, Interp::Trilinear);
    write_volume((dir / (tag + "_warped.mhd")).string(), warped);
    rows.push_back(metrics_for_run(m, run, fixed, mask));
    std::cout << tag << ": total " << rows.back().final_total << ", njd "
              << rows.back().njd_pct << "%, " << run.seconds << " s\n";
  }
  if (!rows.empty()) {
    write_metrics_csv((fs::path(m.output_dir) / "metrics.csv").string(), rows);
    write_metrics_json((fs::path(m.output_dir) / "metrics.json").string(), rows);
  }
  return any_fail ? 1 : 0;
}

int cmd_evaluate(const std::string& manifest_path, const std::string& model_path) {
  Manifest m = read_manifest(manifest_path);
  Volume fixed = read_volume(m.fixed_path);
  Mask mask = load_or_full_mask(m, fixed.dims);
  KanModel model = load_model(model_path);

  RegistrationResult run;
  run.model = model;
  run.field = dense_displacement_field(model, fixed.dims);
  SeedMetrics sm = metrics_for_run(m, run, fixed, mask);
  std::cout << "njd_pct " << sm.njd_pct << '\n';
  if (sm.tre_mean > 0 || !m.landmarks_fixed.empty())
    std::cout << "tre_mean_mm " << sm.tre_mean << "\ntre_std_mm " << sm.tre_std << '\n';
  if (sm.dice_mean) std::cout << "dice_mean " << *sm.dice_mean << '\n';
  if (sm.hd95_mm) std::cout << "hd95_mm " << *sm.hd95_mm << '\n';
  return 0;
}

int cmd_warp(const std::string& model_path, const std::string& input_path,
             const std::string& output_path, const std::string& interp) {
  KanModel model = load_model(model_path);
  Volume input = read_volume(input_path);
  Interp mode = interp == "nearest" ? Interp::Nearest : Interp::Trilinear;
  Volume warped = warp_dense(input, model, mode);
  write_volume(output_path, warped,
               mode == Interp::Nearest ? "MET_SHORT" : "MET_FLOAT");
  return 0;
}

int cmd_sweep(const std::string& manifest_path, const std::string& param,
              const std::vector<double>& values, const std::string& out_csv) {
  Manifest m = read_manifest(manifest_path);
  Volume fixed = read_volume(m.fixed_path);
  Volume moving = read_volume(m.moving_path);
  Mask mask = load_or_full_mask(m, fixed.dims);

  std::ofstream out(out_csv);
  if (!out) throw std::runtime_error("cannot write " + out_csv);
  out << "param,value,seed,final_total,tre_mean_mm,njd_pct,seconds\n";
  out.precision(10);

  for (double value : values) {
    RegistrationConfig cfg = m.config;
    if (param == "D") cfg.basis.max_degree = static_cast<int>(value);
    else if (param == "k") cfg.basis.sample_count = static_cast<int>(value);
    else if (param == "K") cfg.basis.sample_max = static_cast<int>(value);
    else if (param == "lambda") cfg.weights.lambda = value;
    else if (param == "gamma") cfg.weights.gamma = value;
    else throw std::runtime_error("unknown sweep parameter: " + param);

    MultiSeedReport report = run_seeds(fixed, moving, mask, cfg, m.seeds);
    for (const auto& run : report.runs) {
      if (!run.ok) {
        std::cerr << "sweep " << param << "=" << value << " seed " << run.seed
                  << " failed: " << run.error << '\n';
        continue;
      }
      SeedMetrics sm = metrics_for_run(m, run, fixed, mask);
      out << param << ',' << value << ',' << run.seed << ',' << sm.final_total
          << ',' << sm.tre_mean << ',' << sm.njd_pct << ',' << sm.seconds << '\n';
      std::cout << param << "=" << value << " seed " << run.seed << ": total "
                << sm.final_total << ", tre " << sm.tre_mean << " mm\n";
    }
  }
  return 0;
}

int cmd_selfcheck() {
  int failures = 0;
  auto check = [&](const char* name, bool ok) {
    std::cout << (ok ? "pass" : "FAIL") << "  " << name << '\n';
    if (!ok) ++failures;
  };

  // Chebyshev closed form vs three-term recurrence
  {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    DegreeSet full = full_degree_set(20);
    double worst = 0.0;
    for (int t = 0; t < 200; ++t) {
      double x = uni(rng);
      auto vals = eval_basis(x, full);
      double tm2 = 1.0, tm1 = x;
      worst = std::max({worst, std::abs(vals[0] - 1.0), std::abs(vals[1] - x)});
      for (int d = 2; d <= 20; ++d) {
        double td = 2 * x * tm1 - tm2;
        worst = std::max(worst, std::abs(vals[d] - td));
        tm2 = tm1;
        tm1 = td;
      }
    }
    check("chebyshev recurrence identity", worst < 1e-9);
  }

  // network gradient vs central differences on a random small model
  {
    std::mt19937_64 rng(11);
    BasisConfig basis;
    basis.max_degree = 6;
    KanModel model = init_model(basis, {3, 5, 3}, rng);
    std::uniform_real_distribution<double> uni(-0.5, 0.5);
    for (auto& l : model.layers) {
      for (auto& c : l.coeffs)
        c = Mat::NullaryExpr(c.rows(), c.cols(), [&] { return uni(rng); });
      l.skip = Mat::NullaryExpr(l.skip.rows(), l.skip.cols(), [&] { return uni(rng); });
    }
    Mat coords = Mat::NullaryExpr(16, 3, [&] { return uni(rng); });

    std::vector<Mat*> slots;
    for (auto& l : model.layers) {
      for (auto& c : l.coeffs) slots.push_back(&c);
      slots.push_back(&l.skip);
    }
    int total = 0;
    for (Mat* s : slots) total += int(s->size());

    auto pack = [&](const Vec& p) {
      int off = 0;
      for (Mat* s : slots)
        for (int i = 0; i < s->size(); ++i) s->data()[i] = p[off++];
    };
    auto value = [&](const Vec& p) {
      pack(p);
      Mat u = model_forward(model, coords);
      return u.array().square().sum();
    };
    auto analytic = [&](const Vec& p) {
      pack(p);
      Tape tape;
      std::vector<Var> vars;
      std::vector<LayerParamsT<Var>> lp;
      for (auto& l : model.layers) {
        LayerParamsT<Var> q;
        q.degrees = &l.degrees;
        for (auto& c : l.coeffs) {
          vars.push_back(tape.leaf(c));
          q.coeffs.push_back(vars.back());
        }
        vars.push_back(tape.leaf(l.skip));
        q.skip = vars.back();
        lp.push_back(std::move(q));
      }
      Var x = tape.constant(coords);
      Var u = model_forward(lp, x);
      Var loss = tape.sum(tape.mul(u, u));
      tape.backward(loss);
      Vec g(total);
      int off = 0;
      for (const Var& v : vars) {
        const Mat& adj = tape.adjoint(v);
        for (int i = 0; i < adj.size(); ++i) g[off++] = adj.data()[i];
      }
      return g;
    };

    Vec p0(total);
    {
      int off = 0;
      for (Mat* s : slots)
        for (int i = 0; i < s->size(); ++i) p0[off++] = s->data()[i];
    }
    double err = grad_check(value, analytic, p0, 1e-5);
    check("network gradient vs finite differences", err < 1e-5);
  }

  // dual-number spatial Jacobian vs finite differences
  {
    std::mt19937_64 rng(13);
    BasisConfig basis;
    basis.max_degree = 8;
    KanModel model = init_model(basis, {3, 8, 3}, rng);
    std::uniform_real_distribution<double> uni(-0.3, 0.3);
    for (auto& l : model.layers) {
      for (auto& c : l.coeffs)
        c = Mat::NullaryExpr(c.rows(), c.cols(), [&] { return uni(rng); });
    }
    Mat coords = Mat::NullaryExpr(8, 3, [&] { return uni(rng); });
    auto jacs = spatial_jacobian(model, coords);
    double worst = 0.0;
    const double h = 1e-6;
    for (int r = 0; r < coords.rows(); ++r)
      for (int k = 0; k < 3; ++k) {
        Mat cp = coords.row(r), cm = coords.row(r);
        cp(0, k) += h;
        cm(0, k) -= h;
        Mat up = model_forward(model, cp);
        Mat um = model_forward(model, cm);
        for (int i = 0; i < 3; ++i) {
          double fd = (up(0, i) - um(0, i)) / (2 * h);
          worst = std::max(worst, std::abs(jacs[r](i, k) - fd));
        }
      }
    check("spatial jacobian vs finite differences", worst < 1e-6);
  }

  return failures == 0 ? 0 : 1;
}

int cmd_synth(const std::string& out_dir, std::uint64_t seed) {
  SyntheticConfig cfg;
  SyntheticCase sc = make_synthetic_case(cfg, seed);
  fs::create_directories(out_dir);
  fs::path dir = out_dir;
  write_volume((dir / "fixed.mhd").string(), sc.fixed, "MET_DOUBLE");
  write_volume((dir / "moving.mhd").string(), sc.moving, "MET_DOUBLE");
  Volume mask_vol;
  mask_vol.dims = sc.mask.dims;
  mask_vol.data.assign(sc.mask.data.begin(), sc.mask.data.end());
  write_volume((dir / "mask.mhd").string(), mask_vol, "MET_UCHAR");
  write_field((dir / "gt_field.mhd").string(), sc.gt_field, sc.fixed.dims,
              sc.fixed.spacing);
  write_landmarks((dir / "landmarks_fixed.txt").string(), sc.landmarks_fixed);
  write_landmarks((dir / "landmarks_moving.txt").string(), sc.landmarks_moving);
  std::cout << "synthetic case written to " << out_dir << " (max disp "
            << sc.max_displacement_vox << " vox, mean " << sc.mean_displacement_vox
            << " vox)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Instance-specific deformable registration with Chebyshev KAN fields"};
  app.require_subcommand(1);

  std::string manifest, model_path, input_path, output_path;
  std::string interp = "trilinear", param, out_csv = "sweep.csv", out_dir = "synthetic";
  std::vector<double> values;
  std::uint64_t seed = 0;

  auto* reg = app.add_subcommand("register", "Optimize a deformation per manifest");
  reg->add_option("manifest", manifest, "JSON manifest path")->required();

  auto* ev = app.add_subcommand("evaluate", "Metrics for a saved model");
  ev->add_option("manifest", manifest)->required();
  ev->add_option("--model", model_path)->required();

  auto* wp = app.add_subcommand("warp", "Resample a volume through a saved model");
  wp->add_option("--model", model_path)->required();
  wp->add_option("--input", input_path)->required();
  wp->add_option("--output", output_path)->required();
  wp->add_option("--interp", interp)->check(CLI::IsMember({"trilinear", "nearest"}));

  auto* sw = app.add_subcommand("sweep", "Re-run registration over parameter values");
  sw->add_option("manifest", manifest)->required();
  sw->add_option("--param", param, "D, k, K, lambda or gamma")->required();
  sw->add_option("--values", values)->required();
  sw->add_option("--out", out_csv);

  auto* sc = app.add_subcommand("selfcheck", "Gradient and identity checks");
  (void)sc;

  auto* sy = app.add_subcommand("synth", "Generate a synthetic test case");
  sy->add_option("--out", out_dir);
  sy->add_option("--seed", seed);

  CLI11_PARSE(app, argc, argv);

  try {
    if (reg->parsed()) return cmd_register(manifest);
    if (ev->parsed()) return cmd_evaluate(manifest, model_path);
    if (wp->parsed()) return cmd_warp(model_path, input_path, output_path, interp);
    if (sw->parsed()) return cmd_sweep(manifest, param, values, out_csv);
    if (sc->parsed()) return cmd_selfcheck();
    if (sy->parsed()) return cmd_synth(out_dir, seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
