#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>

#include "desnow/channel_priors.hpp"
#include "desnow/dtcwt.hpp"
#include "desnow/error.hpp"
#include "desnow/image_io.hpp"
#include "desnow/metrics.hpp"
#include "desnow/network.hpp"
#include "desnow/run_config.hpp"
#include "desnow/synth_snow.hpp"
#include "desnow/training.hpp"
#include "desnow/weights_io.hpp"
#include "desnow_cli/cli.hpp"
#include "desnow_cli/pyramid_file.hpp"

namespace desnow::cli {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::vector<std::string> png_names(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: '" + dir.string() + "'");
  std::set<std::string> names;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return char(std::tolower(c)); });
    if (e.is_regular_file() && ext == ".png") names.insert(e.path().filename().string());
  }
  return {names.begin(), names.end()};
}

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw DataError("cannot create directory '" + p.string() + "': " + ec.message());
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw DataError("cannot write '" + p.string() + "'");
  return f;
}

// Display scaling: magnitude maps divided by their peak.
Tensor normalize_peak(Tensor t) {
  const double m = max_abs(t);
  if (m > 0.0) t *= 1.0 / m;
  return t;
}

Tensor normalize_range(Tensor t) {
  const auto [lo, hi] = std::minmax_element(t.data().begin(), t.data().end());
  const double a = *lo, span = *hi - *lo;
  for (double& v : t.data()) v = span > 0.0 ? (v - a) / span : 0.0;
  return t;
}

io::Padded load_padded(const fs::path& path, std::size_t multiple, std::ostream& err) {
  io::Padded p = io::reflect_pad(io::read_png(path), multiple);
  if (p.changed())
    err << "warning: " << path.string() << " is " << p.height << "x" << p.width << "; reflect-padded to "
        << p.image.dim(1) << "x" << p.image.dim(2) << "\n";
  return p;
}

struct ConfigFlags {
  std::string preset;
  std::string file;
  std::optional<int> toy_scale;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<int> batch_size;

  void add_to(CLI::App* app, const std::string& default_preset) {
    preset = default_preset;
    app->add_option("--preset", preset, "Base settings")->check(CLI::IsMember({"desk", "paper"}))->capture_default_str();
    app->add_option("--config", file, "JSON file overriding the preset")->check(CLI::ExistingFile);
    app->add_option("--toy-scale", toy_scale, "Divisor applied to base_channels");
    app->add_option("--seed", seed, "Random seed");
  }
  void add_training(CLI::App* app) {
    app->add_option("--epochs", epochs, "Epoch count (schedule is recompressed 30/30/40)");
    app->add_option("--batch-size", batch_size, "Mini-batch size");
  }

  config::RunConfig resolve() const {
    config::RunConfig c = config::preset(preset);
    if (!file.empty()) c = config::load_json_file(c, file);
    if (toy_scale) c.net.toy_scale_factor = *toy_scale;
    if (seed) {
      c.train.seed = *seed;
      c.snow.rng_seed = *seed;
    }
    if (batch_size) c.train.batch_size = *batch_size;
    if (epochs) {
      c.train.epochs = *epochs;
      c.train.lr_schedule = train::compressed_schedule(*epochs, c.train.lr_schedule.front().lr);
    }
    c.validate();
    return c;
  }
};

// ---------------------------------------------------------------------------

struct DecomposeCmd {
  std::string image, outdir, transform = "dtcwt";
  int levels = 1;

  int run(std::ostream& out, std::ostream& err) const {
    if (levels < 1 || levels > 8) throw ConfigError("--levels must be in 1..8");
    const io::Padded src = load_padded(image, std::size_t{1} << levels, err);
    ensure_dir(outdir);
    const fs::path dir(outdir);
    std::ofstream csv = open_out(dir / "energies.csv");
    csv << "level,subband,energy\n";
    StoredPyramid stored{{}, src.height, src.width};
    int pngs = 0;
    if (transform == "dtcwt") {
      wavelet::Pyramid p = wavelet::dtcwt_forward(src.image, levels);
      io::write_png(dir / "lowpass.png", normalize_range(p.lowpass));
      ++pngs;
      const auto e = wavelet::subband_energies(p);
      for (int l = 0; l < levels; ++l)
        for (std::size_t k = 0; k < 6; ++k) {
          const auto& s = p.highpass[l][k];
          const std::string tag = std::string(net::branch_name(k));
          io::write_png(dir / ("level" + std::to_string(l + 1) + "_" + tag + ".png"),
                        normalize_peak(wavelet::magnitude(s)));
          ++pngs;
          csv << l + 1 << "," << wavelet::name(s.direction) << "," << fmt(e[l * 6 + k]) << "\n";
        }
      stored.pyramid = std::move(p);
    } else {
      wavelet::DwtPyramid p = wavelet::dwt2(src.image, levels);
      io::write_png(dir / "ll.png", normalize_range(p.ll));
      ++pngs;
      const auto e = wavelet::subband_energies(p);
      const char* names[3] = {"lh", "hl", "hh"};
      for (int l = 0; l < levels; ++l) {
        const Tensor* bands[3] = {&p.detail[l].lh, &p.detail[l].hl, &p.detail[l].hh};
        for (int k = 0; k < 3; ++k) {
          Tensor mag = *bands[k];
          for (double& v : mag.data()) v = std::abs(v);
          io::write_png(dir / ("level" + std::to_string(l + 1) + "_" + names[k] + ".png"), normalize_peak(mag));
          ++pngs;
          csv << l + 1 << "," << names[k] << "," << fmt(e[l * 3 + k]) << "\n";
        }
      }
      stored.pyramid = std::move(p);
    }
    save_pyramid(dir / "pyramid.wdsn", stored);
    out << "wrote " << pngs << " subband images, energies.csv and pyramid.wdsn to " << outdir << "\n";
    return kOk;
  }
};

struct ReconstructCmd {
  std::string pyramid, png, raw;

  int run(std::ostream& out, std::ostream&) const {
    if (png.empty() && raw.empty()) throw ConfigError("reconstruct needs --out and/or --raw");
    const Tensor img = reconstruct(load_pyramid(pyramid));
    if (!png.empty()) io::write_png(png, img);
    if (!raw.empty()) io::save_tensors(raw, {{"image", img}});
    out << "reconstructed " << to_string(img.shape()) << "\n";
    return kOk;
  }
};

struct PriorsCmd {
  std::string image, outdir, clean;
  int patch = 15;

  int run(std::ostream& out, std::ostream&) const {
    const priors::PatchSpec spec{patch};
    spec.validate();
    const Tensor img = io::read_png(image);
    ensure_dir(outdir);
    const fs::path dir(outdir);
    io::write_png(dir / "dark.png", priors::channel_prior_map(img, priors::PriorKind::kDark, spec).values);
    io::write_png(dir / "contradict.png", priors::channel_prior_map(img, priors::PriorKind::kContradict, spec).values);
    io::write_png(dir / "bright.png", priors::channel_prior_map(img, priors::PriorKind::kBright, spec).values);
    const auto as_json = [](const priors::ChannelStats& s) {
      return nlohmann::json{{"mean_dark", s.dark}, {"mean_contradict", s.contradict}, {"mean_bright", s.bright}};
    };
    nlohmann::json doc{{"patch", patch}, {"image", as_json(priors::channel_stats(img, spec))}};
    if (!clean.empty()) {
      const Tensor ref = io::read_png(clean);
      const auto r = priors::channel_contrast_report(img, ref, spec);
      doc["clean"] = as_json(r.clean);
      doc["contradict_contrast"] = r.snowy.contradict - r.clean.contradict;
    }
    open_out(dir / "stats.json") << doc.dump(2) << "\n";
    out << doc.dump(2) << "\n";
    return kOk;
  }
};

struct SynthCmd {
  ConfigFlags cfg;
  std::string outdir, clean_dir;
  int count = 8;
  int size = 64;

  int run(std::ostream& out, std::ostream&) const {
    const config::RunConfig c = cfg.resolve();
    if (count < 1) throw ConfigError("--count must be >= 1");
    if (size < 4) throw ConfigError("--size must be >= 4");
    const fs::path dir(outdir);
    ensure_dir(dir / "degraded");
    ensure_dir(dir / "clean");
    std::vector<std::string> sources;
    if (!clean_dir.empty()) {
      sources = png_names(clean_dir);
      if (sources.empty()) throw DataError("no PNG files in '" + clean_dir + "'");
    }
    for (int i = 0; i < count; ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "%04d.png", i);
      const Tensor clean = sources.empty()
                               ? data::procedural_scene(std::size_t(size), std::size_t(size), c.snow.rng_seed * 7919 + std::uint64_t(i))
                               : io::read_png(fs::path(clean_dir) / sources[std::size_t(i) % sources.size()]);
      data::SnowParams sp = c.snow;
      sp.rng_seed = c.snow.rng_seed * 1000003 + std::uint64_t(i);
      io::write_png(dir / "clean" / name, clean);
      io::write_png(dir / "degraded" / name, data::synth_snow(clean, sp));
    }
    out << "wrote " << count << " pairs to " << outdir << "\n";
    return kOk;
  }
};

struct InitCmd {
  ConfigFlags cfg;
  std::string out_path;
  bool zero_final = false;

  int run(std::ostream& out, std::ostream&) const {
    const config::RunConfig c = cfg.resolve();
    net::ModelWeights w = net::init_weights(c.net, c.train.seed);
    if (zero_final) net::zero_final_layer(w);
    io::save_model(out_path, w);
    out << "initialized " << w.parameter_count() << " parameters (C=" << c.net.channels() << ") -> " << out_path
        << "\n";
    return kOk;
  }
};

struct TrainCmd {
  ConfigFlags cfg;
  std::string degraded, clean, outdir, init;
  bool quiet = false;

  int run(std::ostream& out, std::ostream&) const {
    const config::RunConfig c = cfg.resolve();
    const train::Dataset data = train::load_pairs(degraded, clean);
    net::ModelWeights w = init.empty() ? net::init_weights(c.net, c.train.seed) : io::load_model(init);
    if (!init.empty() && !(w.config() == c.net))
      throw ConfigError("--init weights were built for a different network config");
    ensure_dir(outdir);
    const fs::path dir(outdir);
    std::ofstream csv = open_out(dir / "loss.csv");
    csv << "epoch,step,loss,lr\n";
    open_out(dir / "config.json") << config::to_json(c).dump(2) << "\n";
    train::TrainHooks hooks;
    hooks.on_epoch = [&](const train::EpochRecord& r) {
      csv << r.epoch << "," << r.step << "," << fmt(r.loss) << "," << fmt(r.lr) << "\n";
      csv.flush();
      if (!quiet) out << "epoch " << r.epoch << " loss " << fmt(r.loss) << " lr " << fmt(r.lr) << "\n";
    };
    hooks.checkpoint = [&](int epoch, const net::ModelWeights& m) {
      char name[48];
      std::snprintf(name, sizeof name, "checkpoint_e%04d.wdsn", epoch);
      io::save_model(dir / name, m);
    };
    train::train(w, data, c.train, hooks);
    io::save_model(dir / "weights.wdsn", w);
    out << "trained on " << data.size() << " pairs; weights -> " << (dir / "weights.wdsn").string() << "\n";
    return kOk;
  }
};

struct InferCmd {
  std::string weights, input, outdir;

  int run(std::ostream& out, std::ostream& err) const {
    const net::ModelWeights w = io::load_model(weights);
    ensure_dir(outdir);
    int failed = 0, done = 0;
    for (const auto& name : png_names(input)) {
      try {
        const io::Padded p = load_padded(fs::path(input) / name, 4, err);
        const Tensor y = net::model_forward(p.image, w);
        io::write_png(fs::path(outdir) / name, io::crop(y, p.height, p.width));
        ++done;
      } catch (const std::exception& e) {
        err << "error: " << name << ": " << e.what() << "\n";
        ++failed;
      }
    }
    out << "restored " << done << " image(s), " << failed << " failed\n";
    return failed ? kBadData : kOk;
  }
};

struct EvalCmd {
  std::string restored, reference, csv_path;

  int run(std::ostream& out, std::ostream& err) const {
    std::ofstream file;
    if (!csv_path.empty()) file = open_out(csv_path);
    std::ostream& csv = csv_path.empty() ? out : file;
    csv << "image,psnr,ssim\n";
    const auto ref_names = png_names(reference);
    const std::set<std::string> refs(ref_names.begin(), ref_names.end());
    int failed = 0, n = 0;
    double psnr_sum = 0.0, ssim_sum = 0.0;
    for (const auto& name : png_names(restored)) {
      try {
        if (!refs.count(name)) throw DataError("no reference image with this name");
        const auto q = metrics::evaluate(io::read_png(fs::path(restored) / name),
                                         io::read_png(fs::path(reference) / name));
        csv << name << "," << fmt(q.psnr_db) << "," << fmt(q.ssim) << "\n";
        psnr_sum += q.psnr_db;
        ssim_sum += q.ssim;
        ++n;
      } catch (const std::exception& e) {
        err << "error: " << name << ": " << e.what() << "\n";
        ++failed;
      }
    }
    if (n > 0) csv << "mean," << fmt(psnr_sum / n) << "," << fmt(ssim_sum / n) << "\n";
    return failed ? kBadData : kOk;
  }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Wavelet-enhanced image desnowing toolkit", "desnow"};
  app.require_subcommand(1);

  DecomposeCmd decompose;
  auto* sc = app.add_subcommand("decompose", "Wavelet subband images and energies");
  sc->add_option("image", decompose.image)->required()->check(CLI::ExistingFile);
  sc->add_option("--out", decompose.outdir)->required();
  sc->add_option("--levels", decompose.levels)->capture_default_str();
  sc->add_option("--transform", decompose.transform)->check(CLI::IsMember({"dtcwt", "dwt"}))->capture_default_str();

  ReconstructCmd reconstruct;
  auto* rc = app.add_subcommand("reconstruct", "Invert a stored pyramid");
  rc->add_option("pyramid", reconstruct.pyramid)->required()->check(CLI::ExistingFile);
  rc->add_option("--out", reconstruct.png, "PNG output");
  rc->add_option("--raw", reconstruct.raw, "Lossless tensor output");

  PriorsCmd pri;
  auto* pc = app.add_subcommand("priors", "Dark, contradict and bright channel maps");
  pc->add_option("image", pri.image)->required();
  pc->add_option("--out", pri.outdir)->required();
  pc->add_option("--patch", pri.patch)->capture_default_str();
  pc->add_option("--clean", pri.clean, "Clean counterpart for a contrast report");

  SynthCmd synth;
  auto* syc = app.add_subcommand("synth", "Generate degraded/clean pairs");
  synth.cfg.add_to(syc, "desk");
  syc->add_option("--out", synth.outdir)->required();
  syc->add_option("--count", synth.count)->capture_default_str();
  syc->add_option("--size", synth.size, "Edge of procedural scenes")->capture_default_str();
  syc->add_option("--clean-dir", synth.clean_dir, "Use these clean images instead of procedural scenes");

  InitCmd init;
  auto* ic = app.add_subcommand("init", "Write freshly initialized weights");
  init.cfg.add_to(ic, "desk");
  ic->add_option("--out", init.out_path)->required();
  ic->add_flag("--zero-final", init.zero_final, "Zero the terminal conv (identity model)");

  TrainCmd trn;
  auto* tc = app.add_subcommand("train", "Train on paired directories");
  trn.cfg.add_to(tc, "desk");
  trn.cfg.add_training(tc);
  tc->add_option("--degraded", trn.degraded)->required();
  tc->add_option("--clean", trn.clean)->required();
  tc->add_option("--out", trn.outdir)->required();
  tc->add_option("--init", trn.init, "Start from these weights")->check(CLI::ExistingFile);
  tc->add_flag("--quiet", trn.quiet);

  InferCmd infer;
  auto* inc = app.add_subcommand("infer", "Restore a directory of images");
  inc->add_option("--weights", infer.weights)->required()->check(CLI::ExistingFile);
  inc->add_option("--input", infer.input)->required();
  inc->add_option("--out", infer.outdir)->required();

  EvalCmd eval;
  auto* ec = app.add_subcommand("eval", "PSNR/SSIM of paired directories");
  ec->add_option("--restored", eval.restored)->required();
  ec->add_option("--reference", eval.reference)->required();
  ec->add_option("--out", eval.csv_path, "CSV file (default stdout)");

  std::string show_preset = "paper";
  auto* cc = app.add_subcommand("config", "Configuration helpers");
  cc->require_subcommand(1);
  auto* show = cc->add_subcommand("show-defaults", "Print every setting with its default");
  show->add_option("--preset", show_preset)->check(CLI::IsMember({"desk", "paper"}))->capture_default_str();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kBadInvocation;
  }

  try {
    if (*sc) return decompose.run(out, err);
    if (*rc) return reconstruct.run(out, err);
    if (*pc) return pri.run(out, err);
    if (*syc) return synth.run(out, err);
    if (*ic) return init.run(out, err);
    if (*tc) return trn.run(out, err);
    if (*inc) return infer.run(out, err);
    if (*ec) return eval.run(out, err);
    if (*show) {
      out << config::to_json(config::preset(show_preset)).dump(2) << "\n";
      return kOk;
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kBadInvocation;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kBadData;
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << "\n";
    return kBadData;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kBadInvocation;
}

}  // namespace desnow::cli
