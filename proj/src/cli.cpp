#include "nncomp/cli.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"

#include "nncomp/accounting.hpp"
#include "nncomp/analyze.hpp"
#include "nncomp/architectures.hpp"
#include "nncomp/error.hpp"
#include "nncomp/model_io.hpp"
#include "nncomp/netforward.hpp"
#include "nncomp/pipeline.hpp"
#include "nncomp/retrieval.hpp"
#include "nncomp/synth.hpp"
#include "nncomp/tradeoff.hpp"

namespace nncomp {

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  write_file(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

bool has_magic(const std::string& path, const char (&magic)[4]) {
  std::ifstream in(path, std::ios::binary);
  char buf[4] = {};
  in.read(buf, 4);
  return in.gcount() == 4 && std::equal(buf, buf + 4, magic);
}

struct NipArgs {
  std::string stages = "A:scale,S:translation,M:rotation";
  std::vector<int> rotations{0, 90, 180, 270};
  std::vector<double> scales{1.0, 0.75, 0.5};
  int rois = 20;

  void bind(CLI::App* app) {
    app->add_option("--stages", stages, "NIP stages, innermost first, e.g. A:scale,S:translation,M:rotation")
        ->capture_default_str();
    app->add_option("--rotations", rotations, "rotation angles in degrees (multiples of 90)")
        ->delimiter(',')
        ->capture_default_str();
    app->add_option("--scales", scales, "ROI scales in (0,1]")->delimiter(',')->capture_default_str();
    app->add_option("--rois", rois, "ROIs per scale")->capture_default_str();
  }

  NipConfig config() const {
    NipConfig c;
    c.stages = parse_stages(stages);
    c.rotations = rotations;
    c.scales = scales;
    c.rois_per_scale = rois;
    validate(c);
    return c;
  }
};

std::string layer_table(const Network& net) {
  const auto acc = param_accounting(net);
  std::map<std::string, LayerStats> stats;
  for (auto& s : layer_stats(net)) stats[s.name] = s;
  std::ostringstream os;
  os << "arch: " << (net.arch_tag.empty() ? "-" : net.arch_tag) << '\n';
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-24s %-9s %12s %9s %9s %12s %12s %12s %12s %10s\n", "layer", "kind", "conv_weights",
                "conv_bias", "batchnorm", "mean", "variance", "laplace_mu", "laplace_b", "ex_kurt");
  os << buf;
  std::map<std::string, LayerParamCount> counts;
  for (const auto& c : acc.layers) counts[c.name] = c;
  for (const auto& l : net.layers) {
    const auto c = counts.count(l.name) ? counts[l.name] : LayerParamCount{l.name};
    std::string m = "-", v = "-", mu = "-", b = "-", k = "-";
    if (auto it = stats.find(l.name); it != stats.end()) {
      m = fmt("%.5g", it->second.mean);
      v = fmt("%.5g", it->second.variance);
      mu = fmt("%.5g", it->second.laplace_mu);
      b = fmt("%.5g", it->second.laplace_b);
      k = fmt("%.3f", it->second.excess_kurtosis);
    }
    std::snprintf(buf, sizeof buf, "%-24s %-9s %12lld %9lld %9lld %12s %12s %12s %12s %10s\n", l.name.c_str(),
                  std::string(to_string(l.kind)).c_str(), static_cast<long long>(c.conv_weights),
                  static_cast<long long>(c.conv_bias), static_cast<long long>(c.batchnorm), m.c_str(), v.c_str(),
                  mu.c_str(), b.c_str(), k.c_str());
    os << buf;
  }
  os << "conv total: " << acc.conv_total << "  batchnorm total: " << acc.batchnorm_total << '\n';
  return os.str();
}

std::string layer_csv(const Network& net) {
  const auto acc = param_accounting(net);
  std::map<std::string, LayerStats> stats;
  for (auto& s : layer_stats(net)) stats[s.name] = s;
  std::ostringstream os;
  os << "layer,kind,conv_weights,conv_bias,batchnorm,mean,variance,laplace_mu,laplace_b,excess_kurtosis\n";
  for (const auto& c : acc.layers) {
    const Layer* l = net.find(c.name);
    os << c.name << ',' << to_string(l->kind) << ',' << c.conv_weights << ',' << c.conv_bias << ',' << c.batchnorm;
    if (auto it = stats.find(c.name); it != stats.end())
      os << ',' << fmt("%.9g", it->second.mean) << ',' << fmt("%.9g", it->second.variance) << ','
         << fmt("%.9g", it->second.laplace_mu) << ',' << fmt("%.9g", it->second.laplace_b) << ','
         << fmt("%.9g", it->second.excess_kurtosis);
    else
      os << ",,,,,";
    os << '\n';
  }
  return os.str();
}

std::string size_table(const SizeBreakdown& s) {
  std::ostringstream os;
  os << "index payload:  " << s.index_payload << '\n'
     << "codebooks:      " << s.codebooks << '\n'
     << "huffman tables: " << s.huffman_tables << '\n'
     << "exempt:         " << s.exempt << '\n'
     << "manifest:       " << s.manifest << '\n'
     << "total:          " << s.total << " bytes (log10 " << fmt("%.4f", s.log10_total()) << ")\n";
  return os.str();
}

std::string container_table(const CompressedModel& cm) {
  std::ostringstream os;
  os << "arch: " << cm.structure.unique_layers.arch_tag << "  seed: " << cm.config.seed
     << "  coding: " << to_string(cm.config.coding);
  if (cm.config.prune_at) os << "  pruned at: " << *cm.config.prune_at;
  os << "\nlayers: " << cm.structure.expansion.size() << " (" << cm.structure.unique_layers.layers.size()
     << " stored)\n";
  char buf[200];
  std::snprintf(buf, sizeof buf, "%-24s %-9s %-7s %8s %4s %5s %12s\n", "layer", "tensor", "record", "k", "d", "bits",
                "payload");
  os << buf;
  for (const auto& r : cm.records) {
    const char* enc = r.encoding == RecordEncoding::Raw ? "raw" : r.encoding == RecordEncoding::Scalar ? "scalar" : "vector";
    const auto payload = r.encoding == RecordEncoding::Raw ? 4 * r.raw.size() : r.payload.bytes.size();
    std::snprintf(buf, sizeof buf, "%-24s %-9s %-7s %8u %4d %5d %12zu\n", r.layer.c_str(),
                  std::string(to_string(r.role)).c_str(), enc, r.k, r.d, r.bit_width, payload);
    os << buf;
  }
  os << size_table(size_report(cm));
  return os.str();
}

int domain_error(std::ostream& err, const std::exception& e) {
  err << "error: " << e.what() << '\n';
  return kExitDomain;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Weight compression toolkit for convolutional networks"};
  app.name("nncomp");
  app.require_subcommand(1);
  app.fallthrough();
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "seed for all randomness")->capture_default_str();

  // compress
  auto* compress_cmd = app.add_subcommand("compress", "quantize and entropy-code an NNW1 model into NNZ1");
  std::string c_in, c_out, c_spec, c_coding = "flc", c_prune, c_plan;
  int c_bits = 0;
  bool c_bn_quantized = false;
  compress_cmd->add_option("--in", c_in, "input NNW1 model")->required()->check(CLI::ExistingFile);
  compress_cmd->add_option("--out", c_out, "output NNZ1 container")->required();
  auto* spec_opt = compress_cmd->add_option("--spec", c_spec, "quantization spec file")->check(CLI::ExistingFile);
  compress_cmd->add_option("--bits", c_bits, "uniform scalar bits for every layer")->excludes(spec_opt);
  compress_cmd->add_flag("--bn-quantized", c_bn_quantized, "quantize BN tensors too (with --bits)");
  compress_cmd->add_option("--coding", c_coding, "flc or vlc")->check(CLI::IsMember({"flc", "vlc"}))->capture_default_str();
  compress_cmd->add_option("--prune-at", c_prune, "keep layers up to and including this one");
  compress_cmd->add_option("--plan", c_plan, "tying plan file")->check(CLI::ExistingFile);

  auto* decompress_cmd = app.add_subcommand("decompress", "decode an NNZ1 container back to NNW1");
  std::string d_in, d_out;
  decompress_cmd->add_option("--in", d_in, "input NNZ1 container")->required()->check(CLI::ExistingFile);
  decompress_cmd->add_option("--out", d_out, "output NNW1 model")->required();

  auto* inspect_cmd = app.add_subcommand("inspect", "per-layer parameter counts and weight statistics");
  std::string i_file, i_csv;
  inspect_cmd->add_option("file", i_file, "NNW1 model or NNZ1 container")->required()->check(CLI::ExistingFile);
  inspect_cmd->add_option("--csv", i_csv, "also write per-layer CSV here");

  auto* prune_cmd = app.add_subcommand("prune", "drop every layer after the named one");
  std::string p_in, p_out, p_at;
  prune_cmd->add_option("--in", p_in, "input NNW1 model")->required()->check(CLI::ExistingFile);
  prune_cmd->add_option("--at", p_at, "last layer kept")->required();
  prune_cmd->add_option("--out", p_out, "output NNW1 model")->required();

  auto* tie_cmd = app.add_subcommand("tie", "share weights across repeated blocks");
  std::string t_in, t_plan, t_out;
  tie_cmd->add_option("--in", t_in, "input NNW1 model")->required()->check(CLI::ExistingFile);
  tie_cmd->add_option("--plan", t_plan, "tying plan file")->required()->check(CLI::ExistingFile);
  tie_cmd->add_option("--out", t_out, "write the tied model as an unquantized NNZ1 container");

  auto* extract_cmd = app.add_subcommand("extract", "NIP descriptors of images at a layer");
  std::string e_in, e_layer, e_out;
  std::vector<std::string> e_images;
  int e_synthetic = 0, e_size = 32;
  NipArgs e_nip;
  extract_cmd->add_option("--in", e_in, "NNW1 model")->required()->check(CLI::ExistingFile);
  extract_cmd->add_option("--layer", e_layer, "layer whose feature maps are pooled")->required();
  extract_cmd->add_option("images", e_images, "PGM/PPM images")->check(CLI::ExistingFile);
  extract_cmd->add_option("--synthetic", e_synthetic, "use this many seeded synthetic images");
  extract_cmd->add_option("--size", e_size, "side of synthetic images")->capture_default_str();
  extract_cmd->add_option("--out", e_out, "descriptor file (default stdout)");
  e_nip.bind(extract_cmd);

  auto* evaluate_cmd = app.add_subcommand("evaluate", "mAP and 4xRecall@4 of a descriptor set");
  std::string v_desc, v_rel, v_metric = "l2";
  evaluate_cmd->add_option("--descriptors", v_desc, "descriptor file")->required()->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--relevance", v_rel, "relevance file")->required()->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--metric", v_metric, "l2 or cosine")->check(CLI::IsMember({"l2", "cosine"}))->capture_default_str();

  auto* tradeoff_cmd = app.add_subcommand("tradeoff", "size / descriptor drift grid over bit widths and cuts");
  std::string g_in, g_out, g_out_dir, g_coding = "flc", g_plan;
  std::vector<int> g_bits;
  std::vector<std::string> g_cuts;
  int g_images = 8, g_size = 16;
  bool g_bn_quantized = false;
  NipArgs g_nip;
  tradeoff_cmd->add_option("--in", g_in, "NNW1 model")->required()->check(CLI::ExistingFile);
  tradeoff_cmd->add_option("--bits", g_bits, "scalar bit widths")->required()->delimiter(',');
  tradeoff_cmd->add_option("--cuts", g_cuts, "cut layers")->required()->delimiter(',');
  tradeoff_cmd->add_option("--coding", g_coding, "flc or vlc")->check(CLI::IsMember({"flc", "vlc"}))->capture_default_str();
  tradeoff_cmd->add_flag("--bn-quantized", g_bn_quantized, "quantize BN tensors too");
  tradeoff_cmd->add_option("--plan", g_plan, "tying plan file")->check(CLI::ExistingFile);
  tradeoff_cmd->add_option("--images", g_images, "synthetic images per cell")->capture_default_str();
  tradeoff_cmd->add_option("--size", g_size, "side of synthetic images")->capture_default_str();
  tradeoff_cmd->add_option("--out", g_out, "CSV output (default stdout)");
  tradeoff_cmd->add_option("--out-dir", g_out_dir, "also write every container here");
  g_nip.bind(tradeoff_cmd);

  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic model and optionally synthetic images");
  std::string s_arch = "plain", s_out, s_plan_out, s_image_dir;
  int s_depth = 4, s_channels = 8, s_in_channels = 3, s_images = 0, s_size = 32;
  std::vector<int> s_blocks{2, 3, 10, 3};
  bool s_shape_only = false;
  synth_cmd->add_option("--arch", s_arch, "plain, residual, alexnet, resnet50 or shared-resnet")
      ->check(CLI::IsMember({"plain", "residual", "alexnet", "resnet50", "shared-resnet"}))
      ->capture_default_str();
  synth_cmd->add_option("--depth", s_depth, "conv units of the plain toy net")->capture_default_str();
  synth_cmd->add_option("--channels", s_channels, "width of toy nets")->capture_default_str();
  synth_cmd->add_option("--in-channels", s_in_channels, "input channels of toy nets")->capture_default_str();
  synth_cmd->add_option("--blocks", s_blocks, "blocks per stage of the residual toy net")->delimiter(',')->capture_default_str();
  synth_cmd->add_flag("--shape-only", s_shape_only, "write shapes without weights (full-scale nets always are)");
  synth_cmd->add_option("--out", s_out, "output NNW1 model");
  synth_cmd->add_option("--plan-out", s_plan_out, "write the tying plan of residual nets here");
  synth_cmd->add_option("--images", s_images, "number of synthetic images to write");
  synth_cmd->add_option("--image-dir", s_image_dir, "directory for synthetic images");
  synth_cmd->add_option("--size", s_size, "side of synthetic images")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*compress_cmd) {
      CompressionConfig cfg;
      if (!c_spec.empty()) cfg.spec = parse_quantization_spec(read_text(c_spec));
      else if (c_bits > 0) cfg.spec = QuantizationSpec::uniform_scalar(c_bits, !c_bn_quantized);
      cfg.coding = parse_coding(c_coding);
      if (!c_prune.empty()) cfg.prune_at = c_prune;
      if (!c_plan.empty()) cfg.tying = parse_tying_plan(read_text(c_plan));
      cfg.seed = seed;
      const auto cm = compress(load_model(c_in), cfg);
      SizeBreakdown sizes;
      write_file(c_out, serialize(cm, &sizes));
      out << size_table(sizes);
    } else if (*decompress_cmd) {
      save_model(decompress(load_compressed(d_in)), d_out);
    } else if (*inspect_cmd) {
      if (has_magic(i_file, kContainerMagic)) {
        out << container_table(load_compressed(i_file));
      } else {
        const auto net = load_model(i_file);
        out << layer_table(net);
        if (!i_csv.empty()) write_text(i_csv, layer_csv(net), out);
      }
    } else if (*prune_cmd) {
      save_model(prune_at(load_model(p_in), p_at), p_out);
    } else if (*tie_cmd) {
      const auto net = load_model(t_in);
      const auto plan = parse_tying_plan(read_text(t_plan));
      const auto counts = shared_param_count(tie_blocks(net, plan));
      out << "unique conv params:   " << counts.unique << '\n'
          << "expanded conv params: " << counts.expanded << '\n'
          << "unique bn params:     " << counts.unique_batchnorm << '\n'
          << "expanded bn params:   " << counts.expanded_batchnorm << '\n';
      if (!t_out.empty()) {
        CompressionConfig cfg;
        cfg.tying = plan;
        cfg.seed = seed;
        save_compressed(compress(net, cfg), t_out);
      }
    } else if (*extract_cmd) {
      const auto net = load_model(e_in);
      const auto nip = e_nip.config();
      std::vector<Image> images;
      for (const auto& p : e_images) images.push_back(read_pnm(p));
      if (e_synthetic > 0) {
        auto synth = synthetic_images(seed, e_synthetic, input_channels(net), e_size, e_size);
        images.insert(images.end(), synth.begin(), synth.end());
      }
      if (images.empty()) throw ArgumentError("no images given (pass image files or --synthetic N)");
      Database<double> db;
      for (std::size_t i = 0; i < images.size(); ++i) {
        validate_image(images[i]);
        const auto d = nip_descriptor(net, images[i].cast<double>(), e_layer, nip);
        if (db.vectors.size() == 0) db.vectors.resize(static_cast<Eigen::Index>(images.size()), d.values.size());
        db.vectors.row(static_cast<Eigen::Index>(i)) = d.values.transpose();
        db.ids.push_back(static_cast<Id>(i));
      }
      write_text(e_out, format_descriptors(db), out);
    } else if (*evaluate_cmd) {
      const auto db = parse_descriptors(read_text(v_desc));
      const auto rel = parse_relevance(read_text(v_rel));
      const auto scores = evaluate(make_run(db, rel, parse_metric(v_metric)));
      out << "queries " << rel.size() << '\n'
          << "mAP " << fmt("%.6f", scores.mean_ap) << '\n'
          << "4xRecall@4 " << fmt("%.6f", scores.mean_recall_at_4) << '\n';
    } else if (*tradeoff_cmd) {
      TradeoffOptions opts;
      opts.bits = g_bits;
      opts.cuts = g_cuts;
      opts.coding = parse_coding(g_coding);
      opts.bn_exempt = !g_bn_quantized;
      if (!g_plan.empty()) opts.tying = parse_tying_plan(read_text(g_plan));
      opts.seed = seed;
      opts.images = g_images;
      opts.image_size = g_size;
      opts.nip = g_nip.config();
      if (!g_out_dir.empty()) {
        std::filesystem::create_directories(g_out_dir);
        opts.out_dir = g_out_dir;
      }
      write_text(g_out, to_csv(tradeoff_grid(load_model(g_in), opts)), out);
    } else if (*synth_cmd) {
      Network net;
      std::optional<TyingPlan> plan;
      bool full_scale = true;
      if (s_arch == "alexnet") {
        net = arch::alexnet();
      } else if (s_arch == "resnet50") {
        net = arch::resnet50();
      } else if (s_arch == "shared-resnet") {
        auto r = arch::shared_resnet();
        net = std::move(r.net);
        plan = std::move(r.plan);
      } else if (s_arch == "plain") {
        net = arch::plain_toy(s_depth, s_channels, s_in_channels);
        full_scale = false;
      } else {
        std::vector<arch::ResidualStage> stages;
        for (int b : s_blocks) stages.push_back({s_channels, b});
        auto r = arch::residual_toy(stages, s_channels, s_in_channels);
        net = std::move(r.net);
        plan = std::move(r.plan);
        full_scale = false;
      }
      if (!full_scale && !s_shape_only) {
        SynthOptions so;
        so.seed = seed;
        net = synthesize_weights(net, so);
      }
      if (!s_out.empty()) save_model(net, s_out);
      if (!s_plan_out.empty()) {
        if (!plan) throw ArgumentError("architecture '" + s_arch + "' has no tying plan");
        write_text(s_plan_out, to_text(*plan), out);
      }
      if (s_images > 0) {
        if (s_image_dir.empty()) throw ArgumentError("--images needs --image-dir");
        std::filesystem::create_directories(s_image_dir);
        const int ch = full_scale ? 3 : s_in_channels;
        const auto images = synthetic_images(seed, s_images, ch, s_size, s_size);
        for (std::size_t i = 0; i < images.size(); ++i) {
          char name[32];
          std::snprintf(name, sizeof name, "img%04zu.%s", i, ch == 1 ? "pgm" : "ppm");
          write_pnm(std::filesystem::path(s_image_dir) / name, images[i]);
        }
      }
      const auto acc = param_accounting(net);
      out << s_arch << ": " << net.layers.size() << " layers, conv params " << acc.conv_total << ", bn params "
          << acc.batchnorm_total << '\n';
    }
  } catch (const Error& e) {
    return domain_error(err, e);
  } catch (const std::exception& e) {
    return domain_error(err, e);
  }
  return kExitOk;
}

}  // namespace nncomp
