#include "nncomp/tradeoff.hpp"

#include <cstdio>

#include "nncomp/error.hpp"
#include "nncomp/random.hpp"
#include "nncomp/synth.hpp"

namespace nncomp {

std::vector<TradeoffRow> tradeoff_grid(const Network& net, const TradeoffOptions& opts) {
  if (opts.bits.empty() || opts.cuts.empty()) throw ArgumentError("trade-off grid needs bit widths and cut layers");
  for (const auto& cut : opts.cuts)
    if (!net.find(cut)) throw ArgumentError("unknown cut layer '" + cut + "'");
  validate(opts.nip);

  std::vector<FeatureMaps<double>> images;
  for (const auto& img : synthetic_images(derive_seed(opts.seed, "tradeoff/images"), opts.images, input_channels(net),
                                          opts.image_size, opts.image_size))
    images.push_back(img.cast<double>());

  std::vector<TradeoffRow> rows;
  for (const auto& cut : opts.cuts) {
    std::vector<Descriptor<double>> reference;
    for (const auto& img : images) reference.push_back(nip_descriptor(net, img, cut, opts.nip));

    for (int bits : opts.bits) {
      CompressionConfig cfg;
      cfg.spec = QuantizationSpec::uniform_scalar(bits, opts.bn_exempt);
      cfg.coding = opts.coding;
      cfg.prune_at = cut;
      cfg.tying = opts.tying;
      cfg.seed = opts.seed;
      const auto cm = compress(net, cfg);
      SizeBreakdown sizes;
      const auto bytes = serialize(cm, &sizes);
      if (opts.out_dir)
        write_file(*opts.out_dir / ("b" + std::to_string(bits) + "_" + cut + ".nnz"), bytes);
      const auto restored = decompress(cm);

      TradeoffRow row{bits, cut, sizes.total, sizes.log10_total(), 0.0, 0.0};
      for (std::size_t i = 0; i < images.size(); ++i) {
        const auto d = nip_descriptor(restored, images[i], cut, opts.nip);
        row.mean_cosine += cosine(reference[i], d);
        row.mean_l2_gap += (reference[i].values - d.values).norm();
      }
      row.mean_cosine /= static_cast<double>(images.size());
      row.mean_l2_gap /= static_cast<double>(images.size());
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string to_csv(const std::vector<TradeoffRow>& rows) {
  std::string out = "bits,cut,bytes,log10_bytes,mean_cosine,mean_l2_gap\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%s,%llu,%.6f,%.9f,%.9f\n", r.bits, r.cut.c_str(),
                  static_cast<unsigned long long>(r.bytes), r.log10_bytes, r.mean_cosine, r.mean_l2_gap);
    out += buf;
  }
  return out;
}

}  // namespace nncomp
