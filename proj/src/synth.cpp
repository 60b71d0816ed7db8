#include "nncomp/synth.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <string>

#include "nncomp/error.hpp"
#include "nncomp/random.hpp"

namespace nncomp {

Image synthetic_image(std::uint64_t seed, int channels, int height, int width) {
  if (channels < 1 || height < 1 || width < 1) throw ShapeError("image dims must be positive");
  Rng rng(seed);
  Image img(channels, height, width);
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (int c = 0; c < channels; ++c) {
    double a[4], u[4], v[4], phi[4];
    for (int j = 0; j < 4; ++j) {
      a[j] = rng.uniform(0.05, 0.2);
      u[j] = rng.uniform(-3.0, 3.0);
      v[j] = rng.uniform(-3.0, 3.0);
      phi[j] = rng.uniform(0.0, two_pi);
    }
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        double p = 0.5;
        for (int j = 0; j < 4; ++j)
          p += a[j] * std::sin(two_pi * (u[j] * x / width + v[j] * y / height) + phi[j]);
        p += rng.uniform(-0.05, 0.05);
        img.at(c, y, x) = static_cast<float>(std::clamp(p, 0.0, 1.0));
      }
    }
  }
  return img;
}

std::vector<Image> synthetic_images(std::uint64_t seed, int count, int channels, int height, int width) {
  std::vector<Image> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int i = 0; i < count; ++i)
    out.push_back(synthetic_image(derive_seed(seed, "image/" + std::to_string(i)), channels, height, width));
  return out;
}

Network synthesize_weights(const Network& shape_only, const SynthOptions& opts) {
  validate(shape_only);
  Network net = shape_only;
  for (auto& l : net.layers) {
    for (auto& [role, t] : l.tensors) {
      Rng rng(derive_seed(opts.seed, l.name + "/" + std::string(to_string(role))));
      t.data.resize(static_cast<std::size_t>(t.size()));
      switch (role) {
        case TensorRole::ConvWeight: {
          const double fan_in = static_cast<double>(t.shape[1] * t.shape[2] * t.shape[3]);
          const double b = 1.0 / std::sqrt(fan_in);
          for (auto& v : t.data) v = static_cast<float>(rng.laplace(0.0, b));
          break;
        }
        case TensorRole::ConvBias:
          for (auto& v : t.data) v = static_cast<float>(rng.laplace(0.0, 0.02));
          break;
        case TensorRole::BnScale:
          for (auto& v : t.data) v = static_cast<float>(rng.uniform(0.5, 1.5));
          break;
        case TensorRole::BnBias:
          for (auto& v : t.data) v = static_cast<float>(rng.uniform(-0.25, 0.25));
          break;
        case TensorRole::BnMean: std::fill(t.data.begin(), t.data.end(), 0.0F); break;
        case TensorRole::BnVar: std::fill(t.data.begin(), t.data.end(), 1.0F); break;
      }
    }
  }

  bool has_bn = false;
  for (const auto& l : net.layers) has_bn = has_bn || l.kind == LayerKind::BatchNorm;
  if (!has_bn) return net;

  const auto images = synthetic_images(derive_seed(opts.seed, "calibration"), opts.calibration_images,
                                       input_channels(net), opts.calibration_size, opts.calibration_size);
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    Layer& bn = net.layers[i];
    if (bn.kind != LayerKind::BatchNorm) continue;
    const auto channels = bn.find(TensorRole::BnMean)->size();
    Eigen::ArrayXd sum = Eigen::ArrayXd::Zero(channels);
    Eigen::ArrayXd sq = Eigen::ArrayXd::Zero(channels);
    double n = 0.0;
    for (const auto& img : images) {
      FeatureMaps<double> x = img.cast<double>();
      if (!bn.input.empty() && bn.input != kNetworkInput) x = forward(net, x, bn.input);
      else if (bn.input.empty() && i > 0) x = forward(net, x, net.layers[i - 1].name);
      if (x.channels() != channels) throw ShapeError("layer '" + bn.name + "': channel count mismatch");
      sum += x.maps.rowwise().sum().array();
      sq += x.maps.array().square().rowwise().sum();
      n += static_cast<double>(x.maps.cols());
    }
    const Eigen::ArrayXd mean = sum / n;
    const Eigen::ArrayXd var = (sq / n - mean.square()).max(1e-6);
    auto& m = bn.find(TensorRole::BnMean)->data;
    auto& v = bn.find(TensorRole::BnVar)->data;
    for (Eigen::Index c = 0; c < channels; ++c) {
      m[static_cast<std::size_t>(c)] = static_cast<float>(mean(c));
      v[static_cast<std::size_t>(c)] = static_cast<float>(var(c));
    }
  }
  return net;
}

namespace {

std::string next_token(std::istream& in) {
  std::string tok;
  for (;;) {
    int ch = in.peek();
    if (ch == EOF) break;
    if (ch == '#') {
      std::string skip;
      std::getline(in, skip);
      if (!tok.empty()) break;
      continue;
    }
    if (std::isspace(ch)) {
      in.get();
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(in.get()));
  }
  return tok;
}

int header_int(std::istream& in, const std::string& what) {
  const auto tok = next_token(in);
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used == tok.size() && v > 0) return v;
  } catch (const std::exception&) {
  }
  throw FormatError("PNM header: bad " + what + " '" + tok + "'");
}

}  // namespace

Image read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  const auto magic = next_token(in);
  if (magic != "P2" && magic != "P3" && magic != "P5" && magic != "P6")
    throw FormatError(path.string() + ": not a PGM/PPM file");
  const int channels = (magic == "P3" || magic == "P6") ? 3 : 1;
  const bool binary = magic == "P5" || magic == "P6";
  const int width = header_int(in, "width");
  const int height = header_int(in, "height");
  const int maxval = header_int(in, "maxval");
  if (maxval > 65535) throw FormatError(path.string() + ": maxval above 65535");
  Image img(channels, height, width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < channels; ++c) {
        int v = 0;
        if (binary) {
          v = in.get();
          if (maxval > 255) v = (v << 8) | in.get();
        } else {
          const auto tok = next_token(in);
          try {
            v = tok.empty() ? -1 : std::stoi(tok);
          } catch (const std::exception&) {
            v = -1;
          }
        }
        if (!in && !(in.eof() && !binary)) throw CorruptionError(path.string() + ": pixel data truncated");
        if (v < 0 || v > maxval) throw CorruptionError(path.string() + ": bad pixel value");
        img.at(c, y, x) = static_cast<float>(v) / static_cast<float>(maxval);
      }
    }
  }
  return img;
}

void write_pnm(const std::filesystem::path& path, const Image& img) {
  if (img.channels() != 1 && img.channels() != 3) throw ArgumentError("PNM output needs 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << (img.channels() == 1 ? "P5" : "P6") << '\n' << img.width << ' ' << img.height << "\n255\n";
  for (Eigen::Index y = 0; y < img.height; ++y)
    for (Eigen::Index x = 0; x < img.width; ++x)
      for (Eigen::Index c = 0; c < img.channels(); ++c)
        out.put(static_cast<char>(std::lround(std::clamp(img.at(c, y, x), 0.0F, 1.0F) * 255.0F)));
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace nncomp
