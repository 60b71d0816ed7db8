#include "nncomp/netforward.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "nncomp/error.hpp"

namespace nncomp {

void validate_image(const Image& img) {
  if (img.channels() < 1 || img.height < 1 || img.width < 1)
    throw ShapeError("image dims must be positive");
  if (img.maps.cols() != img.height * img.width) throw ShapeError("image storage does not match its dims");
  if (!img.maps.allFinite()) throw ArgumentError("image holds non-finite pixels");
  if (img.maps.minCoeff() < 0.0F || img.maps.maxCoeff() > 1.0F) throw ArgumentError("image pixels must lie in [0,1]");
}

namespace {

template <typename Scalar>
using Maps = FeatureMaps<Scalar>;

using RowMajorF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

const Tensor& payload(const Layer& l, TensorRole role) {
  const Tensor* t = l.find(role);
  if (!t) throw ArgumentError("missing tensor " + std::string(to_string(role)));
  if (!t->materialized()) throw ArgumentError("tensor " + std::string(to_string(role)) + " has no payload");
  return *t;
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> as_vector(const Tensor& t) {
  return Eigen::Map<const Eigen::VectorXf>(t.data.data(), static_cast<Eigen::Index>(t.data.size()))
      .template cast<Scalar>();
}

Eigen::Index out_extent(Eigen::Index in, int kernel, int stride, int padding) {
  const Eigen::Index span = in + 2 * padding - kernel;
  if (span < 0)
    throw ShapeError("window " + std::to_string(kernel) + " exceeds padded input extent " +
                     std::to_string(in + 2 * padding));
  return span / stride + 1;
}

template <typename Scalar>
Maps<Scalar> conv(const Layer& l, const Maps<Scalar>& x) {
  const Tensor& w = payload(l, TensorRole::ConvWeight);
  const auto out_c = w.shape[0];
  const auto cin_g = w.shape[1];
  const int kh = l.window.kernel_h;
  const int kw = l.window.kernel_w;
  const int g = l.groups;
  if (x.channels() != cin_g * g)
    throw ShapeError("expects " + std::to_string(cin_g * g) + " input channels, got " + std::to_string(x.channels()));
  const int s = l.window.stride;
  const int p = l.window.padding;
  const auto ho = out_extent(x.height, kh, s, p);
  const auto wo = out_extent(x.width, kw, s, p);
  const auto out_g = out_c / g;
  const Eigen::Index patch = cin_g * kh * kw;

  Eigen::Map<const RowMajorF> weights(w.data.data(), out_c, patch);
  Maps<Scalar> y(out_c, ho, wo);
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> cols(patch, ho * wo);
  for (int grp = 0; grp < g; ++grp) {
    cols.setZero();
    for (Eigen::Index c = 0; c < cin_g; ++c) {
      const auto ch = grp * cin_g + c;
      for (int ky = 0; ky < kh; ++ky) {
        for (int kx = 0; kx < kw; ++kx) {
          const auto row = (c * kh + ky) * kw + kx;
          for (Eigen::Index oy = 0; oy < ho; ++oy) {
            const auto iy = oy * s - p + ky;
            if (iy < 0 || iy >= x.height) continue;
            for (Eigen::Index ox = 0; ox < wo; ++ox) {
              const auto ix = ox * s - p + kx;
              if (ix < 0 || ix >= x.width) continue;
              cols(row, oy * wo + ox) = x.at(ch, iy, ix);
            }
          }
        }
      }
    }
    y.maps.middleRows(grp * out_g, out_g).noalias() =
        weights.middleRows(grp * out_g, out_g).template cast<Scalar>() * cols;
  }
  if (const Tensor* b = l.find(TensorRole::ConvBias)) {
    if (!b->materialized()) throw ArgumentError("tensor bias has no payload");
    y.maps.colwise() += as_vector<Scalar>(*b);
  }
  return y;
}

template <typename Scalar>
Maps<Scalar> batchnorm(const Layer& l, const Maps<Scalar>& x) {
  const auto scale = as_vector<Scalar>(payload(l, TensorRole::BnScale));
  const auto bias = as_vector<Scalar>(payload(l, TensorRole::BnBias));
  const auto mean = as_vector<Scalar>(payload(l, TensorRole::BnMean));
  const auto var = as_vector<Scalar>(payload(l, TensorRole::BnVar));
  if (scale.size() != x.channels())
    throw ShapeError("batchnorm over " + std::to_string(scale.size()) + " channels applied to " +
                     std::to_string(x.channels()));
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> a =
      scale.array() / (var.array() + static_cast<Scalar>(l.bn_eps)).sqrt();
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> shift = bias.array() - mean.array() * a.array();
  Maps<Scalar> y = x;
  y.maps = (x.maps.array().colwise() * a.array()).colwise() + shift.array();
  return y;
}

template <typename Scalar>
Maps<Scalar> pool(const Layer& l, const Maps<Scalar>& x) {
  const auto& win = l.window;
  const auto ho = out_extent(x.height, win.kernel_h, win.stride, win.padding);
  const auto wo = out_extent(x.width, win.kernel_w, win.stride, win.padding);
  const bool is_max = l.kind == LayerKind::MaxPool;
  Maps<Scalar> y(x.channels(), ho, wo);
  for (Eigen::Index c = 0; c < x.channels(); ++c) {
    for (Eigen::Index oy = 0; oy < ho; ++oy) {
      for (Eigen::Index ox = 0; ox < wo; ++ox) {
        Scalar acc = is_max ? -std::numeric_limits<Scalar>::infinity() : Scalar(0);
        int n = 0;
        for (int ky = 0; ky < win.kernel_h; ++ky) {
          const auto iy = oy * win.stride - win.padding + ky;
          if (iy < 0 || iy >= x.height) continue;
          for (int kx = 0; kx < win.kernel_w; ++kx) {
            const auto ix = ox * win.stride - win.padding + kx;
            if (ix < 0 || ix >= x.width) continue;
            const Scalar v = x.at(c, iy, ix);
            acc = is_max ? std::max(acc, v) : acc + v;
            ++n;
          }
        }
        if (n == 0) throw ShapeError("pooling window lies entirely in the padding");
        y.at(c, oy, ox) = is_max ? acc : acc / static_cast<Scalar>(n);
      }
    }
  }
  return y;
}

template <typename Scalar>
Maps<Scalar> add(const Maps<Scalar>& a, const Maps<Scalar>& b) {
  if (a.channels() != b.channels() || a.height != b.height || a.width != b.width)
    throw ShapeError("residual add of mismatched maps");
  Maps<Scalar> y = a;
  y.maps += b.maps;
  return y;
}

}  // namespace

template <typename Scalar>
FeatureMaps<Scalar> forward(const Network& net, const FeatureMaps<Scalar>& input, std::string_view upto) {
  const auto stop = net.index_of(upto);
  if (!stop) throw ArgumentError("unknown layer '" + std::string(upto) + "'");
  if (input.channels() < 1 || input.height < 1 || input.width < 1) throw ShapeError("input dims must be positive");

  std::set<std::string, std::less<>> keep;
  for (std::size_t i = 0; i <= *stop; ++i) {
    const auto& l = net.layers[i];
    if (!l.input.empty() && l.input != kNetworkInput) keep.insert(l.input);
    if (!l.skip.empty() && l.skip != kNetworkInput) keep.insert(l.skip);
  }

  std::map<std::string, FeatureMaps<Scalar>, std::less<>> saved;
  FeatureMaps<Scalar> cur = input;
  for (std::size_t i = 0; i <= *stop; ++i) {
    const Layer& l = net.layers[i];
    const auto resolve = [&](const std::string& name) -> const FeatureMaps<Scalar>& {
      if (name.empty()) return cur;
      if (name == kNetworkInput) return input;
      auto it = saved.find(name);
      if (it == saved.end()) throw ArgumentError("references '" + name + "' which is not an earlier layer");
      return it->second;
    };
    FeatureMaps<Scalar> next;
    try {
      const auto& x = resolve(l.input);
      switch (l.kind) {
        case LayerKind::Conv: next = conv(l, x); break;
        case LayerKind::BatchNorm: next = batchnorm(l, x); break;
        case LayerKind::ReLU:
          next = x;
          next.maps = x.maps.cwiseMax(Scalar(0));
          break;
        case LayerKind::MaxPool:
        case LayerKind::AvgPool: next = pool(l, x); break;
        case LayerKind::Add: next = add(x, resolve(l.skip)); break;
      }
    } catch (const Error& e) {
      rethrow_with_context(e, "layer '" + l.name + "'");
    }
    cur = std::move(next);
    if (keep.count(l.name)) saved[l.name] = cur;
  }
  return cur;
}

template <typename Scalar>
FeatureMaps<Scalar> rot90(const FeatureMaps<Scalar>& f, int quarter_turns) {
  const int k = ((quarter_turns % 4) + 4) % 4;
  FeatureMaps<Scalar> cur = f;
  for (int step = 0; step < k; ++step) {
    FeatureMaps<Scalar> next(cur.channels(), cur.width, cur.height);
    for (Eigen::Index c = 0; c < cur.channels(); ++c)
      for (Eigen::Index y = 0; y < next.height; ++y)
        for (Eigen::Index x = 0; x < next.width; ++x) next.at(c, y, x) = cur.at(c, x, cur.width - 1 - y);
    cur = std::move(next);
  }
  return cur;
}

template <typename Scalar>
FeatureMaps<Scalar> crop(const FeatureMaps<Scalar>& f, Eigen::Index y, Eigen::Index x, Eigen::Index h,
                         Eigen::Index w) {
  if (y < 0 || x < 0 || h < 1 || w < 1 || y + h > f.height || x + w > f.width)
    throw ConfigError("ROI out of bounds");
  FeatureMaps<Scalar> out(f.channels(), h, w);
  for (Eigen::Index c = 0; c < f.channels(); ++c)
    for (Eigen::Index r = 0; r < h; ++r)
      out.maps.row(c).segment(r * w, w) = f.maps.row(c).segment((y + r) * f.width + x, w);
  return out;
}

std::string_view to_string(TransformGroup g) {
  switch (g) {
    case TransformGroup::Rotation: return "rotation";
    case TransformGroup::Scale: return "scale";
    case TransformGroup::Translation: return "translation";
  }
  return "?";
}

std::string_view to_string(Moment m) {
  switch (m) {
    case Moment::Average: return "A";
    case Moment::Std: return "S";
    case Moment::Max: return "M";
  }
  return "?";
}

std::vector<NipStage> parse_stages(std::string_view text) {
  std::vector<NipStage> out;
  std::istringstream in{std::string(text)};
  for (std::string item; std::getline(in, item, ',');) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("stage must read <A|S|M>:<group>, got '" + item + "'");
    const auto m = item.substr(0, colon);
    const auto g = item.substr(colon + 1);
    NipStage st{};
    if (m == "A") st.moment = Moment::Average;
    else if (m == "S") st.moment = Moment::Std;
    else if (m == "M") st.moment = Moment::Max;
    else throw ConfigError("unknown moment '" + m + "'");
    if (g == "rotation") st.group = TransformGroup::Rotation;
    else if (g == "scale") st.group = TransformGroup::Scale;
    else if (g == "translation") st.group = TransformGroup::Translation;
    else throw ConfigError("unknown transformation group '" + g + "'");
    out.push_back(st);
  }
  return out;
}

NipConfig NipConfig::defaults() {
  NipConfig c;
  c.stages = {{TransformGroup::Scale, Moment::Average},
              {TransformGroup::Translation, Moment::Std},
              {TransformGroup::Rotation, Moment::Max}};
  c.rotations = {0, 90, 180, 270};
  c.scales = {1.0, 0.75, 0.5};
  c.rois_per_scale = 20;
  return c;
}

NipConfig NipConfig::identity() {
  NipConfig c;
  c.stages = {{TransformGroup::Scale, Moment::Average},
              {TransformGroup::Translation, Moment::Average},
              {TransformGroup::Rotation, Moment::Max}};
  c.rotations = {0};
  c.scales = {1.0};
  c.rois_per_scale = 1;
  return c;
}

void validate(const NipConfig& cfg) {
  if (cfg.stages.empty()) throw ConfigError("NIP needs at least one stage");
  std::set<TransformGroup> seen;
  for (const auto& s : cfg.stages)
    if (!seen.insert(s.group).second)
      throw ConfigError("transformation group '" + std::string(to_string(s.group)) + "' pooled twice");
  if (cfg.rotations.empty()) throw ConfigError("NIP needs at least one rotation");
  for (int r : cfg.rotations)
    if (r % 90 != 0) throw ConfigError("rotation " + std::to_string(r) + " is not a multiple of 90 degrees");
  if (cfg.scales.empty()) throw ConfigError("NIP needs at least one scale");
  for (double s : cfg.scales)
    if (!(s > 0.0 && s <= 1.0)) throw ConfigError("ROI scale must lie in (0,1], got " + std::to_string(s));
  if (cfg.rois_per_scale < 1) throw ConfigError("rois_per_scale must be at least 1");
}

std::vector<Roi> roi_grid(Eigen::Index height, Eigen::Index width, double scale, int count) {
  if (height < 1 || width < 1) throw ShapeError("ROI grid over an empty image");
  if (!(scale > 0.0 && scale <= 1.0)) throw ConfigError("ROI scale must lie in (0,1]");
  if (count < 1) throw ConfigError("ROI count must be at least 1");
  const auto side =
      std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::floor(scale * static_cast<double>(std::min(height, width)))));
  int rows = 1;
  for (int r = 1; r * r <= count; ++r)
    if (count % r == 0) rows = r;
  const int cols = count / rows;
  const auto place = [](int i, int n, Eigen::Index room) -> Eigen::Index {
    if (n == 1) return room / 2;
    return (2 * i * room + (n - 1)) / (2 * static_cast<Eigen::Index>(n - 1));
  };
  std::vector<Roi> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) out.push_back({place(i, rows, height - side), place(j, cols, width - side), side});
  return out;
}

template <typename Scalar>
TransformedStack<Scalar> extract_transformed_stack(const Network& net, const FeatureMaps<Scalar>& img,
                                                   std::string_view upto, const NipConfig& cfg) {
  validate(cfg);
  TransformedStack<Scalar> st;
  st.rotations = static_cast<int>(cfg.rotations.size());
  st.scales = static_cast<int>(cfg.scales.size());
  st.rois = cfg.rois_per_scale;
  st.maps.reserve(static_cast<std::size_t>(st.rotations * st.scales * st.rois));
  for (int deg : cfg.rotations) {
    const auto rotated = rot90(img, deg / 90);
    for (double s : cfg.scales)
      for (const auto& roi : roi_grid(rotated.height, rotated.width, s, cfg.rois_per_scale))
        st.maps.push_back(forward(net, crop(rotated, roi.y, roi.x, roi.side, roi.side), upto));
  }
  return st;
}

template <typename Scalar>
ChannelStack<Scalar> channel_means(const TransformedStack<Scalar>& stack) {
  if (stack.maps.empty()) throw ArgumentError("empty transformed stack");
  ChannelStack<Scalar> cs{stack.rotations, stack.scales, stack.rois, {}};
  cs.means.resize(stack.maps.front().channels(), static_cast<Eigen::Index>(stack.maps.size()));
  for (std::size_t i = 0; i < stack.maps.size(); ++i) {
    if (stack.maps[i].channels() != cs.means.rows()) throw ShapeError("stack maps differ in channel count");
    cs.means.col(static_cast<Eigen::Index>(i)) = stack.maps[i].maps.rowwise().mean();
  }
  return cs;
}

template <typename Scalar>
Descriptor<Scalar> nip_pool(const ChannelStack<Scalar>& stack, std::span<const NipStage> stages) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (stages.empty()) throw ConfigError("NIP needs at least one stage");
  std::array<Eigen::Index, 3> dims{stack.rotations, stack.scales, stack.rois};
  if (dims[0] * dims[1] * dims[2] != stack.means.cols()) throw ShapeError("stack size does not match its axes");
  std::array<bool, 3> pooled{false, false, false};
  Matrix cur = stack.means;

  for (const auto& st : stages) {
    const auto axis = static_cast<std::size_t>(st.group);
    if (pooled[axis]) throw ConfigError("transformation group '" + std::string(to_string(st.group)) + "' pooled twice");
    pooled[axis] = true;
    // column index = (i0 * d1 + i1) * d2 + i2
    const Eigen::Index inner = axis == 2 ? 1 : (axis == 1 ? dims[2] : dims[1] * dims[2]);
    const Eigen::Index n = dims[axis];
    const Eigen::Index outer = cur.cols() / (n * inner);
    Matrix next(cur.rows(), outer * inner);
    for (Eigen::Index o = 0; o < outer; ++o) {
      for (Eigen::Index in = 0; in < inner; ++in) {
        const auto col = [&](Eigen::Index i) { return (o * n + i) * inner + in; };
        auto dst = next.col(o * inner + in);
        switch (st.moment) {
          case Moment::Average:
          case Moment::Std: {
            Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mean = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(cur.rows());
            for (Eigen::Index i = 0; i < n; ++i) mean += cur.col(col(i));
            mean /= static_cast<Scalar>(n);
            if (st.moment == Moment::Average) {
              dst = mean;
            } else {
              Eigen::Matrix<Scalar, Eigen::Dynamic, 1> ss = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(cur.rows());
              for (Eigen::Index i = 0; i < n; ++i) ss.array() += (cur.col(col(i)) - mean).array().square();
              dst = (ss / static_cast<Scalar>(n)).cwiseSqrt();
            }
            break;
          }
          case Moment::Max:
            dst = cur.col(col(0));
            for (Eigen::Index i = 1; i < n; ++i) dst = dst.cwiseMax(cur.col(col(i)));
            break;
        }
      }
    }
    cur = std::move(next);
    dims[axis] = 1;
  }
  for (std::size_t a = 0; a < 3; ++a)
    if (dims[a] > 1)
      throw ConfigError("axis '" + std::string(to_string(static_cast<TransformGroup>(a))) + "' of size " +
                        std::to_string(dims[a]) + " is not pooled by any stage");

  Descriptor<Scalar> d;
  d.values = cur.col(0);
  const Scalar norm = d.values.norm();
  if (norm == Scalar(0)) d.zero = true;
  else d.values /= norm;
  return d;
}

template <typename Scalar>
Descriptor<Scalar> nip_pool(const TransformedStack<Scalar>& stack, std::span<const NipStage> stages) {
  return nip_pool(channel_means(stack), stages);
}

template <typename Scalar>
Descriptor<Scalar> nip_descriptor(const Network& net, const FeatureMaps<Scalar>& img, std::string_view upto,
                                  const NipConfig& cfg) {
  return nip_pool(extract_transformed_stack(net, img, upto, cfg), std::span<const NipStage>(cfg.stages));
}

template <typename Scalar>
double cosine(const Descriptor<Scalar>& a, const Descriptor<Scalar>& b) {
  if (a.values.size() != b.values.size()) throw ShapeError("descriptor dimensions differ");
  const double na = a.values.template cast<double>().norm();
  const double nb = b.values.template cast<double>().norm();
  if (na == 0.0 && nb == 0.0) return 1.0;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.values.template cast<double>().dot(b.values.template cast<double>()) / (na * nb);
}

template <typename Scalar>
DriftReport descriptor_drift(const Network& a, const Network& b, std::span<const FeatureMaps<Scalar>> images,
                             std::string_view upto, const NipConfig& cfg) {
  if (!same_architecture(a, b)) throw ArgumentError("descriptor drift needs networks of the same architecture");
  if (images.empty()) throw ArgumentError("descriptor drift needs at least one image");
  DriftReport r{0.0, 0.0};
  for (const auto& img : images) {
    const auto da = nip_descriptor(a, img, upto, cfg);
    const auto db = nip_descriptor(b, img, upto, cfg);
    r.mean_cosine += cosine(da, db);
    r.mean_l2_gap += (da.values - db.values).template cast<double>().norm();
  }
  r.mean_cosine /= static_cast<double>(images.size());
  r.mean_l2_gap /= static_cast<double>(images.size());
  return r;
}

#define NNCOMP_NETFORWARD_INSTANTIATE(S)                                                                  \
  template FeatureMaps<S> forward(const Network&, const FeatureMaps<S>&, std::string_view);               \
  template FeatureMaps<S> rot90(const FeatureMaps<S>&, int);                                              \
  template FeatureMaps<S> crop(const FeatureMaps<S>&, Eigen::Index, Eigen::Index, Eigen::Index,           \
                               Eigen::Index);                                                             \
  template TransformedStack<S> extract_transformed_stack(const Network&, const FeatureMaps<S>&,           \
                                                         std::string_view, const NipConfig&);             \
  template ChannelStack<S> channel_means(const TransformedStack<S>&);                                     \
  template Descriptor<S> nip_pool(const ChannelStack<S>&, std::span<const NipStage>);                     \
  template Descriptor<S> nip_pool(const TransformedStack<S>&, std::span<const NipStage>);                 \
  template Descriptor<S> nip_descriptor(const Network&, const FeatureMaps<S>&, std::string_view,          \
                                        const NipConfig&);                                                \
  template double cosine(const Descriptor<S>&, const Descriptor<S>&);                                     \
  template DriftReport descriptor_drift(const Network&, const Network&, std::span<const FeatureMaps<S>>,  \
                                        std::string_view, const NipConfig&);

NNCOMP_NETFORWARD_INSTANTIATE(float)
NNCOMP_NETFORWARD_INSTANTIATE(double)
#undef NNCOMP_NETFORWARD_INSTANTIATE

}  // namespace nncomp
