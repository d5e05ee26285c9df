#include "fstta/toy_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>

#include "fstta/rng.hpp"

namespace fstta::model {

namespace {

void dense_forward(const Dense& layer, std::span<const double> in, Vec& out) {
  const std::size_t rows = layer.weight.rows;
  out.assign(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = layer.bias[r];
    const auto w = layer.weight.row(r);
    for (std::size_t c = 0; c < w.size(); ++c) acc += w[c] * in[c];
    out[r] = acc;
  }
}

// Normalizes z into zhat, returns 1/sqrt(var + eps).
double layer_norm_forward(std::span<const double> z, Vec& zhat) {
  const std::size_t h = z.size();
  double mean = 0.0;
  for (double v : z) mean += v;
  mean /= static_cast<double>(h);
  double var = 0.0;
  for (double v : z) var += (v - mean) * (v - mean);
  var /= static_cast<double>(h);
  const double rstd = 1.0 / std::sqrt(var + kLayerNormEps);
  zhat.resize(h);
  for (std::size_t i = 0; i < h; ++i) zhat[i] = (z[i] - mean) * rstd;
  return rstd;
}

// Maps dL/dy of y = scale .* zhat + shift back to dL/dz, accumulating the
// affine-parameter gradients on the way.
void layer_norm_backward(std::span<const double> dy,
                         std::span<const double> zhat, double rstd,
                         const LayerNorm& ln, std::span<double> dscale,
                         std::span<double> dshift, Vec& dz) {
  const std::size_t h = dy.size();
  Vec dzhat(h);
  for (std::size_t i = 0; i < h; ++i) {
    dscale[i] += dy[i] * zhat[i];
    dshift[i] += dy[i];
    dzhat[i] = dy[i] * ln.scale[i];
  }
  double mean_dzhat = 0.0, mean_dzhat_zhat = 0.0;
  for (std::size_t i = 0; i < h; ++i) {
    mean_dzhat += dzhat[i];
    mean_dzhat_zhat += dzhat[i] * zhat[i];
  }
  mean_dzhat /= static_cast<double>(h);
  mean_dzhat_zhat /= static_cast<double>(h);
  dz.resize(h);
  for (std::size_t i = 0; i < h; ++i)
    dz[i] = rstd * (dzhat[i] - mean_dzhat - zhat[i] * mean_dzhat_zhat);
}

struct FlatLayout {
  std::size_t w1, b1, g1, s1, w2, b2, g2, s2, w3, b3, total;
};

constexpr FlatLayout layout() {
  FlatLayout l{};
  std::size_t off = 0;
  l.w1 = off; off += kHidden1 * kInputDim;
  l.b1 = off; off += kHidden1;
  l.g1 = off; off += kHidden1;
  l.s1 = off; off += kHidden1;
  l.w2 = off; off += kHidden2 * kHidden1;
  l.b2 = off; off += kHidden2;
  l.g2 = off; off += kHidden2;
  l.s2 = off; off += kHidden2;
  l.w3 = off; off += kHidden2;
  l.b3 = off; off += 1;
  l.total = off;
  return l;
}

constexpr FlatLayout kLayout = layout();

void validate_input(const StepInput& in) {
  if (in.instruction.size() != kFeatureDim || in.history.size() != kFeatureDim)
    throw ValidityError("score_actions: instruction/history dimension");
  if (in.candidates.empty())
    throw ValidityError("score_actions: no candidates");
  for (const Vec& c : in.candidates)
    if (c.size() != kFeatureDim)
      throw ValidityError("score_actions: candidate dimension");
  if (!linalg::all_finite(in.instruction) || !linalg::all_finite(in.history))
    throw ValidityError("score_actions: non-finite input");
  for (const Vec& c : in.candidates)
    if (!linalg::all_finite(c))
      throw ValidityError("score_actions: non-finite candidate");
}

}  // namespace

PolicyParams PolicyParams::random_init(std::uint64_t seed) {
  Rng rng(seed);
  auto init_dense = [&](std::size_t out, std::size_t in) {
    Dense d;
    d.weight = linalg::RowMatrix(out, in);
    const double scale = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& w : d.weight.data) w = rng.normal(0.0, scale);
    d.bias.assign(out, 0.0);
    return d;
  };
  PolicyParams p;
  p.input_layer = init_dense(kHidden1, kInputDim);
  p.norm1 = {Vec(kHidden1, 1.0), Vec(kHidden1, 0.0)};
  p.hidden_layer = init_dense(kHidden2, kHidden1);
  p.norm2 = {Vec(kHidden2, 1.0), Vec(kHidden2, 0.0)};
  p.output_layer = init_dense(1, kHidden2);
  return p;
}

Vec PolicyParams::adaptable() const {
  Vec out;
  out.reserve(kAdaptableDim);
  out.insert(out.end(), norm1.scale.begin(), norm1.scale.end());
  out.insert(out.end(), norm1.shift.begin(), norm1.shift.end());
  out.insert(out.end(), norm2.scale.begin(), norm2.scale.end());
  out.insert(out.end(), norm2.shift.begin(), norm2.shift.end());
  return out;
}

void PolicyParams::set_adaptable(std::span<const double> values) {
  if (values.size() != kAdaptableDim)
    throw ValidityError("set_adaptable: expected " +
                        std::to_string(kAdaptableDim) + " values");
  std::size_t off = 0;
  auto take = [&](Vec& dst) {
    std::copy_n(values.begin() + off, dst.size(), dst.begin());
    off += dst.size();
  };
  take(norm1.scale);
  take(norm1.shift);
  take(norm2.scale);
  take(norm2.shift);
}

Vec PolicyParams::flatten_all() const {
  Vec out;
  out.reserve(kLayout.total);
  auto put = [&](const Vec& v) { out.insert(out.end(), v.begin(), v.end()); };
  out.insert(out.end(), input_layer.weight.data.begin(),
             input_layer.weight.data.end());
  put(input_layer.bias);
  put(norm1.scale);
  put(norm1.shift);
  out.insert(out.end(), hidden_layer.weight.data.begin(),
             hidden_layer.weight.data.end());
  put(hidden_layer.bias);
  put(norm2.scale);
  put(norm2.shift);
  out.insert(out.end(), output_layer.weight.data.begin(),
             output_layer.weight.data.end());
  put(output_layer.bias);
  return out;
}

void PolicyParams::unflatten_all(std::span<const double> values) {
  if (values.size() != kLayout.total)
    throw ValidityError("unflatten_all: wrong parameter count");
  std::size_t off = 0;
  auto take_n = [&](double* dst, std::size_t n) {
    std::copy_n(values.begin() + off, n, dst);
    off += n;
  };
  take_n(input_layer.weight.data.data(), input_layer.weight.data.size());
  take_n(input_layer.bias.data(), input_layer.bias.size());
  take_n(norm1.scale.data(), norm1.scale.size());
  take_n(norm1.shift.data(), norm1.shift.size());
  take_n(hidden_layer.weight.data.data(), hidden_layer.weight.data.size());
  take_n(hidden_layer.bias.data(), hidden_layer.bias.size());
  take_n(norm2.scale.data(), norm2.scale.size());
  take_n(norm2.shift.data(), norm2.shift.size());
  take_n(output_layer.weight.data.data(), output_layer.weight.data.size());
  take_n(output_layer.bias.data(), output_layer.bias.size());
}

std::size_t PolicyParams::total_param_count() { return kLayout.total; }

ForwardResult score_actions(const PolicyParams& params, const StepInput& in) {
  validate_input(in);

  ForwardResult fr;
  fr.caches.resize(in.candidates.size());
  fr.logits.resize(in.candidates.size());

  for (std::size_t k = 0; k < in.candidates.size(); ++k) {
    auto& cache = fr.caches[k];
    cache.input.reserve(kInputDim);
    cache.input.insert(cache.input.end(), in.instruction.begin(),
                       in.instruction.end());
    cache.input.insert(cache.input.end(), in.history.begin(),
                       in.history.end());
    cache.input.insert(cache.input.end(), in.candidates[k].begin(),
                       in.candidates[k].end());

    Vec z1;
    dense_forward(params.input_layer, cache.input, z1);
    cache.rstd1 = layer_norm_forward(z1, cache.zhat1);
    cache.act1.resize(kHidden1);
    for (std::size_t i = 0; i < kHidden1; ++i)
      cache.act1[i] = std::tanh(params.norm1.scale[i] * cache.zhat1[i] +
                                params.norm1.shift[i]);

    Vec z2;
    dense_forward(params.hidden_layer, cache.act1, z2);
    cache.rstd2 = layer_norm_forward(z2, cache.zhat2);
    cache.act2.resize(kHidden2);
    for (std::size_t i = 0; i < kHidden2; ++i)
      cache.act2[i] = std::tanh(params.norm2.scale[i] * cache.zhat2[i] +
                                params.norm2.shift[i]);

    double logit = params.output_layer.bias[0];
    const auto w3 = params.output_layer.weight.row(0);
    for (std::size_t i = 0; i < kHidden2; ++i) logit += w3[i] * cache.act2[i];
    fr.logits[k] = logit;
  }

  // stable softmax
  const double max_logit =
      *std::max_element(fr.logits.begin(), fr.logits.end());
  fr.probs.resize(fr.logits.size());
  double z = 0.0;
  for (std::size_t k = 0; k < fr.logits.size(); ++k) {
    fr.probs[k] = std::exp(fr.logits[k] - max_logit);
    z += fr.probs[k];
  }
  for (double& p : fr.probs) p /= z;
  return fr;
}

double entropy_loss(std::span<const double> probs) {
  double loss = 0.0;
  for (double p : probs) {
    if (p < 0.0) throw ValidityError("entropy_loss: negative probability");
    if (p > 0.0) loss -= p * std::log(p);
  }
  return loss;
}

void backward_all(const PolicyParams& params, const StepInput& in,
                  const ForwardResult& fwd, std::span<const double> dlogits,
                  std::span<double> grads) {
  if (grads.size() != kLayout.total)
    throw ValidityError("backward_all: gradient buffer size");
  if (dlogits.size() != fwd.logits.size())
    throw ValidityError("backward_all: dlogits size");
  (void)in;

  const auto w3 = params.output_layer.weight.row(0);
  Vec dy2(kHidden2), dz2, da1(kHidden1), dy1(kHidden1), dz1;

  for (std::size_t k = 0; k < fwd.caches.size(); ++k) {
    const auto& cache = fwd.caches[k];
    const double dl = dlogits[k];
    if (dl == 0.0) continue;

    // output layer
    for (std::size_t i = 0; i < kHidden2; ++i)
      grads[kLayout.w3 + i] += dl * cache.act2[i];
    grads[kLayout.b3] += dl;

    // tanh + layer norm 2
    for (std::size_t i = 0; i < kHidden2; ++i) {
      const double da2 = dl * w3[i];
      dy2[i] = da2 * (1.0 - cache.act2[i] * cache.act2[i]);
    }
    layer_norm_backward(dy2, cache.zhat2, cache.rstd2, params.norm2,
                        grads.subspan(kLayout.g2, kHidden2),
                        grads.subspan(kLayout.s2, kHidden2), dz2);

    // hidden dense
    for (std::size_t r = 0; r < kHidden2; ++r) {
      const double g = dz2[r];
      for (std::size_t c = 0; c < kHidden1; ++c)
        grads[kLayout.w2 + r * kHidden1 + c] += g * cache.act1[c];
      grads[kLayout.b2 + r] += g;
    }
    for (std::size_t c = 0; c < kHidden1; ++c) {
      double acc = 0.0;
      for (std::size_t r = 0; r < kHidden2; ++r)
        acc += params.hidden_layer.weight.at(r, c) * dz2[r];
      da1[c] = acc;
    }

    // tanh + layer norm 1
    for (std::size_t i = 0; i < kHidden1; ++i)
      dy1[i] = da1[i] * (1.0 - cache.act1[i] * cache.act1[i]);
    layer_norm_backward(dy1, cache.zhat1, cache.rstd1, params.norm1,
                        grads.subspan(kLayout.g1, kHidden1),
                        grads.subspan(kLayout.s1, kHidden1), dz1);

    // input dense
    for (std::size_t r = 0; r < kHidden1; ++r) {
      const double g = dz1[r];
      for (std::size_t c = 0; c < kInputDim; ++c)
        grads[kLayout.w1 + r * kInputDim + c] += g * cache.input[c];
      grads[kLayout.b1 + r] += g;
    }
  }
}

Vec backward_adaptable(const PolicyParams& params, const StepInput& in,
                       const ForwardResult& fwd) {
  // dL/dlogit_k for L = entropy(softmax(logits)): -p_k (log p_k + L)
  const double loss = entropy_loss(fwd.probs);
  Vec dlogits(fwd.probs.size());
  for (std::size_t k = 0; k < fwd.probs.size(); ++k) {
    const double p = fwd.probs[k];
    dlogits[k] = (p > 0.0) ? -p * (std::log(p) + loss) : 0.0;
  }

  Vec grads(kLayout.total, 0.0);
  backward_all(params, in, fwd, dlogits, grads);

  Vec out;
  out.reserve(kAdaptableDim);
  auto slice = [&](std::size_t off, std::size_t n) {
    out.insert(out.end(), grads.begin() + off, grads.begin() + off + n);
  };
  slice(kLayout.g1, kHidden1);
  slice(kLayout.s1, kHidden1);
  slice(kLayout.g2, kHidden2);
  slice(kLayout.s2, kHidden2);
  return out;
}

double step_accuracy(const PolicyParams& params,
                     const std::vector<LabeledStep>& data) {
  if (data.empty()) return 0.0;
  std::size_t hits = 0;
  for (const LabeledStep& ex : data) {
    const ForwardResult fr = score_actions(params, ex.input);
    const std::size_t pick = static_cast<std::size_t>(std::distance(
        fr.probs.begin(), std::max_element(fr.probs.begin(), fr.probs.end())));
    if (pick == ex.action) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

PolicyParams pretrain(const std::vector<LabeledStep>& train,
                      const std::vector<LabeledStep>& holdout,
                      const TrainConfig& cfg, PretrainReport* report) {
  PolicyParams params = PolicyParams::random_init(cfg.seed);
  PretrainReport rep;

  if (cfg.epochs == 0) {
    rep.holdout_accuracy = step_accuracy(params, holdout);
    if (report) *report = rep;
    return params;
  }
  if (train.empty()) throw TrainingError("pretrain: empty training set");

  Rng rng(derive_seed(cfg.seed, 0xad0ULL));
  const std::size_t total = kLayout.total;
  Vec flat = params.flatten_all();
  Vec m(total, 0.0), v(total, 0.0), grads(total, 0.0);
  std::size_t adam_t = 0;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  double epoch_loss = 0.0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    epoch_loss = 0.0;

    for (std::size_t start = 0; start < order.size();
         start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::fill(grads.begin(), grads.end(), 0.0);

      for (std::size_t i = start; i < end; ++i) {
        const LabeledStep& ex = train[order[i]];
        StepInput noisy = ex.input;
        if (cfg.input_noise > 0.0) {
          for (double& x : noisy.history) x += rng.normal(0.0, cfg.input_noise);
          for (Vec& c : noisy.candidates)
            for (double& x : c) x += rng.normal(0.0, cfg.input_noise);
        }
        const ForwardResult fr = score_actions(params, noisy);
        epoch_loss -= std::log(std::max(fr.probs[ex.action], 1e-300));
        Vec dlogits(fr.probs);
        dlogits[ex.action] -= 1.0;  // softmax cross-entropy
        backward_all(params, noisy, fr, dlogits, grads);
      }

      const double inv_batch = 1.0 / static_cast<double>(end - start);
      ++adam_t;
      const double bc1 = 1.0 - std::pow(cfg.beta1, double(adam_t));
      const double bc2 = 1.0 - std::pow(cfg.beta2, double(adam_t));
      for (std::size_t i = 0; i < total; ++i) {
        const double g = grads[i] * inv_batch;
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        flat[i] -=
            cfg.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.adam_eps);
      }
      params.unflatten_all(flat);
    }

    rep.epochs_run = epoch + 1;
    rep.holdout_accuracy = step_accuracy(params, holdout);
    if (rep.holdout_accuracy >= cfg.early_stop_accuracy) break;
  }

  rep.final_train_loss = epoch_loss / static_cast<double>(train.size());
  if (report) *report = rep;

  if (rep.holdout_accuracy < cfg.accuracy_floor)
    throw TrainingError("pretrain: holdout accuracy " +
                        std::to_string(rep.holdout_accuracy) +
                        " below floor " + std::to_string(cfg.accuracy_floor) +
                        " after " + std::to_string(rep.epochs_run) +
                        " epochs");
  return params;
}

// ---------------------------------------------------------------------------
// parameter container io

namespace {

constexpr char kMagic[4] = {'F', 'S', 'T', 'P'};
constexpr std::uint32_t kFormatVersion = 1;

void write_u16(std::ostream& os, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint16_t read_u16(std::istream& is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

void write_array(std::ostream& os, const std::string& name,
                 std::span<const double> values) {
  write_u16(os, static_cast<std::uint16_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_u64(os, values.size());
  for (double d : values) write_u64(os, std::bit_cast<std::uint64_t>(d));
}

Vec read_array(std::istream& is, const std::string& expected_name,
               std::size_t expected_count) {
  const std::uint16_t name_len = read_u16(is);
  std::string name(name_len, '\0');
  is.read(name.data(), name_len);
  if (name != expected_name)
    throw ValidityError("load_params: expected array '" + expected_name +
                        "', found '" + name + "'");
  const std::uint64_t count = read_u64(is);
  if (count != expected_count)
    throw ValidityError("load_params: array '" + name + "' has " +
                        std::to_string(count) + " entries, expected " +
                        std::to_string(expected_count));
  Vec out(count);
  for (double& d : out) d = std::bit_cast<double>(read_u64(is));
  return out;
}

}  // namespace

void save_params(const PolicyParams& params, const std::filesystem::path& f) {
  std::ofstream os(f, std::ios::binary | std::ios::trunc);
  if (!os) throw ValidityError("save_params: cannot open " + f.string());
  os.write(kMagic, 4);
  write_u32(os, kFormatVersion);
  write_u32(os, kInputDim);
  write_u32(os, kHidden1);
  write_u32(os, kHidden2);
  write_u32(os, kFeatureDim);
  write_u32(os, 10);  // array count
  write_array(os, "input_layer.weight", params.input_layer.weight.data);
  write_array(os, "input_layer.bias", params.input_layer.bias);
  write_array(os, "norm1.scale", params.norm1.scale);
  write_array(os, "norm1.shift", params.norm1.shift);
  write_array(os, "hidden_layer.weight", params.hidden_layer.weight.data);
  write_array(os, "hidden_layer.bias", params.hidden_layer.bias);
  write_array(os, "norm2.scale", params.norm2.scale);
  write_array(os, "norm2.shift", params.norm2.shift);
  write_array(os, "output_layer.weight", params.output_layer.weight.data);
  write_array(os, "output_layer.bias", params.output_layer.bias);
  if (!os) throw ValidityError("save_params: write failed for " + f.string());
}

PolicyParams load_params(const std::filesystem::path& f) {
  std::ifstream is(f, std::ios::binary);
  if (!is) throw ValidityError("load_params: cannot open " + f.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw ValidityError("load_params: bad magic in " + f.string());
  const std::uint32_t version = read_u32(is);
  if (version != kFormatVersion)
    throw ValidityError("load_params: unsupported format version " +
                        std::to_string(version));
  const std::uint32_t in_dim = read_u32(is);
  const std::uint32_t h1 = read_u32(is);
  const std::uint32_t h2 = read_u32(is);
  const std::uint32_t feat = read_u32(is);
  if (in_dim != kInputDim || h1 != kHidden1 || h2 != kHidden2 ||
      feat != kFeatureDim)
    throw ValidityError("load_params: architecture mismatch");
  const std::uint32_t n_arrays = read_u32(is);
  if (n_arrays != 10)
    throw ValidityError("load_params: unexpected array count");

  PolicyParams p;
  p.input_layer.weight = linalg::RowMatrix(kHidden1, kInputDim);
  p.input_layer.weight.data =
      read_array(is, "input_layer.weight", kHidden1 * kInputDim);
  p.input_layer.bias = read_array(is, "input_layer.bias", kHidden1);
  p.norm1.scale = read_array(is, "norm1.scale", kHidden1);
  p.norm1.shift = read_array(is, "norm1.shift", kHidden1);
  p.hidden_layer.weight = linalg::RowMatrix(kHidden2, kHidden1);
  p.hidden_layer.weight.data =
      read_array(is, "hidden_layer.weight", kHidden2 * kHidden1);
  p.hidden_layer.bias = read_array(is, "hidden_layer.bias", kHidden2);
  p.norm2.scale = read_array(is, "norm2.scale", kHidden2);
  p.norm2.shift = read_array(is, "norm2.shift", kHidden2);
  p.output_layer.weight = linalg::RowMatrix(1, kHidden2);
  p.output_layer.weight.data = read_array(is, "output_layer.weight", kHidden2);
  p.output_layer.bias = read_array(is, "output_layer.bias", 1);
  if (!is) throw ValidityError("load_params: truncated file " + f.string());
  return p;
}

}  // namespace fstta::model
