#include "coreda/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "coreda/errors.hpp"
#include "coreda/rng.hpp"
#include <nlohmann/json.hpp>

namespace coreda {

using nlohmann::json;

void validate(const EncoderConfig& cfg) {
  if (cfg.d < 2) throw ContractError("encoder config: d must be >= 2");
  if (cfg.hidden < 1) throw ContractError("encoder config: hidden must be >= 1");
  if (cfg.c < 1 || cfg.h < 1 || cfg.w < 1) throw ContractError("encoder config: bad frame geometry");
  if (cfg.l < 1) throw ContractError("encoder config: l must be >= 1");
}

bool operator==(const EncoderConfig& a, const EncoderConfig& b) {
  return a.d == b.d && a.hidden == b.hidden && a.use_temporal_diff == b.use_temporal_diff &&
         a.c == b.c && a.h == b.h && a.w == b.w && a.l == b.l;
}

int encoder_input_width(const EncoderConfig& cfg) {
  return cfg.c * cfg.h * cfg.w * (cfg.use_temporal_diff ? 2 : 1);
}

std::vector<Tensor> Model::encoder_params() const { return {enc_w1, enc_b1, enc_w2, enc_b2}; }

std::vector<Tensor> Model::head_params() const {
  return {abs_w1, abs_b1, abs_w2, abs_b2, abs_w3, abs_b3,
          rel_w1, rel_b1, rel_w2, rel_b2, rel_w3, rel_b3};
}

std::vector<Tensor> Model::all_params() const {
  auto out = encoder_params();
  auto heads = head_params();
  out.insert(out.end(), heads.begin(), heads.end());
  return out;
}

std::vector<std::pair<std::string, Tensor>> Model::named_params() const {
  return {{"enc.w1", enc_w1}, {"enc.b1", enc_b1}, {"enc.w2", enc_w2}, {"enc.b2", enc_b2},
          {"abs.w1", abs_w1}, {"abs.b1", abs_b1}, {"abs.w2", abs_w2}, {"abs.b2", abs_b2},
          {"abs.w3", abs_w3}, {"abs.b3", abs_b3}, {"rel.w1", rel_w1}, {"rel.b1", rel_b1},
          {"rel.w2", rel_w2}, {"rel.b2", rel_b2}, {"rel.w3", rel_w3}, {"rel.b3", rel_b3}};
}

namespace {

Tensor xavier(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> w(fan_in * fan_out);
  for (auto& v : w) v = rng.uniform(-limit, limit);
  return Tensor::from_data({fan_in, fan_out}, std::move(w), true);
}

Tensor zero_bias(std::size_t n) { return Tensor::zeros({n}, true); }

std::size_t half_width(const EncoderConfig& cfg) {
  return static_cast<std::size_t>(std::max(1, cfg.d / 2));
}

// 3-layer head: two tanh layers then a linear scalar readout.
Tensor head_forward(const Tensor& input_row, const Tensor& w1, const Tensor& b1, const Tensor& w2,
                    const Tensor& b2, const Tensor& w3, const Tensor& b3) {
  Tensor h1 = tanh(add_rowvec(matmul(input_row, w1), b1));
  Tensor h2 = tanh(add_rowvec(matmul(h1, w2), b2));
  Tensor out = add_rowvec(matmul(h2, w3), b3);
  return reshape(out, {});
}

}  // namespace

Model init_params(const EncoderConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  Model m;
  m.cfg = cfg;
  Rng rng(seed);

  const std::size_t f = static_cast<std::size_t>(encoder_input_width(cfg));
  const std::size_t hid = static_cast<std::size_t>(cfg.hidden);
  const std::size_t d = static_cast<std::size_t>(cfg.d);
  const std::size_t h2 = half_width(cfg);

  m.enc_w1 = xavier(f, hid, rng);
  m.enc_b1 = zero_bias(hid);
  m.enc_w2 = xavier(hid, d, rng);
  m.enc_b2 = zero_bias(d);

  m.abs_w1 = xavier(d, d, rng);
  m.abs_b1 = zero_bias(d);
  m.abs_w2 = xavier(d, h2, rng);
  m.abs_b2 = zero_bias(h2);
  m.abs_w3 = xavier(h2, 1, rng);
  m.abs_b3 = zero_bias(1);

  m.rel_w1 = xavier(2 * d, d, rng);
  m.rel_b1 = zero_bias(d);
  m.rel_w2 = xavier(d, h2, rng);
  m.rel_b2 = zero_bias(h2);
  m.rel_w3 = xavier(h2, 1, rng);
  m.rel_b3 = zero_bias(1);
  return m;
}

Tensor encode(const Tensor& clips, const Model& m) {
  const auto& shape = clips.shape();
  if (shape.size() != 4) {
    throw DimensionError("encode: expected [(K*l),c,h,w] clips, got " + shape_str(shape));
  }
  const auto& cfg = m.cfg;
  if (shape[1] != static_cast<std::size_t>(cfg.c) || shape[2] != static_cast<std::size_t>(cfg.h) ||
      shape[3] != static_cast<std::size_t>(cfg.w)) {
    throw DimensionError("encode: frame geometry " + shape_str(shape) +
                         " does not match the model config");
  }
  const std::size_t n_frames = shape[0];
  const std::size_t l = static_cast<std::size_t>(cfg.l);
  if (n_frames == 0 || n_frames % l != 0) {
    throw DimensionError("encode: frame count " + std::to_string(n_frames) +
                         " is not a multiple of l=" + std::to_string(cfg.l));
  }
  if (clips.grad_enabled()) throw ContractError("encode: clip input must be plain data");
  m.counters->encode.fetch_add(1, std::memory_order_relaxed);

  const std::size_t k = n_frames / l;
  const std::size_t fv = shape[1] * shape[2] * shape[3];
  const std::size_t fw = static_cast<std::size_t>(encoder_input_width(cfg));
  const auto src = clips.data();

  std::vector<Tensor> rows;
  rows.reserve(k);
  for (std::size_t ck = 0; ck < k; ++ck) {
    std::vector<double> x(l * fw, 0.0);
    for (std::size_t f = 0; f < l; ++f) {
      const double* frame = src.data() + (ck * l + f) * fv;
      double* row = x.data() + f * fw;
      std::memcpy(row, frame, fv * sizeof(double));
      if (cfg.use_temporal_diff && f + 1 < l) {
        const double* next = frame + fv;
        for (std::size_t i = 0; i < fv; ++i) row[fv + i] = next[i] - frame[i];
      }
    }
    Tensor xt = Tensor::from_data({l, fw}, std::move(x));
    Tensor h1 = tanh(add_rowvec(matmul(xt, m.enc_w1), m.enc_b1));
    Tensor emb = add_rowvec(matmul(h1, m.enc_w2), m.enc_b2);
    rows.push_back(gap_temporal(emb));
  }
  return stack(rows);
}

Tensor predict_abs(const Tensor& feats, const Model& m) {
  if (feats.rank() != 2 || feats.shape()[1] != static_cast<std::size_t>(m.cfg.d)) {
    throw DimensionError("predict_abs: expected [K," + std::to_string(m.cfg.d) + "] features, got " +
                         shape_str(feats.shape()));
  }
  m.counters->abs_head.fetch_add(1, std::memory_order_relaxed);
  Tensor pooled = reshape(gap_temporal(feats), {1, static_cast<std::size_t>(m.cfg.d)});
  return head_forward(pooled, m.abs_w1, m.abs_b1, m.abs_w2, m.abs_b2, m.abs_w3, m.abs_b3);
}

Tensor predict_rel(const Tensor& feats_i, const Tensor& feats_j, const Model& m) {
  const std::size_t d = static_cast<std::size_t>(m.cfg.d);
  for (const Tensor* f : {&feats_i, &feats_j}) {
    if (f->rank() != 2 || f->shape()[1] != d) {
      throw DimensionError("predict_rel: expected [K," + std::to_string(m.cfg.d) +
                           "] features, got " + shape_str(f->shape()));
    }
  }
  m.counters->rel_head.fetch_add(1, std::memory_order_relaxed);
  Tensor pair = reshape(concat_vec(gap_temporal(feats_i), gap_temporal(feats_j)), {1, 2 * d});
  return head_forward(pair, m.rel_w1, m.rel_b1, m.rel_w2, m.rel_b2, m.rel_w3, m.rel_b3);
}

Tensor reconstruct(const Tensor& delta, const Tensor& anchor) { return add(delta, anchor); }

double reconstruct(double delta, double anchor) { return delta + anchor; }

// ---- checkpoints ------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'C', 'O', 'R', 'E', 'D', 'A', 'C', 'K'};

json config_to_json(const EncoderConfig& c) {
  return json{{"d", c.d},           {"hidden", c.hidden}, {"use_temporal_diff", c.use_temporal_diff},
              {"c", c.c},           {"h", c.h},           {"w", c.w},
              {"l", c.l}};
}

EncoderConfig config_from_json(const json& j) {
  EncoderConfig c;
  c.d = j.at("d").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.use_temporal_diff = j.at("use_temporal_diff").get<bool>();
  c.c = j.at("c").get<int>();
  c.h = j.at("h").get<int>();
  c.w = j.at("w").get<int>();
  c.l = j.at("l").get<int>();
  return c;
}

void append_doubles(std::vector<double>& payload, std::span<const double> vals) {
  payload.insert(payload.end(), vals.begin(), vals.end());
}

json moments_meta(const AdamState& s) {
  return json{{"step_count", s.step_count},
              {"beta1", s.beta1},
              {"beta2", s.beta2},
              {"epsilon", s.epsilon}};
}

AdamState moments_meta_from_json(const json& j) {
  AdamState s;
  s.step_count = j.at("step_count").get<std::uint64_t>();
  s.beta1 = j.at("beta1").get<double>();
  s.beta2 = j.at("beta2").get<double>();
  s.epsilon = j.at("epsilon").get<double>();
  return s;
}

void append_state(std::vector<double>& payload, const AdamState& s) {
  for (std::size_t i = 0; i < s.first_moment.size(); ++i) {
    payload.insert(payload.end(), s.first_moment[i].begin(), s.first_moment[i].end());
    payload.insert(payload.end(), s.second_moment[i].begin(), s.second_moment[i].end());
  }
}

}  // namespace

void save_checkpoint(const Model& m, const std::string& path, const CheckpointMeta& meta,
                     const AdamState* encoder_state, const AdamState* heads_state) {
  if ((encoder_state == nullptr) != (heads_state == nullptr)) {
    throw ContractError("save_checkpoint: optimizer state must cover both groups or neither");
  }

  json header;
  header["config"] = config_to_json(m.cfg);
  header["mode"] = meta.mode;
  header["epoch"] = meta.epoch;
  header["extra"] = json::parse(meta.extra_json);

  std::vector<double> payload;
  json params = json::array();
  for (const auto& [name, t] : m.named_params()) {
    json p;
    p["name"] = name;
    p["shape"] = t.shape();
    p["offset"] = payload.size();
    params.push_back(std::move(p));
    append_doubles(payload, t.data());
  }
  header["params"] = std::move(params);

  if (encoder_state) {
    const auto enc = m.encoder_params();
    const auto heads = m.head_params();
    if (encoder_state->first_moment.size() != enc.size() ||
        heads_state->first_moment.size() != heads.size()) {
      throw ContractError("save_checkpoint: optimizer state does not match parameter groups");
    }
    header["optimizer"] = json{{"encoder", moments_meta(*encoder_state)},
                               {"heads", moments_meta(*heads_state)},
                               {"offset", payload.size()}};
    append_state(payload, *encoder_state);
    append_state(payload, *heads_state);
  } else {
    header["optimizer"] = nullptr;
  }

  const std::string header_str = header.dump();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f.write(kMagic, sizeof(kMagic));
  const std::uint32_t version = kCheckpointVersion;
  f.write(reinterpret_cast<const char*>(&version), sizeof(version));
  const std::uint64_t header_len = header_str.size();
  f.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  f.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  f.write(reinterpret_cast<const char*>(payload.data()),
          static_cast<std::streamsize>(payload.size() * sizeof(double)));
  if (!f) throw IoError("failed writing " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path, const EncoderConfig* expect) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);

  char magic[8];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("not a checkpoint file: " + path);
  }
  std::uint32_t version = 0;
  f.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (!f || version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version) + " in " + path);
  }
  std::uint64_t header_len = 0;
  f.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  if (!f) throw FormatError("truncated checkpoint header in " + path);
  std::string header_str(header_len, '\0');
  f.read(header_str.data(), static_cast<std::streamsize>(header_len));
  if (!f) throw FormatError("truncated checkpoint header in " + path);

  json header;
  try {
    header = json::parse(header_str);
  } catch (const json::exception& e) {
    throw FormatError("checkpoint header parse error in " + path + ": " + e.what());
  }

  std::vector<double> payload;
  {
    std::vector<char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (bytes.size() % sizeof(double) != 0) throw FormatError("truncated payload in " + path);
    payload.resize(bytes.size() / sizeof(double));
    std::memcpy(payload.data(), bytes.data(), bytes.size());
  }

  LoadedCheckpoint out;
  try {
    const EncoderConfig cfg = config_from_json(header.at("config"));
    if (expect && !(cfg == *expect)) {
      throw ContractError("config conflict: checkpoint " + path +
                          " was built for a different architecture (stored d=" +
                          std::to_string(cfg.d) + ", expected d=" + std::to_string(expect->d) + ")");
    }
    out.model = init_params(cfg, 0);
    out.meta.mode = header.at("mode").get<std::string>();
    out.meta.epoch = header.at("epoch").get<int>();
    out.meta.extra_json = header.at("extra").dump();

    auto named = out.model.named_params();
    const auto& params = header.at("params");
    if (params.size() != named.size()) {
      throw FormatError("checkpoint parameter list does not match the architecture");
    }
    for (std::size_t i = 0; i < named.size(); ++i) {
      const auto& p = params.at(i);
      if (p.at("name").get<std::string>() != named[i].first) {
        throw FormatError("checkpoint parameter order mismatch at " + named[i].first);
      }
      const auto shape = p.at("shape").get<std::vector<std::size_t>>();
      if (shape != named[i].second.shape()) {
        throw FormatError("checkpoint shape mismatch at " + named[i].first);
      }
      const std::size_t offset = p.at("offset").get<std::size_t>();
      const std::size_t n = named[i].second.size();
      if (offset + n > payload.size()) throw FormatError("truncated payload in " + path);
      auto dst = named[i].second.mutable_data();
      std::copy(payload.begin() + static_cast<std::ptrdiff_t>(offset),
                payload.begin() + static_cast<std::ptrdiff_t>(offset + n), dst.begin());
    }

    if (!header.at("optimizer").is_null()) {
      const auto& opt = header.at("optimizer");
      AdamState enc_state = moments_meta_from_json(opt.at("encoder"));
      AdamState heads_state = moments_meta_from_json(opt.at("heads"));
      std::size_t at = opt.at("offset").get<std::size_t>();
      auto read_group = [&](AdamState& s, const std::vector<Tensor>& group) {
        for (const auto& t : group) {
          const std::size_t n = t.size();
          if (at + 2 * n > payload.size()) throw FormatError("truncated optimizer state in " + path);
          s.first_moment.emplace_back(payload.begin() + static_cast<std::ptrdiff_t>(at),
                                      payload.begin() + static_cast<std::ptrdiff_t>(at + n));
          at += n;
          s.second_moment.emplace_back(payload.begin() + static_cast<std::ptrdiff_t>(at),
                                       payload.begin() + static_cast<std::ptrdiff_t>(at + n));
          at += n;
        }
      };
      read_group(enc_state, out.model.encoder_params());
      read_group(heads_state, out.model.head_params());
      out.encoder_state = std::move(enc_state);
      out.heads_state = std::move(heads_state);
    }
  } catch (const json::exception& e) {
    throw FormatError("checkpoint header field error in " + path + ": " + e.what());
  }
  return out;
}

}  // namespace coreda
