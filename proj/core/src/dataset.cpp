#include "coreda/dataset.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "coreda/errors.hpp"
#include <nlohmann/json.hpp>

namespace coreda {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t fnv1a64(const unsigned char* bytes, std::size_t n) {
  std::uint64_t h = 14695981039346656037ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

json gen_to_json(const GenConfig& g) {
  return json{{"L", g.L},
              {"c", g.c},
              {"h", g.h},
              {"w", g.w},
              {"blob_sigma", g.blob_sigma},
              {"blob_amplitude", g.blob_amplitude},
              {"jitter_max", g.jitter_max},
              {"seed", g.seed}};
}

GenConfig gen_from_json(const json& j) {
  GenConfig g;
  g.L = j.at("L").get<int>();
  g.c = j.at("c").get<int>();
  g.h = j.at("h").get<int>();
  g.w = j.at("w").get<int>();
  g.blob_sigma = j.at("blob_sigma").get<double>();
  g.blob_amplitude = j.at("blob_amplitude").get<double>();
  g.jitter_max = j.at("jitter_max").get<double>();
  g.seed = j.at("seed").get<std::uint64_t>();
  return g;
}

json dom_to_json(const DomainConfig& d) {
  return json{{"background_kind", background_kind_name(d.background_kind)},
              {"background_period", d.background_period},
              {"gain", d.gain},
              {"offset", d.offset},
              {"noise_sigma", d.noise_sigma}};
}

DomainConfig dom_from_json(const json& j) {
  DomainConfig d;
  d.background_kind = background_kind_from_name(j.at("background_kind").get<std::string>());
  d.background_period = j.at("background_period").get<int>();
  d.gain = j.at("gain").get<double>();
  d.offset = j.at("offset").get<double>();
  d.noise_sigma = j.at("noise_sigma").get<double>();
  return d;
}

}  // namespace

GeneratedDataset generate_dataset(int n, bool labeled, Domain domain, const DomainConfig& dom,
                                  const GenConfig& gen, std::uint64_t seed, bool integer_labels) {
  if (n < 1) throw ContractError("generate_dataset: n must be >= 1");
  validate(dom);
  validate(gen);

  const char* prefix = domain == Domain::source ? "src" : "tgt";
  const std::size_t sample_bytes =
      static_cast<std::size_t>(gen.L) * gen.c * gen.h * gen.w * sizeof(float);

  GeneratedDataset out;
  out.dataset.manifest.labeled = labeled;
  out.dataset.manifest.gen = gen;
  out.dataset.manifest.dom = dom;

  for (int i = 0; i < n; ++i) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
    double skill = rng.uniform(6.0, 30.0);
    if (integer_labels) skill = std::round(skill);
    VideoSample v = gen_video(skill, dom, gen, rng);
    std::ostringstream id;
    id << prefix << '-';
    id.width(4);
    id.fill('0');
    id << i;
    v.id = id.str();
    v.domain = domain;
    out.true_labels.emplace_back(v.id, skill);
    if (!labeled) v.label.reset();

    ManifestEntry e;
    e.id = v.id;
    e.offset = static_cast<std::uint64_t>(i) * sample_bytes;
    e.label = v.label;
    e.domain = domain;
    out.dataset.manifest.entries.push_back(std::move(e));
    out.dataset.samples.push_back(std::move(v));
  }
  return out;
}

std::string save_dataset(const Dataset& ds, const std::string& dir, const std::string& stem) {
  fs::create_directories(dir);
  const std::string blob_name = stem + ".blob";
  const fs::path blob_path = fs::path(dir) / blob_name;
  const fs::path manifest_path = fs::path(dir) / (stem + ".manifest.json");

  std::vector<unsigned char> blob;
  for (const auto& s : ds.samples) {
    const auto& data = s.frames.data();
    const std::size_t at = blob.size();
    blob.resize(at + data.size() * sizeof(float));
    for (std::size_t i = 0; i < data.size(); ++i) {
      const float f = static_cast<float>(data[i]);
      std::memcpy(blob.data() + at + i * sizeof(float), &f, sizeof(float));
    }
  }

  {
    std::ofstream bf(blob_path, std::ios::binary);
    if (!bf) throw IoError("cannot open " + blob_path.string() + " for writing");
    bf.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
    if (!bf) throw IoError("failed writing " + blob_path.string());
  }

  json j;
  j["format_version"] = ds.manifest.format_version;
  j["kind"] = "coreda-dataset";
  j["labeled"] = ds.manifest.labeled;
  j["blob_file"] = blob_name;
  j["blob_checksum"] = hex64(fnv1a64(blob.data(), blob.size()));
  j["gen"] = gen_to_json(ds.manifest.gen);
  j["domain"] = dom_to_json(ds.manifest.dom);
  json entries = json::array();
  for (const auto& e : ds.manifest.entries) {
    json je;
    je["id"] = e.id;
    je["offset"] = e.offset;
    if (e.label) je["label"] = *e.label;
    je["domain"] = domain_name(e.domain);
    entries.push_back(std::move(je));
  }
  j["entries"] = std::move(entries);

  std::ofstream mf(manifest_path);
  if (!mf) throw IoError("cannot open " + manifest_path.string() + " for writing");
  mf << j.dump(2) << '\n';
  if (!mf) throw IoError("failed writing " + manifest_path.string());
  return manifest_path.string();
}

Dataset load_dataset(const std::string& manifest_path) {
  std::ifstream mf(manifest_path);
  if (!mf) throw IoError("cannot open " + manifest_path);
  json j;
  try {
    mf >> j;
  } catch (const json::exception& e) {
    throw FormatError("manifest parse error in " + manifest_path + ": " + e.what());
  }

  Dataset ds;
  try {
    ds.manifest.format_version = j.at("format_version").get<int>();
    if (ds.manifest.format_version != kDatasetFormatVersion) {
      throw FormatError("unsupported dataset format version " +
                        std::to_string(ds.manifest.format_version));
    }
    ds.manifest.labeled = j.at("labeled").get<bool>();
    ds.manifest.blob_file = j.at("blob_file").get<std::string>();
    ds.manifest.blob_checksum = j.at("blob_checksum").get<std::string>();
    ds.manifest.gen = gen_from_json(j.at("gen"));
    ds.manifest.dom = dom_from_json(j.at("domain"));
    for (const auto& je : j.at("entries")) {
      ManifestEntry e;
      e.id = je.at("id").get<std::string>();
      e.offset = je.at("offset").get<std::uint64_t>();
      if (je.contains("label") && !je.at("label").is_null()) {
        e.label = je.at("label").get<double>();
      }
      e.domain = domain_from_name(je.at("domain").get<std::string>());
      ds.manifest.entries.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw FormatError("manifest field error in " + manifest_path + ": " + e.what());
  }

  std::set<std::string> seen;
  std::uint64_t prev_offset = 0;
  for (std::size_t i = 0; i < ds.manifest.entries.size(); ++i) {
    const auto& e = ds.manifest.entries[i];
    if (!seen.insert(e.id).second) throw FormatError("manifest: duplicate id " + e.id);
    if (i > 0 && e.offset <= prev_offset) throw FormatError("manifest: offsets not increasing");
    prev_offset = e.offset;
  }

  const fs::path blob_path = fs::path(manifest_path).parent_path() / ds.manifest.blob_file;
  std::ifstream bf(blob_path, std::ios::binary);
  if (!bf) throw IoError("cannot open " + blob_path.string());
  std::vector<unsigned char> blob((std::istreambuf_iterator<char>(bf)),
                                  std::istreambuf_iterator<char>());

  if (hex64(fnv1a64(blob.data(), blob.size())) != ds.manifest.blob_checksum) {
    throw FormatError("blob checksum mismatch for " + blob_path.string());
  }

  const auto& g = ds.manifest.gen;
  const std::size_t sample_vals =
      static_cast<std::size_t>(g.L) * g.c * g.h * g.w;
  const std::size_t sample_bytes = sample_vals * sizeof(float);
  for (const auto& e : ds.manifest.entries) {
    if (e.offset + sample_bytes > blob.size()) {
      throw FormatError("blob truncated: " + e.id + " extends past end of " + blob_path.string());
    }
    VideoSample v;
    std::vector<double> vals(sample_vals);
    for (std::size_t i = 0; i < sample_vals; ++i) {
      float f;
      std::memcpy(&f, blob.data() + e.offset + i * sizeof(float), sizeof(float));
      vals[i] = static_cast<double>(f);
    }
    v.frames = Tensor::from_data({static_cast<std::size_t>(g.L), static_cast<std::size_t>(g.c),
                                  static_cast<std::size_t>(g.h), static_cast<std::size_t>(g.w)},
                                 std::move(vals));
    v.label = e.label;
    v.domain = e.domain;
    v.id = e.id;
    ds.samples.push_back(std::move(v));
  }
  return ds;
}

std::string write_sealed_labels(const std::vector<std::pair<std::string, double>>& labels,
                                const std::string& dir, const std::string& stem) {
  fs::create_directories(dir);
  const fs::path path = fs::path(dir) / (stem + ".labels.sealed.json");
  json j;
  j["format_version"] = kDatasetFormatVersion;
  j["kind"] = "coreda-sealed-labels";
  json m = json::object();
  for (const auto& [id, label] : labels) m[id] = label;
  j["labels"] = std::move(m);
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << j.dump(2) << '\n';
  if (!f) throw IoError("failed writing " + path.string());
  return path.string();
}

std::map<std::string, double> load_sealed_labels(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw FormatError("sealed label parse error in " + path + ": " + e.what());
  }
  if (j.value("kind", "") != "coreda-sealed-labels") {
    throw FormatError("not a sealed label file: " + path);
  }
  std::map<std::string, double> out;
  for (const auto& [id, label] : j.at("labels").items()) out[id] = label.get<double>();
  return out;
}

}  // namespace coreda
