#include "kanreg/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace kanreg {

namespace {

struct MhdHeader {
  std::array<int, 3> dims{0, 0, 0};
  std::array<double, 3> spacing{1.0, 1.0, 1.0};
  std::string element_type;
  int channels = 1;
  std::string data_file;
};

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

MhdHeader read_header(const std::string& mhd_path) {
  std::ifstream in(mhd_path);
  if (!in) throw std::runtime_error("cannot open header: " + mhd_path);
  MhdHeader h;
  std::string line;
  while (std::getline(in, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (!trim(line).empty())
        throw std::runtime_error("malformed header line in " + mhd_path + ": " + line);
      continue;
    }
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    std::istringstream vs(val);
    if (key == "NDims") {
      int n;
      vs >> n;
      if (n != 3) throw std::runtime_error(mhd_path + ": only NDims = 3 supported");
    } else if (key == "DimSize") {
      if (!(vs >> h.dims[0] >> h.dims[1] >> h.dims[2]))
        throw std::runtime_error(mhd_path + ": bad DimSize");
    } else if (key == "ElementSpacing") {
      if (!(vs >> h.spacing[0] >> h.spacing[1] >> h.spacing[2]))
        throw std::runtime_error(mhd_path + ": bad ElementSpacing");
    } else if (key == "ElementType") {
      h.element_type = val;
    } else if (key == "ElementNumberOfChannels") {
      vs >> h.channels;
    } else if (key == "ElementDataFile") {
      h.data_file = val;
    }
    // unknown keys are ignored
  }
  if (h.dims[0] <= 0 || h.dims[1] <= 0 || h.dims[2] <= 0)
    throw std::runtime_error(mhd_path + ": missing or invalid DimSize");
  if (h.element_type.empty())
    throw std::runtime_error(mhd_path + ": missing ElementType");
  if (h.data_file.empty())
    throw std::runtime_error(mhd_path + ": missing ElementDataFile");
  return h;
}

std::size_t element_size(const std::string& type) {
  if (type == "MET_UCHAR") return 1;
  if (type == "MET_SHORT") return 2;
  if (type == "MET_FLOAT") return 4;
  if (type == "MET_DOUBLE") return 8;
  throw std::runtime_error("unsupported ElementType: " + type);
}

std::string sibling(const std::string& mhd_path, const std::string& data_file) {
  return (std::filesystem::path(mhd_path).parent_path() / data_file).string();
}

std::vector<double> read_raw(const std::string& mhd_path, const MhdHeader& h) {
  const std::size_t count =
      std::size_t(h.dims[0]) * h.dims[1] * h.dims[2] * h.channels;
  std::string raw_path = sibling(mhd_path, h.data_file);
  std::ifstream in(raw_path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open data file: " + raw_path);
  in.seekg(0, std::ios::end);
  std::size_t bytes = std::size_t(in.tellg());
  in.seekg(0);
  if (bytes != count * element_size(h.element_type))
    throw std::runtime_error(raw_path + ": data size mismatch (expected " +
                             std::to_string(count * element_size(h.element_type)) +
                             " bytes, found " + std::to_string(bytes) + ")");
  std::vector<double> out(count);
  if (h.element_type == "MET_UCHAR") {
    std::vector<std::uint8_t> buf(count);
    in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(bytes));
    std::copy(buf.begin(), buf.end(), out.begin());
  } else if (h.element_type == "MET_SHORT") {
    std::vector<std::int16_t> buf(count);
    in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(bytes));
    std::copy(buf.begin(), buf.end(), out.begin());
  } else if (h.element_type == "MET_FLOAT") {
    std::vector<float> buf(count);
    in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(bytes));
    std::copy(buf.begin(), buf.end(), out.begin());
  } else {
    in.read(reinterpret_cast<char*>(out.data()), std::streamsize(bytes));
  }
  if (!in) throw std::runtime_error(raw_path + ": short read");
  return out;
}

void write_header(const std::string& mhd_path, const std::array<int, 3>& dims,
                  const std::array<double, 3>& spacing, const std::string& type,
                  int channels, const std::string& data_file) {
  std::ofstream out(mhd_path);
  if (!out) throw std::runtime_error("cannot write header: " + mhd_path);
  out << "NDims = 3\n";
  out << "DimSize = " << dims[0] << ' ' << dims[1] << ' ' << dims[2] << '\n';
  out << "ElementSpacing = " << spacing[0] << ' ' << spacing[1] << ' '
      << spacing[2] << '\n';
  if (channels != 1) out << "ElementNumberOfChannels = " << channels << '\n';
  out << "ElementType = " << type << '\n';
  out << "ElementDataFile = " << data_file << '\n';
}

void write_raw(const std::string& raw_path, const std::vector<double>& data,
               const std::string& type) {
  std::ofstream out(raw_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write data file: " + raw_path);
  if (type == "MET_UCHAR") {
    std::vector<std::uint8_t> buf(data.size());
    for (std::size_t i = 0; i < data.size(); ++i)
      buf[i] = static_cast<std::uint8_t>(std::clamp(data[i], 0.0, 255.0));
    out.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size()));
  } else if (type == "MET_SHORT") {
    std::vector<std::int16_t> buf(data.size());
    for (std::size_t i = 0; i < data.size(); ++i)
      buf[i] = static_cast<std::int16_t>(std::clamp(data[i], -32768.0, 32767.0));
    out.write(reinterpret_cast<const char*>(buf.data()),
              std::streamsize(buf.size() * 2));
  } else if (type == "MET_FLOAT") {
    std::vector<float> buf(data.begin(), data.end());
    out.write(reinterpret_cast<const char*>(buf.data()),
              std::streamsize(buf.size() * 4));
  } else if (type == "MET_DOUBLE") {
    out.write(reinterpret_cast<const char*>(data.data()),
              std::streamsize(data.size() * 8));
  } else {
    throw std::runtime_error("unsupported ElementType: " + type);
  }
  if (!out) throw std::runtime_error("write failed: " + raw_path);
}

std::string raw_name(const std::string& mhd_path) {
  return std::filesystem::path(mhd_path).filename().replace_extension(".raw").string();
}

}  // namespace

Volume read_volume(const std::string& mhd_path) {
  MhdHeader h = read_header(mhd_path);
  if (h.channels != 1)
    throw std::runtime_error(mhd_path + ": expected single-channel volume");
  Volume v;
  v.dims = h.dims;
  v.spacing = h.spacing;
  v.data = read_raw(mhd_path, h);
  return v;
}

LabelVolume read_labels(const std::string& mhd_path) {
  MhdHeader h = read_header(mhd_path);
  if (h.channels != 1)
    throw std::runtime_error(mhd_path + ": expected single-channel labels");
  std::vector<double> raw = read_raw(mhd_path, h);
  LabelVolume v;
  v.dims = h.dims;
  v.spacing = h.spacing;
  v.labels.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i)
    v.labels[i] = static_cast<int>(std::lround(raw[i]));
  return v;
}

Mask read_mask(const std::string& mhd_path) {
  MhdHeader h = read_header(mhd_path);
  if (h.channels != 1)
    throw std::runtime_error(mhd_path + ": expected single-channel mask");
  std::vector<double> raw = read_raw(mhd_path, h);
  std::vector<std::uint8_t> bits(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) bits[i] = raw[i] != 0.0 ? 1 : 0;
  return Mask::from_data(h.dims, bits);
}

std::vector<double> read_field(const std::string& mhd_path, std::array<int, 3>& dims) {
  MhdHeader h = read_header(mhd_path);
  if (h.channels != 3)
    throw std::runtime_error(mhd_path + ": expected 3-channel field");
  dims = h.dims;
  return read_raw(mhd_path, h);
}

void write_volume(const std::string& mhd_path, const Volume& vol,
                  const std::string& element_type) {
  std::string rn = raw_name(mhd_path);
  write_header(mhd_path, vol.dims, vol.spacing, element_type, 1, rn);
  write_raw(sibling(mhd_path, rn), vol.data, element_type);
}

void write_labels(const std::string& mhd_path, const LabelVolume& vol) {
  std::vector<double> data(vol.labels.begin(), vol.labels.end());
  std::string rn = raw_name(mhd_path);
  write_header(mhd_path, vol.dims, vol.spacing, "MET_SHORT", 1, rn);
  write_raw(sibling(mhd_path, rn), data, "MET_SHORT");
}

void write_field(const std::string& mhd_path, const std::vector<double>& field,
                 const std::array<int, 3>& dims, const std::array<double, 3>& spacing) {
  if (field.size() != std::size_t(dims[0]) * dims[1] * dims[2] * 3)
    throw std::runtime_error("write_field: size mismatch");
  std::string rn = raw_name(mhd_path);
  write_header(mhd_path, dims, spacing, "MET_DOUBLE", 3, rn);
  write_raw(sibling(mhd_path, rn), field, "MET_DOUBLE");
}

LandmarkSet read_landmarks(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open landmarks: " + path);
  LandmarkSet lms;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::istringstream ls(t);
    std::array<double, 3> p;
    std::string extra;
    if (!(ls >> p[0] >> p[1] >> p[2]) || (ls >> extra))
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected three coordinates");
    lms.points.push_back(p);
  }
  return lms;
}

void write_landmarks(const std::string& path, const LandmarkSet& lms) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write landmarks: " + path);
  out.precision(17);
  for (const auto& p : lms.points) out << p[0] << ' ' << p[1] << ' ' << p[2] << '\n';
}

Manifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": invalid JSON: " + e.what());
  }

  Manifest m;
  auto str = [&](const char* key, std::string& dst, bool required) {
    if (j.contains(key)) dst = j.at(key).get<std::string>();
    else if (required) throw std::runtime_error(path + ": missing key '" + key + "'");
  };
  str("fixed", m.fixed_path, true);
  str("moving", m.moving_path, true);
  str("mask", m.mask_path, false);
  str("landmarks_fixed", m.landmarks_fixed, false);
  str("landmarks_moving", m.landmarks_moving, false);
  str("labels_fixed", m.labels_fixed, false);
  str("labels_moving", m.labels_moving, false);
  str("output_dir", m.output_dir, false);
  if (j.contains("seeds")) m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();

  if (j.contains("config")) {
    const auto& c = j.at("config");
    RegistrationConfig& cfg = m.config;
    if (c.contains("mode")) {
      std::string mode = c.at("mode").get<std::string>();
      if (mode == "fixed") cfg.basis.mode = BasisConfig::Mode::Fixed;
      else if (mode == "randomized") cfg.basis.mode = BasisConfig::Mode::Randomized;
      else if (mode == "adaptive") cfg.basis.mode = BasisConfig::Mode::Adaptive;
      else throw std::runtime_error(path + ": unknown mode '" + mode + "'");
    }
    if (c.contains("max_degree")) cfg.basis.max_degree = c.at("max_degree").get<int>();
    if (c.contains("sample_count"))
      cfg.basis.sample_count = c.at("sample_count").get<int>();
    if (c.contains("sample_max")) cfg.basis.sample_max = c.at("sample_max").get<int>();
    if (c.contains("widths")) cfg.widths = c.at("widths").get<std::vector<int>>();
    if (c.contains("iterations")) cfg.iterations = c.at("iterations").get<int>();
    if (c.contains("batch_size")) cfg.batch_size = c.at("batch_size").get<int>();
    if (c.contains("lambda")) cfg.weights.lambda = c.at("lambda").get<double>();
    if (c.contains("gamma")) cfg.weights.gamma = c.at("gamma").get<double>();
    if (c.contains("epsilon")) cfg.weights.epsilon = c.at("epsilon").get<double>();
    if (c.contains("lr")) cfg.base_lr = c.at("lr").get<double>();
    if (c.contains("constant_fraction"))
      cfg.constant_fraction = c.at("constant_fraction").get<double>();
    if (c.contains("single_precision"))
      cfg.single_precision = c.at("single_precision").get<bool>();
    if (c.contains("threads")) cfg.threads = c.at("threads").get<int>();
  }

  if (const char* env = std::getenv("KANREG_OUTPUT_DIR")) m.output_dir = env;
  return m;
}

void write_history_csv(const std::string& path, const std::vector<IterRecord>& history) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write history: " + path);
  out << "iteration,data,smooth,fold,total,lr\n";
  out.precision(12);
  for (std::size_t i = 0; i < history.size(); ++i) {
    const IterRecord& r = history[i];
    out << i << ',' << r.data << ',' << r.smooth << ',' << r.fold << ','
        << r.total << ',' << r.lr << '\n';
  }
}

namespace {

template <class F>
std::pair<double, double> mean_std(const std::vector<SeedMetrics>& rows, F&& get) {
  double sum = 0.0;
  for (const auto& r : rows) sum += get(r);
  double mean = sum / double(rows.size());
  double ss = 0.0;
  for (const auto& r : rows) ss += (get(r) - mean) * (get(r) - mean);
  double sd = rows.size() > 1 ? std::sqrt(ss / double(rows.size() - 1)) : 0.0;
  return {mean, sd};
}

}  // namespace

void write_metrics_csv(const std::string& path, const std::vector<SeedMetrics>& rows) {
  if (rows.empty()) throw std::runtime_error("write_metrics_csv: no rows");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write metrics: " + path);
  out.precision(10);
  out << "seed,final_total,tre_mean,tre_std,njd_pct,seconds,dice_mean,hd95_mm\n";
  auto opt = [&](const std::optional<double>& v) {
    if (v) out << *v;
  };
  for (const auto& r : rows) {
    out << r.seed << ',' << r.final_total << ',' << r.tre_mean << ',' << r.tre_std
        << ',' << r.njd_pct << ',' << r.seconds << ',';
    opt(r.dice_mean);
    out << ',';
    opt(r.hd95_mm);
    out << '\n';
  }
  auto [tm, ts] = mean_std(rows, [](const SeedMetrics& r) { return r.tre_mean; });
  auto [nm, ns] = mean_std(rows, [](const SeedMetrics& r) { return r.njd_pct; });
  out << "# aggregate tre_mean " << tm << " +/- " << ts << ", njd_pct " << nm
      << " +/- " << ns << '\n';
}

void write_metrics_json(const std::string& path, const std::vector<SeedMetrics>& rows) {
  if (rows.empty()) throw std::runtime_error("write_metrics_json: no rows");
  nlohmann::json j;
  j["runs"] = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json e{{"seed", r.seed},        {"final_total", r.final_total},
                     {"tre_mean", r.tre_mean}, {"tre_std", r.tre_std},
                     {"njd_pct", r.njd_pct},   {"seconds", r.seconds}};
    if (r.dice_mean) e["dice_mean"] = *r.dice_mean;
    if (r.hd95_mm) e["hd95_mm"] = *r.hd95_mm;
    j["runs"].push_back(e);
  }
  auto [tm, ts] = mean_std(rows, [](const SeedMetrics& r) { return r.tre_mean; });
  auto [nm, ns] = mean_std(rows, [](const SeedMetrics& r) { return r.njd_pct; });
  j["aggregate"] = {{"tre_mean", tm}, {"tre_std", ts}, {"njd_mean", nm}, {"njd_std", ns}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write metrics: " + path);
  out << j.dump(2) << '\n';
}

}  // namespace kanreg
