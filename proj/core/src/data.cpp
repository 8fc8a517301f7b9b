#include "setnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "setnet/seeding.hpp"

namespace setnet {

namespace fs = std::filesystem;

CifarRecords read_cifar_batch(const fs::path& path, std::optional<std::size_t> expected_records) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw std::runtime_error("CIFAR batch '" + path.string() + "' is missing");
  const auto size = static_cast<std::size_t>(in.tellg());
  if (expected_records && size != *expected_records * kCifarRecordBytes) {
    throw std::runtime_error("CIFAR batch '" + path.string() + "' has " +
                             std::to_string(size) + " bytes, expected " +
                             std::to_string(*expected_records * kCifarRecordBytes));
  }
  if (size % kCifarRecordBytes != 0) {
    throw std::runtime_error("CIFAR batch '" + path.string() + "' is truncated (" +
                             std::to_string(size) + " bytes)");
  }
  std::vector<std::uint8_t> raw(size);
  in.seekg(0);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(size));
  if (!in) throw std::runtime_error("CIFAR batch '" + path.string() + "' could not be read");

  const std::size_t n = size / kCifarRecordBytes;
  CifarRecords rec;
  rec.labels.resize(n);
  rec.pixels.resize(n * kCifarImageBytes);
  for (std::size_t r = 0; r < n; ++r) {
    const auto* src = raw.data() + r * kCifarRecordBytes;
    if (src[0] >= kCifarClasses) {
      throw std::runtime_error("CIFAR batch '" + path.string() + "' record " +
                               std::to_string(r) + " has label " + std::to_string(src[0]));
    }
    rec.labels[r] = src[0];
    std::copy(src + 1, src + kCifarRecordBytes, rec.pixels.begin() + r * kCifarImageBytes);
  }
  return rec;
}

void write_cifar_batch(const fs::path& path, const CifarRecords& records) {
  if (records.pixels.size() != records.size() * kCifarImageBytes) {
    throw std::invalid_argument("write_cifar_batch: pixel count does not match labels");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  for (std::size_t r = 0; r < records.size(); ++r) {
    out.put(static_cast<char>(records.labels[r]));
    out.write(reinterpret_cast<const char*>(records.pixels.data() + r * kCifarImageBytes),
              kCifarImageBytes);
  }
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

namespace {

CifarRecords take(CifarRecords rec, std::size_t limit) {
  if (rec.size() > limit) {
    rec.labels.resize(limit);
    rec.pixels.resize(limit * kCifarImageBytes);
  }
  return rec;
}

void append(CifarRecords& dst, const CifarRecords& src) {
  dst.labels.insert(dst.labels.end(), src.labels.begin(), src.labels.end());
  dst.pixels.insert(dst.pixels.end(), src.pixels.begin(), src.pixels.end());
}

Split to_split(const CifarRecords& rec, const std::vector<double>& mean, double scale) {
  Split s{DenseBatch(rec.size(), kCifarImageBytes), DenseBatch(rec.size(), kCifarClasses)};
  for (std::size_t r = 0; r < rec.size(); ++r) {
    auto row = s.x.row(r);
    const auto* px = rec.pixels.data() + r * kCifarImageBytes;
    for (std::size_t f = 0; f < kCifarImageBytes; ++f) row[f] = px[f] * scale - mean[f];
    s.y.at(r, rec.labels[r]) = 1.0;
  }
  return s;
}

}  // namespace

Dataset dataset_from_records(const CifarRecords& train, const CifarRecords& val) {
  if (train.size() == 0) throw std::invalid_argument("CIFAR train split is empty");
  constexpr double scale = 1.0 / 255.0;
  std::vector<double> mean(kCifarImageBytes, 0.0);
  for (std::size_t r = 0; r < train.size(); ++r) {
    const auto* px = train.pixels.data() + r * kCifarImageBytes;
    for (std::size_t f = 0; f < kCifarImageBytes; ++f) mean[f] += px[f] * scale;
  }
  for (auto& m : mean) m /= static_cast<double>(train.size());

  Dataset d;
  d.class_count = kCifarClasses;
  d.feature_count = kCifarImageBytes;
  d.train = to_split(train, mean, scale);
  d.val = to_split(val, mean, scale);
  d.normalization = {"scale-1/255-train-mean-centered", scale, std::move(mean)};
  return d;
}

Dataset load_cifar10(const fs::path& dir, const CifarLoadOptions& options) {
  CifarRecords train;
  for (int i = 1; i <= 5 && train.size() < options.max_train; ++i) {
    append(train, read_cifar_batch(dir / ("data_batch_" + std::to_string(i) + ".bin"),
                                   options.records_per_file));
  }
  auto val = read_cifar_batch(dir / "test_batch.bin", options.records_per_file);
  return dataset_from_records(take(std::move(train), options.max_train),
                              take(std::move(val), options.max_val));
}

namespace {

CifarRecords to_records(const Split& split, const Normalization& norm) {
  CifarRecords rec;
  rec.labels.resize(split.size());
  rec.pixels.resize(split.size() * kCifarImageBytes);
  for (std::size_t r = 0; r < split.size(); ++r) {
    const auto y = split.y.row(r);
    rec.labels[r] = static_cast<std::uint8_t>(std::max_element(y.begin(), y.end()) - y.begin());
    const auto x = split.x.row(r);
    for (std::size_t f = 0; f < kCifarImageBytes; ++f) {
      const double m = norm.mean.empty() ? 0.0 : norm.mean[f];
      const double raw = std::round((x[f] + m) / norm.scale);
      rec.pixels[r * kCifarImageBytes + f] =
          static_cast<std::uint8_t>(std::clamp(raw, 0.0, 255.0));
    }
  }
  return rec;
}

}  // namespace

void save_cifar10(const fs::path& dir, const Dataset& data) {
  if (data.feature_count != kCifarImageBytes || data.class_count > kCifarClasses) {
    throw std::invalid_argument("save_cifar10 needs 3072 features and at most 10 classes");
  }
  fs::create_directories(dir);
  const auto train = to_records(data.train, data.normalization);
  const std::size_t n = train.size();
  for (std::size_t i = 0; i < 5; ++i) {
    const std::size_t lo = n * i / 5;
    const std::size_t hi = n * (i + 1) / 5;
    CifarRecords part;
    part.labels.assign(train.labels.begin() + lo, train.labels.begin() + hi);
    part.pixels.assign(train.pixels.begin() + lo * kCifarImageBytes,
                       train.pixels.begin() + hi * kCifarImageBytes);
    write_cifar_batch(dir / ("data_batch_" + std::to_string(i + 1) + ".bin"), part);
  }
  write_cifar_batch(dir / "test_batch.bin", to_records(data.val, data.normalization));
}

Dataset make_synthetic(std::size_t classes, std::size_t features, std::size_t n_per_class,
                       double separation, std::uint64_t seed) {
  if (classes < 1 || features < 1 || n_per_class < 1) {
    throw std::invalid_argument("make_synthetic: counts must be at least 1");
  }
  std::mt19937_64 rng(mix_seed(seed, "synthetic"));
  std::normal_distribution<double> noise(0.0, 1.0);

  // Means: scaled basis vectors when they fit (exact simplex), otherwise
  // random unit directions which are close to orthogonal in high dimension.
  const double radius = separation / std::sqrt(2.0);
  std::vector<std::vector<double>> means(classes, std::vector<double>(features, 0.0));
  for (std::size_t c = 0; c < classes; ++c) {
    if (classes <= features) {
      means[c][c] = radius;
    } else {
      double norm = 0.0;
      for (auto& v : means[c]) {
        v = noise(rng);
        norm += v * v;
      }
      for (auto& v : means[c]) v *= radius / std::sqrt(norm);
    }
  }

  const std::size_t n_train = std::max<std::size_t>(1, n_per_class * 4 / 5);
  std::vector<std::pair<std::size_t, std::vector<double>>> train, val;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < n_per_class; ++i) {
      std::vector<double> x(features);
      for (std::size_t f = 0; f < features; ++f) x[f] = means[c][f] + noise(rng);
      (i < n_train ? train : val).emplace_back(c, std::move(x));
    }
  }
  std::shuffle(train.begin(), train.end(), rng);
  std::shuffle(val.begin(), val.end(), rng);

  const auto pack = [&](const auto& samples) {
    Split s{DenseBatch(samples.size(), features), DenseBatch(samples.size(), classes)};
    for (std::size_t r = 0; r < samples.size(); ++r) {
      std::copy(samples[r].second.begin(), samples[r].second.end(), s.x.row(r).begin());
      s.y.at(r, samples[r].first) = 1.0;
    }
    return s;
  };
  Dataset d;
  d.class_count = classes;
  d.feature_count = features;
  d.train = pack(train);
  d.val = pack(val);
  return d;
}

Dataset load_dataset(const std::string& spec, const CifarLoadOptions& cifar_options) {
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (kind == "cifar10") {
    if (rest.empty()) throw std::invalid_argument("cifar10 dataset needs a directory");
    return load_cifar10(rest, cifar_options);
  }
  if (kind != "synthetic") {
    throw std::invalid_argument("unknown dataset '" + spec +
                                "' (expected cifar10:<dir> or synthetic:<spec>)");
  }
  std::map<std::string, double> values{
      {"classes", 2}, {"features", 16}, {"n", 250}, {"sep", 10}, {"seed", 1}};
  std::stringstream ss(rest);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    const std::string key = item.substr(0, eq);
    if (eq == std::string::npos || !values.count(key)) {
      throw std::invalid_argument("bad synthetic dataset field '" + item + "'");
    }
    values[key] = std::stod(item.substr(eq + 1));
  }
  return make_synthetic(static_cast<std::size_t>(values["classes"]),
                        static_cast<std::size_t>(values["features"]),
                        static_cast<std::size_t>(values["n"]), values["sep"],
                        static_cast<std::uint64_t>(values["seed"]));
}

}  // namespace setnet
