#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "setnet/dense_batch.hpp"

namespace setnet {

struct Split {
  DenseBatch x;
  DenseBatch y;  ///< one-hot
  std::size_t size() const { return x.rows; }
};

/// How raw features were mapped to network inputs: x = raw * scale - mean.
struct Normalization {
  std::string scheme = "none";
  double scale = 1.0;
  std::vector<double> mean;  ///< per feature; empty when not centered
};

struct Dataset {
  Split train;
  Split val;
  std::size_t class_count = 0;
  std::size_t feature_count = 0;
  Normalization normalization;
};

inline constexpr std::size_t kCifarImageBytes = 32 * 32 * 3;
inline constexpr std::size_t kCifarRecordBytes = 1 + kCifarImageBytes;
inline constexpr std::size_t kCifarRecordsPerFile = 10000;
inline constexpr std::size_t kCifarClasses = 10;

/// Raw CIFAR-10 records: one label byte and 3072 pixel bytes each.
struct CifarRecords {
  std::vector<std::uint8_t> labels;
  std::vector<std::uint8_t> pixels;  ///< labels.size() * 3072, record-major
  std::size_t size() const { return labels.size(); }
};

/// Reads one batch file. With `expected_records` set, the file size must be
/// exactly expected_records * 3073 bytes; otherwise any whole number of
/// records is accepted. Throws on missing or truncated files and label > 9.
CifarRecords read_cifar_batch(const std::filesystem::path& path,
                              std::optional<std::size_t> expected_records = kCifarRecordsPerFile);

void write_cifar_batch(const std::filesystem::path& path, const CifarRecords& records);

struct CifarLoadOptions {
  std::optional<std::size_t> records_per_file = kCifarRecordsPerFile;
  std::size_t max_train = std::numeric_limits<std::size_t>::max();
  std::size_t max_val = std::numeric_limits<std::size_t>::max();
};

/// data_batch_1..5.bin as train, test_batch.bin as validation. Pixels are
/// scaled to [0, 1], then the per-feature train mean is subtracted.
Dataset load_cifar10(const std::filesystem::path& dir, const CifarLoadOptions& options = {});

/// Normalizes raw training/validation records the same way load_cifar10 does.
Dataset dataset_from_records(const CifarRecords& train, const CifarRecords& val);

/// Inverts the dataset's normalization back to bytes (rounded, clamped) and
/// writes the five train files and the test file. Requires 3072 features and
/// at most 10 classes.
void save_cifar10(const std::filesystem::path& dir, const Dataset& data);

/// Gaussian blobs with unit variance, one per class; class means sit on a
/// simplex with pairwise distance `separation`. 80% of each class goes to
/// the train split, the rest to validation.
Dataset make_synthetic(std::size_t classes, std::size_t features, std::size_t n_per_class,
                       double separation, std::uint64_t seed);

/// "cifar10:<dir>" or "synthetic:classes=2,features=16,n=250,sep=10,seed=1".
/// Omitted synthetic keys take those defaults.
Dataset load_dataset(const std::string& spec, const CifarLoadOptions& cifar_options = {});

}  // namespace setnet
