#pragma once

#include <string_view>
#include <vector>

#include "json.hpp"
#include "prognos/matrix.h"

namespace prognos {

enum class Scaler { kNone, kMinMax, kStandard, kMaxAbs, kRowL2, kQuantileUniform };
enum class DimRed { kNone, kVarianceThreshold, kPca };

std::string_view ToString(Scaler s);
std::string_view ToString(DimRed d);
Scaler ParseScaler(std::string_view s);
DimRed ParseDimRed(std::string_view s);

struct StageConfig {
  Scaler scaler = Scaler::kNone;
  DimRed dimred = DimRed::kNone;
  // Variance threshold, or number of PCA components.
  double dimred_param = 0.0;

  bool operator==(const StageConfig&) const = default;
};

nlohmann::json StageConfigToJson(const StageConfig& c);
StageConfig StageConfigFromJson(const nlohmann::json& j);

// A fitted scaling + dimensionality-reduction stage. Scaling runs first.
// Fitting only reads the training matrix; Apply never changes the stage.
class FittedStage {
 public:
  FittedStage() = default;

  // Throws DegenerateInput or BadParam.
  static FittedStage Fit(const Matrix& train, const StageConfig& cfg);

  // Throws ShapeMismatch.
  Matrix Apply(const Matrix& m) const;

  const StageConfig& config() const { return cfg_; }
  size_t input_dim() const { return input_dim_; }
  size_t output_dim() const { return output_dim_; }

  // PCA basis as components x input_dim rows (orthonormal), and the centre.
  const Matrix& pca_basis() const { return basis_; }
  const std::vector<double>& pca_center() const { return center_; }
  const std::vector<size_t>& kept_columns() const { return kept_; }

  nlohmann::json ToJson() const;
  static FittedStage FromJson(const nlohmann::json& j);

 private:
  void ScaleRow(std::span<double> row) const;

  StageConfig cfg_;
  size_t input_dim_ = 0;
  size_t output_dim_ = 0;
  // minmax: (min, range); standard: (mean, sd); maxabs: (0, maxabs).
  std::vector<double> offset_;
  std::vector<double> scale_;
  // Quantile grid per feature (sorted reference values).
  std::vector<std::vector<double>> quantiles_;
  std::vector<size_t> kept_;    // variance threshold survivors
  Matrix basis_;                // pca
  std::vector<double> center_;  // pca
};

inline FittedStage FitStage(const Matrix& train, const StageConfig& cfg) {
  return FittedStage::Fit(train, cfg);
}
inline Matrix ApplyStage(const FittedStage& s, const Matrix& m) { return s.Apply(m); }

}  // namespace prognos
