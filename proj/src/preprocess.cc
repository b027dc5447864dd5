#include "prognos/preprocess.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "prognos/error.h"
#include "prognos/kernels.h"

namespace prognos {

std::string_view ToString(Scaler s) {
  switch (s) {
    case Scaler::kNone: return "none";
    case Scaler::kMinMax: return "minmax";
    case Scaler::kStandard: return "standard";
    case Scaler::kMaxAbs: return "maxabs";
    case Scaler::kRowL2: return "row_l2";
    case Scaler::kQuantileUniform: return "quantile_uniform";
  }
  return "none";
}

std::string_view ToString(DimRed d) {
  switch (d) {
    case DimRed::kNone: return "none";
    case DimRed::kVarianceThreshold: return "variance_threshold";
    case DimRed::kPca: return "pca";
  }
  return "none";
}

Scaler ParseScaler(std::string_view s) {
  for (Scaler v : {Scaler::kNone, Scaler::kMinMax, Scaler::kStandard, Scaler::kMaxAbs,
                   Scaler::kRowL2, Scaler::kQuantileUniform}) {
    if (ToString(v) == s) return v;
  }
  throw BadParam("unknown scaler '" + std::string(s) + "'");
}

DimRed ParseDimRed(std::string_view s) {
  for (DimRed v : {DimRed::kNone, DimRed::kVarianceThreshold, DimRed::kPca}) {
    if (ToString(v) == s) return v;
  }
  throw BadParam("unknown dimensionality reduction '" + std::string(s) + "'");
}

nlohmann::json StageConfigToJson(const StageConfig& c) {
  return {{"scaler", ToString(c.scaler)},
          {"dimred", ToString(c.dimred)},
          {"dimred_param", c.dimred_param}};
}

StageConfig StageConfigFromJson(const nlohmann::json& j) {
  return {ParseScaler(j.at("scaler").get<std::string>()),
          ParseDimRed(j.at("dimred").get<std::string>()), j.at("dimred_param").get<double>()};
}

namespace {

constexpr size_t kMaxQuantiles = 1000;

std::vector<double> QuantileGrid(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  if (v.size() <= kMaxQuantiles) return v;
  std::vector<double> grid(kMaxQuantiles);
  const double last = static_cast<double>(v.size() - 1);
  for (size_t k = 0; k < kMaxQuantiles; ++k) {
    const double pos = last * static_cast<double>(k) / static_cast<double>(kMaxQuantiles - 1);
    const auto lo = static_cast<size_t>(std::floor(pos));
    const size_t hi = std::min(lo + 1, v.size() - 1);
    grid[k] = v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  }
  return grid;
}

// Linear interpolation of the empirical CDF between order statistics; runs
// of equal reference values map to the middle of the run.
double QuantileMap(const std::vector<double>& q, double x) {
  if (q.size() < 2) return 0.0;
  if (x < q.front()) return 0.0;
  if (x > q.back()) return 1.0;
  const double denom = static_cast<double>(q.size() - 1);
  const auto lo = std::lower_bound(q.begin(), q.end(), x);
  const auto hi = std::upper_bound(q.begin(), q.end(), x);
  if (lo != hi) {
    const double a = static_cast<double>(lo - q.begin());
    const double b = static_cast<double>(hi - q.begin() - 1);
    return 0.5 * (a + b) / denom;
  }
  const auto i = static_cast<size_t>(lo - q.begin());  // q[i-1] < x < q[i]
  const double frac = (x - q[i - 1]) / (q[i] - q[i - 1]);
  return (static_cast<double>(i - 1) + frac) / denom;
}

}  // namespace

FittedStage FittedStage::Fit(const Matrix& train, const StageConfig& cfg) {
  const size_t n = train.rows();
  const size_t p = train.cols();
  if (n < 2) throw DegenerateInput("stage fitting needs at least 2 rows");
  if (p == 0) throw DegenerateInput("stage fitting needs at least one column");
  for (double v : train.data()) {
    if (!std::isfinite(v)) throw DegenerateInput("stage input contains non-finite values");
  }

  FittedStage s;
  s.cfg_ = cfg;
  s.input_dim_ = p;
  s.offset_.assign(p, 0.0);
  s.scale_.assign(p, 1.0);
  switch (cfg.scaler) {
    case Scaler::kNone:
    case Scaler::kRowL2:
      break;
    case Scaler::kMinMax:
      for (size_t c = 0; c < p; ++c) {
        double lo = train(0, c), hi = train(0, c);
        for (size_t r = 1; r < n; ++r) {
          lo = std::min(lo, train(r, c));
          hi = std::max(hi, train(r, c));
        }
        s.offset_[c] = lo;
        s.scale_[c] = hi - lo;  // zero marks a constant column
      }
      break;
    case Scaler::kStandard:
      for (size_t c = 0; c < p; ++c) {
        double mean = 0.0;
        for (size_t r = 0; r < n; ++r) mean += train(r, c);
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (size_t r = 0; r < n; ++r) ss += (train(r, c) - mean) * (train(r, c) - mean);
        s.offset_[c] = mean;
        s.scale_[c] = std::sqrt(ss / static_cast<double>(n));
      }
      break;
    case Scaler::kMaxAbs:
      for (size_t c = 0; c < p; ++c) {
        double m = 0.0;
        for (size_t r = 0; r < n; ++r) m = std::max(m, std::abs(train(r, c)));
        s.scale_[c] = m;
      }
      break;
    case Scaler::kQuantileUniform:
      s.quantiles_.resize(p);
      for (size_t c = 0; c < p; ++c) s.quantiles_[c] = QuantileGrid(train.column(c));
      break;
  }

  // Dimensionality reduction sees the scaled training matrix.
  Matrix scaled = train;
  for (size_t r = 0; r < n; ++r) s.ScaleRow(scaled.row(r));

  switch (cfg.dimred) {
    case DimRed::kNone:
      s.output_dim_ = p;
      break;
    case DimRed::kVarianceThreshold: {
      if (!(cfg.dimred_param >= 0.0)) throw BadParam("variance threshold must be >= 0");
      for (size_t c = 0; c < p; ++c) {
        double mean = 0.0;
        for (size_t r = 0; r < n; ++r) mean += scaled(r, c);
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (size_t r = 0; r < n; ++r) ss += (scaled(r, c) - mean) * (scaled(r, c) - mean);
        if (ss / static_cast<double>(n) > cfg.dimred_param) s.kept_.push_back(c);
      }
      if (s.kept_.empty()) throw DegenerateInput("variance threshold removes every feature");
      s.output_dim_ = s.kept_.size();
      break;
    }
    case DimRed::kPca: {
      const double k_real = cfg.dimred_param;
      if (!(k_real >= 1.0) || k_real != std::floor(k_real) || k_real > static_cast<double>(p)) {
        throw BadParam("pca components must be an integer in [1, feature count]");
      }
      const auto k = static_cast<size_t>(k_real);
      Eigen::MatrixXd x(n, p);
      s.center_.assign(p, 0.0);
      for (size_t c = 0; c < p; ++c) {
        for (size_t r = 0; r < n; ++r) s.center_[c] += scaled(r, c);
        s.center_[c] /= static_cast<double>(n);
        for (size_t r = 0; r < n; ++r) x(r, c) = scaled(r, c) - s.center_[c];
      }
      const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n - 1);
      if (!(cov.trace() > 0.0)) throw DegenerateInput("pca on a zero-variance matrix");
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
      if (eig.info() != Eigen::Success) throw DegenerateInput("pca eigendecomposition failed");
      s.basis_ = Matrix(k, p);
      for (size_t j = 0; j < k; ++j) {
        const auto col = static_cast<Eigen::Index>(p - 1 - j);  // descending eigenvalues
        Eigen::VectorXd v = eig.eigenvectors().col(col);
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0.0) v = -v;
        for (size_t c = 0; c < p; ++c) s.basis_(j, c) = v(static_cast<Eigen::Index>(c));
      }
      s.output_dim_ = k;
      break;
    }
  }
  return s;
}

void FittedStage::ScaleRow(std::span<double> row) const {
  switch (cfg_.scaler) {
    case Scaler::kNone:
      return;
    case Scaler::kMinMax:
    case Scaler::kStandard:
      for (size_t c = 0; c < row.size(); ++c) {
        row[c] = scale_[c] > 0.0 ? (row[c] - offset_[c]) / scale_[c] : 0.0;
      }
      return;
    case Scaler::kMaxAbs:
      for (size_t c = 0; c < row.size(); ++c) {
        row[c] = scale_[c] > 0.0 ? row[c] / scale_[c] : 0.0;
      }
      return;
    case Scaler::kRowL2: {
      const double norm = std::sqrt(kernels::Dot(row, row));
      if (norm > 0.0) {
        for (double& v : row) v /= norm;
      }
      return;
    }
    case Scaler::kQuantileUniform:
      for (size_t c = 0; c < row.size(); ++c) row[c] = QuantileMap(quantiles_[c], row[c]);
      return;
  }
}

Matrix FittedStage::Apply(const Matrix& m) const {
  if (m.cols() != input_dim_) {
    throw ShapeMismatch("stage expects " + std::to_string(input_dim_) + " columns, got " +
                        std::to_string(m.cols()));
  }
  Matrix scaled = m;
  for (size_t r = 0; r < m.rows(); ++r) ScaleRow(scaled.row(r));
  switch (cfg_.dimred) {
    case DimRed::kNone:
      return scaled;
    case DimRed::kVarianceThreshold:
      return scaled.SelectColumns(kept_);
    case DimRed::kPca: {
      Matrix out(m.rows(), output_dim_);
      std::vector<double> centred(input_dim_);
      for (size_t r = 0; r < m.rows(); ++r) {
        const auto row = scaled.row(r);
        for (size_t c = 0; c < input_dim_; ++c) centred[c] = row[c] - center_[c];
        kernels::Gemv(basis_.data(), output_dim_, input_dim_, centred, out.row(r));
      }
      return out;
    }
  }
  return scaled;
}

nlohmann::json FittedStage::ToJson() const {
  nlohmann::json j = {{"config", StageConfigToJson(cfg_)},
                      {"input_dim", input_dim_},
                      {"output_dim", output_dim_},
                      {"offset", offset_},
                      {"scale", scale_},
                      {"quantiles", quantiles_},
                      {"kept", kept_},
                      {"basis", basis_.data()},
                      {"center", center_}};
  return j;
}

FittedStage FittedStage::FromJson(const nlohmann::json& j) {
  FittedStage s;
  s.cfg_ = StageConfigFromJson(j.at("config"));
  s.input_dim_ = j.at("input_dim").get<size_t>();
  s.output_dim_ = j.at("output_dim").get<size_t>();
  s.offset_ = j.at("offset").get<std::vector<double>>();
  s.scale_ = j.at("scale").get<std::vector<double>>();
  s.quantiles_ = j.at("quantiles").get<std::vector<std::vector<double>>>();
  s.kept_ = j.at("kept").get<std::vector<size_t>>();
  auto basis = j.at("basis").get<std::vector<double>>();
  if (s.cfg_.dimred == DimRed::kPca) {
    s.basis_ = Matrix(s.output_dim_, s.input_dim_, std::move(basis));
  }
  s.center_ = j.at("center").get<std::vector<double>>();
  return s;
}

}  // namespace prognos
