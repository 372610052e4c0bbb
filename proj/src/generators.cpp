#include "phvae/generators.hpp"

#include <cmath>
#include <numbers>

#include "phvae/errors.hpp"
#include "phvae/idx.hpp"
#include "phvae/rng.hpp"

namespace phvae::data {

Source parse_source(const std::string& name) {
  if (name == "uniform") return Source::uniform;
  if (name == "lognormal") return Source::lognormal;
  if (name == "normal") return Source::normal;
  if (name == "gmm_distorted_1") return Source::gmm_distorted_1;
  if (name == "gmm_distorted_2") return Source::gmm_distorted_2;
  if (name == "cluster") return Source::cluster;
  if (name == "idx_file") return Source::idx_file;
  throw ConfigError("unknown dataset source '" + name + "'");
}

std::string to_string(Source s) {
  switch (s) {
    case Source::uniform: return "uniform";
    case Source::lognormal: return "lognormal";
    case Source::normal: return "normal";
    case Source::gmm_distorted_1: return "gmm_distorted_1";
    case Source::gmm_distorted_2: return "gmm_distorted_2";
    case Source::cluster: return "cluster";
    case Source::idx_file: return "idx_file";
  }
  return "?";
}

Eigen::MatrixXd gen_base_distribution(const DatasetSpec& spec) {
  if (spec.n_samples == 0 || spec.n_features == 0) {
    throw ConfigError("gen_base_distribution: n_samples and n_features must be >= 1");
  }
  const auto& p = spec.dist;
  switch (spec.source) {
    case Source::uniform:
      if (!(p.low < p.high)) throw ConfigError("uniform: low must be < high");
      break;
    case Source::normal:
    case Source::lognormal:
      if (!(p.stddev > 0.0)) throw ConfigError(to_string(spec.source) + ": stddev must be > 0");
      break;
    default:
      throw ConfigError("gen_base_distribution: source must be uniform, lognormal or normal");
  }

  Rng rng = Rng::stream(spec.seed, "data");
  const auto rows = static_cast<Eigen::Index>(spec.n_samples);
  const auto cols = static_cast<Eigen::Index>(spec.n_features);
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) {
      switch (spec.source) {
        case Source::uniform: out(r, c) = rng.uniform(p.low, p.high); break;
        case Source::normal: out(r, c) = rng.normal(p.mean, p.stddev); break;
        default: out(r, c) = std::exp(rng.normal(p.mean, p.stddev)); break;
      }
    }
  }
  return out;
}

namespace {

MixtureComponent component(double mx, double my, double sxx, double sxy, double syy, double w) {
  MixtureComponent c;
  c.mean << mx, my;
  c.cov << sxx, sxy, sxy, syy;
  c.weight = w;
  return c;
}

void validate(const std::vector<MixtureComponent>& comps) {
  if (comps.empty()) throw ConfigError("mixture has no components");
  double total = 0.0;
  for (const auto& c : comps) {
    if (!(c.weight >= 0.0)) throw ConfigError("mixture weight must be non-negative");
    total += c.weight;
    if (c.cov(0, 1) != c.cov(1, 0)) throw ConfigError("mixture covariance is not symmetric");
    Eigen::LLT<Eigen::Matrix2d> llt(c.cov);
    if (llt.info() != Eigen::Success) throw ConfigError("mixture covariance is not positive-definite");
  }
  if (std::abs(total - 1.0) > 1e-12) throw ConfigError("mixture weights do not sum to 1");
}

}  // namespace

std::vector<MixtureComponent> gmm_components(GmmCase c, const ClusterParams& cluster) {
  std::vector<MixtureComponent> comps;
  switch (c) {
    case GmmCase::pathology_1:
      comps = {component(3, 3, 1.0, 0.8, 1.0, 0.25), component(-3, -3, 1.0, -0.6, 1.0, 0.25),
               component(3, -3, 1.0, 0.3, 1.0, 0.2), component(-3, 3, 0.5, 0.0, 0.5, 0.2),
               component(0, 0, 2.0, 1.5, 2.0, 0.1)};
      break;
    case GmmCase::pathology_2:
      comps = {component(-4, 0, 1.0, 0.8, 1.0, 1.0 / 3.0), component(4, 0, 1.0, -0.8, 1.0, 1.0 / 3.0),
               component(0, 4, 0.5, 0.3, 0.5, 1.0 / 3.0)};
      break;
    case GmmCase::cluster: {
      if (cluster.n_clusters == 0) throw ConfigError("cluster: n_clusters must be >= 1");
      if (!(cluster.stddev > 0.0)) throw ConfigError("cluster: stddev must be > 0");
      const auto k = static_cast<double>(cluster.n_clusters);
      const double var = cluster.stddev * cluster.stddev;
      for (std::size_t i = 0; i < cluster.n_clusters; ++i) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(i) / k;
        comps.push_back(component(cluster.radius * std::cos(angle), cluster.radius * std::sin(angle), var,
                                  0.0, var, 1.0 / k));
      }
      break;
    }
  }
  // 1/3 * 3 and 1/k * k may miss 1 by an ulp; the 1e-12 tolerance absorbs it.
  validate(comps);
  return comps;
}

GmmSample gen_gmm_distorted(GmmCase c, std::size_t n, std::uint64_t seed, const ClusterParams& cluster,
                            double noise_stddev) {
  if (n == 0) throw ConfigError("gen_gmm_distorted: n must be >= 1");
  if (c == GmmCase::pathology_2 && !(noise_stddev >= 0.0)) {
    throw ConfigError("gen_gmm_distorted: noise_stddev must be >= 0");
  }
  const auto comps = gmm_components(c, cluster);
  std::vector<Eigen::Matrix2d> factors;
  for (const auto& comp : comps) factors.push_back(comp.cov.llt().matrixL());

  Rng rng = Rng::stream(seed, "data");
  GmmSample out;
  out.points.resize(static_cast<Eigen::Index>(n), 2);
  out.component.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform();
    std::size_t k = 0;
    double cumulative = comps[0].weight;
    while (u >= cumulative && k + 1 < comps.size()) cumulative += comps[++k].weight;

    Eigen::Vector2d e;
    e[0] = rng.normal();
    e[1] = rng.normal();
    Eigen::Vector2d x = comps[k].mean + factors[k] * e;
    switch (c) {
      case GmmCase::pathology_1:
        x = x.unaryExpr([](double v) { return std::tanh(v) + 0.1 * std::sin(2.0 * v); });
        break;
      case GmmCase::pathology_2:
        x[0] += rng.normal(0.0, noise_stddev);
        x[1] += rng.normal(0.0, noise_stddev);
        x = x.unaryExpr([](double v) { return v + 0.1 * std::sin(v); });
        break;
      case GmmCase::cluster:
        break;
    }
    out.points.row(static_cast<Eigen::Index>(i)) = x.transpose();
    out.component[i] = static_cast<int>(k);
  }
  return out;
}

Eigen::MatrixXd make_raw_dataset(const DatasetSpec& spec) {
  switch (spec.source) {
    case Source::uniform:
    case Source::lognormal:
    case Source::normal:
      return gen_base_distribution(spec);
    case Source::gmm_distorted_1:
      return gen_gmm_distorted(GmmCase::pathology_1, spec.n_samples, spec.seed).points;
    case Source::gmm_distorted_2:
      return gen_gmm_distorted(GmmCase::pathology_2, spec.n_samples, spec.seed, {}, spec.noise_stddev).points;
    case Source::cluster:
      return gen_gmm_distorted(GmmCase::cluster, spec.n_samples, spec.seed, spec.cluster).points;
    case Source::idx_file: {
      if (spec.path.empty()) throw ConfigError("idx_file source requires a path");
      ImageSet images = load_idx(spec.path);
      if (spec.downscale != 0) images = downscale(images, spec.downscale);
      if (spec.limit != 0 && spec.limit < images.count()) {
        images.pixels.conservativeResize(static_cast<Eigen::Index>(spec.limit), Eigen::NoChange);
      }
      return images.pixels;
    }
  }
  throw ConfigError("make_raw_dataset: unknown source");
}

PreparedDataset prepare_dataset(const DatasetSpec& spec) {
  PreparedDataset out;
  out.raw = make_raw_dataset(spec);
  if (spec.source == Source::idx_file) {
    out.normalized.values = out.raw;
    out.normalized.min = Eigen::RowVectorXd::Zero(out.raw.cols());
    out.normalized.max = Eigen::RowVectorXd::Ones(out.raw.cols());
    return out;
  }
  out.normalized = normalize_columns(out.raw);
  for (auto c : out.normalized.constant_columns) {
    out.flags.push_back("constant feature in column " + std::to_string(c) + " mapped to zeros");
  }
  return out;
}

std::size_t feature_count(const DatasetSpec& spec) {
  switch (spec.source) {
    case Source::gmm_distorted_1:
    case Source::gmm_distorted_2:
    case Source::cluster:
      return 2;
    default:
      return spec.n_features;
  }
}

}  // namespace phvae::data
