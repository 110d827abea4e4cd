#include <cmath>
#include <cstdio>
#include <random>

#include "mvface/data.hpp"
#include "mvface/errors.hpp"

namespace mvface::data {

void SyntheticSpec::validate() const {
  auto bad = [](const std::string& field, const std::string& why) {
    throw ParameterError("SyntheticSpec." + field + " " + why);
  };
  if (view_dims.empty()) bad("view_dims", "must list at least one view");
  for (int d : view_dims) {
    if (d < 1) bad("view_dims", "entries must be at least 1");
  }
  if (num_atoms < 1) bad("num_atoms", "must be at least 1");
  if (num_samples < 1) bad("num_samples", "must be at least 1");
  if (num_classes < 1) bad("num_classes", "must be at least 1");
  if (num_classes > num_atoms) bad("num_classes", "cannot exceed num_atoms");
  if (sparsity < 1) bad("sparsity", "must be at least 1");
  if (sparsity > num_atoms) bad("sparsity", "cannot exceed num_atoms");
  if (sparsity > num_atoms / num_classes) {
    bad("sparsity", "exceeds the per-class atom block size " +
                        std::to_string(num_atoms / num_classes));
  }
  if (std::isnan(noise_snr_db)) bad("noise_snr_db", "must not be NaN");
  if (!(class_separation >= 0.0)) bad("class_separation", "must be nonnegative");
}

SyntheticInstance generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal;

  Eigen::Index total_dim = 0;
  for (int d : spec.view_dims) total_dim += d;
  const Eigen::Index atoms = spec.num_atoms;
  const Eigen::Index n = spec.num_samples;

  Eigen::MatrixXd dict(total_dim, atoms);
  for (Eigen::Index j = 0; j < atoms; ++j) {
    for (Eigen::Index i = 0; i < total_dim; ++i) dict(i, j) = normal(rng);
    dict.col(j).normalize();
  }

  const int block = spec.num_atoms / spec.num_classes;
  Eigen::MatrixXd codes = Eigen::MatrixXd::Zero(atoms, n);
  SyntheticInstance inst;
  inst.labels.resize(static_cast<std::size_t>(n));
  std::vector<int> pool;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int cls = static_cast<int>(i % spec.num_classes);
    inst.labels[static_cast<std::size_t>(i)] = cls;
    const int first = cls * block;
    const int last = cls == spec.num_classes - 1 ? spec.num_atoms : first + block;
    pool.resize(static_cast<std::size_t>(last - first));
    for (int a = first; a < last; ++a) pool[static_cast<std::size_t>(a - first)] = a;
    for (int s = 0; s < spec.sparsity; ++s) {
      std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(s),
                                                      pool.size() - 1);
      std::swap(pool[static_cast<std::size_t>(s)], pool[pick(rng)]);
      double value = 0.0;
      while (value == 0.0) value = spec.class_separation + normal(rng);
      codes(pool[static_cast<std::size_t>(s)], i) = value;
    }
  }
  for (int c = 0; c < spec.num_classes; ++c) inst.class_names.push_back("c" + std::to_string(c + 1));

  // Per-view products so that X^(p) == D^(p) W holds bit-exactly without noise.
  std::vector<Eigen::MatrixXd> clean;
  double signal = 0.0;
  Eigen::Index row = 0;
  for (std::size_t p = 0; p < spec.view_dims.size(); ++p) {
    const int d = spec.view_dims[p];
    inst.dictionary.dictionaries.push_back(dict.middleRows(row, d));
    clean.push_back(inst.dictionary.dictionaries.back() * codes);
    signal += clean.back().squaredNorm();
    inst.features.view_names.push_back("view" + std::to_string(p + 1));
    row += d;
  }

  if (std::isfinite(spec.noise_snr_db)) {
    std::vector<Eigen::MatrixXd> noise;
    double energy = 0.0;
    for (const auto& c : clean) {
      Eigen::MatrixXd e(c.rows(), c.cols());
      for (Eigen::Index j = 0; j < e.cols(); ++j) {
        for (Eigen::Index i = 0; i < e.rows(); ++i) e(i, j) = normal(rng);
      }
      energy += e.squaredNorm();
      noise.push_back(std::move(e));
    }
    const double target = signal / std::pow(10.0, spec.noise_snr_db / 10.0);
    const double scale = std::sqrt(target / energy);
    double scaled_energy = 0.0;
    for (std::size_t p = 0; p < clean.size(); ++p) {
      noise[p] *= scale;
      scaled_energy += noise[p].squaredNorm();
      inst.features.views.push_back(clean[p] + noise[p]);
    }
    inst.measured_snr_db = 10.0 * std::log10(signal / scaled_energy);
  } else {
    inst.features.views = std::move(clean);
    inst.measured_snr_db = std::numeric_limits<double>::infinity();
  }

  for (Eigen::Index i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "syn%05ld", static_cast<long>(i));
    inst.features.sample_ids.emplace_back(id);
  }
  inst.codes.codes = std::move(codes);
  return inst;
}

}  // namespace mvface::data
