#include "decomp/mc.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "decomp/error.hpp"
#include "decomp/seed.hpp"

namespace decomp {

namespace {
// Seed streams.
constexpr std::int64_t kInitialStream = 0x11;
constexpr std::int64_t kPathNoiseStream = 0x12;
constexpr std::int64_t kBackwardStream = 0x13;
constexpr std::int64_t kPermutationStream = 0x14;
}  // namespace

// --- paths -----------------------------------------------------------------

const Eigen::MatrixXd& PathEnsemble::marginal(std::int64_t k) const {
  if (k < k_start || k > k_end) {
    throw InputError("PathEnsemble: k=" + std::to_string(k) + " outside simulated range");
  }
  return states[static_cast<std::size_t>(k - k_start)];
}

double PathEnsemble::max_residual(const LinearMap& map) const {
  double worst = 0.0;
  for (std::size_t i = 1; i < states.size(); ++i) {
    const Eigen::MatrixXd r = states[i] - noise[i - 1] - states[i - 1] * map.matrix().transpose();
    worst = std::max(worst, r.cwiseAbs().maxCoeff());
  }
  return worst;
}

PathEnsemble simulate_paths(const NoiseProcess& process, const LinearMap& map,
                            const MeasureRepr& initial, std::int64_t k_start,
                            std::int64_t k_end, std::int64_t n, std::uint64_t seed) {
  if (n < 1) throw InputError("simulate_paths: n must be >= 1");
  if (k_start >= k_end) throw InputError("simulate_paths: requires k_start < k_end");
  if (map.dim() != process.dim() || dim(initial) != process.dim()) {
    throw InputError("simulate_paths: dimension mismatch");
  }
  PathEnsemble out;
  out.k_start = k_start;
  out.k_end = k_end;
  out.n_paths = n;
  out.seed = seed;
  out.initial = initial;
  out.states.reserve(static_cast<std::size_t>(k_end - k_start + 1));
  out.states.push_back(sample(initial, n, derive_seed(seed, kInitialStream)));
  const Eigen::MatrixXd phi_t = map.matrix().transpose();
  for (std::int64_t k = k_start + 1; k <= k_end; ++k) {
    Eigen::MatrixXd xi = sample(process.model_at(k), n, derive_seed(seed, kPathNoiseStream, k));
    Eigen::MatrixXd next = xi + out.states.back() * phi_t;
    out.noise.push_back(std::move(xi));
    out.states.push_back(std::move(next));
  }
  return out;
}

EmpiricalRepr backward_partial_sample(
    const NoiseProcess& process, const LinearMap& map, std::int64_t k, std::int64_t truncation,
    std::int64_t n, std::uint64_t seed,
    const std::function<Eigen::VectorXd(std::int64_t)>& centering) {
  if (truncation < 0) throw InputError("backward_partial_sample: N must be >= 0");
  if (n < 1) throw InputError("backward_partial_sample: n must be >= 1");
  if (map.dim() != process.dim()) throw InputError("backward_partial_sample: dimension mismatch");
  const Eigen::MatrixXd phi_t = map.matrix().transpose();
  const auto draw = [&](std::int64_t j) {
    Eigen::MatrixXd x = sample(process.model_at(j), n, derive_seed(seed, kBackwardStream, j));
    if (centering) x.rowwise() -= centering(j).transpose();
    return x;
  };
  // Horner: acc ← ξ_j + φ acc, from j = k − N up to k.
  Eigen::MatrixXd acc = draw(k - truncation);
  for (std::int64_t j = k - truncation + 1; j <= k; ++j) acc = draw(j) + acc * phi_t;
  EmpiricalRepr out;
  out.samples = std::move(acc);
  out.seed = seed;
  out.truncation = truncation;
  return out;
}

// --- energy distance ------------------------------------------------------

namespace {

bool same_multiset(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  const auto sorted_rows = [](const Eigen::MatrixXd& m) {
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(m.rows()),
                                          std::vector<double>(static_cast<std::size_t>(m.cols())));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
    std::sort(rows.begin(), rows.end());
    return rows;
  };
  return sorted_rows(a) == sorted_rows(b);
}

// Statistic from within-group pair sums; `total` is the sum over all pairs.
double energy_from_sums(long double total, long double t_aa, long double t_bb, double na, double nb) {
  const long double t_ab = total - t_aa - t_bb;
  const long double v = 2.0L * t_ab / (na * nb) - 2.0L * t_aa / (na * na) - 2.0L * t_bb / (nb * nb);
  return static_cast<double>(std::max(v, 0.0L));
}

class OneDimEnergy {
 public:
  OneDimEnergy(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
      : na_(a.rows()), nb_(b.rows()) {
    const Eigen::Index n = na_ + nb_;
    std::vector<std::pair<double, bool>> pooled(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < na_; ++i) pooled[static_cast<std::size_t>(i)] = {a(i, 0), true};
    for (Eigen::Index i = 0; i < nb_; ++i) pooled[static_cast<std::size_t>(na_ + i)] = {b(i, 0), false};
    std::stable_sort(pooled.begin(), pooled.end(),
                     [](const auto& x, const auto& y) { return x.first < y.first; });
    values_.resize(pooled.size());
    labels_.resize(pooled.size());
    long double prefix = 0.0L;
    for (std::size_t j = 0; j < pooled.size(); ++j) {
      values_[j] = pooled[j].first;
      labels_[j] = pooled[j].second ? 1 : 0;
      total_ += static_cast<long double>(values_[j]) * static_cast<long double>(j) - prefix;
      prefix += values_[j];
    }
  }

  double statistic(const std::vector<char>& label) const {
    long double t_aa = 0, t_bb = 0, sa = 0, sb = 0;
    long double ca = 0, cb = 0;
    for (std::size_t j = 0; j < values_.size(); ++j) {
      const long double v = values_[j];
      if (label[j]) {
        t_aa += v * ca - sa;
        sa += v;
        ca += 1;
      } else {
        t_bb += v * cb - sb;
        sb += v;
        cb += 1;
      }
    }
    return energy_from_sums(total_, t_aa, t_bb, static_cast<double>(na_), static_cast<double>(nb_));
  }

  const std::vector<char>& observed_labels() const { return labels_; }

 private:
  Eigen::Index na_, nb_;
  std::vector<double> values_;
  std::vector<char> labels_;
  long double total_ = 0.0L;
};

class PairwiseEnergy {
 public:
  PairwiseEnergy(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
      : na_(a.rows()), nb_(b.rows()), pooled_(a.rows() + b.rows(), a.cols()) {
    pooled_ << a, b;
    const std::size_t n = static_cast<std::size_t>(pooled_.rows());
    packed_ = n <= kPackedLimit;
    if (packed_) {
      dist_.resize(n * (n - 1) / 2);
      std::size_t idx = 0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
          dist_[idx++] = static_cast<float>(distance(i, j));
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) total_ += at(i, j);
    labels_.assign(n, 0);
    std::fill(labels_.begin(), labels_.begin() + na_, 1);
  }

  double statistic(const std::vector<char>& label) const {
    const std::size_t n = label.size();
    long double t_aa = 0, t_bb = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (label[i] != label[j]) continue;
        (label[i] ? t_aa : t_bb) += at(i, j);
      }
    }
    return energy_from_sums(total_, t_aa, t_bb, static_cast<double>(na_), static_cast<double>(nb_));
  }

  const std::vector<char>& observed_labels() const { return labels_; }

 private:
  static constexpr std::size_t kPackedLimit = 6000;

  double distance(std::size_t i, std::size_t j) const {
    return (pooled_.row(static_cast<Eigen::Index>(i)) - pooled_.row(static_cast<Eigen::Index>(j))).norm();
  }
  double at(std::size_t i, std::size_t j) const {
    if (!packed_) return distance(i, j);
    const std::size_t n = static_cast<std::size_t>(pooled_.rows());
    return dist_[i * n - i * (i + 1) / 2 + (j - i - 1)];
  }

  Eigen::Index na_, nb_;
  Eigen::MatrixXd pooled_;
  bool packed_ = false;
  std::vector<float> dist_;
  std::vector<char> labels_;
  long double total_ = 0.0L;
};

template <class Engine>
TwoSampleResult run_permutation_test(const Engine& engine, TwoSampleResult r) {
  const double obs = engine.statistic(engine.observed_labels());
  r.statistic = obs;
  std::vector<char> label = engine.observed_labels();
  std::int64_t hits = 0;
  const double slack = 1e-12 * (1.0 + obs);
  for (int perm = 0; perm < r.permutations; ++perm) {
    std::mt19937_64 rng(derive_seed(r.seed, kPermutationStream, perm));
    std::shuffle(label.begin(), label.end(), rng);
    if (engine.statistic(label) >= obs - slack) ++hits;
  }
  r.p_value = static_cast<double>(1 + hits) / static_cast<double>(1 + r.permutations);
  return r;
}

}  // namespace

TwoSampleResult energy_distance_test(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                     int permutations, std::uint64_t seed) {
  if (a.rows() < 50 || b.rows() < 50) {
    throw InputError("energy_distance_test: each sample needs at least 50 points");
  }
  if (permutations < 200) throw InputError("energy_distance_test: permutations must be >= 200");
  if (a.cols() != b.cols() || a.cols() == 0) {
    throw InputError("energy_distance_test: dimension mismatch");
  }
  if (!a.allFinite() || !b.allFinite()) throw InputError("energy_distance_test: non-finite samples");

  TwoSampleResult r;
  r.n_a = a.rows();
  r.n_b = b.rows();
  r.permutations = permutations;
  r.seed = seed;
  if (same_multiset(a, b)) {
    r.statistic = 0.0;
    r.p_value = 1.0;
    return r;
  }
  if (a.cols() == 1) return run_permutation_test(OneDimEnergy(a, b), r);
  return run_permutation_test(PairwiseEnergy(a, b), r);
}

double ecf_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                    const Eigen::MatrixXd& grid) {
  if (grid.rows() == 0) throw InputError("ecf_distance: empty grid");
  if (a.rows() == 0 || b.rows() == 0) throw InputError("ecf_distance: empty sample");
  if (a.cols() != b.cols() || grid.cols() != a.cols()) {
    throw InputError("ecf_distance: dimension mismatch");
  }
  const auto ecf = [](const Eigen::MatrixXd& x, const Eigen::VectorXd& t) {
    const Eigen::VectorXd phase = x * t;
    std::complex<double> s(0.0, 0.0);
    for (Eigen::Index i = 0; i < phase.size(); ++i) s += std::polar(1.0, phase(i));
    return s / static_cast<double>(x.rows());
  };
  double worst = 0.0;
  for (Eigen::Index g = 0; g < grid.rows(); ++g) {
    const Eigen::VectorXd t = grid.row(g).transpose();
    worst = std::max(worst, std::abs(ecf(a, t) - ecf(b, t)));
  }
  return std::min(worst, 2.0);
}

// --- CSV ---------------------------------------------------------------------

namespace {

void append_number(std::string& out, double v) {
  char buf[32];
  const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
  out.append(buf, static_cast<std::size_t>(len));
}

std::string header(int d) {
  std::string h;
  for (int j = 0; j < d; ++j) {
    if (j) h += ',';
    h += "x" + std::to_string(j);
  }
  return h;
}

}  // namespace

std::string samples_csv(const Eigen::MatrixXd& samples) {
  std::string out = header(static_cast<int>(samples.cols()));
  out += '\n';
  out.reserve(out.size() + static_cast<std::size_t>(samples.size()) * 24);
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    for (Eigen::Index j = 0; j < samples.cols(); ++j) {
      if (j) out += ',';
      append_number(out, samples(i, j));
    }
    out += '\n';
  }
  return out;
}

Eigen::MatrixXd parse_samples_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw InputError("samples CSV: empty file");
  const int d = static_cast<int>(std::count(line.begin(), line.end(), ',')) + 1;
  if (line.rfind("x0", 0) != 0) throw InputError("samples CSV: header must start with x0");
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream cells(line);
    std::string cell;
    int cols = 0;
    while (std::getline(cells, cell, ',')) {
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc()) {
        throw InputError("samples CSV: bad number '" + cell + "' on data row " + std::to_string(rows + 1));
      }
      values.push_back(v);
      ++cols;
    }
    if (cols != d) {
      throw InputError("samples CSV: row " + std::to_string(rows + 1) + " has " +
                       std::to_string(cols) + " columns, expected " + std::to_string(d));
    }
    ++rows;
  }
  if (rows == 0) throw InputError("samples CSV: no data rows");
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows), d);
  for (std::size_t i = 0; i < rows; ++i)
    for (int j = 0; j < d; ++j)
      out(static_cast<Eigen::Index>(i), j) = values[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)];
  return out;
}

std::string paths_csv(const PathEnsemble& paths) {
  std::string out = "path,k," + header(paths.dim()) + "\n";
  for (std::int64_t p = 0; p < paths.n_paths; ++p) {
    for (std::int64_t k = paths.k_start; k <= paths.k_end; ++k) {
      const Eigen::MatrixXd& m = paths.marginal(k);
      out += std::to_string(p);
      out += ',';
      out += std::to_string(k);
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        out += ',';
        append_number(out, m(p, j));
      }
      out += '\n';
    }
  }
  return out;
}

}  // namespace decomp
