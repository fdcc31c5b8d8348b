#include "strateval/propensity.hpp"

#include <algorithm>
#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "strateval/errors.hpp"

namespace strateval {

std::string_view to_string(GammaMethod method) noexcept {
  return method == GammaMethod::discrete_mle ? "discrete_mle" : "continuous_approx";
}

GammaMethod parse_gamma_method(std::string_view text) {
  if (text == "discrete_mle" || text == "exact") return GammaMethod::discrete_mle;
  if (text == "continuous_approx" || text == "approx") return GammaMethod::continuous_approx;
  throw ConfigError("unknown gamma method '" + std::string(text) + "'");
}

double log_hurwitz_zeta(double s, double q) {
  if (!(s > 1.0) || !(q > 0.0)) throw NumericalError("hurwitz_zeta requires s > 1 and q > 0");
  // Euler-Maclaurin summation after N explicit terms, every term scaled by
  // q^s so that large s and q neither underflow nor overflow.
  constexpr int kDirect = 9;
  static constexpr double kBernoulli[] = {1.0 / 6.0,   -1.0 / 30.0, 1.0 / 42.0,        -1.0 / 30.0,
                                          5.0 / 66.0,  -691.0 / 2730.0, 7.0 / 6.0};
  const double log_q = std::log(q);
  double sum = 0.0;
  for (int k = 0; k < kDirect; ++k) sum += std::exp(-s * (std::log(q + k) - log_q));
  const double a = q + kDirect;
  const double ratio = std::exp(-s * (std::log(a) - log_q));  // (a / q)^-s
  sum += a * ratio / (s - 1.0) + 0.5 * ratio;

  // Term j: B_2j / (2j)! * s (s+1) ... (s+2j-2) * a^(-s-2j+1), scaled.
  double rising = s;
  double factorial = 2.0;
  double power = ratio / a;
  const double inv_a2 = 1.0 / (a * a);
  for (int j = 1; j <= 7; ++j) {
    const double term = kBernoulli[j - 1] / factorial * rising * power;
    sum += term;
    if (std::abs(term) < 1e-17 * sum) break;
    rising *= (s + 2.0 * j - 1.0) * (s + 2.0 * j);
    factorial *= (2.0 * j + 1.0) * (2.0 * j + 2.0);
    power *= inv_a2;
  }
    return std::log(sum) - s * log_q;
}

double hurwitz_zeta(double s, double q) { return std::exp(log_hurwitz_zeta(s, q)); }

double power_law_log_likelihood(std::span<const std::uint64_t> values, double alpha, std::uint64_t x_min) {
  double log_sum = 0.0;
  std::size_t n = 0;
  for (auto v : values) {
    if (v < x_min) continue;
    log_sum += std::log(static_cast<double>(v));
    ++n;
  }
  return -alpha * log_sum - static_cast<double>(n) * log_hurwitz_zeta(alpha, static_cast<double>(x_min));
}

namespace {

constexpr double kAlphaLow = 1.0 + 1e-9;
constexpr double kAlphaHigh = 100.0;

double approx_gamma(double n, double sum_log_ratio) { return 1.0 + n / sum_log_ratio; }

// Fit over a sorted tail (all values >= x_min).
GammaEstimate fit_tail(std::span<const std::uint64_t> tail, std::uint64_t x_min, GammaMethod method) {
  const double n = static_cast<double>(tail.size());
  const double shift = static_cast<double>(x_min) - 0.5;
  double sum_log = 0.0, sum_log_ratio = 0.0;
  bool all_at_min = true;
  for (auto v : tail) {
    sum_log += std::log(static_cast<double>(v));
    sum_log_ratio += std::log(static_cast<double>(v) / shift);
    all_at_min = all_at_min && v == x_min;
  }

  GammaEstimate est;
  est.n_samples = tail.size();
  est.x_min = x_min;
  if (method == GammaMethod::continuous_approx || all_at_min) {
    est.method = GammaMethod::continuous_approx;
    est.gamma = approx_gamma(n, sum_log_ratio);
    return est;
  }

  const double q = static_cast<double>(x_min);
  auto negative_ll = [&](double alpha) { return alpha * sum_log + n * log_hurwitz_zeta(alpha, q); };
  const auto [alpha, value] = boost::math::tools::brent_find_minima(negative_ll, kAlphaLow, kAlphaHigh, 48);
  if (!std::isfinite(alpha) || !std::isfinite(value)) throw NumericalError("power-law likelihood maximisation diverged");
  est.method = GammaMethod::discrete_mle;
  est.gamma = alpha;
  return est;
}

// Largest absolute gap between the empirical and fitted CDFs of the tail.
double ks_distance(std::span<const std::uint64_t> tail, const GammaEstimate& est) {
  const double q = static_cast<double>(est.x_min);
  const double log_norm = est.method == GammaMethod::discrete_mle ? log_hurwitz_zeta(est.gamma, q) : 0.0;
  const double n = static_cast<double>(tail.size());
  double worst = 0.0;
  std::size_t i = 0;
  while (i < tail.size()) {
    const std::uint64_t v = tail[i];
    std::size_t j = i;
    while (j < tail.size() && tail[j] == v) ++j;
    const double empirical = static_cast<double>(j) / n;
    double fitted;
    if (est.method == GammaMethod::discrete_mle) {
      fitted = 1.0 - std::exp(log_hurwitz_zeta(est.gamma, static_cast<double>(v) + 1.0) - log_norm);
    } else {
      // Continuous power law with the half-integer shift.
      fitted = 1.0 - std::pow((static_cast<double>(v) + 0.5) / (q - 0.5), 1.0 - est.gamma);
    }
    worst = std::max(worst, std::abs(empirical - fitted));
    i = j;
  }
  return worst;
}

}  // namespace

GammaEstimate fit_gamma(std::span<const std::uint64_t> counts, const GammaFitOptions& options) {
  if (counts.size() < 2) throw DataError("power-law fit needs at least 2 items, got " + std::to_string(counts.size()));
  std::vector<std::uint64_t> sorted(counts.begin(), counts.end());
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() == 0) throw DataError("power-law fit requires every count >= 1");

  if (!options.select_x_min) {
    if (options.x_min == 0) throw ConfigError("x_min must be >= 1");
    const auto first = std::lower_bound(sorted.begin(), sorted.end(), options.x_min);
    const std::span<const std::uint64_t> tail(first, sorted.end());
    if (tail.size() < 2) throw DataError("fewer than 2 counts at or above x_min");
    return fit_tail(tail, options.x_min, options.method);
  }

  std::vector<std::uint64_t> candidates(sorted.begin(), sorted.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  const std::size_t min_tail = std::max<std::size_t>(options.min_tail, 2);
  GammaEstimate best;
  bool have_best = false;
  for (auto x_min : candidates) {
    const auto first = std::lower_bound(sorted.begin(), sorted.end(), x_min);
    const std::span<const std::uint64_t> tail(first, sorted.end());
    if (tail.size() < min_tail) break;
    if (tail.front() == tail.back()) break;  // a single distinct value carries no shape information
    GammaEstimate est;
    try {
      est = fit_tail(tail, x_min, options.method);
      est.ks_distance = ks_distance(tail, est);
    } catch (const NumericalError&) {
      continue;
    }
    if (!have_best || est.ks_distance < best.ks_distance) {
      best = est;
      have_best = true;
    }
  }
  if (!have_best) {
    GammaEstimate est = fit_tail(sorted, sorted.front(), options.method);
    est.ks_distance = ks_distance(sorted, est);
    return est;
  }
  return best;
}

GammaEstimate fit_gamma(std::span<const std::uint32_t> counts, const GammaFitOptions& options) {
  std::vector<std::uint64_t> wide(counts.begin(), counts.end());
  return fit_gamma(std::span<const std::uint64_t>(wide), options);
}

double PropensityTable::score_of(std::string_view item) const {
  const auto it = std::lower_bound(items.begin(), items.end(), item);
  if (it == items.end() || *it != item) throw DataError("no propensity for item '" + std::string(item) + "'");
  return scores[static_cast<std::size_t>(it - items.begin())];
}

PropensityTable estimate_propensities(const Dataset& dataset, const GammaEstimate& gamma) {
  if (dataset.empty()) throw DataError("cannot estimate propensities from an empty dataset");
  if (!(gamma.gamma > 0.0) || !std::isfinite(gamma.gamma)) throw NumericalError("gamma must be finite and positive");
  PropensityTable table;
  table.gamma = gamma;
  table.items.assign(dataset.items().begin(), dataset.items().end());
  table.counts.assign(dataset.item_counts().begin(), dataset.item_counts().end());
  const double exponent = (gamma.gamma + 1.0) / 2.0;
  const double max_count = static_cast<double>(*std::max_element(table.counts.begin(), table.counts.end()));
  table.scores.reserve(table.counts.size());
  for (auto c : table.counts) {
    const double s = std::pow(static_cast<double>(c) / max_count, exponent);
    table.scores.push_back(std::max(s, std::numeric_limits<double>::min()));
  }
  return table;
}

PropensityTable rescale(const PropensityTable& table, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor)) throw ConfigError("propensity scale factor must be positive");
  PropensityTable out = table;
  for (auto& s : out.scores) s *= factor;
  return out;
}

void write_propensity_table(std::ostream& out, const PropensityTable& table) {
  out << "# gamma=" << std::setprecision(17) << table.gamma.gamma << " x_min=" << table.gamma.x_min
      << " n_samples=" << table.gamma.n_samples << " method=" << to_string(table.gamma.method)
      << " ks=" << table.gamma.ks_distance << " normalization=max_one\n";
  out << "item,count,score\n";
  for (std::size_t i = 0; i < table.size(); ++i) {
    out << table.items[i] << ',' << table.counts[i] << ',' << std::setprecision(17) << table.scores[i] << '\n';
  }
}

PropensityTable read_propensity_table(std::istream& in) {
  PropensityTable table;
  std::string line;
  std::size_t line_no = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::istringstream fields(line.substr(1));
      std::string kv;
      while (fields >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
        if (key == "gamma") table.gamma.gamma = std::stod(value);
        else if (key == "x_min") table.gamma.x_min = std::stoull(value);
        else if (key == "n_samples") table.gamma.n_samples = std::stoull(value);
        else if (key == "method") table.gamma.method = parse_gamma_method(value);
        else if (key == "ks") table.gamma.ks_distance = std::stod(value);
      }
      continue;
    }
    if (!seen_header && line.rfind("item,", 0) == 0) {
      seen_header = true;
      continue;
    }
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
    if (c2 == std::string::npos) throw ParseError(line_no, "expected item,count,score");
    try {
      table.items.push_back(line.substr(0, c1));
      table.counts.push_back(static_cast<std::uint32_t>(std::stoul(line.substr(c1 + 1, c2 - c1 - 1))));
      table.scores.push_back(std::stod(line.substr(c2 + 1)));
    } catch (const std::logic_error&) {
      throw ParseError(line_no, "malformed propensity row");
    }
    if (!(table.scores.back() > 0.0)) throw ParseError(line_no, "propensity must be positive");
  }
  if (!std::is_sorted(table.items.begin(), table.items.end())) {
    throw DataError("propensity table items must be in canonical (sorted) order");
  }
  return table;
}

void write_propensity_file(const std::string& path, const PropensityTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  write_propensity_table(out, table);
}

PropensityTable read_propensity_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return read_propensity_table(in);
}

}  // namespace strateval
