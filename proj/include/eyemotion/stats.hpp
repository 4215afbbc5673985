#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eyemotion/error.hpp"
#include "eyemotion/rng.hpp"

namespace eyemotion {

namespace detail {

// Continued fraction for the incomplete beta function (modified Lentz).
inline double beta_continued_fraction(double a, double b, double x) {
  constexpr double kTiny = 1e-300;
  constexpr double kTolerance = 1e-10;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kTolerance) return h;
  }
  throw NumericError("incomplete beta continued fraction did not converge");
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

/// P(T > t) for Student's t with `df` degrees of freedom.
inline double student_t_upper_tail(double t, double df) {
  const double tail = 0.5 * incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
  return t >= 0.0 ? tail : 1.0 - tail;
}

/// Per-subject accuracy with and without personalization.
struct SubjectPair {
  int participant_id = 0;
  double personalized = 0.0;
  double baseline = 0.0;
};

struct PairedSamples {
  std::vector<SubjectPair> pairs;

  std::vector<double> differences() const {
    std::vector<double> d;
    d.reserve(pairs.size());
    for (const auto& p : pairs) d.push_back(p.personalized - p.baseline);
    return d;
  }
};

struct TTestResult {
  double t = 0.0;
  double degrees_of_freedom = 0.0;
  double p = 1.0;
  double mean_difference = 0.0;
  bool degenerate = false;
};

/// Paired one-tailed t-test of H1: mean(difference) > 0.
inline TTestResult paired_one_tailed_ttest(std::span<const double> differences) {
  const std::size_t n = differences.size();
  if (n < 2) throw InputError("paired t-test needs at least two pairs");
  double mean = 0.0;
  for (auto d : differences) mean += d;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (auto d : differences) ss += (d - mean) * (d - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  TTestResult r;
  r.degrees_of_freedom = static_cast<double>(n - 1);
  r.mean_difference = mean;
  const bool constant = std::all_of(differences.begin(), differences.end(), [&](double d) { return d == differences[0]; });
  if (constant || sd == 0.0) {
    // Zero variance: the statistic is infinite in the direction of the mean.
    r.degenerate = true;
    if (mean > 0.0) {
      r.t = std::numeric_limits<double>::infinity();
      r.p = 0.0;
    } else {
      r.t = mean < 0.0 ? -std::numeric_limits<double>::infinity() : 0.0;
      r.p = 1.0;
    }
    return r;
  }
  r.t = mean / (sd / std::sqrt(static_cast<double>(n)));
  r.p = student_t_upper_tail(r.t, r.degrees_of_freedom);
  return r;
}

inline TTestResult paired_one_tailed_ttest(const PairedSamples& pairs) {
  const auto d = pairs.differences();
  return paired_one_tailed_ttest(std::span<const double>(d));
}

/// Sign-flip permutation test of mean(difference) > 0; returns the one-sided
/// p-value with add-one smoothing.
inline double sign_flip_permutation_p(std::span<const double> differences, std::size_t draws, std::uint64_t seed) {
  if (differences.empty()) throw InputError("permutation test needs data");
  double observed = 0.0;
  for (auto d : differences) observed += d;
  Rng rng(seed);
  std::size_t at_least = 0;
  for (std::size_t k = 0; k < draws; ++k) {
    double s = 0.0;
    for (auto d : differences) s += (rng.next() >> 63) ? d : -d;
    if (s >= observed - 1e-12) ++at_least;
  }
  return (static_cast<double>(at_least) + 1.0) / (static_cast<double>(draws) + 1.0);
}

/// items x raters; std::nullopt marks a missing rating.
using RatingMatrix = std::vector<std::vector<std::optional<std::string>>>;

enum class KappaMode { cohen, fleiss };

namespace detail {

inline void check_complete(const RatingMatrix& ratings) {
  if (ratings.empty()) throw InputError("no ratings");
  const std::size_t raters = ratings.front().size();
  for (std::size_t i = 0; i < ratings.size(); ++i) {
    if (ratings[i].size() != raters) throw InputError("item " + std::to_string(i) + " has a different rater count");
    for (std::size_t r = 0; r < raters; ++r)
      if (!ratings[i][r]) {
        throw InputError("missing rating for item " + std::to_string(i) + " rater " + std::to_string(r));
      }
  }
}

}  // namespace detail

inline double cohen_kappa(const RatingMatrix& ratings) {
  detail::check_complete(ratings);
  if (ratings.front().size() != 2) throw InputError("Cohen's kappa needs exactly 2 raters");
  const double n = static_cast<double>(ratings.size());
  std::map<std::string, double> a, b;
  double agree = 0.0;
  for (const auto& item : ratings) {
    a[*item[0]] += 1.0;
    b[*item[1]] += 1.0;
    if (*item[0] == *item[1]) agree += 1.0;
  }
  const double p_o = agree / n;
  double p_e = 0.0;
  for (const auto& [label, count] : a) {
    const auto it = b.find(label);
    if (it != b.end()) p_e += (count / n) * (it->second / n);
  }
  if (p_e >= 1.0) return 1.0;  // both raters used a single identical category
  return (p_o - p_e) / (1.0 - p_e);
}

inline double fleiss_kappa(const RatingMatrix& ratings) {
  detail::check_complete(ratings);
  const std::size_t raters = ratings.front().size();
  if (raters < 2) throw InputError("Fleiss' kappa needs at least 2 raters");
  const double n = static_cast<double>(raters);
  const double items = static_cast<double>(ratings.size());
  std::map<std::string, double> totals;
  double p_bar = 0.0;
  for (const auto& item : ratings) {
    std::map<std::string, double> counts;
    for (const auto& r : item) counts[*r] += 1.0;
    double sq = 0.0;
    for (const auto& [label, c] : counts) {
      sq += c * c;
      totals[label] += c;
    }
    p_bar += (sq - n) / (n * (n - 1.0));
  }
  p_bar /= items;
  double p_e = 0.0;
  for (const auto& [label, c] : totals) {
    const double p = c / (items * n);
    p_e += p * p;
  }
  if (p_e >= 1.0) return 1.0;
  return (p_bar - p_e) / (1.0 - p_e);
}

inline double rater_agreement(const RatingMatrix& ratings, KappaMode mode) {
  return mode == KappaMode::cohen ? cohen_kappa(ratings) : fleiss_kappa(ratings);
}

}  // namespace eyemotion
