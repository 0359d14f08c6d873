// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace avf::annotation {

/// Label value for an unresolved ("MORE") record.
inline constexpr int kMore = -1;

struct AnnotatorProfile {
  std::string id;
  // Work experience, major, emotional background, cultural background and
  // labeling proficiency, all on a common 0-100 scale.
  std::optional<double> we, ms, eb, cb, lp;
  char gender = '?';  // 'M', 'F' or '?'
};

/// p = 0.4 we + 0.3 ms + 0.1 (eb + cb + lp). Missing or negative field -> InputError.
double assignment_score(const AnnotatorProfile& a);

/// Every group has two 'M' and one 'F' member. Throws ConfigError otherwise.
void validate_gender_balance(std::span<const std::vector<AnnotatorProfile>> groups);

struct AnnotationRecord {
  std::string sample_id;
  int prior = kMore;                     // prior-stage group label, or kMore
  std::vector<int> labels;               // the three members' current labels
  std::vector<std::string> annotators;   // optional, aligned with labels
  std::optional<double> confidence;
  std::string group;
  std::size_t set = 0;
  int category = 0;  // category of the set the record belongs to
};

struct CheckSet {
  int category = 0;
  double weight = 1.0;  // 1 / (number of sets of this category)
  std::vector<AnnotationRecord> records;
};

/// The n cross-check sets of one group, plus the taxonomy size c.
struct CrossCheck {
  std::vector<CheckSet> sets;
  std::size_t num_categories = 6;
};

/// Standard set composition: 3 Neutral, 2 Excitation, 1 of each other
/// category (category ids of the six-emotion taxonomy), in that order.
std::vector<int> standard_set_categories();

/// Sets w_i = 1 / (number of sets sharing set i's category).
void assign_weights(CrossCheck& cc);

/// Stage-1 group label: the majority (>= 2 of 3) label, or kMore.
int majority_label(std::span<const int> labels);

/// S_a = (1/n) sum_i (1/(3 m_i)) sum_j c_j with c_j the number of current
/// labels equal to the prior label.
double s_a(const CrossCheck& cc);

struct SetScore {
  std::size_t m = 0;
  std::size_t matches = 0;     // sum_j c_j
  std::size_t consistent = 0;  // C_i
  std::size_t more = 0;        // M_i
  double weight = 0;
  double s_r_term = 0;  // w_i (0.7 C_i + 0.3 (m_i - C_i - M_i))
};

std::vector<SetScore> score_sets(const CrossCheck& cc);

/// S_r = (1/c) sum_i w_i (0.7 C_i + 0.3 (m_i - C_i - M_i)); C_i counts
/// records whose stage-1 group label equals the prior label, M_i the MORE
/// records. Weights that disagree with the set composition -> ConfigError.
double s_r(const CrossCheck& cc);

struct KappaResult {
  double kappa = 0;
  double p_bar = 0;  // mean per-item agreement
  double p_e = 0;    // chance agreement
  /// P_e = 1: every rating falls in one category. kappa is then reported as
  /// 1 (perfect agreement) and this flag is set, since the ratio is 0/0.
  bool degenerate = false;
};

/// Fleiss' kappa over an items x categories matrix of rating counts; every
/// row must sum to `raters` (>= 2).
KappaResult fleiss_kappa(const std::vector<std::vector<std::size_t>>& counts, std::size_t raters);

/// Kappa over the current member labels of the records (three raters each).
KappaResult fleiss_kappa(std::span<const AnnotationRecord> records, std::size_t num_categories);

enum class ResolutionStatus { resolved, incomplete };

struct Resolution {
  ResolutionStatus status = ResolutionStatus::incomplete;
  int label = kMore;
  /// Stage that decided (1 members, 2 + leader, 3 + second leader, 4 expert),
  /// or, when incomplete, the stage whose vote is missing.
  int stage = 1;
};

/// Unique mode of the votes, or nullopt on a tie for the top count.
std::optional<int> unique_mode(std::span<const int> votes);

/// Multi-stage vote: the three members' majority; otherwise with the
/// leader's vote the unique mode of four; otherwise with the second
/// leader's the unique mode of five; otherwise the expert's label. A vote
/// that the escalation needs but is absent yields `incomplete`.
Resolution resolve_label(std::span<const int> members, std::optional<int> leader = std::nullopt,
                         std::optional<int> second_leader = std::nullopt, std::optional<int> expert = std::nullopt);

// ---------------------------------------------------------------------------
// Personnel adjustment

/// Annotator ids of each group, in label-slot order.
using Allocation = std::vector<std::vector<std::string>>;

/// Cross-check sets of group `g` as annotated by `members` (same sets every
/// call; only the people change).
using CrossCheckRunner = std::function<CrossCheck(std::size_t g, std::span<const std::string> members)>;

struct AdjustConfig {
  double variance_threshold = 1.0;  // sigma^2_max
  std::size_t max_iters = 12;
  std::vector<int> category_order{0, 1, 2, 3, 4, 5};
};

struct TrajectoryPoint {
  std::size_t iteration = 0;
  double mean = 0, variance = 0;  // over the groups' S_r (population variance)
  std::size_t swaps = 0;          // cumulative
  int category = -1;              // category driving this iteration
  std::string moved_up, moved_down;  // highest- and lowest-CR annotators swapped
  bool reverted = false;             // the swap did not lower the variance and was undone
  std::vector<double> group_s_r;
};

struct AdjustResult {
  Allocation allocation;
  std::vector<TrajectoryPoint> trajectory;
  std::size_t swaps = 0;
  bool converged = false;
};

/// Mean and population variance.
std::pair<double, double> mean_variance(std::span<const double> v);

/// Consistency ratio per annotator for one category: the fraction of the
/// annotator's labels, over sets of that category, equal to the prior label.
/// Annotators without such labels are omitted.
std::vector<std::pair<std::string, double>> consistency_ratios(const Allocation& alloc, std::span<const CrossCheck> results,
                                                               int category);

/// Iterates over the categories: swaps the highest-CR annotator (outside the
/// lowest's group) with the lowest-CR annotator, re-runs the two affected
/// groups and re-scores; a swap that does not lower the variance is undone. Stops once mean S_r >= its initial value and the
/// variance is below the threshold (checked before the first swap too), or
/// after max_iters swap rounds.
AdjustResult adjust_personnel(Allocation alloc, const CrossCheckRunner& run, const AdjustConfig& cfg);

/// Simulated cross-check: every set of group g holds m records whose prior
/// label is the set's category; an annotator labels correctly with their
/// skill probability for that category, otherwise uniformly among the other
/// categories. Labels depend only on (seed, group, set, record, annotator).
struct PlantedPopulation {
  std::vector<std::string> ids;
  std::vector<std::vector<double>> skill;  // [annotator][category]
  std::vector<int> set_categories = standard_set_categories();
  std::size_t records_per_set = 100;
  std::size_t num_categories = 6;
  std::uint64_t seed = 1;

  CrossCheck run(std::size_t g, std::span<const std::string> members) const;
};

// ---------------------------------------------------------------------------
// JSON lines

AnnotationRecord record_from_json(const nlohmann::json& j, std::size_t num_categories);
nlohmann::json to_json(const AnnotationRecord& r);

/// Parses one record per non-blank line. Errors name "<file>:<line>".
std::vector<AnnotationRecord> read_records(const std::filesystem::path& path, std::size_t num_categories = 6);
void write_records(const std::filesystem::path& path, std::span<const AnnotationRecord> records);

/// Groups records by (group, set), in first-appearance order, with weights
/// from the composition.
std::vector<std::pair<std::string, CrossCheck>> group_cross_checks(std::span<const AnnotationRecord> records,
                                                                   std::size_t num_categories = 6);

}  // namespace avf::annotation
