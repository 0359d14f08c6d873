// Copyright 2026 The avfusion Authors
// SPDX-License-Identifier: Apache-2.0

#include "avf/annotation.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "avf/dataset.hpp"
#include "avf/errors.hpp"
#include "avf/rng.hpp"

namespace avf::annotation {

double assignment_score(const AnnotatorProfile& a) {
  const std::pair<const char*, const std::optional<double>*> fields[] = {
      {"we", &a.we}, {"ms", &a.ms}, {"eb", &a.eb}, {"cb", &a.cb}, {"lp", &a.lp}};
  for (const auto& [name, value] : fields) {
    if (!value->has_value()) throw InputError("annotator '" + a.id + "': missing score '" + name + "'");
    if (!std::isfinite(**value) || **value < 0) {
      throw InputError("annotator '" + a.id + "': score '" + name + "' must be finite and >= 0");
    }
  }
  return 0.4 * *a.we + 0.3 * *a.ms + 0.1 * (*a.eb + *a.cb + *a.lp);
}

void validate_gender_balance(std::span<const std::vector<AnnotatorProfile>> groups) {
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto male = std::count_if(groups[g].begin(), groups[g].end(), [](const auto& a) { return a.gender == 'M'; });
    const auto female = std::count_if(groups[g].begin(), groups[g].end(), [](const auto& a) { return a.gender == 'F'; });
    if (groups[g].size() != 3 || male != 2 || female != 1) {
      throw ConfigError("group " + std::to_string(g) + " is not two male and one female annotator");
    }
  }
}

std::vector<int> standard_set_categories() { return {2, 2, 2, 0, 0, 4, 3, 5, 1}; }

void assign_weights(CrossCheck& cc) {
  std::map<int, std::size_t> mult;
  for (const CheckSet& s : cc.sets) ++mult[s.category];
  for (CheckSet& s : cc.sets) s.weight = 1.0 / static_cast<double>(mult[s.category]);
}

int majority_label(std::span<const int> labels) {
  if (labels.size() != 3) throw InputError("expected 3 member labels, got " + std::to_string(labels.size()));
  if (labels[0] == labels[1] || labels[0] == labels[2]) return labels[0];
  if (labels[1] == labels[2]) return labels[1];
  return kMore;
}

namespace {

void check_record(const AnnotationRecord& r, std::size_t k) {
  if (r.labels.size() != 3) {
    throw InputError("record '" + r.sample_id + "': expected 3 member labels, got " + std::to_string(r.labels.size()));
  }
  for (int l : r.labels)
    if (l < 0 || static_cast<std::size_t>(l) >= k) {
      throw InputError("record '" + r.sample_id + "': label " + std::to_string(l) + " outside the taxonomy");
    }
  if (r.prior != kMore && (r.prior < 0 || static_cast<std::size_t>(r.prior) >= k)) {
    throw InputError("record '" + r.sample_id + "': prior label " + std::to_string(r.prior) + " outside the taxonomy");
  }
}

void check_cross_check(const CrossCheck& cc) {
  if (cc.sets.empty()) throw InputError("cross-check has no sets");
  if (cc.num_categories == 0) throw ConfigError("num_categories must be positive");
  for (const CheckSet& s : cc.sets) {
    if (s.records.empty()) throw InputError("cross-check set without records");
    for (const auto& r : s.records) check_record(r, cc.num_categories);
  }
}

}  // namespace

std::vector<SetScore> score_sets(const CrossCheck& cc) {
  check_cross_check(cc);
  std::map<int, std::size_t> mult;
  for (const CheckSet& s : cc.sets) ++mult[s.category];
  std::vector<SetScore> out;
  for (const CheckSet& s : cc.sets) {
    const double expect = 1.0 / static_cast<double>(mult[s.category]);
    if (std::abs(s.weight - expect) > 1e-12) {
      throw ConfigError("set weight " + std::to_string(s.weight) + " for category " + std::to_string(s.category) +
                        " does not match its multiplicity (expected " + std::to_string(expect) + ")");
    }
    SetScore sc;
    sc.m = s.records.size();
    sc.weight = s.weight;
    for (const auto& r : s.records) {
      for (int l : r.labels) sc.matches += l == r.prior;
      const int group_label = majority_label(r.labels);
      if (group_label == kMore) {
        ++sc.more;
      } else if (group_label == r.prior) {
        ++sc.consistent;
      }
    }
    sc.s_r_term = s.weight * (0.7 * static_cast<double>(sc.consistent) +
                              0.3 * static_cast<double>(sc.m - sc.consistent - sc.more));
    out.push_back(sc);
  }
  return out;
}

double s_a(const CrossCheck& cc) {
  check_cross_check(cc);
  double total = 0;
  for (const CheckSet& s : cc.sets) {
    std::size_t c = 0;
    for (const auto& r : s.records)
      for (int l : r.labels) c += l == r.prior;
    total += static_cast<double>(c) / (3.0 * static_cast<double>(s.records.size()));
  }
  return total / static_cast<double>(cc.sets.size());
}

double s_r(const CrossCheck& cc) {
  double total = 0;
  for (const SetScore& sc : score_sets(cc)) total += sc.s_r_term;
  return total / static_cast<double>(cc.num_categories);
}

KappaResult fleiss_kappa(const std::vector<std::vector<std::size_t>>& counts, std::size_t raters) {
  if (raters < 2) throw InputError("Fleiss' kappa needs at least 2 raters per item");
  if (counts.empty()) throw InputError("Fleiss' kappa over zero items");
  const std::size_t k = counts.front().size();
  const double n = static_cast<double>(raters);
  std::vector<double> column(k, 0.0);
  double p_sum = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i].size() != k) throw InputError("rating row " + std::to_string(i) + " has a different category count");
    std::size_t row = 0;
    double agree = 0;
    for (std::size_t j = 0; j < k; ++j) {
      row += counts[i][j];
      column[j] += static_cast<double>(counts[i][j]);
      agree += static_cast<double>(counts[i][j]) * static_cast<double>(counts[i][j]);
    }
    if (row != raters) {
      throw InputError("rating row " + std::to_string(i) + " sums to " + std::to_string(row) + ", expected " +
                       std::to_string(raters));
    }
    p_sum += (agree - n) / (n * (n - 1));
  }
  KappaResult r;
  const double items = static_cast<double>(counts.size());
  r.p_bar = p_sum / items;
  for (double c : column) {
    const double pj = c / (items * n);
    r.p_e += pj * pj;
  }
  if (r.p_e >= 1.0) {
    r.degenerate = true;
    r.kappa = 1.0;
    return r;
  }
  r.kappa = (r.p_bar - r.p_e) / (1.0 - r.p_e);
  return r;
}

KappaResult fleiss_kappa(std::span<const AnnotationRecord> records, std::size_t num_categories) {
  std::vector<std::vector<std::size_t>> counts;
  counts.reserve(records.size());
  for (const auto& r : records) {
    check_record(r, num_categories);
    std::vector<std::size_t> row(num_categories, 0);
    for (int l : r.labels) ++row[static_cast<std::size_t>(l)];
    counts.push_back(std::move(row));
  }
  return fleiss_kappa(counts, 3);
}

std::optional<int> unique_mode(std::span<const int> votes) {
  std::map<int, std::size_t> count;
  for (int v : votes) ++count[v];
  std::optional<int> best;
  std::size_t top = 0;
  bool tied = false;
  for (const auto& [label, c] : count) {
    if (c > top) {
      top = c;
      best = label;
      tied = false;
    } else if (c == top) {
      tied = true;
    }
  }
  if (tied) return std::nullopt;
  return best;
}

Resolution resolve_label(std::span<const int> members, std::optional<int> leader, std::optional<int> second_leader,
                         std::optional<int> expert) {
  for (int v : members)
    if (v < 0) throw InputError("vote labels must be category ids");
  const int majority = majority_label(members);
  if (majority != kMore) return {ResolutionStatus::resolved, majority, 1};
  std::vector<int> votes(members.begin(), members.end());
  const std::pair<int, std::optional<int>> escalation[] = {{2, leader}, {3, second_leader}};
  for (const auto& [stage, vote] : escalation) {
    if (!vote) return {ResolutionStatus::incomplete, kMore, stage};
    if (*vote < 0) throw InputError("vote labels must be category ids");
    votes.push_back(*vote);
    if (auto mode = unique_mode(votes)) return {ResolutionStatus::resolved, *mode, stage};
  }
  if (!expert) return {ResolutionStatus::incomplete, kMore, 4};
  if (*expert < 0) throw InputError("vote labels must be category ids");
  return {ResolutionStatus::resolved, *expert, 4};
}

// ---------------------------------------------------------------------------

std::pair<double, double> mean_variance(std::span<const double> v) {
  if (v.empty()) return {0.0, 0.0};
  double mean = 0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0;
  for (double x : v) var += (x - mean) * (x - mean);
  return {mean, var / static_cast<double>(v.size())};
}

std::vector<std::pair<std::string, double>> consistency_ratios(const Allocation& alloc, std::span<const CrossCheck> results,
                                                               int category) {
  if (alloc.size() != results.size()) throw ContractError("one cross-check result per group expected");
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t g = 0; g < alloc.size(); ++g) {
    for (std::size_t slot = 0; slot < alloc[g].size(); ++slot) {
      const std::string& id = alloc[g][slot];
      std::size_t total = 0, hits = 0;
      for (const CheckSet& s : results[g].sets) {
        if (s.category != category) continue;
        for (const auto& r : s.records) {
          std::size_t k = slot;
          if (!r.annotators.empty()) {
            const auto it = std::find(r.annotators.begin(), r.annotators.end(), id);
            if (it == r.annotators.end()) continue;
            k = static_cast<std::size_t>(it - r.annotators.begin());
          }
          if (k >= r.labels.size()) continue;
          ++total;
          hits += r.labels[k] == r.prior;
        }
      }
      if (total > 0) out.emplace_back(id, static_cast<double>(hits) / static_cast<double>(total));
    }
  }
  return out;
}

namespace {

std::pair<std::size_t, std::size_t> locate(const Allocation& alloc, const std::string& id) {
  for (std::size_t g = 0; g < alloc.size(); ++g)
    for (std::size_t s = 0; s < alloc[g].size(); ++s)
      if (alloc[g][s] == id) return {g, s};
  throw ContractError("annotator '" + id + "' is not allocated");
}

}  // namespace

AdjustResult adjust_personnel(Allocation alloc, const CrossCheckRunner& run, const AdjustConfig& cfg) {
  if (alloc.size() < 2) throw ConfigError("personnel adjustment needs at least 2 groups");
  if (!(cfg.variance_threshold >= 0)) throw ConfigError("variance threshold must be >= 0");
  if (cfg.category_order.empty()) throw ConfigError("category order is empty");

  std::vector<CrossCheck> results;
  std::vector<double> scores;
  for (std::size_t g = 0; g < alloc.size(); ++g) {
    results.push_back(run(g, alloc[g]));
    scores.push_back(s_r(results.back()));
  }
  AdjustResult out;
  auto [mean0, var0] = mean_variance(scores);
  out.trajectory.push_back({0, mean0, var0, 0, -1, "", "", false, scores});
  if (var0 < cfg.variance_threshold) {
    out.converged = true;
    out.allocation = std::move(alloc);
    return out;
  }
  for (std::size_t iter = 1; iter <= cfg.max_iters; ++iter) {
    const int cat = cfg.category_order[(iter - 1) % cfg.category_order.size()];
    const auto crs = consistency_ratios(alloc, results, cat);
    TrajectoryPoint pt{iter, 0, 0, out.swaps, cat, "", "", false, {}};
    if (!crs.empty()) {
      // Ties: the first annotator in allocation order wins.
      auto low = crs.begin();
      for (auto it = crs.begin(); it != crs.end(); ++it)
        if (it->second < low->second) low = it;
      const auto [g_low, s_low] = locate(alloc, low->first);
      std::optional<std::size_t> high;
      for (std::size_t i = 0; i < crs.size(); ++i) {
        if (locate(alloc, crs[i].first).first == g_low) continue;
        if (!high || crs[i].second > crs[*high].second) high = i;
      }
      if (high && crs[*high].second > low->second) {
        const auto [g_high, s_high] = locate(alloc, crs[*high].first);
        pt.moved_up = crs[*high].first;
        pt.moved_down = low->first;
        const double var_before = mean_variance(scores).second;
        const auto saved_results = results;
        const auto saved_scores = scores;
        std::swap(alloc[g_low][s_low], alloc[g_high][s_high]);
        for (std::size_t g : {g_low, g_high}) {
          results[g] = run(g, alloc[g]);
          scores[g] = s_r(results[g]);
        }
        if (mean_variance(scores).second < var_before) {
          ++out.swaps;
        } else {
          // Undo: a swap that does not even out the groups would just be
          // reversed in a later round.
          std::swap(alloc[g_low][s_low], alloc[g_high][s_high]);
          results = saved_results;
          scores = saved_scores;
          pt.reverted = true;
        }
      }
    }
    std::tie(pt.mean, pt.variance) = mean_variance(scores);
    pt.swaps = out.swaps;
    pt.group_s_r = scores;
    out.trajectory.push_back(pt);
    if (pt.mean >= mean0 && pt.variance < cfg.variance_threshold) {
      out.converged = true;
      break;
    }
  }
  out.allocation = std::move(alloc);
  return out;
}

CrossCheck PlantedPopulation::run(std::size_t g, std::span<const std::string> members) const {
  if (num_categories < 2) throw ConfigError("planted population needs at least 2 categories");
  if (members.size() != 3) throw ConfigError("groups have exactly 3 members");
  std::vector<std::size_t> who;
  for (const std::string& id : members) {
    const auto it = std::find(ids.begin(), ids.end(), id);
    if (it == ids.end()) throw ConfigError("unknown annotator '" + id + "'");
    who.push_back(static_cast<std::size_t>(it - ids.begin()));
  }
  CrossCheck cc;
  cc.num_categories = num_categories;
  for (std::size_t i = 0; i < set_categories.size(); ++i) {
    const int cat = set_categories[i];
    CheckSet set;
    set.category = cat;
    for (std::size_t j = 0; j < records_per_set; ++j) {
      AnnotationRecord r;
      r.sample_id = "g" + std::to_string(g) + "_s" + std::to_string(i) + "_" + std::to_string(j);
      r.prior = cat;
      r.set = i;
      r.category = cat;
      r.annotators.assign(members.begin(), members.end());
      for (std::size_t a : who) {
        Rng rng(derive_seed(derive_seed(seed, g, i), j, fnv1a(ids[a])));
        const double p = skill.at(a).at(static_cast<std::size_t>(cat));
        if (rng.uniform() < p) {
          r.labels.push_back(cat);
        } else {
          int other = static_cast<int>(rng.below(num_categories - 1));
          if (other >= cat) ++other;
          r.labels.push_back(other);
        }
      }
      set.records.push_back(std::move(r));
    }
    cc.sets.push_back(std::move(set));
  }
  assign_weights(cc);
  return cc;
}

}  // namespace avf::annotation
