#include <algorithm>
#include <cmath>

#include "surrex/common.hpp"
#include "surrex/csv.hpp"
#include "surrex/survival.hpp"

namespace surrex {

std::vector<KmPoint> km_curve(std::span<const Subject> subjects) {
  std::vector<Subject> s(subjects.begin(), subjects.end());
  std::sort(s.begin(), s.end(),
            [](const Subject& a, const Subject& b) { return a.time < b.time; });
  std::vector<KmPoint> curve;
  double surv = 1.0;
  std::size_t i = 0;
  while (i < s.size()) {
    const double t = s[i].time;
    const auto at_risk = static_cast<double>(s.size() - i);
    int events = 0;
    std::size_t j = i;
    while (j < s.size() && s[j].time == t) {
      events += s[j].event;
      ++j;
    }
    if (events > 0) {
      surv *= 1.0 - static_cast<double>(events) / at_risk;
      curve.push_back({t, surv});
    }
    i = j;
  }
  return curve;
}

double km_survival_at(std::span<const KmPoint> curve, double t) {
  double surv = 1.0;
  for (const auto& p : curve) {
    if (p.time > t) break;
    surv = p.survival;
  }
  return surv;
}

void validate_curve(const DigitizedCurve& curve) {
  if (curve.n_start < 1)
    throw ValidationError("curve: n_start must be at least 1");
  if (curve.points.empty())
    throw ValidationError("curve: no digitised points");
  double prev_t = -1.0;
  for (const auto& p : curve.points) {
    if (!(p.time >= 0.0))
      throw ValidationError("curve: negative time " + format_double(p.time));
    if (p.time <= prev_t)
      throw ValidationError("curve: times not strictly increasing at t=" +
                            format_double(p.time));
    prev_t = p.time;
    if (!(p.survival >= 0.0 && p.survival <= 1.0))
      throw ValidationError("curve: survival " + format_double(p.survival) +
                            " outside [0,1] at t=" + format_double(p.time));
    if (p.time == 0.0 && p.survival < 1.0)
      throw ValidationError("curve: survival below 1 at time 0");
  }
  if (curve.total_events &&
      (*curve.total_events < 0 || *curve.total_events > curve.n_start))
    throw ValidationError("curve: total_events outside [0, n_start]");
}

void validate_risk_table(const RiskTable& risk) {
  if (risk.entries.empty())
    throw ValidationError("risk table: no entries");
  if (risk.entries.front().time != 0.0)
    throw ValidationError("risk table: first entry must be at time 0");
  double prev_t = -1.0;
  int prev_n = -1;
  for (const auto& e : risk.entries) {
    if (e.time <= prev_t)
      throw ValidationError("risk table: times not strictly increasing at t=" +
                            format_double(e.time));
    if (e.n_at_risk < 0)
      throw ValidationError("risk table: negative count at t=" +
                            format_double(e.time));
    if (prev_n >= 0 && e.n_at_risk > prev_n)
      throw ValidationError(
          "risk table: counts increase at t=" + format_double(e.time));
    prev_t = e.time;
    prev_n = e.n_at_risk;
  }
}

namespace {

constexpr double kMonotoneJitter = 0.005;

// Digitisation jitter up to kMonotoneJitter is clamped; larger rises are
// infeasible inputs.
std::vector<KmPoint> clamp_monotone(const DigitizedCurve& curve,
                                    std::vector<std::string>& warnings) {
  std::vector<KmPoint> pts;
  double prev_s = 1.0;
  for (const auto& p : curve.points) {
    if (p.time == 0.0) continue;  // implicit (0, 1) anchor
    double s = p.survival;
    if (s > prev_s) {
      if (s - prev_s > kMonotoneJitter)
        throw NumericError("reconstruction infeasible: survival rises by " +
                           format_double(s - prev_s) + " at t=" +
                           format_double(p.time));
      warnings.push_back("clamped rising survival at t=" +
                         format_double(p.time));
      s = prev_s;
    }
    pts.push_back({p.time, s});
    prev_s = s;
  }
  if (pts.empty())
    throw ValidationError("curve: no digitised points after time 0");
  return pts;
}

struct Allocation {
  std::vector<int> events;      // per digitised point
  std::vector<int> censor_pre;  // censored within interval ending at point j
};

// Product-tracking pass: events at each digitised time chosen so the running
// KM product lands as close to the target survival as the risk set allows.
// censor_pre[j] subjects leave (censored) inside interval j before its drop.
Allocation allocate_events(const std::vector<KmPoint>& pts, int n_start,
                           const std::vector<int>& censor_pre) {
  Allocation a;
  a.events.resize(pts.size(), 0);
  a.censor_pre = censor_pre;
  double product = 1.0;
  int at_risk = n_start;
  for (std::size_t j = 0; j < pts.size(); ++j) {
    at_risk -= censor_pre[j];
    if (at_risk < 0) at_risk = 0;
    const double target = pts[j].survival;
    int d = 0;
    if (product > 0.0 && at_risk > 0) {
      const double factor = std::min(1.0, target / product);
      d = static_cast<int>(std::lround(at_risk * (1.0 - factor)));
      d = std::clamp(d, 0, at_risk);
    } else if (target < product) {
      throw NumericError(
          "reconstruction infeasible: survival drops to " +
          format_double(target) + " at t=" + format_double(pts[j].time) +
          " with no subjects at risk");
    }
    if (d > 0) product *= 1.0 - static_cast<double>(d) / at_risk;
    at_risk -= d;
    a.events[j] = d;
  }
  return a;
}

int total_events_of(const Allocation& a) {
  int t = 0;
  for (int d : a.events) t += d;
  return t;
}

void emit_censorings(std::vector<Subject>& subjects, double lo, double hi,
                     int count, int arm) {
  for (int k = 1; k <= count; ++k) {
    const double t = lo + (hi - lo) * static_cast<double>(k) /
                              static_cast<double>(count + 1);
    subjects.push_back({t, 0, arm});
  }
}

PseudoIpd build_subjects(const std::vector<KmPoint>& pts,
                         const Allocation& alloc, int n_start, int arm,
                         double end_time) {
  PseudoIpd out;
  int used = 0;
  for (std::size_t j = 0; j < pts.size(); ++j) {
    const double prev_t = j == 0 ? 0.0 : pts[j - 1].time;
    emit_censorings(out.subjects, prev_t, pts[j].time, alloc.censor_pre[j],
                    arm);
    used += alloc.censor_pre[j];
    for (int k = 0; k < alloc.events[j]; ++k)
      out.subjects.push_back({pts[j].time, 1, arm});
    used += alloc.events[j];
  }
  // everyone still at risk leaves as censored at the end of follow-up
  for (int k = used; k < n_start; ++k)
    out.subjects.push_back({end_time, 0, arm});
  return out;
}

ReconstructResult reconstruct_without_risk(const DigitizedCurve& curve,
                                           const std::vector<KmPoint>& pts,
                                           int arm_label,
                                           std::vector<std::string> warnings) {
  if (!curve.total_events)
    throw ValidationError(
        "reconstruction without a risk table needs total_events");
  const int n = curve.n_start;
  const int target_events = *curve.total_events;
  const auto m = pts.size();

  // Search the total within-interval censoring count whose uniform spread
  // reproduces the reported number of events.
  std::vector<int> none(m, 0);
  Allocation best = allocate_events(pts, n, none);
  int best_gap = std::abs(total_events_of(best) - target_events);
  if (best_gap != 0) {
    for (int c = 1; c <= n && best_gap != 0; ++c) {
      std::vector<int> censor(m, c / static_cast<int>(m));
      for (std::size_t j = 0; j < c % m; ++j) ++censor[j];
      Allocation trial = allocate_events(pts, n, censor);
      const int gap = std::abs(total_events_of(trial) - target_events);
      if (gap < best_gap) {
        best_gap = gap;
        best = std::move(trial);
      }
    }
  }
  if (best_gap != 0)
    warnings.push_back("event total off by " + std::to_string(best_gap) +
                       " from total_events; closest feasible allocation used");

  const double end_time = pts.back().time;
  ReconstructResult r{build_subjects(pts, best, n, arm_label, end_time),
                      std::move(warnings)};
  return r;
}

// Largest-remainder split of `total` censorings over sub-interval lengths.
std::vector<int> split_by_length(const std::vector<double>& lengths,
                                 int total) {
  std::vector<int> counts(lengths.size(), 0);
  double sum = 0.0;
  for (double l : lengths) sum += l;
  if (total <= 0 || sum <= 0.0) return counts;
  std::vector<std::pair<double, std::size_t>> remainders;
  int assigned = 0;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    const double share = total * lengths[i] / sum;
    counts[i] = static_cast<int>(std::floor(share));
    assigned += counts[i];
    remainders.push_back({share - std::floor(share), i});
  }
  std::sort(remainders.begin(), remainders.end(), [](auto& a, auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (int r = 0; r < total - assigned; ++r)
    ++counts[remainders[r % remainders.size()].second];
  return counts;
}

// One risk-table interval: drops inside it plus a censoring budget that must
// bring the risk set down to the next tabulated count. Censorings spread
// uniformly in time across the interval, interleaved with the drops, and the
// event counts are re-solved until the split stabilises.
struct IntervalResult {
  std::vector<int> events;       // per drop inside the interval
  std::vector<int> censor_pre;   // censored before each drop
  int censor_post = 0;           // censored after the last drop
  int at_risk_end = 0;
  double product_end = 1.0;
};

IntervalResult solve_interval(const std::vector<KmPoint>& pts,
                              std::size_t first, std::size_t last_exclusive,
                              double t_start, double t_end, int at_risk_start,
                              double product_start, int loss_budget,
                              std::vector<std::string>& warnings) {
  const std::size_t n_drops = last_exclusive - first;
  std::vector<double> lengths;
  for (std::size_t j = first; j < last_exclusive; ++j)
    lengths.push_back(pts[j].time - (j == first ? t_start : pts[j - 1].time));
  lengths.push_back(t_end - (n_drops ? pts[last_exclusive - 1].time : t_start));

  IntervalResult res;
  res.events.assign(n_drops, 0);
  res.censor_pre.assign(n_drops, 0);

  // state of one candidate pre-drop censor split
  struct Fit {
    std::vector<int> events;
    double product_end = 1.0;
    int total_events = 0;
    int deficit = 0;     // censorings that no longer fit the loss budget
    double km_error = 0.0;

    bool better_than(const Fit& other) const {
      if (deficit != other.deficit) return deficit < other.deficit;
      return km_error < other.km_error - 1e-15;
    }
  };

  const auto track = [&](const std::vector<int>& pre) {
    Fit fit;
    fit.events.assign(n_drops, 0);
    double product = product_start;
    int at_risk = at_risk_start;
    int pre_total = 0;
    for (std::size_t j = 0; j < n_drops; ++j) {
      at_risk -= pre[j];
      pre_total += pre[j];
      if (at_risk < 0) at_risk = 0;
      const double target = pts[first + j].survival;
      int d = 0;
      if (product > 0.0 && at_risk > 0) {
        const double factor = std::min(1.0, target / product);
        d = static_cast<int>(std::lround(at_risk * (1.0 - factor)));
        d = std::clamp(d, 0, at_risk);
      } else if (target < product) {
        throw NumericError("reconstruction infeasible: survival drops at t=" +
                           format_double(pts[first + j].time) +
                           " with no subjects at risk");
      }
      if (d > 0) {
        product *= 1.0 - static_cast<double>(d) / at_risk;
        at_risk -= d;
      }
      fit.events[j] = d;
      fit.total_events += d;
      fit.km_error += std::fabs(product - target);
    }
    fit.product_end = product;
    fit.deficit = std::max(0, fit.total_events + pre_total - loss_budget);
    return fit;
  };

  // start from a uniform-in-time split, then shift single censorings while
  // that improves the fit; the post-drop slot absorbs the remaining budget so
  // the tabulated count at t_end stays exact
  std::vector<int> censor_pre(n_drops, 0);
  {
    Fit fit = track(censor_pre);
    for (int pass = 0; pass < 25; ++pass) {
      const auto full_split =
          split_by_length(lengths, std::max(0, loss_budget - fit.total_events));
      std::vector<int> next(full_split.begin(), full_split.end() - 1);
      if (next == censor_pre) break;
      censor_pre = std::move(next);
      fit = track(censor_pre);
    }
  }
  Fit best = track(censor_pre);
  for (int moves = 0; moves < 300; ++moves) {
    bool improved = false;
    for (std::size_t s = 0; s < n_drops && !improved; ++s) {
      for (const int delta : {+1, -1}) {
        if (delta < 0 && censor_pre[s] == 0) continue;
        censor_pre[s] += delta;
        int pre_total = 0;
        for (int c : censor_pre) pre_total += c;
        if (pre_total > std::max(0, loss_budget)) {
          censor_pre[s] -= delta;
          continue;
        }
        const Fit trial = track(censor_pre);
        if (trial.better_than(best)) {
          best = trial;
          improved = true;
          break;
        }
        censor_pre[s] -= delta;
      }
    }
    if (!improved) break;
  }

  res.events = best.events;
  res.censor_pre = censor_pre;
  res.product_end = best.product_end;
  int pre_total = 0;
  for (int c : censor_pre) pre_total += c;
  res.censor_post = std::max(0, loss_budget - best.total_events - pre_total);
  if (best.total_events + pre_total > loss_budget)
    warnings.push_back("risk count at t=" + format_double(t_end) +
                       " unreachable; short by " +
                       std::to_string(best.total_events + pre_total -
                                      loss_budget));
  res.at_risk_end =
      at_risk_start - best.total_events - pre_total - res.censor_post;
  return res;
}

ReconstructResult reconstruct_with_risk(const DigitizedCurve& curve,
                                        const RiskTable& risk,
                                        const std::vector<KmPoint>& pts,
                                        int arm_label,
                                        std::vector<std::string> warnings) {
  validate_risk_table(risk);
  const int n = curve.n_start;
  if (risk.entries.front().n_at_risk != n)
    throw ValidationError("risk table count at time 0 (" +
                          std::to_string(risk.entries.front().n_at_risk) +
                          ") does not match n_start (" + std::to_string(n) +
                          ")");

  PseudoIpd out;
  double product = 1.0;
  int at_risk = n;
  std::size_t j = 0;
  int events_total = 0;

  for (std::size_t k = 0; k + 1 < risk.entries.size(); ++k) {
    const double t_start = risk.entries[k].time;
    const double t_end = risk.entries[k + 1].time;
    std::size_t last = j;
    while (last < pts.size() && pts[last].time < t_end) ++last;

    const int loss = at_risk - risk.entries[k + 1].n_at_risk;
    const auto interval = solve_interval(pts, j, last, t_start, t_end, at_risk,
                                         product, loss, warnings);
    for (std::size_t d = 0; d < interval.events.size(); ++d) {
      const double prev_t = d == 0 ? t_start : pts[j + d - 1].time;
      emit_censorings(out.subjects, prev_t, pts[j + d].time,
                      interval.censor_pre[d], arm_label);
      for (int e = 0; e < interval.events[d]; ++e)
        out.subjects.push_back({pts[j + d].time, 1, arm_label});
      events_total += interval.events[d];
    }
    const double post_lo = last > j ? pts[last - 1].time : t_start;
    emit_censorings(out.subjects, post_lo, t_end, interval.censor_post,
                    arm_label);
    product = interval.product_end;
    at_risk = interval.at_risk_end;
    j = last;
  }

  // drops beyond the last tabulated time
  while (j < pts.size()) {
    const double target = pts[j].survival;
    int d = 0;
    if (product > 0.0 && at_risk > 0) {
      const double factor = std::min(1.0, target / product);
      d = static_cast<int>(std::lround(at_risk * (1.0 - factor)));
      d = std::clamp(d, 0, at_risk);
    } else if (target < product) {
      throw NumericError("reconstruction infeasible: survival drops at t=" +
                         format_double(pts[j].time) +
                         " with no subjects at risk");
    }
    if (d > 0) {
      product *= 1.0 - static_cast<double>(d) / at_risk;
      at_risk -= d;
      events_total += d;
    }
    for (int e = 0; e < d; ++e)
      out.subjects.push_back({pts[j].time, 1, arm_label});
    ++j;
  }

  const double end_time = std::max(pts.back().time, risk.entries.back().time);
  for (int k = 0; k < at_risk; ++k)
    out.subjects.push_back({end_time, 0, arm_label});

  if (curve.total_events && events_total != *curve.total_events)
    warnings.push_back("allocated " + std::to_string(events_total) +
                       " events but total_events=" +
                       std::to_string(*curve.total_events));
  return {std::move(out), std::move(warnings)};
}

}  // namespace

ReconstructResult reconstruct_ipd(const DigitizedCurve& curve,
                                  const std::optional<RiskTable>& risk,
                                  int arm_label) {
  validate_curve(curve);
  std::vector<std::string> warnings;
  const auto pts = clamp_monotone(curve, warnings);
  ReconstructResult result =
      risk ? reconstruct_with_risk(curve, *risk, pts, arm_label,
                                   std::move(warnings))
           : reconstruct_without_risk(curve, pts, arm_label,
                                      std::move(warnings));
  std::sort(result.ipd.subjects.begin(), result.ipd.subjects.end(),
            [](const Subject& a, const Subject& b) {
              if (a.time != b.time) return a.time < b.time;
              return a.event > b.event;
            });
  return result;
}

DigitizedCurve read_curve_csv(const std::string& path, int n_start,
                              std::optional<int> total_events) {
  const auto table = csv::read_file(path);
  const int c_t = table.require_column("time", path);
  const int c_s = table.require_column("survival", path);
  DigitizedCurve curve;
  curve.n_start = n_start;
  curve.total_events = total_events;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const std::string where = path + " row " + std::to_string(i + 2);
    curve.points.push_back(
        {csv::parse_double(table.rows[i][c_t], where + " time"),
         csv::parse_double(table.rows[i][c_s], where + " survival")});
  }
  validate_curve(curve);
  return curve;
}

RiskTable read_risk_csv(const std::string& path) {
  const auto table = csv::read_file(path);
  const int c_t = table.require_column("time", path);
  const int c_n = table.require_column("n_at_risk", path);
  RiskTable risk;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const std::string where = path + " row " + std::to_string(i + 2);
    risk.entries.push_back(
        {csv::parse_double(table.rows[i][c_t], where + " time"),
         static_cast<int>(
             csv::parse_long(table.rows[i][c_n], where + " n_at_risk"))});
  }
  validate_risk_table(risk);
  return risk;
}

}  // namespace surrex
