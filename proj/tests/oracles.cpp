#include "oracles.hpp"

#include <algorithm>
#include <cmath>

namespace oracle {

namespace {

bool in_risk_set(const Obs& o, double t, int event, bool gray) {
  if (o.time >= t) return true;
  if (!gray) return false;
  return o.status != 0 && o.status != event && o.censor > t;
}

double count_at_risk(const std::vector<Obs>& rows, double t, int event, bool gray) {
  double y = 0;
  for (const auto& o : rows) y += in_risk_set(o, t, event, gray) ? 1 : 0;
  return y;
}

double count_events(const std::vector<Obs>& rows, double t, int event) {
  double d = 0;
  for (const auto& o : rows) d += (o.time == t && o.status == event) ? 1 : 0;
  return d;
}

double count_all_events(const std::vector<Obs>& rows, double t) {
  double d = 0;
  for (const auto& o : rows) d += (o.time == t && o.status != 0) ? 1 : 0;
  return d;
}

}  // namespace

std::vector<double> event_times(const std::vector<Obs>& rows) {
  std::vector<double> v;
  for (const auto& o : rows) {
    if (o.status != 0 && std::find(v.begin(), v.end(), o.time) == v.end()) v.push_back(o.time);
  }
  std::sort(v.begin(), v.end());
  return v;
}

Score log_rank(const std::vector<Obs>& left, const std::vector<Obs>& right, const std::vector<int>& focus, bool gray) {
  std::vector<Obs> all = left;
  all.insert(all.end(), right.begin(), right.end());
  const std::vector<double> v = event_times(all);
  Score s;
  for (int j : focus) {
    for (double t : v) {
      const double y = count_at_risk(all, t, j, gray);
      const double yl = count_at_risk(left, t, j, gray);
      const double d = count_events(all, t, j);
      const double dl = count_events(left, t, j);
      s.numerator += dl - d * yl / y;
      if (y > 1) s.variance += (yl / y) * (1 - yl / y) * ((y - d) / (y - 1));
    }
  }
  s.valid = s.variance > 0;
  s.value = s.valid ? std::fabs(s.numerator) / std::sqrt(s.variance) : 0.0;
  return s;
}

double kaplan_meier(const std::vector<Obs>& rows, double t) {
  double s = 1.0;
  for (double v : event_times(rows)) {
    if (v > t) break;
    s *= 1.0 - count_all_events(rows, v) / count_at_risk(rows, v, 0, false);
  }
  return s;
}

double aalen_johansen(const std::vector<Obs>& rows, int event, double t) {
  double f = 0.0;
  double s_prev = 1.0;
  for (double v : event_times(rows)) {
    if (v > t) break;
    const double y = count_at_risk(rows, v, 0, false);
    f += s_prev * count_events(rows, v, event) / y;
    s_prev *= 1.0 - count_all_events(rows, v) / y;
  }
  return f;
}

double nelson_aalen(const std::vector<Obs>& rows, int event, double t) {
  double h = 0.0;
  for (double v : event_times(rows)) {
    if (v > t) break;
    h += count_events(rows, v, event) / count_at_risk(rows, v, 0, false);
  }
  return h;
}

double concordance_error(const std::vector<Obs>& rows, const std::vector<double>& mortality, int event) {
  std::uint64_t pairs = 0;
  std::uint64_t twice_concordant = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].status != event) continue;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if (!(rows[i].time < rows[k].time)) continue;
      ++pairs;
      if (mortality[i] > mortality[k]) twice_concordant += 2;
      if (mortality[i] == mortality[k]) twice_concordant += 1;
    }
  }
  if (pairs == 0) return -1.0;
  return 1.0 - static_cast<double>(twice_concordant) / (2.0 * static_cast<double>(pairs));
}

double expected_oob_fraction(std::uint64_t n) {
  return std::pow(1.0 - 1.0 / static_cast<double>(n), static_cast<double>(n));
}

}  // namespace oracle
