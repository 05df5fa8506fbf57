#ifndef LATENT_INDEX_FEATURES_HPP_
#define LATENT_INDEX_FEATURES_HPP_

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "latent_index/csv.hpp"
#include "latent_index/errors.hpp"
#include "latent_index/item_set.hpp"
#include "latent_index/latent_trait.hpp"
#include "latent_index/stats.hpp"

namespace latent_index {

enum class Titularity { kPublic, kPrivate };
enum class ServiceType { kKindergarten, kSezionePrimavera };

inline std::string_view to_string(Titularity t) {
  return t == Titularity::kPublic ? "public" : "private";
}
inline std::string_view to_string(ServiceType s) {
  return s == ServiceType::kKindergarten ? "kindergarten" : "sezione_primavera";
}

inline constexpr std::array<std::string_view, 8> kSurveyKeyColumns = {
    "unit_id",      "province", "region", "macro_area", "titularity",
    "service_type", "weight",   "foreign_enrolled"};

// One row per surveyed service. Items hold 0, 1 or ResponseMatrix::kMissing
// in kServiceItemNames order.
struct SurveyDataset {
  std::vector<std::string> unit_id, province, region, macro_area;
  std::vector<Titularity> titularity;
  std::vector<ServiceType> service_type;
  std::vector<double> weight;
  std::vector<std::int64_t> foreign_enrolled;
  std::vector<std::array<std::int8_t, kServiceItemNames.size()>> items;

  std::size_t size() const { return unit_id.size(); }
  bool operator==(const SurveyDataset&) const = default;
};

struct ProvinceInfo {
  std::string province, region, macro_area;
  double foreign_residents = 0.0;  // f_p, resident foreign children aged 0-2
  std::int64_t population_units = 0;

  bool operator==(const ProvinceInfo&) const = default;
};

// Province file rows in file order.
struct ProvinceFile {
  std::vector<ProvinceInfo> rows;

  const ProvinceInfo* find(std::string_view province) const {
    for (const auto& r : rows)
      if (r.province == province) return &r;
    return nullptr;
  }
  std::vector<std::string> provinces() const {
    std::vector<std::string> out;
    for (const auto& r : rows) out.push_back(r.province);
    return out;
  }
};

inline ProvinceFile parse_provinces(const CsvTable& t) {
  const std::size_t c_id = t.column("province_id"), c_region = t.column("region"),
                    c_macro = t.column("macro_area"), c_f = t.column("f_p"),
                    c_units = t.column("population_units");
  ProvinceFile out;
  std::map<std::string, std::string> macro_of_region;
  std::set<std::string> seen;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    ProvinceInfo p;
    p.province = t.rows[r][c_id];
    p.region = t.rows[r][c_region];
    p.macro_area = t.rows[r][c_macro];
    if (p.province.empty() || p.region.empty() || p.macro_area.empty())
      t.fail(r, "empty province, region or macro_area");
    if (!seen.insert(p.province).second) t.fail(r, "duplicate province '" + p.province + "'");
    p.foreign_residents = parse_double(t, r, c_f);
    if (p.foreign_residents < 0.0) t.fail(r, "f_p must be nonnegative");
    p.population_units = parse_int(t, r, c_units);
    if (p.population_units < 0) t.fail(r, "population_units must be nonnegative");
    const auto [it, fresh] = macro_of_region.emplace(p.region, p.macro_area);
    if (!fresh && it->second != p.macro_area)
      throw HierarchyError(t.path, t.lines[r],
                           "region '" + p.region + "' appears in macro areas '" + it->second +
                               "' and '" + p.macro_area + "'");
    out.rows.push_back(std::move(p));
  }
  if (out.rows.empty()) throw ValidationError(t.path + ": no provinces");
  return out;
}

inline ProvinceFile load_provinces(const std::string& path) {
  return parse_provinces(read_csv(path));
}

inline std::string write_provinces(const ProvinceFile& f) {
  CsvWriter w({"province_id", "region", "macro_area", "f_p", "population_units"});
  for (const auto& p : f.rows)
    w.row({p.province, p.region, p.macro_area, format_number(p.foreign_residents),
           std::to_string(p.population_units)});
  return w.str();
}

// Validates every row; with `provinces` given, each unit's province must be
// listed there with the same region and macro area.
inline SurveyDataset parse_survey(const CsvTable& t, const ProvinceFile* provinces = nullptr) {
  std::array<std::size_t, kSurveyKeyColumns.size()> key{};
  for (std::size_t i = 0; i < key.size(); ++i) key[i] = t.column(kSurveyKeyColumns[i]);
  std::array<std::size_t, kServiceItemNames.size()> item_col{};
  for (std::size_t i = 0; i < item_col.size(); ++i) item_col[i] = t.column(kServiceItemNames[i]);

  SurveyDataset d;
  std::set<std::string> ids;
  std::map<std::string, std::pair<std::string, std::string>> parent;  // province -> region, macro
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string& id = row[key[0]];
    if (id.empty()) t.fail(r, "empty unit_id");
    if (!ids.insert(id).second) t.fail(r, "duplicate unit_id '" + id + "'");
    const std::string &prov = row[key[1]], &region = row[key[2]], &macro = row[key[3]];
    if (prov.empty() || region.empty() || macro.empty())
      t.fail(r, "empty province, region or macro_area");
    const auto [it, fresh] = parent.try_emplace(prov, region, macro);
    if (!fresh && it->second != std::make_pair(region, macro))
      throw HierarchyError(t.path, t.lines[r],
                           "province '" + prov + "' is listed under region '" + region +
                               "' here and '" + it->second.first + "' earlier");
    if (provinces) {
      const ProvinceInfo* p = provinces->find(prov);
      if (!p)
        throw HierarchyError(t.path, t.lines[r],
                             "province '" + prov + "' is not in the province file");
      if (p->region != region || p->macro_area != macro)
        throw HierarchyError(t.path, t.lines[r],
                             "province '" + prov + "' belongs to region '" + p->region +
                                 "' / '" + p->macro_area + "' in the province file");
    }
    Titularity tit{};
    if (row[key[4]] == "public") tit = Titularity::kPublic;
    else if (row[key[4]] == "private") tit = Titularity::kPrivate;
    else t.fail(r, "titularity must be 'public' or 'private', got '" + row[key[4]] + "'");
    ServiceType st{};
    if (row[key[5]] == "kindergarten") st = ServiceType::kKindergarten;
    else if (row[key[5]] == "sezione_primavera") st = ServiceType::kSezionePrimavera;
    else t.fail(r, "service_type must be 'kindergarten' or 'sezione_primavera', got '" +
                       row[key[5]] + "'");
    const double w = parse_double(t, r, key[6]);
    if (!(w > 0.0)) t.fail(r, "weight must be positive");
    const std::int64_t c = parse_int(t, r, key[7]);
    if (c < 0) t.fail(r, "foreign_enrolled must be nonnegative");
    std::array<std::int8_t, kServiceItemNames.size()> items{};
    for (std::size_t i = 0; i < items.size(); ++i) {
      const std::string& f = row[item_col[i]];
      if (is_missing_field(f)) items[i] = ResponseMatrix::kMissing;
      else if (f == "0") items[i] = 0;
      else if (f == "1") items[i] = 1;
      else t.fail(r, "item '" + std::string(kServiceItemNames[i]) + "' must be 0, 1 or missing, got '" + f + "'");
    }
    d.unit_id.push_back(id);
    d.province.push_back(prov);
    d.region.push_back(region);
    d.macro_area.push_back(macro);
    d.titularity.push_back(tit);
    d.service_type.push_back(st);
    d.weight.push_back(w);
    d.foreign_enrolled.push_back(c);
    d.items.push_back(items);
  }
  if (d.size() == 0) throw ValidationError(t.path + ": no survey rows");
  if (provinces) {
    std::map<std::string, std::int64_t> count;
    for (const auto& p : d.province) ++count[p];
    for (const auto& [prov, n] : count)
      if (provinces->find(prov)->population_units < n)
        throw ValidationError(t.path + ": province '" + prov + "' has " + std::to_string(n) +
                              " sampled units but population_units " +
                              std::to_string(provinces->find(prov)->population_units));
  }
  return d;
}

inline SurveyDataset load_survey(const std::string& path, const ProvinceFile* provinces = nullptr) {
  return parse_survey(read_csv(path), provinces);
}

inline std::string write_survey(const SurveyDataset& d) {
  std::vector<std::string> header(kSurveyKeyColumns.begin(), kSurveyKeyColumns.end());
  header.insert(header.end(), kServiceItemNames.begin(), kServiceItemNames.end());
  CsvWriter w(header);
  for (std::size_t k = 0; k < d.size(); ++k) {
    std::vector<std::string> row = {d.unit_id[k],
                                    d.province[k],
                                    d.region[k],
                                    d.macro_area[k],
                                    std::string(to_string(d.titularity[k])),
                                    std::string(to_string(d.service_type[k])),
                                    format_number(d.weight[k]),
                                    std::to_string(d.foreign_enrolled[k])};
    for (std::int8_t x : d.items[k])
      row.push_back(x == ResponseMatrix::kMissing ? "NA" : std::to_string(x));
    w.row(row);
  }
  return w.str();
}

// F_p = (sum of foreign enrolled over the province's sampled units) / f_p for
// every province in `residents`. A province with no foreign enrolment has
// rate 0 even when f_p = 0.
inline std::map<std::string, double> foreign_rate(const SurveyDataset& d,
                                                  const std::map<std::string, double>& residents) {
  std::map<std::string, std::int64_t> enrolled;
  for (std::size_t k = 0; k < d.size(); ++k) {
    if (!residents.contains(d.province[k]))
      throw ValidationError("province '" + d.province[k] + "' has no resident count f_p");
    enrolled[d.province[k]] += d.foreign_enrolled[k];
  }
  std::map<std::string, double> rates;
  for (const auto& [prov, f] : residents) {
    const auto it = enrolled.find(prov);
    const double c = it == enrolled.end() ? 0.0 : static_cast<double>(it->second);
    if (c == 0.0) {
      rates[prov] = 0.0;
      continue;
    }
    if (!(f > 0.0))
      throw ValidationError("province '" + prov + "': " + format_number(c) +
                            " foreign children enrolled but f_p = " + format_number(f));
    rates[prov] = c / f;
  }
  return rates;
}

inline std::map<std::string, double> resident_counts(const ProvinceFile& f) {
  std::map<std::string, double> out;
  for (const auto& p : f.rows) out[p.province] = p.foreign_residents;
  return out;
}

// Type-7 empirical quantile of the base values at level lambda in (0, 1].
inline double foreign_threshold(const std::map<std::string, double>& base, double lambda) {
  if (!(lambda > 0.0 && lambda <= 1.0)) throw InvalidArgument("lambda must lie in (0, 1]");
  if (base.empty()) throw InvalidArgument("foreign threshold: no base values");
  std::vector<double> v;
  for (const auto& [k, x] : base) v.push_back(x);
  return quantile(std::move(v), lambda);
}

// Province flag F_p >= Q(lambda), with Q taken over `base` (the rates
// themselves unless another base is given).
inline std::map<std::string, std::int8_t> foreign_indicator(
    const std::map<std::string, double>& rates, double lambda,
    const std::map<std::string, double>* base = nullptr) {
  const double q = foreign_threshold(base ? *base : rates, lambda);
  std::map<std::string, std::int8_t> out;
  for (const auto& [prov, r] : rates) out[prov] = r >= q ? 1 : 0;
  return out;
}

struct ForeignOptions {
  bool sampled_only = false;     // quantile over provinces with sampled units only
  bool resident_count_base = false;  // quantile over f_p instead of F_p
};

// Values the foreign thresholds are computed from.
inline std::map<std::string, double> foreign_base(const std::map<std::string, double>& rates,
                                                  const ProvinceFile& provinces,
                                                  const SurveyDataset& d,
                                                  const ForeignOptions& opt) {
  std::map<std::string, double> base =
      opt.resident_count_base ? resident_counts(provinces) : rates;
  if (opt.sampled_only) {
    const std::set<std::string> sampled(d.province.begin(), d.province.end());
    std::erase_if(base, [&](const auto& kv) { return !sampled.contains(kv.first); });
  }
  return base;
}

inline std::string foreign_item_name(double lambda) { return fmt::format("foreign_{}", lambda); }

// Item matrix: one foreign column per lambda followed by the nine service
// items, unit weights attached. With the default levels the columns are
// kItemNames.
inline ResponseMatrix build_item_matrix(const SurveyDataset& d,
                                        const std::map<std::string, double>& rates,
                                        std::span<const double> lambdas = kForeignLevels,
                                        const std::map<std::string, double>* base = nullptr) {
  std::vector<std::map<std::string, std::int8_t>> flags;
  std::vector<std::string> names;
  for (double l : lambdas) {
    flags.push_back(foreign_indicator(rates, l, base));
    names.push_back(foreign_item_name(l));
  }
  names.insert(names.end(), kServiceItemNames.begin(), kServiceItemNames.end());
  std::vector<std::int8_t> x;
  x.reserve(d.size() * names.size());
  for (std::size_t k = 0; k < d.size(); ++k) {
    for (const auto& f : flags) {
      const auto it = f.find(d.province[k]);
      if (it == f.end())
        throw ValidationError("province '" + d.province[k] + "' has no foreign rate");
      x.push_back(it->second);
    }
    x.insert(x.end(), d.items[k].begin(), d.items[k].end());
  }
  return ResponseMatrix(std::move(x), d.unit_id, std::move(names), d.weight);
}

inline std::string write_item_matrix(const ResponseMatrix& m) {
  std::vector<std::string> header = {"unit_id", "weight"};
  header.insert(header.end(), m.item_names().begin(), m.item_names().end());
  CsvWriter w(header);
  for (std::size_t k = 0; k < m.n_units(); ++k) {
    std::vector<std::string> row = {m.unit_ids()[k], format_number(m.weights()[k])};
    for (std::size_t i = 0; i < m.n_items(); ++i)
      row.push_back(m.at(k, i) == ResponseMatrix::kMissing ? "NA" : std::to_string(m.at(k, i)));
    w.row(row);
  }
  return w.str();
}

inline ResponseMatrix parse_item_matrix(const CsvTable& t) {
  const std::size_t c_id = t.column("unit_id"), c_w = t.column("weight");
  std::vector<std::size_t> item_cols;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < t.header.size(); ++c)
    if (c != c_id && c != c_w) {
      item_cols.push_back(c);
      names.push_back(t.header[c]);
    }
  std::vector<std::int8_t> x;
  std::vector<std::string> ids;
  std::vector<double> w;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    ids.push_back(t.rows[r][c_id]);
    w.push_back(parse_double(t, r, c_w));
    if (!(w.back() > 0.0)) t.fail(r, "weight must be positive");
    for (std::size_t c : item_cols) {
      const std::string& f = t.rows[r][c];
      if (is_missing_field(f)) x.push_back(ResponseMatrix::kMissing);
      else if (f == "0" || f == "1") x.push_back(static_cast<std::int8_t>(f[0] - '0'));
      else t.fail(r, "item '" + t.header[c] + "' must be 0, 1 or missing, got '" + f + "'");
    }
  }
  if (ids.empty()) throw ValidationError(t.path + ": no units");
  return ResponseMatrix(std::move(x), std::move(ids), std::move(names), std::move(w));
}

inline ResponseMatrix load_item_matrix(const std::string& path) {
  return parse_item_matrix(read_csv(path));
}

enum class SummaryStatistic { kMean, kMedian, kIqr };

struct ProvinceSummaryRow {
  std::string province;
  std::size_t n_sampled = 0;
  std::optional<double> value;  // empty when the province has no sampled unit
};

// Per-province statistic of unit values (aligned with the dataset rows),
// in the order of `provinces`. Unweighted unless `weighted`; the weighted
// median and IQR use the inverse weighted CDF.
inline std::vector<ProvinceSummaryRow> province_summary(std::span<const double> values,
                                                        const SurveyDataset& d,
                                                        const std::vector<std::string>& provinces,
                                                        SummaryStatistic stat,
                                                        bool weighted = false) {
  if (values.size() != d.size())
    throw InvalidArgument("province summary: one value per unit required");
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by;
  for (std::size_t k = 0; k < d.size(); ++k) {
    by[d.province[k]].first.push_back(values[k]);
    by[d.province[k]].second.push_back(d.weight[k]);
  }
  std::vector<ProvinceSummaryRow> out;
  for (const auto& prov : provinces) {
    ProvinceSummaryRow row{prov, 0, std::nullopt};
    const auto it = by.find(prov);
    if (it != by.end()) {
      const auto& [v, w] = it->second;
      row.n_sampled = v.size();
      if (!weighted) {
        switch (stat) {
          case SummaryStatistic::kMean: row.value = mean(v); break;
          case SummaryStatistic::kMedian: row.value = median(v); break;
          case SummaryStatistic::kIqr: row.value = interquartile_range(v); break;
        }
      } else {
        switch (stat) {
          case SummaryStatistic::kMean: row.value = weighted_mean(v, w); break;
          case SummaryStatistic::kMedian: row.value = weighted_quantile(v, w, 0.5); break;
          case SummaryStatistic::kIqr:
            row.value = weighted_quantile(v, w, 0.75) - weighted_quantile(v, w, 0.25);
            break;
        }
      }
    }
    out.push_back(std::move(row));
  }
  return out;
}

// Per-province share of 1s for one service item among units that answered it.
inline std::vector<ProvinceSummaryRow> province_item_mean(const SurveyDataset& d,
                                                          std::size_t item,
                                                          const std::vector<std::string>& provinces) {
  std::map<std::string, std::pair<double, std::size_t>> acc;
  std::map<std::string, std::size_t> n;
  for (std::size_t k = 0; k < d.size(); ++k) {
    ++n[d.province[k]];
    const std::int8_t x = d.items[k][item];
    if (x == ResponseMatrix::kMissing) continue;
    acc[d.province[k]].first += x;
    acc[d.province[k]].second += 1;
  }
  std::vector<ProvinceSummaryRow> out;
  for (const auto& prov : provinces) {
    ProvinceSummaryRow row{prov, n.contains(prov) ? n.at(prov) : 0, std::nullopt};
    const auto it = acc.find(prov);
    if (it != acc.end() && it->second.second > 0)
      row.value = it->second.first / static_cast<double>(it->second.second);
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace latent_index

#endif  // LATENT_INDEX_FEATURES_HPP_
