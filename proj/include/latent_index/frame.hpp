#ifndef LATENT_INDEX_FRAME_HPP_
#define LATENT_INDEX_FRAME_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "latent_index/csv.hpp"
#include "latent_index/errors.hpp"
#include "latent_index/features.hpp"

namespace latent_index {

// The four titularity x service type cells, in a fixed order.
struct Cell {
  Titularity titularity;
  ServiceType service_type;
  auto operator<=>(const Cell&) const = default;
};
inline constexpr std::array<Cell, 4> kCells = {{{Titularity::kPublic, ServiceType::kKindergarten},
                                                {Titularity::kPublic, ServiceType::kSezionePrimavera},
                                                {Titularity::kPrivate, ServiceType::kKindergarten},
                                                {Titularity::kPrivate, ServiceType::kSezionePrimavera}}};

inline std::size_t cell_index(Titularity t, ServiceType s) {
  return (t == Titularity::kPrivate ? 2 : 0) + (s == ServiceType::kSezionePrimavera ? 1 : 0);
}

// Registry counts of services per province and cell (sampled plus not).
using Registry = std::map<std::string, std::array<std::int64_t, 4>>;

inline Registry parse_registry(const CsvTable& t, const ProvinceFile& provinces) {
  const std::size_t c_p = t.column("province_id"), c_t = t.column("titularity"),
                    c_s = t.column("service_type"), c_u = t.column("units");
  Registry reg;
  std::set<std::pair<std::string, std::size_t>> seen;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string& prov = t.rows[r][c_p];
    if (!provinces.find(prov))
      throw HierarchyError(t.path, t.lines[r], "province '" + prov + "' is not in the province file");
    Titularity tit{};
    if (t.rows[r][c_t] == "public") tit = Titularity::kPublic;
    else if (t.rows[r][c_t] == "private") tit = Titularity::kPrivate;
    else t.fail(r, "titularity must be 'public' or 'private'");
    ServiceType st{};
    if (t.rows[r][c_s] == "kindergarten") st = ServiceType::kKindergarten;
    else if (t.rows[r][c_s] == "sezione_primavera") st = ServiceType::kSezionePrimavera;
    else t.fail(r, "service_type must be 'kindergarten' or 'sezione_primavera'");
    const std::int64_t u = parse_int(t, r, c_u);
    if (u < 0) t.fail(r, "units must be nonnegative");
    const std::size_t cell = cell_index(tit, st);
    if (!seen.emplace(prov, cell).second) t.fail(r, "duplicate registry cell for '" + prov + "'");
    reg[prov][cell] = u;
  }
  for (const auto& p : provinces.rows) {
    const auto it = reg.find(p.province);
    std::int64_t total = 0;
    if (it != reg.end())
      for (auto u : it->second) total += u;
    if (total != p.population_units)
      throw ValidationError(t.path + ": registry lists " + std::to_string(total) +
                            " units for province '" + p.province + "', province file says " +
                            std::to_string(p.population_units));
  }
  return reg;
}

inline Registry load_registry(const std::string& path, const ProvinceFile& provinces) {
  return parse_registry(read_csv(path), provinces);
}

inline std::string write_registry(const Registry& reg) {
  CsvWriter w({"province_id", "titularity", "service_type", "units"});
  for (const auto& [prov, cells] : reg)
    for (std::size_t c = 0; c < kCells.size(); ++c)
      w.row({prov, std::string(to_string(kCells[c].titularity)),
             std::string(to_string(kCells[c].service_type)), std::to_string(cells[c])});
  return w.str();
}

// Splits `total` over the cells proportionally to `shares` by largest
// remainder; ties go to the earlier cell.
inline std::array<std::int64_t, 4> allocate(std::int64_t total, const std::array<double, 4>& shares) {
  std::array<std::int64_t, 4> out{};
  double sum = 0.0;
  for (double s : shares) sum += s;
  std::array<double, 4> rem{};
  std::int64_t used = 0;
  for (std::size_t c = 0; c < 4; ++c) {
    const double exact = sum > 0.0 ? total * shares[c] / sum : total / 4.0;
    out[c] = static_cast<std::int64_t>(std::floor(exact));
    rem[c] = exact - static_cast<double>(out[c]);
    used += out[c];
  }
  std::array<std::size_t, 4> order = {0, 1, 2, 3};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t i = 0; used < total; ++i, ++used) ++out[order[i % 4]];
  return out;
}

// Out-of-sample units per province and cell. With a registry they are the
// registry counts minus the sampled counts; without one, M_p - n_p units are
// allocated by the sampled cell composition of the province, falling back to
// its region and then to the whole sample.
inline Registry out_of_sample_counts(const SurveyDataset& d, const ProvinceFile& provinces,
                                     const Registry* registry) {
  std::map<std::string, std::array<std::int64_t, 4>> by_prov, by_region;
  std::array<std::int64_t, 4> national{};
  for (std::size_t k = 0; k < d.size(); ++k) {
    const std::size_t c = cell_index(d.titularity[k], d.service_type[k]);
    ++by_prov[d.province[k]][c];
    ++by_region[d.region[k]][c];
    ++national[c];
  }
  Registry out;
  for (const auto& p : provinces.rows) {
    const std::array<std::int64_t, 4> sampled =
        by_prov.contains(p.province) ? by_prov.at(p.province) : std::array<std::int64_t, 4>{};
    std::array<std::int64_t, 4> rest{};
    if (registry) {
      const auto& reg = registry->at(p.province);
      for (std::size_t c = 0; c < 4; ++c) {
        rest[c] = reg[c] - sampled[c];
        if (rest[c] < 0)
          throw ValidationError("province '" + p.province + "': registry cell " +
                                std::string(to_string(kCells[c].titularity)) + "/" +
                                std::string(to_string(kCells[c].service_type)) +
                                " has fewer units than the sample");
      }
    } else {
      std::int64_t n = 0;
      for (auto s : sampled) n += s;
      const auto& src = n > 0 ? sampled
                        : by_region.contains(p.region) ? by_region.at(p.region)
                                                       : national;
      std::array<double, 4> shares{};
      for (std::size_t c = 0; c < 4; ++c) shares[c] = static_cast<double>(src[c]);
      rest = allocate(p.population_units - n, shares);
    }
    out[p.province] = rest;
  }
  return out;
}

// Categorical covariates available for both sampled and population units.
inline constexpr std::array<std::string_view, 4> kCovariates = {"titularity", "service_type",
                                                                "region", "macro_area"};

struct UnitCovariates {
  std::vector<std::string> province;
  std::map<std::string, std::vector<std::string>> factor;  // covariate -> level per unit

  std::size_t size() const { return province.size(); }
};

inline UnitCovariates sample_covariates(const SurveyDataset& d) {
  UnitCovariates u;
  u.province = d.province;
  for (std::size_t k = 0; k < d.size(); ++k) {
    u.factor["titularity"].emplace_back(to_string(d.titularity[k]));
    u.factor["service_type"].emplace_back(to_string(d.service_type[k]));
    u.factor["region"].push_back(d.region[k]);
    u.factor["macro_area"].push_back(d.macro_area[k]);
  }
  return u;
}

inline UnitCovariates population_covariates(const Registry& out_of_sample,
                                            const ProvinceFile& provinces) {
  UnitCovariates u;
  for (const auto& p : provinces.rows) {
    const auto& cells = out_of_sample.at(p.province);
    for (std::size_t c = 0; c < 4; ++c)
      for (std::int64_t k = 0; k < cells[c]; ++k) {
        u.province.push_back(p.province);
        u.factor["titularity"].emplace_back(to_string(kCells[c].titularity));
        u.factor["service_type"].emplace_back(to_string(kCells[c].service_type));
        u.factor["region"].push_back(p.region);
        u.factor["macro_area"].push_back(p.macro_area);
      }
  }
  return u;
}

struct EncodedDesign {
  Eigen::MatrixXd sample, population;
  std::vector<std::string> columns;
  std::vector<std::string> dropped;  // aliased columns removed from the sample design
};

// Intercept plus treatment-coded dummies (first level in sorted order as the
// reference) for each requested covariate. Columns that are linear
// combinations of earlier ones in the sample design, such as macro-area
// dummies next to region dummies, are dropped and listed.
inline EncodedDesign encode_design(const UnitCovariates& sample, const UnitCovariates& population,
                                   const std::vector<std::string>& covariates) {
  std::vector<std::string> names = {"intercept"};
  std::vector<std::pair<std::string, std::string>> dummies;  // covariate, level
  for (const auto& cov : covariates) {
    if (!sample.factor.contains(cov)) throw SchemaError("unknown covariate '" + cov + "'");
    std::set<std::string> levels(sample.factor.at(cov).begin(), sample.factor.at(cov).end());
    if (population.size() > 0)
      levels.insert(population.factor.at(cov).begin(), population.factor.at(cov).end());
    auto it = levels.begin();
    for (++it; it != levels.end(); ++it) {
      dummies.emplace_back(cov, *it);
      names.push_back(cov + "=" + *it);
    }
  }
  const auto fill = [&](const UnitCovariates& u) {
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(u.size()),
                                              static_cast<Eigen::Index>(names.size()));
    X.col(0).setOnes();
    for (std::size_t j = 0; j < dummies.size(); ++j) {
      const auto& col = u.factor.at(dummies[j].first);
      for (std::size_t k = 0; k < u.size(); ++k)
        if (col[k] == dummies[j].second) X(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j + 1)) = 1.0;
    }
    return X;
  };
  const Eigen::MatrixXd Xs = fill(sample);
  const Eigen::MatrixXd Xp = fill(population);

  std::vector<Eigen::Index> keep;
  EncodedDesign out;
  for (Eigen::Index c = 0; c < Xs.cols(); ++c) {
    Eigen::MatrixXd trial(Xs.rows(), static_cast<Eigen::Index>(keep.size()) + 1);
    for (std::size_t i = 0; i < keep.size(); ++i) trial.col(static_cast<Eigen::Index>(i)) = Xs.col(keep[i]);
    trial.col(trial.cols() - 1) = Xs.col(c);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(trial);
    qr.setThreshold(1e-10);
    if (qr.rank() == trial.cols()) {
      keep.push_back(c);
      out.columns.push_back(names[static_cast<std::size_t>(c)]);
    } else {
      out.dropped.push_back(names[static_cast<std::size_t>(c)]);
    }
  }
  out.sample.resize(Xs.rows(), static_cast<Eigen::Index>(keep.size()));
  out.population.resize(Xp.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) {
    out.sample.col(static_cast<Eigen::Index>(i)) = Xs.col(keep[i]);
    out.population.col(static_cast<Eigen::Index>(i)) = Xp.col(keep[i]);
  }
  return out;
}

}  // namespace latent_index

#endif  // LATENT_INDEX_FRAME_HPP_
