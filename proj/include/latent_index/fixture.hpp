#ifndef LATENT_INDEX_FIXTURE_HPP_
#define LATENT_INDEX_FIXTURE_HPP_

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "latent_index/features.hpp"
#include "latent_index/frame.hpp"
#include "latent_index/item_set.hpp"
#include "latent_index/rng.hpp"
#include "latent_index/stats.hpp"

namespace latent_index {

struct FixtureOptions {
  std::size_t n_units = 1323;
  int regions = 20;            // the first half have 6 provinces, the rest 5
  double public_shift = 0.9;   // latent mean of public services; private at minus this
  double missing_rate = 0.02;  // per service item response
  bool leave_one_unsampled = true;  // the last province gets no sampled unit
};

struct Fixture {
  SurveyDataset survey;
  ProvinceFile provinces;
  Registry registry;
  std::vector<double> true_z;
};

// Synthetic survey shaped like the national one: 20 regions in four macro
// areas, 110 provinces, public services more common in the north and more
// inclusive everywhere, service items drawn from the reference item model
// and foreign enrolment per service increasing with the latent trait.
inline Fixture simulate_fixture(std::uint64_t seed, const FixtureOptions& opt = {}) {
  static constexpr const char* kMacro[] = {"NW", "NE", "Center", "South"};
  Fixture fx;
  Rng rng = substream(seed, {0x66697874ULL});
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  struct Prov {
    std::size_t region;
    double public_share, effect, size;
  };
  std::vector<Prov> provs;
  std::vector<double> region_effect;
  for (int r = 0; r < opt.regions; ++r) {
    const std::string region = fmt::format("R{:02d}", r + 1);
    const std::string macro = kMacro[std::min(3, 4 * r / opt.regions)];
    region_effect.push_back(0.3 * normal(rng));
    const double base_public = 0.7 - 0.35 * (4.0 * r / opt.regions) / 3.0;
    const int count = r < opt.regions / 2 ? 6 : 5;
    for (int k = 0; k < count; ++k) {
      ProvinceInfo p;
      p.province = fmt::format("P{:03d}", provs.size() + 1);
      p.region = region;
      p.macro_area = macro;
      fx.provinces.rows.push_back(p);
      provs.push_back({static_cast<std::size_t>(r),
                       std::clamp(base_public + 0.1 * (2.0 * unif(rng) - 1.0), 0.05, 0.95),
                       0.2 * normal(rng), 0.5 + unif(rng)});
    }
  }
  const std::size_t P = provs.size();
  const std::size_t sampled = opt.leave_one_unsampled ? P - 1 : P;
  if (opt.n_units < 2 * sampled) throw InvalidArgument("fixture: too few units for the provinces");

  // Sample sizes: two per sampled province plus a size-proportional share of
  // the rest.
  std::vector<std::int64_t> n(P, 0);
  {
    std::vector<double> share(sampled);
    double total = 0.0;
    for (std::size_t p = 0; p < sampled; ++p) total += share[p] = provs[p].size;
    const std::int64_t rest = static_cast<std::int64_t>(opt.n_units - 2 * sampled);
    std::vector<double> rem(sampled);
    std::int64_t used = 0;
    for (std::size_t p = 0; p < sampled; ++p) {
      const double exact = rest * share[p] / total;
      n[p] = 2 + static_cast<std::int64_t>(std::floor(exact));
      rem[p] = exact - std::floor(exact);
      used += n[p] - 2;
    }
    std::vector<std::size_t> order(sampled);
    for (std::size_t p = 0; p < sampled; ++p) order[p] = p;
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return rem[a] > rem[b]; });
    for (std::size_t i = 0; used < rest; ++i, ++used) ++n[order[i]];
  }

  const ItemParameters ref = reference_item_parameters();
  const std::size_t first_service = kForeignLevels.size();
  std::size_t unit = 0;
  for (std::size_t p = 0; p < P; ++p) {
    const ProvinceInfo& info = fx.provinces.rows[p];
    std::array<std::int64_t, 4> cells{};
    const auto draw_cell = [&] {
      const bool pub = unif(rng) < provs[p].public_share;
      const bool spring = unif(rng) < 0.15;
      return cell_index(pub ? Titularity::kPublic : Titularity::kPrivate,
                        spring ? ServiceType::kSezionePrimavera : ServiceType::kKindergarten);
    };
    const std::int64_t extra =
        p < sampled ? static_cast<std::int64_t>(std::round(n[p] * (2.0 + 5.0 * unif(rng))))
                    : 20;
    for (std::int64_t k = 0; k < n[p]; ++k) {
      const std::size_t c = draw_cell();
      ++cells[c];
      const bool pub = kCells[c].titularity == Titularity::kPublic;
      const double z = (pub ? opt.public_shift : -opt.public_shift) +
                       region_effect[provs[p].region] + provs[p].effect + 0.5 * normal(rng);
      SurveyDataset& d = fx.survey;
      d.unit_id.push_back(fmt::format("S{:04d}", ++unit));
      d.province.push_back(info.province);
      d.region.push_back(info.region);
      d.macro_area.push_back(info.macro_area);
      d.titularity.push_back(kCells[c].titularity);
      d.service_type.push_back(kCells[c].service_type);
      std::poisson_distribution<std::int64_t> foreign(std::exp(0.5 + 1.0 * z));
      d.foreign_enrolled.push_back(foreign(rng));
      std::array<std::int8_t, kServiceItemNames.size()> items{};
      for (std::size_t i = 0; i < items.size(); ++i) {
        const double pr = item_probability(ref.beta0[first_service + i],
                                           ref.beta1[first_service + i], z);
        items[i] = unif(rng) < pr ? 1 : 0;
        if (unif(rng) < opt.missing_rate) items[i] = ResponseMatrix::kMissing;
      }
      d.items.push_back(items);
      fx.true_z.push_back(z);
    }
    for (std::int64_t k = 0; k < extra; ++k) ++cells[draw_cell()];
    fx.registry[info.province] = cells;
    fx.provinces.rows[p].population_units = n[p] + extra;
    // Resident foreign children scale with the sampled services so that the
    // enrolment rate follows the province's latent level, not noise in f_p.
    fx.provinces.rows[p].foreign_residents =
        std::round(static_cast<double>(std::max<std::int64_t>(n[p], 2)) * (4.0 + 2.0 * unif(rng)));
  }
  for (std::size_t k = 0; k < fx.survey.size(); ++k) {
    const ProvinceInfo* info = fx.provinces.find(fx.survey.province[k]);
    const std::size_t p = static_cast<std::size_t>(info - fx.provinces.rows.data());
    fx.survey.weight.push_back(static_cast<double>(info->population_units) /
                               static_cast<double>(n[p]));
  }
  return fx;
}

}  // namespace latent_index

#endif  // LATENT_INDEX_FIXTURE_HPP_
