#include "latent_index/fixture.hpp"
#include "latent_index/frame.hpp"

#include <gtest/gtest.h>

#include <set>

namespace latent_index {
namespace {

const char* kProvinces =
    "province_id,region,macro_area,f_p,population_units\n"
    "TO,Piemonte,NW,10,5\n"
    "RM,Lazio,Center,8,4\n";

ProvinceFile provinces() { return parse_provinces(parse_csv(kProvinces, "prov.csv")); }

TEST(Frame, LargestRemainderAllocation) {
  EXPECT_EQ(allocate(10, {1, 1, 1, 1}), (std::array<std::int64_t, 4>{3, 3, 2, 2}));
  EXPECT_EQ(allocate(7, {0, 3, 0, 4}), (std::array<std::int64_t, 4>{0, 3, 0, 4}));
  EXPECT_EQ(allocate(5, {0, 0, 0, 0}), (std::array<std::int64_t, 4>{2, 1, 1, 1}));
  for (std::int64_t total = 0; total < 40; ++total) {
    const auto a = allocate(total, {0.1, 2.5, 0.7, 1.3});
    EXPECT_EQ(a[0] + a[1] + a[2] + a[3], total);
  }
}

TEST(Frame, RegistryTotalsMustMatchProvinceFile) {
  const std::string header = "province_id,titularity,service_type,units\n";
  const ProvinceFile p = provinces();
  const Registry ok = parse_registry(
      parse_csv(header + "TO,public,kindergarten,3\nTO,private,kindergarten,2\nRM,public,sezione_primavera,4\n",
                "reg.csv"),
      p);
  EXPECT_EQ(ok.at("TO"), (std::array<std::int64_t, 4>{3, 0, 2, 0}));
  EXPECT_EQ(parse_csv(write_registry(ok), "x").rows.size(), 8u);

  EXPECT_THROW(parse_registry(parse_csv(header + "TO,public,kindergarten,5\nRM,public,kindergarten,3\n", "r"), p),
               ValidationError);
  try {
    parse_registry(parse_csv(header + "TO,public,kindergarten,5\nRM,state,kindergarten,4\n", "r.csv"), p);
    FAIL();
  } catch (const RowError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(parse_registry(parse_csv(header + "MI,public,kindergarten,5\n", "r"), p), HierarchyError);
}

TEST(Frame, EncodingDropsMacroAreaAliasedByRegion) {
  const Fixture fx = simulate_fixture(3);
  const Registry rest = out_of_sample_counts(fx.survey, fx.provinces, &fx.registry);
  const UnitCovariates s = sample_covariates(fx.survey);
  const UnitCovariates pop = population_covariates(rest, fx.provinces);
  const EncodedDesign d = encode_design(s, pop, {kCovariates.begin(), kCovariates.end()});
  // 1 intercept + 1 + 1 + 19 region dummies; the 3 macro-area dummies are aliased.
  EXPECT_EQ(d.columns.size(), 22u);
  EXPECT_EQ(d.dropped.size(), 3u);
  for (const auto& c : d.dropped) EXPECT_EQ(c.rfind("macro_area=", 0), 0u);
  EXPECT_EQ(d.sample.rows(), static_cast<Eigen::Index>(fx.survey.size()));
  EXPECT_EQ(d.population.cols(), d.sample.cols());
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d.sample);
  EXPECT_EQ(qr.rank(), d.sample.cols());
}

TEST(Frame, OutOfSampleCountsWithAndWithoutRegistry) {
  const Fixture fx = simulate_fixture(4);
  const Registry with = out_of_sample_counts(fx.survey, fx.provinces, &fx.registry);
  const Registry without = out_of_sample_counts(fx.survey, fx.provinces, nullptr);
  std::map<std::string, std::int64_t> sampled;
  for (const auto& p : fx.survey.province) ++sampled[p];
  for (const auto& p : fx.provinces.rows) {
    std::int64_t a = 0, b = 0;
    for (auto u : with.at(p.province)) {
      EXPECT_GE(u, 0);
      a += u;
    }
    for (auto u : without.at(p.province)) b += u;
    EXPECT_EQ(a, p.population_units - sampled[p.province]);
    EXPECT_EQ(b, a);
  }
  // Registry smaller than the sample in some cell.
  Registry broken = fx.registry;
  broken.begin()->second = {0, 0, 0, 0};
  EXPECT_THROW(out_of_sample_counts(fx.survey, fx.provinces, &broken), ValidationError);
}

TEST(Fixture, ShapeMatchesTheNationalSurvey) {
  const Fixture fx = simulate_fixture(1);
  EXPECT_EQ(fx.survey.size(), 1323u);
  EXPECT_EQ(fx.provinces.rows.size(), 110u);
  const std::set<std::string> regions(fx.survey.region.begin(), fx.survey.region.end());
  EXPECT_EQ(regions.size(), 20u);
  const std::set<std::string> sampled(fx.survey.province.begin(), fx.survey.province.end());
  EXPECT_EQ(sampled.size(), 109u);
  EXPECT_FALSE(sampled.contains(fx.provinces.rows.back().province));
  // The written files read back into the same data, registry included.
  const ProvinceFile p = parse_provinces(parse_csv(write_provinces(fx.provinces), "p.csv"));
  EXPECT_EQ(parse_survey(parse_csv(write_survey(fx.survey), "s.csv"), &p), fx.survey);
  EXPECT_EQ(parse_registry(parse_csv(write_registry(fx.registry), "r.csv"), p), fx.registry);
  EXPECT_EQ(simulate_fixture(1).survey, fx.survey);
  EXPECT_FALSE(simulate_fixture(2).survey == fx.survey);
}

}  // namespace
}  // namespace latent_index
