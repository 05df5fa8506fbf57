#include "latent_index/features.hpp"

#include <gtest/gtest.h>

#include <random>

namespace latent_index {
namespace {

const char* kProvinces =
    "province_id,region,macro_area,f_p,population_units\n"
    "TO,Piemonte,NW,10,20\n"
    "CN,Piemonte,NW,5,8\n"
    "RM,Lazio,Center,8,30\n"
    "LT,Lazio,Center,4,6\n";

std::string survey_header() {
  std::string h = "unit_id,province,region,macro_area,titularity,service_type,weight,foreign_enrolled";
  for (auto n : kServiceItemNames) h += "," + std::string(n);
  return h + "\n";
}

std::string survey_text() {
  return survey_header() +
         "a1,TO,Piemonte,NW,public,kindergarten,1.5,2,1,1,0,0,0,1,0,1,0\n"
         "a2,TO,Piemonte,NW,private,sezione_primavera,2.25,3,0,1,1,NA,0,0,0,0,1\n"
         "b1,CN,Piemonte,NW,public,kindergarten,3,5,1,,1,0,1,1,1,1,1\n"
         "c1,RM,Lazio,Center,private,kindergarten,0.1,0,0,0,1,0,0,0,0,0,0\n";
}

ProvinceFile provinces() { return parse_provinces(parse_csv(kProvinces, "prov.csv")); }

SurveyDataset survey() {
  const ProvinceFile p = provinces();
  return parse_survey(parse_csv(survey_text(), "survey.csv"), &p);
}

TEST(Csv, QuotingAndLineNumbers) {
  const CsvTable t = parse_csv("\xEF\xBB\xBF" "a,b\r\n\"x,1\",\"say \"\"hi\"\"\"\r\n\r\n3,4\n", "f.csv");
  ASSERT_EQ(t.header, (std::vector<std::string>{"a", "b"}));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0][0], "x,1");
  EXPECT_EQ(t.rows[0][1], "say \"hi\"");
  EXPECT_EQ(t.lines, (std::vector<std::size_t>{2, 4}));
  try {
    parse_csv("a,b\n1,2\n1\n", "f.csv");
    FAIL();
  } catch (const RowError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  CsvWriter w({"a", "b"});
  w.row({"x,1", "say \"hi\""});
  EXPECT_EQ(parse_csv(w.str(), "g").rows[0], t.rows[0]);
}

TEST(LoadSurvey, WellFormedFixture) {
  const SurveyDataset d = survey();
  ASSERT_EQ(d.size(), 4u);
  EXPECT_EQ(d.titularity[1], Titularity::kPrivate);
  EXPECT_EQ(d.service_type[1], ServiceType::kSezionePrimavera);
  EXPECT_EQ(d.items[1][3], ResponseMatrix::kMissing);
  EXPECT_EQ(d.items[2][1], ResponseMatrix::kMissing);
  EXPECT_EQ(d.weight[1], 2.25);
}

TEST(LoadSurvey, RejectsBadRowsWithLineNumbers) {
  const auto expect_row_error = [](std::string body, std::size_t line, const std::string& needle) {
    try {
      parse_survey(parse_csv(survey_header() + body, "s.csv"));
      ADD_FAILURE() << "accepted: " << body;
    } catch (const RowError& e) {
      EXPECT_EQ(e.line(), line) << e.what();
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  const std::string ok = "a1,TO,Piemonte,NW,public,kindergarten,1,0,1,1,0,0,0,1,0,1,0\n";
  expect_row_error(ok + "a2,TO,Piemonte,NW,public,kindergarten,0,0,1,1,0,0,0,1,0,1,0\n", 3, "weight");
  expect_row_error(ok + "a2,TO,Piemonte,NW,public,kindergarten,-1,0,1,1,0,0,0,1,0,1,0\n", 3, "weight");
  expect_row_error("a2,TO,Piemonte,NW,public,kindergarten,1,0,2,1,0,0,0,1,0,1,0\n", 2, "disability");
  expect_row_error("a2,TO,Piemonte,NW,state,kindergarten,1,0,1,1,0,0,0,1,0,1,0\n", 2, "titularity");
  expect_row_error("a2,TO,Piemonte,NW,public,kindergarten,1,x,1,1,0,0,0,1,0,1,0\n", 2, "foreign_enrolled");
  expect_row_error(ok + ok, 3, "duplicate");
  expect_row_error(ok + "a2,TO,Lazio,Center,public,kindergarten,1,0,1,1,0,0,0,1,0,1,0\n", 3, "region");
  EXPECT_THROW(parse_survey(parse_csv("unit_id,province\n", "s.csv")), SchemaError);
}

TEST(LoadSurvey, ProvinceOutsideRegionMapIsAHierarchyError) {
  const ProvinceFile p = provinces();
  const std::string body = "z1,NA1,Campania,South,public,kindergarten,1,0,1,1,0,0,0,1,0,1,0\n";
  EXPECT_THROW(parse_survey(parse_csv(survey_header() + body, "s.csv"), &p), HierarchyError);
  const std::string moved = "z1,TO,Lazio,Center,public,kindergarten,1,0,1,1,0,0,0,1,0,1,0\n";
  EXPECT_THROW(parse_survey(parse_csv(survey_header() + moved, "s.csv"), &p), HierarchyError);
  EXPECT_THROW(parse_provinces(parse_csv("province_id,region,macro_area,f_p,population_units\n"
                                         "A,R,NW,1,1\nB,R,NE,1,1\n",
                                         "p.csv")),
               HierarchyError);
}

TEST(LoadSurvey, RoundTripIsBitExact) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(1e-3, 1e3);
  SurveyDataset d = survey();
  for (double& w : d.weight) w = u(rng);
  const std::string text = write_survey(d);
  const SurveyDataset back = parse_survey(parse_csv(text, "rt.csv"));
  EXPECT_EQ(back, d);
  EXPECT_EQ(write_survey(back), text);
  const ProvinceFile p = provinces();
  EXPECT_EQ(parse_provinces(parse_csv(write_provinces(p), "p")).rows, p.rows);
}

TEST(ForeignRate, Examples) {
  const SurveyDataset d = survey();
  const auto rates = foreign_rate(d, resident_counts(provinces()));
  EXPECT_EQ(rates.at("TO"), 0.5);  // (2 + 3) / 10
  EXPECT_EQ(rates.at("CN"), 1.0);
  EXPECT_EQ(rates.at("RM"), 0.0);
  EXPECT_EQ(rates.at("LT"), 0.0);  // unsampled
  EXPECT_THROW(foreign_rate(d, {{"TO", 0.0}, {"CN", 5}, {"RM", 8}}), ValidationError);
  EXPECT_THROW(foreign_rate(d, {{"TO", 10}, {"CN", 5}}), ValidationError);
  EXPECT_EQ(foreign_rate(d, {{"TO", 10}, {"CN", 5}, {"RM", 0.0}}).at("RM"), 0.0);
}

TEST(ForeignIndicator, WorkedExample) {
  const std::map<std::string, double> rates = {{"p1", 0.1}, {"p2", 0.2}, {"p3", 0.3}, {"p4", 0.4}};
  // h = (4 - 1) * 0.5 = 1.5: halfway between the second and third order statistic
  const double threshold = 0.2 + 0.5 * (0.3 - 0.2);
  EXPECT_EQ(foreign_threshold(rates, 0.5), threshold);
  EXPECT_DOUBLE_EQ(foreign_threshold(rates, 0.5), 0.25);
  const auto flags = foreign_indicator(rates, 0.5);
  EXPECT_EQ(flags, (std::map<std::string, std::int8_t>{{"p1", 0}, {"p2", 0}, {"p3", 1}, {"p4", 1}}));
  const auto top = foreign_indicator(rates, 1.0);
  EXPECT_EQ(top, (std::map<std::string, std::int8_t>{{"p1", 0}, {"p2", 0}, {"p3", 0}, {"p4", 1}}));
  EXPECT_THROW(foreign_indicator(rates, 0.0), InvalidArgument);
  EXPECT_THROW(foreign_indicator(rates, 1.5), InvalidArgument);
}

TEST(ForeignIndicator, TiesAtTheMaximumAreAllFlagged) {
  const auto flags = foreign_indicator({{"a", 0.3}, {"b", 0.7}, {"c", 0.7}}, 1.0);
  EXPECT_EQ(flags.at("a"), 0);
  EXPECT_EQ(flags.at("b"), 1);
  EXPECT_EQ(flags.at("c"), 1);
}

TEST(ForeignIndicator, NestedAcrossLevels) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 200; ++rep) {
    std::map<std::string, double> rates;
    const int n = 1 + rep % 30;
    for (int p = 0; p < n; ++p) rates["p" + std::to_string(p)] = rep % 3 ? u(rng) : std::floor(4 * u(rng)) / 4;
    std::vector<double> levels = {u(rng), u(rng), u(rng), 1.0};
    for (double& l : levels) l = std::max(l, 1e-9);
    std::sort(levels.begin(), levels.end());
    std::map<std::string, std::int8_t> prev;
    for (double l : levels) {
      const auto cur = foreign_indicator(rates, l);
      for (const auto& [p, f] : prev) EXPECT_LE(cur.at(p), f);
      prev = cur;
    }
  }
}

TEST(BuildItemMatrix, ColumnsInItemOrderAndConstantWithinProvince) {
  const SurveyDataset d = survey();
  const ProvinceFile p = provinces();
  const auto rates = foreign_rate(d, resident_counts(p));
  const ResponseMatrix m = build_item_matrix(d, rates);
  EXPECT_EQ(m.item_names(), item_names());
  EXPECT_EQ(m.weights(), d.weight);
  EXPECT_EQ(m.unit_ids(), d.unit_id);
  for (std::size_t i = 0; i < kForeignLevels.size(); ++i) {
    const auto flags = foreign_indicator(rates, kForeignLevels[i]);
    for (std::size_t k = 0; k < d.size(); ++k) EXPECT_EQ(m.at(k, i), flags.at(d.province[k]));
  }
  for (std::size_t k = 0; k < d.size(); ++k)
    for (std::size_t i = 0; i < kServiceItemNames.size(); ++i)
      EXPECT_EQ(m.at(k, kForeignLevels.size() + i), d.items[k][i]);
  const std::string text = write_item_matrix(m);
  const ResponseMatrix back = parse_item_matrix(parse_csv(text, "items.csv"));
  EXPECT_EQ(back.responses(), m.responses());
  EXPECT_EQ(back.weights(), m.weights());
  EXPECT_EQ(write_item_matrix(back), text);
}

TEST(BuildItemMatrix, QuantileBaseOptions) {
  const SurveyDataset d = survey();
  const ProvinceFile p = provinces();
  const auto rates = foreign_rate(d, resident_counts(p));
  const auto all = foreign_base(rates, p, d, {});
  EXPECT_EQ(all.size(), 4u);
  const auto sampled = foreign_base(rates, p, d, {true, false});
  EXPECT_EQ(sampled.size(), 3u);
  EXPECT_FALSE(sampled.contains("LT"));
  const auto counts = foreign_base(rates, p, d, {false, true});
  EXPECT_EQ(counts.at("TO"), 10.0);
  // Against resident counts every rate sits below the first quartile of f_p.
  const ResponseMatrix m = build_item_matrix(d, rates, kForeignLevels, &counts);
  for (std::size_t k = 0; k < d.size(); ++k) EXPECT_EQ(m.at(k, 0), 0);
}

TEST(ProvinceSummary, Examples) {
  SurveyDataset d = survey();
  const std::vector<std::string> provs = provinces().provinces();
  const std::vector<double> v = {0.0, 1.0, 0.4, 0.7};
  const auto med = province_summary(v, d, provs, SummaryStatistic::kMedian);
  const auto iqr = province_summary(v, d, provs, SummaryStatistic::kIqr);
  EXPECT_EQ(med[0].value, 0.5);
  EXPECT_EQ(iqr[0].value, 0.5);
  EXPECT_EQ(med[1].value, 0.4);
  EXPECT_EQ(iqr[1].value, 0.0);
  EXPECT_EQ(med[3].n_sampled, 0u);
  EXPECT_FALSE(med[3].value.has_value());
  const auto wmean = province_summary(v, d, provs, SummaryStatistic::kMean, true);
  EXPECT_DOUBLE_EQ(*wmean[0].value, 2.25 / 3.75);
}

TEST(ProvinceSummary, BinaryMeansLieInUnitInterval) {
  const SurveyDataset d = survey();
  const auto provs = provinces().provinces();
  for (std::size_t i = 0; i < kServiceItemNames.size(); ++i)
    for (const auto& row : province_item_mean(d, i, provs))
      if (row.value) {
        EXPECT_GE(*row.value, 0.0);
        EXPECT_LE(*row.value, 1.0);
      }
  EXPECT_EQ(province_item_mean(d, 1, provs)[1].value, std::nullopt);  // CN meal missing
}

}  // namespace
}  // namespace latent_index
