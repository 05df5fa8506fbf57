#ifndef LATENT_INDEX_ITEM_SET_HPP_
#define LATENT_INDEX_ITEM_SET_HPP_

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "latent_index/latent_trait.hpp"

namespace latent_index {

// The thirteen binary inclusivity items, in the order of the item matrix:
// four province-level foreign-enrolment indicators followed by the social
// and economic items reported by each service.
inline constexpr std::array<std::string_view, 13> kItemNames = {
    "foreign_0.25", "foreign_0.5", "foreign_0.75", "foreign_1",
    "disability",   "meal",        "fee",          "disability_fee",
    "full_fee",     "isee",        "child",        "social_services",
    "family"};

// The nine items read directly from the survey file.
inline constexpr std::array<std::string_view, 9> kServiceItemNames = {
    "disability", "meal", "fee", "disability_fee", "full_fee",
    "isee",       "child", "social_services", "family"};

inline constexpr std::array<double, 4> kForeignLevels = {0.25, 0.5, 0.75, 1.0};

// Published estimates of the thirteen-item model, in kItemNames order. Used
// as the generating truth of the synthetic fixtures.
inline ItemParameters reference_item_parameters() {
  return ItemParameters{
      {1.337, 0.174, -0.899, -4.832, -2.111, 1.344, -0.658, -3.794, -3.553, -1.093, -2.656,
       -1.894, -2.056},
      {0.356, 0.340, 0.363, 0.772, 0.930, 0.142, 1.230, 2.620, 1.978, 5.503, 1.220, 1.655,
       0.459}};
}

inline std::vector<std::string> item_names() {
  return {kItemNames.begin(), kItemNames.end()};
}

}  // namespace latent_index

#endif  // LATENT_INDEX_ITEM_SET_HPP_
