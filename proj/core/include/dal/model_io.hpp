#pragma once

#include <string>
#include <utility>

#include "dal/bcca.hpp"
#include "dal/factor_model.hpp"

namespace dal {

// Model + CMM persistence on top of the named-matrix checkpoint format.
// Architecture is recovered from the stored shapes; the RFM output
// activation flag travels as a 1x1 meta group.
void save_model(const FactorModel& model, const CmmParams& cmm, const std::string& path);
std::pair<FactorModel, CmmParams> load_model(const std::string& path);

}  // namespace dal
