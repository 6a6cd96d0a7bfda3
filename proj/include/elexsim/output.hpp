#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "elexsim/engine.hpp"

namespace elex {

/// %.<precision>g formatting; 17 digits round-trips every double.
std::string format_value(double v, int precision = 17);

/// Column `t` followed by the selected columns (all when `select` is empty).
/// Throws ParameterError for an unknown column name.
void write_waveforms(std::ostream& os, const Engine& engine, const SimulationResult& result,
                     const std::vector<std::string>& select = {}, int precision = 17);

/// One row per event, warning and statistic:
/// record,kind,t_before,t_after,ref,value,message
void write_events(std::ostream& os, const SimulationResult& result, int precision = 17);

}  // namespace elex
