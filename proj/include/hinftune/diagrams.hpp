#pragma once

#include <string>
#include <utility>
#include <vector>

#include "hinftune/blocks.hpp"

namespace hinftune::diagrams {

// Exciter with transducer, gain reduction, AVR lag and rate feedback.
// Inputs (v_ref, v_t), output e_fd. Tunable: K_A.K, rate_fb.K, rate_fb.T.
BlockDiagram avr();

// Simple stabilizer: gain -> washout -> two lead-lags -> sensor lag.
// Input omega, output v_s. Everything except the sensor lag is tunable.
BlockDiagram pss();

// Governor and turbine with droop 1/R_p. Input omega, output p_m.
BlockDiagram tgov();

// Standard models.
BlockDiagram exac4();   // input v_err, output e_fd, tunable K_A.K
BlockDiagram pss1a();   // input omega, output v_s, sensor lag fixed
BlockDiagram tgov1();   // input omega, output p_m, tunable R_p.R

// Template lookup by name ("avr", "pss", "tgov", "exac4", "pss1a", "tgov1").
BlockDiagram by_name(const std::string& name);

// Initial trust-region step per parameter of a power-plant controller set
// built from avr(), pss() and tgov(), keyed by parameter name.
std::vector<std::pair<std::string, double>> power_plant_step_sizes();

}  // namespace hinftune::diagrams
