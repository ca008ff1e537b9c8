#include "hinftune/diagrams.hpp"

#include "hinftune/error.hpp"

namespace hinftune::diagrams {

BlockDiagram avr() {
  BlockDiagram d;
  d.inputs = {"v_ref", "v_t"};
  d.outputs = {"e_fd"};
  d.blocks = {
      Block::lag("transducer", 1.0, 0.02),
      Block::lead_lag("gain_reduction", 1.0, 10.0),
      Block::lag("K_A", 800.0, 0.02).tune("K", 50.0, 1000.0),
      Block::limiter("limit", -6.0, 6.0),
      Block::lag("exciter", 1.0, 0.8),
      Block::derivative_lag("rate_fb", 0.03, 1.0).tune("K", 0.0, 1.0).tune("T", 0.1, 1000.0),
  };
  d.connections = {
      {"v_ref", "gain_reduction", 1.0},  {"v_t", "transducer", 1.0},
      {"transducer", "gain_reduction", -1.0}, {"rate_fb", "gain_reduction", -1.0},
      {"gain_reduction", "K_A", 1.0},    {"K_A", "limit", 1.0},
      {"limit", "exciter", 1.0},         {"exciter", "rate_fb", 1.0},
      {"exciter", "e_fd", 1.0},
  };
  return d;
}

BlockDiagram pss() {
  return BlockDiagram::chain(
      "omega",
      {
          Block::gain("K_S", 20.0).tune("K", 0.0, 100.0),
          Block::washout("washout", 1.0, 10.0).tune("T_w", 1.0, 100.0),
          Block::lead_lag("lead_lag1", 0.05, 0.02).tune("T_num", 0.01, 10.0).tune("T_den", 0.01, 100.0),
          Block::lead_lag("lead_lag2", 3.0, 5.4).tune("T_num", 0.01, 10.0).tune("T_den", 0.01, 100.0),
          Block::lag("sensor", 1.0, 0.01),
      },
      "v_s");
}

BlockDiagram tgov() {
  BlockDiagram d = BlockDiagram::chain(
      "omega",
      {
          Block::inverse_gain("R_p", 0.05).tune("R", 0.01, 0.2),
          Block::lag("servo", 1.0, 0.1),
          Block::limiter("gate", -1.0, 1.0),
          Block::lag("turbine", 1.0, 0.3),
      },
      "p_m");
  d.connections.front().gain = -1.0;
  return d;
}

BlockDiagram exac4() {
  return BlockDiagram::chain(
      "v_err",
      {
          Block::lag("transducer", 1.0, 0.02),
          Block::lead_lag("gain_reduction", 1.0, 10.0),
          Block::lag("K_A", 200.0, 0.02).tune("K", 50.0, 1000.0),
          Block::limiter("limit", -5.0, 5.0),
      },
      "e_fd");
}

BlockDiagram pss1a() {
  return BlockDiagram::chain(
      "omega",
      {
          Block::lag("sensor", 1.0, 0.01),
          Block::notch("notch", 0.01, 1e-4).tune("A_1", 0.0, 0.1).tune("A_2", 1e-5, 1e-2),
          Block::gain("K_S", 20.0).tune("K", 0.0, 100.0),
          Block::washout("washout", 1.0, 10.0).tune("T_w", 1.0, 100.0),
          Block::lead_lag("lead_lag1", 0.05, 0.02).tune("T_num", 0.01, 10.0).tune("T_den", 0.01, 100.0),
          Block::lead_lag("lead_lag2", 3.0, 5.4).tune("T_num", 0.01, 10.0).tune("T_den", 0.01, 100.0),
          Block::limiter("limit", -0.1, 0.1),
      },
      "v_s");
}

BlockDiagram tgov1() {
  BlockDiagram d = BlockDiagram::chain(
      "omega",
      {
          Block::inverse_gain("R_p", 0.05).tune("R", 0.01, 0.2),
          Block::lag("valve", 1.0, 0.5),
          Block::limiter("valve_limit", -1.0, 1.0),
          Block::lead_lag("turbine", 2.1, 7.0),
      },
      "p_m");
  d.connections.front().gain = -1.0;
  return d;
}

BlockDiagram by_name(const std::string& name) {
  if (name == "avr") return avr();
  if (name == "pss") return pss();
  if (name == "tgov") return tgov();
  if (name == "exac4") return exac4();
  if (name == "pss1a") return pss1a();
  if (name == "tgov1") return tgov1();
  throw Error(ErrorKind::Config, "unknown diagram template '" + name + "'");
}

std::vector<std::pair<std::string, double>> power_plant_step_sizes() {
  return {
      {"tgov.R_p.R", 0.05},          {"avr.K_A.K", 60.0},
      {"avr.rate_fb.T", 500.0},      {"avr.rate_fb.K", 1.0},
      {"pss.K_S.K", 6.0},            {"pss.washout.T_w", 50.0},
      {"pss.lead_lag1.T_num", 1.0},  {"pss.lead_lag1.T_den", 50.0},
      {"pss.lead_lag2.T_num", 1.0},  {"pss.lead_lag2.T_den", 50.0},
  };
}

}  // namespace hinftune::diagrams
