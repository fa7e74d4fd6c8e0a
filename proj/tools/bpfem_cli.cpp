#include <iostream>

#include <CLI11.hpp>

#include "bpfem/bpfem.hpp"

namespace {

void print_result(const bpfem::ExperimentResult& r) {
  std::cout << "n=" << r.n << " h=" << bpfem::format_double(r.h) << " dt=" << bpfem::format_double(r.dt)
            << " l2_error_final=" << bpfem::format_double(r.l2_error_final)
            << " energy_error=" << bpfem::format_double(r.energy_error) << " mean_iterations=" << r.mean_iterations
            << " min=" << bpfem::format_double(r.min_value) << " max=" << bpfem::format_double(r.max_value)
            << " M_r(T)=" << bpfem::format_double(r.final_relative_mass) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bound-preserving theta-scheme finite element solver for convection-diffusion"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run_cmd = app.add_subcommand("run", "Run one configuration");
  run_cmd->add_option("config", config_path, "key = value config file")->required()->check(CLI::ExistingFile);

  std::string axis = "space";
  std::vector<double> levels;
  auto* converge_cmd = app.add_subcommand("converge", "Convergence study over mesh sizes or time steps");
  converge_cmd->add_option("config", config_path, "template config file")->required()->check(CLI::ExistingFile);
  converge_cmd->add_option("--axis", axis, "space | time")->check(CLI::IsMember({"space", "time"}));
  converge_cmd->add_option("--levels", levels, "mesh divisions (space) or time steps (time)")->required();

  bpfem::SectionRequest section;
  auto* section_cmd = app.add_subcommand("section", "Run and sample the final field along y = const");
  section_cmd->add_option("config", config_path, "config file")->required()->check(CLI::ExistingFile);
  section_cmd->add_option("--y", section.y, "line height")->check(CLI::Range(0.0, 1.0));
  section_cmd->add_option("--npoints", section.npoints, "number of equidistant samples")->check(CLI::PositiveNumber);

  auto* mass_cmd = app.add_subcommand("mass", "Run and record the relative mass history");
  mass_cmd->add_option("config", config_path, "config file")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    const bpfem::RunConfig cfg = bpfem::load_config(config_path);
    if (*run_cmd) {
      print_result(bpfem::run_experiment(cfg));
    } else if (*converge_cmd) {
      bpfem::ExperimentOptions options;
      options.write_fields = false;
      const auto study = bpfem::convergence_study(
          cfg, axis == "space" ? bpfem::StudyAxis::space : bpfem::StudyAxis::time, levels, options);
      for (const auto& r : study.levels) print_result(r);
      std::cout << "l2_slope=" << bpfem::format_double(study.l2_slope)
                << " energy_slope=" << bpfem::format_double(study.energy_slope) << '\n';
    } else if (*section_cmd) {
      bpfem::ExperimentOptions options;
      options.section = section;
      options.write_fields = false;
      print_result(bpfem::run_experiment(cfg, options));
    } else if (*mass_cmd) {
      bpfem::ExperimentOptions options;
      options.write_errors = false;
      options.write_iterations = false;
      options.write_fields = false;
      print_result(bpfem::run_experiment(cfg, options));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
