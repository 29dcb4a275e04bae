// shrinkctl: run experiments from a manifest or from command-line flags.
//
//   shrinkctl run --manifest m.json [--threads N]
//   shrinkctl enumerate --group sanov.json --radius 8 --out out/
//   shrinkctl plot --results out/results.json --kind growth
//
// Exit codes: 0 success, 2 validation error, 3 budget exhaustion, 1 other.

#include "shrink/experiment.hpp"
#include "shrink/group_enum.hpp"
#include "shrink/matrix_core.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

using nlohmann::json;

constexpr int kExitValidation = 2;
constexpr int kExitBudget = 3;

struct Common {
  std::string group;
  std::string out = "out";
  std::vector<std::string> params;  // key=<json>
};

// Adds --group, --out and --param to a flag-based subcommand.
void add_common(CLI::App* sub, Common& c, bool needs_group) {
  auto* g = sub->add_option("--group", c.group, "Group presentation JSON file");
  if (needs_group) g->required();
  sub->add_option("--out", c.out, "Output directory")->capture_default_str();
  sub->add_option("--param", c.params, "Extra parameter as key=<json value>");
}

json parse_extra(const std::vector<std::string>& params) {
  json out = json::object();
  for (const auto& kv : params) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw shrink::ManifestError("--param", "expected key=<json>, got \"" + kv + "\"");
    }
    const std::string key = kv.substr(0, eq), text = kv.substr(eq + 1);
    try {
      out[key] = json::parse(text);
    } catch (const json::parse_error&) {
      out[key] = text;  // bare strings need no quotes
    }
  }
  return out;
}

// Copies a parsed option into params only when it was given.
template <class T>
void set_if(json& params, const CLI::Option* opt, const std::string& key, const T& value) {
  if (opt->count() > 0) params[key] = value;
}

int run_manifest(const shrink::ExperimentManifest& m, unsigned threads) {
  const auto outcome = shrink::run_experiment(m, threads);
  json brief = outcome.summary;
  brief["output"] = m.output_path().generic_string();
  std::cout << brief.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shrinking-target and random-walk experiments on subgroups of SL_2(Z)"};
  app.require_subcommand(1);
  unsigned threads = 1;
  app.add_option("--threads", threads, "Worker threads inside the modules")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  // run / validate
  std::string manifest_file;
  auto* run = app.add_subcommand("run", "Run the experiment described by a manifest");
  run->add_option("--manifest", manifest_file, "Manifest JSON file")->required()->check(CLI::ExistingFile);
  std::string validate_file;
  auto* validate = app.add_subcommand("validate", "Validate a manifest without running it");
  validate->add_option("--manifest", validate_file, "Manifest JSON file")->required();

  // plot
  std::string results_file, plot_kind;
  auto* plot = app.add_subcommand("plot", "Emit gnuplot-style columns from a results.json");
  plot->add_option("--results", results_file, "results.json of a finished experiment")
      ->required()
      ->check(CLI::ExistingFile);
  plot->add_option("--kind", plot_kind, "growth | spectral | decay")->required();

  // group
  std::string group_out, group_metric = "hyperbolic";
  auto* group = app.add_subcommand("group", "Write the Sanov group presentation to a file");
  group->add_option("--metric", group_metric, "hyperbolic | word")
      ->check(CLI::IsMember({"hyperbolic", "word"}))
      ->capture_default_str();
  group->add_option("-o,--output", group_out, "Output JSON file")->required();

  // Flag-based experiment subcommands.
  Common common;
  json params = json::object();

  int radius = 0;
  std::size_t max_elements = 0;
  bool dump = false;
  auto* en = app.add_subcommand("enumerate", "Ball counts #B_n and growth fit");
  add_common(en, common, true);
  auto* en_r = en->add_option("--radius", radius, "Largest radius")->required();
  auto* en_m = en->add_option("--max-elements", max_elements, "Element budget");
  auto* en_d = en->add_flag("--dump-elements", dump, "Write elements.json");

  std::vector<double> alphas;
  std::vector<std::string> x_lits, y_lits, center_lits;
  int samples = 0;
  std::uint64_t seed = 0;
  auto* ex = app.add_subcommand("exponent", "Counts N(n) for psi = R^-alpha");
  add_common(ex, common, true);
  auto* ex_r = ex->add_option("--radius", radius, "Largest radius")->required();
  auto* ex_a = ex->add_option("--alpha", alphas, "Exponents alpha")->required();
  auto* ex_x = ex->add_option("--x", x_lits, "Start point literals, e.g. sqrt2-1 1/3");
  auto* ex_y = ex->add_option("--y", y_lits, "Target center literals");
  auto* ex_s = ex->add_option("--samples", samples, "Random start points instead of --x");
  auto* ex_seed = ex->add_option("--seed", seed, "Seed for random start points");

  std::string target_kind;
  double psi_a = 0, psi_b = 0;
  auto* sh = app.add_subcommand("shrink", "Shrinking-target solutions with witnesses");
  add_common(sh, common, true);
  auto* sh_r = sh->add_option("--radius", radius, "Largest radius")->required();
  auto* sh_x = sh->add_option("--x", x_lits, "Start point literals")->required();
  auto* sh_t = sh->add_option("--target", target_kind, "ball | box | annulus");
  auto* sh_c = sh->add_option("--center", center_lits, "Target center literals");
  auto* sh_a = sh->add_option("--psi-a", psi_a, "psi(R) = R^-a (log R)^b")->required();
  auto* sh_b = sh->add_option("--psi-b", psi_b, "Log exponent b");

  std::string measure, method;
  std::vector<int> windows, radii;
  int steps = 0, width = 0;
  auto* sp = app.add_subcommand("spectral", "Lattice norms and return-probability estimates");
  add_common(sp, common, true);
  auto* sp_m = sp->add_option("--measure", measure, "srw | shells");
  auto* sp_w = sp->add_option("--window", windows, "Lattice windows B (srw)");
  auto* sp_k = sp->add_option("--steps", steps, "Return-probability steps K");
  auto* sp_seed = sp->add_option("--seed", seed, "Lanczos start seed (srw)");
  auto* sp_meth = sp->add_option("--method", method, "lanczos | power");
  auto* sp_r = sp->add_option("--radius", radii, "Shell radii (shells)");
  auto* sp_width = sp->add_option("--width", width, "Shell width (shells)");

  int rank = 0, census = 0;
  std::vector<std::string> pairs;
  std::vector<int> radial;
  auto* bo = app.add_subcommand("boundary", "Free-group tree model: census, Pi matrices, radial chain");
  add_common(bo, common, false);
  auto* bo_rank = bo->add_option("--rank", rank, "Free group rank m");
  auto* bo_c = bo->add_option("--census-depth", census, "Sphere census depth");
  auto* bo_p = bo->add_option("--pair", pairs, "Pi matrix instance r,n");
  auto* bo_rad = bo->add_option("--radial", radial, "Shell radii for the radial chain");
  auto* bo_k = bo->add_option("--steps", steps, "Radial return-probability steps K");

  int window = 0;
  std::int64_t cutoff = 0;
  auto* di = app.add_subcommand("discrepancy", "Walk distributions, Fourier decay, discrepancy");
  add_common(di, common, true);
  auto* di_x = di->add_option("--x", x_lits, "Start point literals")->required();
  auto* di_k = di->add_option("--steps", steps, "Largest walk step k")->required();
  auto* di_w = di->add_option("--window", window, "Fourier window B");
  auto* di_q = di->add_option("--cutoff", cutoff, "Diophantine cutoff Q");

  std::uint64_t mc_samples = 0;
  auto* er = app.add_subcommand("ergodic", "Character errors ||A_n e_b||");
  add_common(er, common, true);
  auto* er_r = er->add_option("--radius", radius, "Largest shell radius")->required();
  auto* er_s = er->add_option("--samples", mc_samples, "Monte Carlo pair samples");
  auto* er_seed = er->add_option("--seed", seed, "Monte Carlo seed");
  auto* er_w = er->add_option("--width", width, "Shell width");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*run) return run_manifest(shrink::ExperimentManifest::load(manifest_file), threads);
    if (*validate) {
      shrink::ExperimentManifest::load(validate_file).validate();
      std::cout << "manifest valid\n";
      return 0;
    }
    if (*plot) {
      std::ifstream in(results_file);
      std::cout << shrink::emit_plot_data(json::parse(in), shrink::plot_kind_from_string(plot_kind));
      return 0;
    }
    if (*group) {
      const auto p = shrink::sanov_presentation(group_metric == "word"
                                                    ? shrink::MetricMode::WordLength
                                                    : shrink::MetricMode::HyperbolicDisplacement);
      std::ofstream out(group_out);
      out << shrink::presentation_to_json(p).dump(2) << "\n";
      return out ? 0 : 1;
    }

    std::string kind;
    if (*en) {
      kind = "enumerate";
      set_if(params, en_r, "radius", radius);
      set_if(params, en_m, "max_elements", max_elements);
      set_if(params, en_d, "dump_elements", dump);
    } else if (*ex) {
      kind = "exponent";
      set_if(params, ex_r, "radius", radius);
      set_if(params, ex_a, "alphas", alphas);
      set_if(params, ex_x, "x", x_lits);
      set_if(params, ex_y, "y", y_lits);
      set_if(params, ex_s, "samples", samples);
      set_if(params, ex_seed, "seed", seed);
    } else if (*sh) {
      kind = "shrink";
      set_if(params, sh_r, "radius", radius);
      set_if(params, sh_x, "x", x_lits);
      if (sh_t->count() > 0) params["target"]["kind"] = target_kind;
      if (sh_c->count() > 0) params["target"]["center"] = center_lits;
      set_if(params["psi"], sh_a, "a", psi_a);
      set_if(params["psi"], sh_b, "b", psi_b);
    } else if (*sp) {
      kind = "spectral";
      set_if(params, sp_m, "measure", measure);
      set_if(params, sp_w, "windows", windows);
      set_if(params, sp_k, "steps", steps);
      set_if(params, sp_seed, "seed", seed);
      set_if(params, sp_meth, "method", method);
      set_if(params, sp_r, "radii", radii);
      set_if(params, sp_width, "width", width);
    } else if (*bo) {
      kind = "boundary";
      set_if(params, bo_rank, "rank", rank);
      set_if(params, bo_c, "census_depth", census);
      if (bo_p->count() > 0) {
        json list = json::array();
        for (const auto& s : pairs) {
          const auto comma = s.find(',');
          if (comma == std::string::npos) throw shrink::ManifestError("--pair", "expected r,n");
          list.push_back({std::stoi(s.substr(0, comma)), std::stoi(s.substr(comma + 1))});
        }
        params["matrixnorm"] = list;
      }
      if (bo_rad->count() > 0) params["radial"]["radii"] = radial;
      if (bo_k->count() > 0) params["radial"]["steps"] = steps;
    } else if (*di) {
      kind = "discrepancy";
      set_if(params, di_x, "x", x_lits);
      set_if(params, di_k, "steps", steps);
      set_if(params, di_w, "window", window);
      set_if(params, di_q, "diophantine_cutoff", cutoff);
    } else if (*er) {
      kind = "ergodic";
      set_if(params, er_r, "radius", radius);
      set_if(params, er_s, "samples", mc_samples);
      set_if(params, er_seed, "seed", seed);
      set_if(params, er_w, "width", width);
    }
    params.update(parse_extra(common.params));
    json manifest = {{"kind", kind}, {"output", common.out}, {"params", params}};
    if (!common.group.empty()) manifest["group"] = common.group;
    return run_manifest(shrink::ExperimentManifest::from_json(manifest), threads);
  } catch (const shrink::ManifestError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const shrink::BudgetExceeded& e) {
    std::cerr << "budget exhausted: " << e.what() << " (completed radius "
              << e.completed_radius() << ")\n";
    return kExitBudget;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
