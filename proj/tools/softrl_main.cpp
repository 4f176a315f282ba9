#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "softrl/config.hpp"
#include "softrl/gradcheck.hpp"
#include "softrl/plotdata.hpp"
#include "softrl/sweep.hpp"
#include "softrl/trainer.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitGradcheckFail = 2;
constexpr int kExitRuntime = 3;

void print_usage() {
  std::cout <<
      "usage: softrl <subcommand> [options]\n"
      "\n"
      "subcommands:\n"
      "  train      run training for every configured seed\n"
      "  sweep      run an agent x safety x threshold x seed grid\n"
      "  gradcheck  compare closed-form gradients against FD oracles\n"
      "  plotdata   convert telemetry CSVs to plottable columns\n"
      "\n"
      "train/sweep options:\n"
      "  --config <path>        load `key = value` lines first\n"
      "  --<key> <value>        override any config key (e.g. --agent rc,\n"
      "                         --agent.gamma 0.98, --metal.lr_meta 0.001)\n"
      "sweep options:\n"
      "  --workers <n>          parallel runs (default 1)\n"
      "  --agents <list>        e.g. d4pg,rs-0.1,rc,metal (default desk grid)\n"
      "  --safety <list>        e.g. 0.05,0.3\n"
      "  --betas <list>         e.g. 0.1\n"
      "  --sweep-seeds <list>   e.g. 0,1,2,3,4\n"
      "  --out <path>           sweep CSV path (default <output_path>/sweep.csv)\n"
      "gradcheck options:\n"
      "  --suite <name>         metal | mesh | approx (required)\n"
      "  --instances <n>        default 100 (mesh: 50)\n"
      "  --seed <n>             default 0\n"
      "  --tolerance <x>        default per suite (1e-5 / 1e-4 / 1e-6)\n"
      "plotdata options:\n"
      "  softrl plotdata <telemetry.csv> [more.csv ...] [--out <path>]\n";
}

struct Args {
  std::vector<std::string> positional;
  std::vector<std::pair<std::string, std::string>> options;  // key without --
};

Args parse_args(int argc, char** argv, int start) {
  Args args;
  for (int i = start; i < argc; ++i) {
    std::string tok = argv[i];
    if (tok.rfind("--", 0) == 0) {
      std::string key = tok.substr(2);
      std::string value;
      const auto eq = key.find('=');
      if (eq != std::string::npos) {
        value = key.substr(eq + 1);
        key = key.substr(0, eq);
      } else {
        if (i + 1 >= argc)
          throw std::invalid_argument("flag --" + key + " needs a value");
        value = argv[++i];
      }
      if (key.empty()) throw std::invalid_argument("empty flag name");
      args.options.emplace_back(key, value);
    } else {
      args.positional.push_back(tok);
    }
  }
  return args;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    const auto comma = s.find(',', pos);
    const std::string item = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    std::size_t used = 0;
    out.push_back(std::stod(item, &used));
    if (used != item.size()) throw std::invalid_argument("bad number: " + item);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (out.empty()) throw std::invalid_argument("empty list: " + s);
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
  std::vector<std::uint64_t> out;
  for (const double v : parse_double_list(s)) {
    if (v < 0 || v != static_cast<double>(static_cast<std::uint64_t>(v)))
      throw std::invalid_argument("bad seed list: " + s);
    out.push_back(static_cast<std::uint64_t>(v));
  }
  return out;
}

softrl::SweepAgent parse_sweep_agent(const std::string& s) {
  softrl::SweepAgent a;
  if (s.rfind("rs-", 0) == 0) {
    a.kind = softrl::AgentKind::rs;
    std::size_t used = 0;
    a.rs_lambda = std::stod(s.substr(3), &used);
    if (used != s.size() - 3) throw std::invalid_argument("bad agent: " + s);
    return a;
  }
  a.kind = softrl::agent_kind_from_string(s);
  return a;
}

int cmd_train(const Args& args) {
  softrl::ExperimentConfig cfg;
  for (const auto& [key, value] : args.options) {
    if (key == "config")
      cfg = softrl::parse_config_file(value);
  }
  for (const auto& [key, value] : args.options) {
    if (key == "config") continue;
    softrl::apply_override(cfg, key, value);
  }
  if (!args.positional.empty())
    throw std::invalid_argument("train takes no positional arguments");
  cfg.validate();
  try {
    const std::vector<softrl::RunSummary> summaries = softrl::run_training(cfg);
    std::cout << softrl::summary_csv_header() << "\n";
    for (const softrl::RunSummary& s : summaries)
      std::cout << softrl::summary_csv_row(s) << "\n";
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_sweep(const Args& args) {
  softrl::ExperimentConfig base;
  for (const auto& [key, value] : args.options)
    if (key == "config") base = softrl::parse_config_file(value);

  softrl::SweepGrid grid = softrl::default_sweep_grid();
  int workers = 1;
  std::string out_path;
  for (const auto& [key, value] : args.options) {
    if (key == "config") continue;
    if (key == "workers") {
      workers = std::stoi(value);
      if (workers < 1) throw std::invalid_argument("--workers must be >= 1");
    } else if (key == "agents") {
      grid.agents.clear();
      std::size_t pos = 0;
      while (pos < value.size()) {
        const auto comma = value.find(',', pos);
        grid.agents.push_back(parse_sweep_agent(value.substr(
            pos, comma == std::string::npos ? std::string::npos : comma - pos)));
        if (comma == std::string::npos) break;
        pos = comma + 1;
      }
    } else if (key == "safety") {
      grid.safety_coefficients = parse_double_list(value);
    } else if (key == "betas") {
      grid.threshold_betas = parse_double_list(value);
    } else if (key == "sweep-seeds") {
      grid.seeds = parse_seed_list(value);
    } else if (key == "out") {
      out_path = value;
    } else {
      softrl::apply_override(base, key, value);
    }
  }
  if (!args.positional.empty())
    throw std::invalid_argument("sweep takes no positional arguments");
  if (out_path.empty()) out_path = base.output_path + "/sweep.csv";
  try {
    const softrl::SweepResult result =
        softrl::run_sweep(grid, base, workers, out_path);
    std::cout << softrl::sweep_csv(result);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_gradcheck(const Args& args) {
  std::string suite;
  int instances = -1;
  std::uint64_t seed = 0;
  double tolerance = -1.0;
  for (const auto& [key, value] : args.options) {
    if (key == "suite") suite = value;
    else if (key == "instances") instances = std::stoi(value);
    else if (key == "seed") seed = static_cast<std::uint64_t>(std::stoull(value));
    else if (key == "tolerance") tolerance = std::stod(value);
    else throw std::invalid_argument("unknown gradcheck flag --" + key);
  }
  if (!args.positional.empty())
    throw std::invalid_argument("gradcheck takes no positional arguments");
  if (suite.empty()) throw std::invalid_argument("gradcheck requires --suite");
  if (suite != "metal" && suite != "mesh" && suite != "approx")
    throw std::invalid_argument("unknown gradcheck suite: " + suite);
  if (instances < 0) instances = suite == "mesh" ? 50 : 100;
  if (tolerance < 0)
    tolerance = suite == "metal" ? 1e-5 : (suite == "mesh" ? 1e-4 : 1e-6);
  try {
    const softrl::GradcheckReport rep =
        softrl::run_gradcheck(suite, instances, seed, tolerance);
    std::cout << softrl::gradcheck_report_line(rep) << "\n";
    return rep.passed() ? kExitOk : kExitGradcheckFail;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitRuntime;
  }
}

int cmd_plotdata(const Args& args) {
  std::string out_path;
  for (const auto& [key, value] : args.options) {
    if (key == "out") out_path = value;
    else throw std::invalid_argument("unknown plotdata flag --" + key);
  }
  if (args.positional.empty())
    throw std::invalid_argument("plotdata requires at least one telemetry file");
  try {
    if (out_path.empty()) {
      softrl::emit_plotdata(args.positional, std::cout);
    } else {
      std::ofstream out(out_path, std::ios::binary);
      if (!out) throw std::runtime_error("cannot write " + out_path);
      softrl::emit_plotdata(args.positional, out);
    }
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    print_usage();
    return kExitUsage;
  }
  const std::string sub = argv[1];
  if (sub == "--help" || sub == "-h" || sub == "help") {
    print_usage();
    return kExitOk;
  }
  try {
    const Args args = parse_args(argc, argv, 2);
    if (sub == "train") return cmd_train(args);
    if (sub == "sweep") return cmd_sweep(args);
    if (sub == "gradcheck") return cmd_gradcheck(args);
    if (sub == "plotdata") return cmd_plotdata(args);
    std::cerr << "unknown subcommand: " << sub << "\n";
    print_usage();
    return kExitUsage;
  } catch (const std::invalid_argument& ex) {
    std::cerr << "usage error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitRuntime;
  }
}
