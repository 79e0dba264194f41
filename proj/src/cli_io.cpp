#include "dpfair/cli_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <unordered_map>

#include <CLI11.hpp>
#include <json.hpp>

#include "dpfair/allocation.hpp"
#include "dpfair/release_audit.hpp"

namespace dpfair {

using Json = nlohmann::ordered_json;

namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::optional<double> parse_number(std::string_view s) {
  double value = 0.0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return value;
}

// ---- JSON emission with fixed 17-significant-digit floats ---------------

void emit(const Json& j, std::string& out, int indent) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (const auto& [key, value] : j.items()) {
        if (!first) out += ",\n";
        first = false;
        out += inner + Json(key).dump() + ": ";
        emit(value, out, indent + 1);
      }
      out += "\n" + pad + "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        out += inner;
        emit(j[i], out, indent + 1);
      }
      out += "\n" + pad + "]";
      return;
    }
    case Json::value_t::number_float: {
      const double v = j.get<double>();
      out += std::isfinite(v) ? format_double(v) : "null";
      return;
    }
    default:
      out += j.dump();
  }
}

std::string render(const Json& j) {
  std::string out;
  emit(j, out, 0);
  out += "\n";
  return out;
}

// ---- report builders -----------------------------------------------------

Json mechanism_json(const NoiseSpec& spec) {
  Json j;
  j["kind"] = to_string(spec.kind());
  j["scale"] = spec.scale();
  if (const auto& b = spec.budget()) {
    j["epsilon"] = b->epsilon;
    j["delta"] = b->delta;
    j["sensitivity"] = b->sensitivity;
  }
  return j;
}

std::string_view command_name(Command c) {
  switch (c) {
    case Command::Release: return "release";
    case Command::Alloc: return "alloc";
    case Command::Bounds: return "bounds";
  }
  return "unknown";
}

std::string_view alloc_choice_name(AllocChoice c) {
  switch (c) {
    case AllocChoice::Baseline: return "bl";
    case AllocChoice::ProjectionOntoSimplex: return "pos";
    case AllocChoice::Both: return "both";
  }
  return "unknown";
}

Json config_echo(const RunConfig& config, const NoiseSpec& spec,
                 const TrueDataset& dataset) {
  Json j;
  j["command"] = command_name(config.command);
  j["input"] = config.input_path.generic_string();
  j["mechanism"] = mechanism_json(spec);
  j["trials"] = config.trials;
  j["seed"] = config.master_seed;
  j["total"] = dataset.total();
  if (config.command == Command::Alloc) {
    j["budget"] = config.budget.value_or(1.0);
    j["alloc_mechanism"] = alloc_choice_name(config.alloc_mechanism);
  }
  return j;
}

Json bias_json(const BiasReport& r, const TrueDataset& dataset) {
  Json j;
  j["post_processing"] = to_string(r.post);
  j["estimator"] =
      r.estimator == BiasEstimator::ControlVariate ? "control_variate" : "plain";
  j["trials"] = r.trials;
  j["mechanism"] = mechanism_json(r.mechanism);
  j["entities"] = dataset.entity_ids();
  j["per_entity_bias"] = r.per_entity_bias;
  j["per_entity_stderr"] = r.per_entity_stderr;
  j["alpha_fairness"] = r.alpha_fairness;
  j["alpha_stderr"] = r.alpha_stderr;
  j["max_bias_entity"] = dataset.entity_ids()[r.argmax];
  j["min_bias_entity"] = dataset.entity_ids()[r.argmin];
  j["lower_bound"] = r.lower_bound ? Json(*r.lower_bound) : Json(nullptr);
  j["upper_bound"] = r.upper_bound ? Json(*r.upper_bound) : Json(nullptr);
  return j;
}

Json bounds_json(const BoundsReport& r, const TrueDataset& dataset) {
  Json j;
  j["method"] = to_string(r.method);
  j["lower"] = r.lower;
  j["upper"] = r.upper;
  j["relu_bias_first"] = r.relu_bias_first;
  j["relu_bias_last"] = r.relu_bias_last;
  j["expected_negparts"] = r.expected_negparts;
  j["data_range"] = r.data_range;
  j["first_entity"] = dataset.entity_ids()[r.first_entity];
  j["last_entity"] = dataset.entity_ids()[r.last_entity];
  if (r.method == BoundsMethod::MonteCarloEmpirical) {
    j["trials"] = r.trials;
    j["lower_stderr"] = r.lower_stderr;
    j["upper_stderr"] = r.upper_stderr;
  } else {
    j["bracket"] = {*r.bracket_low, *r.bracket_high};
  }
  return j;
}

Json allocation_json(const AllocationReport& r, const RunConfig& config,
                     const TrueDataset& dataset, double budget) {
  Json j;
  j["mechanism"] = to_string(r.mechanism);
  j["trials"] = r.trials;
  j["seed"] = config.master_seed;
  j["budget"] = budget;
  j["entities"] = dataset.entity_ids();
  j["true_allocation"] = r.true_allocation;
  j["per_entity_bias"] = r.per_entity_bias;
  j["per_entity_stderr"] = r.per_entity_stderr;
  j["alpha_fairness"] = r.alpha_fairness;
  j["alpha_stderr"] = r.alpha_stderr;
  j["cost_of_privacy"] = r.cost_of_privacy;
  j["cost_of_privacy_stderr"] = r.cost_of_privacy_stderr;
  j["misallocated_funds"] = r.misallocated_funds;
  j["degenerate_trials"] = r.degenerate_trials;
  return j;
}

std::string plot_csv(const TrueDataset& dataset, std::span<const double> truth,
                     std::span<const double> bias, std::span<const double> stderr_,
                     const std::vector<double>* misallocated) {
  std::string out = misallocated ? "entity,true_share,bias,stderr,misallocated_funds\n"
                                 : "entity,true_count,bias,stderr\n";
  for (std::size_t i : ascending_order(truth)) {
    out += dataset.entity_ids()[i] + "," + format_double(truth[i]) + "," +
           format_double(bias[i]) + "," + format_double(stderr_[i]);
    if (misallocated) out += "," + format_double((*misallocated)[i]);
    out += "\n";
  }
  return out;
}

std::filesystem::path suffixed(const std::filesystem::path& p, std::string_view tag) {
  std::filesystem::path out = p;
  out.replace_filename(p.stem().string() + "_" + std::string(tag) +
                       p.extension().string());
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << text;
  if (!f.flush()) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] =
      std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

TrueDataset parse_dataset_csv(const std::string& text) {
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  bool have_header = false;
  bool weighted = false;
  std::vector<std::string> ids;
  std::vector<double> counts;
  std::vector<double> weights;
  std::unordered_map<std::string, std::size_t> seen;

  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.remove_prefix(3);
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    const std::string where = "line " + std::to_string(line_no);
    if (!have_header) {
      if (fields.size() == 2 && fields[0] == "entity" && fields[1] == "count") {
        weighted = false;
      } else if (fields.size() == 3 && fields[0] == "entity" && fields[1] == "count" &&
                 fields[2] == "weight") {
        weighted = true;
      } else {
        throw FormatError(where + ": expected header 'entity,count[,weight]'");
      }
      have_header = true;
      continue;
    }
    const std::size_t expected = weighted ? 3 : 2;
    if (fields.size() != expected) {
      throw FormatError(where + ": expected " + std::to_string(expected) +
                        " fields, found " + std::to_string(fields.size()));
    }
    const std::string id(fields[0]);
    if (id.empty()) throw FormatError(where + ": empty entity id");
    const auto count = parse_number(fields[1]);
    if (!count) throw FormatError(where + ": count is not a number");
    if (*count < 0.0) throw ValidationError("entity '" + id + "' has a negative count");
    double weight = 1.0;
    if (weighted) {
      const auto w = parse_number(fields[2]);
      if (!w) throw FormatError(where + ": weight is not a number");
      if (!(*w > 0.0)) throw ValidationError("entity '" + id + "' has a non-positive weight");
      weight = *w;
    }
    if (!seen.emplace(id, line_no).second) {
      throw ValidationError("duplicate entity id '" + id + "' at " + where);
    }
    ids.push_back(id);
    counts.push_back(*count);
    weights.push_back(weight);
  }
  if (!have_header) throw FormatError("line 1: missing header 'entity,count[,weight]'");
  const double total = stable_sum(counts);
  if (!(total > 0.0)) throw ValidationError("counts sum to zero");
  return TrueDataset(std::move(ids), std::move(counts), std::move(weights), total);
}

TrueDataset load_dataset(const std::filesystem::path& path,
                         std::optional<double> require_total) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << f.rdbuf();
  TrueDataset dataset = parse_dataset_csv(buf.str());
  if (require_total) {
    return TrueDataset(dataset.entity_ids(), dataset.counts(), dataset.weights(),
                       *require_total, /*require_consistent=*/true);
  }
  return dataset;
}

NoiseSpec noise_spec_from(const RunConfig& config) {
  if (config.trials < 100) throw ArgumentError("--trials must be at least 100");
  if (config.scale.has_value() == config.epsilon.has_value()) {
    throw ArgumentError("give exactly one of --scale or --epsilon");
  }
  if (config.scale) return NoiseSpec(config.kind, *config.scale);
  return scale_from_budget(config.kind, *config.epsilon, config.delta,
                           config.sensitivity);
}

std::optional<RunConfig> parse_command_line(int argc, const char* const* argv) {
  RunConfig config;
  CLI::App app{"Audit the disparate impact of post-processing differentially "
               "private releases",
               "dp-postfair"};
  std::string command;
  std::string mechanism;
  std::string alloc = "both";
  std::string input;
  std::string output;
  std::string plot;
  double scale = 0.0;
  double epsilon = 0.0;
  double total = 0.0;
  double budget = 0.0;
  bool random_seed = false;

  app.add_option("command", command, "release | alloc | bounds")
      ->required()
      ->check(CLI::IsMember({"release", "alloc", "bounds"}));
  app.add_option("--input", input, "CSV with header entity,count[,weight]")->required();
  app.add_option("--mechanism", mechanism, "laplace | gaussian")
      ->required()
      ->check(CLI::IsMember({"laplace", "gaussian"}));
  auto* scale_opt = app.add_option("--scale", scale, "noise scale (lambda or sigma)");
  auto* eps_opt = app.add_option("--epsilon", epsilon, "privacy budget epsilon");
  scale_opt->excludes(eps_opt);
  app.add_option("--delta", config.delta, "privacy budget delta (gaussian)");
  app.add_option("--sensitivity", config.sensitivity, "query sensitivity")
      ->capture_default_str();
  app.add_option("--trials", config.trials, "Monte-Carlo trials (>= 100)")
      ->capture_default_str();
  auto* seed_opt =
      app.add_option("--seed", config.master_seed, "master seed")->capture_default_str();
  app.add_flag("--random-seed", random_seed, "draw the master seed from entropy")
      ->excludes(seed_opt);
  auto* total_opt = app.add_option("--total", total, "public total C (release)");
  auto* budget_opt = app.add_option("--budget", budget, "budget B to distribute (alloc)");
  app.add_option("--alloc-mech", alloc, "bl | pos | both")
      ->check(CLI::IsMember({"bl", "pos", "both"}))
      ->capture_default_str();
  app.add_option("--out", output, "JSON report path")->required();
  auto* plot_opt = app.add_option("--plot-data", plot, "per-entity CSV for plotting");
  app.add_option("--threads", config.threads, "worker threads, 0 = all cores")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return std::nullopt;
  } catch (const CLI::ParseError& e) {
    throw ArgumentError(e.what());
  }

  config.command = command == "release" ? Command::Release
                   : command == "alloc" ? Command::Alloc
                                        : Command::Bounds;
  config.kind = mechanism == "laplace" ? NoiseKind::Laplace : NoiseKind::Gaussian;
  config.input_path = input;
  config.output_path = output;
  if (scale_opt->count()) config.scale = scale;
  if (eps_opt->count()) config.epsilon = epsilon;
  if (total_opt->count()) config.total = total;
  if (budget_opt->count()) config.budget = budget;
  if (plot_opt->count()) config.plot_data_path = plot;
  config.alloc_mechanism = alloc == "bl"    ? AllocChoice::Baseline
                           : alloc == "pos" ? AllocChoice::ProjectionOntoSimplex
                                            : AllocChoice::Both;
  if (random_seed) {
    std::random_device rd;
    config.master_seed = (static_cast<std::uint64_t>(rd()) << 32) | rd();
  }
  return config;
}

RunOutputs execute(const RunConfig& config) {
  const NoiseSpec spec = noise_spec_from(config);
  TrueDataset dataset = load_dataset(config.input_path);
  if (config.total) dataset = dataset.with_total(*config.total);

  RunOutputs outputs;
  Json report;
  report["config_echo"] = config_echo(config, spec, dataset);

  switch (config.command) {
    case Command::Release: {
      BiasReport bias = estimate_bias(dataset, spec, PostProcessing::ProjectSumNonneg,
                                      config.trials, config.master_seed,
                                      {.threads = config.threads});
      std::optional<BoundsReport> bounds;
      if (spec.kind() == NoiseKind::Gaussian) {
        bounds = bounds_gaussian(dataset, spec.scale());
      } else if (config.trials >= 10000) {
        bounds = bounds_empirical(dataset, spec, config.trials, config.master_seed,
                                  config.threads);
      }
      if (bounds) {
        bias.lower_bound = bounds->lower;
        bias.upper_bound = bounds->upper;
      }
      report["bias_report"] = bias_json(bias, dataset);
      if (bounds) report["bounds_report"] = bounds_json(*bounds, dataset);
      if (config.plot_data_path) {
        outputs.plot_files.emplace_back(
            *config.plot_data_path,
            plot_csv(dataset, dataset.counts(), bias.per_entity_bias,
                     bias.per_entity_stderr, nullptr));
      }
      break;
    }
    case Command::Bounds: {
      const BoundsReport bounds =
          spec.kind() == NoiseKind::Gaussian
              ? bounds_gaussian(dataset, spec.scale())
              : bounds_empirical(dataset, spec, config.trials, config.master_seed,
                                 config.threads);
      report["bounds_report"] = bounds_json(bounds, dataset);
      break;
    }
    case Command::Alloc: {
      const double budget = config.budget.value_or(1.0);
      const AllocationProblem problem(dataset, budget);
      std::vector<AllocationMechanism> mechanisms;
      if (config.alloc_mechanism != AllocChoice::ProjectionOntoSimplex) {
        mechanisms.push_back(AllocationMechanism::Baseline);
      }
      if (config.alloc_mechanism != AllocChoice::Baseline) {
        mechanisms.push_back(AllocationMechanism::ProjectionOntoSimplex);
      }
      Json reports = Json::array();
      for (const auto m : mechanisms) {
        const AllocationReport r = allocation_audit(problem, spec, m, config.trials,
                                                    config.master_seed, config.threads);
        reports.push_back(allocation_json(r, config, dataset, budget));
        if (config.plot_data_path) {
          const auto path = mechanisms.size() == 1
                                ? *config.plot_data_path
                                : suffixed(*config.plot_data_path,
                                           m == AllocationMechanism::Baseline ? "bl" : "pos");
          outputs.plot_files.emplace_back(
              path, plot_csv(dataset, r.true_allocation, r.per_entity_bias,
                             r.per_entity_stderr, &r.misallocated_funds));
        }
      }
      report["allocation_reports"] = std::move(reports);
      break;
    }
  }
  outputs.report_json = render(report);
  return outputs;
}

int run(const RunConfig& config, std::ostream& err) {
  try {
    const RunOutputs outputs = execute(config);
    write_file(config.output_path, outputs.report_json);
    for (const auto& [path, text] : outputs.plot_files) write_file(path, text);
    return 0;
  } catch (const std::exception& e) {
    err << "dp-postfair: error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace dpfair
