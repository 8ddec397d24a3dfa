#include "cli.hpp"

#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sinsim/config.hpp"
#include "sinsim/errors.hpp"
#include "sinsim/pipeline.hpp"
#include "sinsim/verify.hpp"

namespace sinsim::cli {

namespace {

using nlohmann::json;

// Command-line values that replace the corresponding config-file fields.
struct Overrides {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<double> beta;
  std::optional<double> lambda;
  std::optional<std::size_t> iters;
  std::optional<double> temperature;
  std::optional<std::string> regularize_on;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> max_steps;
  std::optional<std::size_t> batch_size;
  std::optional<double> lr;
  std::optional<double> weight_decay;
};

void add_config_flags(CLI::App& cmd, Overrides& o, bool seed_required) {
  cmd.add_option("-c,--config", o.config_path, "RunConfig JSON file")->check(CLI::ExistingFile);
  auto* seed = cmd.add_option("--seed", o.seed, "Base random seed");
  if (seed_required) seed->required();
  cmd.add_option("-o,--output-dir", o.output_dir, "Directory for run artifacts");
  cmd.add_option("--beta", o.beta, "Weight of the transport term");
  cmd.add_option("--lambda", o.lambda, "Entropic strength of the transport solver");
  cmd.add_option("--sinkhorn-iters", o.iters, "Solver iterations per step");
  cmd.add_option("--temperature", o.temperature, "Contrastive temperature");
  cmd.add_option("--regularize-on", o.regularize_on, "Representation to regularize: h or z")
      ->check(CLI::IsMember({"h", "z"}));
  cmd.add_option("--epochs", o.epochs, "Training epochs");
  cmd.add_option("--max-steps", o.max_steps, "Stop after this many optimizer steps (0: no cap)");
  cmd.add_option("--batch-size", o.batch_size, "Pairs per batch");
  cmd.add_option("--lr", o.lr, "Adam learning rate");
  cmd.add_option("--weight-decay", o.weight_decay, "Adam weight decay");
}

RunConfig resolve(const Overrides& o) {
  RunConfig c = o.config_path ? load_config(*o.config_path) : RunConfig{};
  if (o.seed) c.seed = *o.seed;
  if (o.output_dir) c.output_dir = *o.output_dir;
  if (o.beta) c.beta = *o.beta;
  if (o.lambda) c.sinkhorn.lambda = *o.lambda;
  if (o.iters) c.sinkhorn.max_iters = *o.iters;
  if (o.temperature) c.temperature = *o.temperature;
  if (o.regularize_on) c.regularize_on = parse_regularize_on(*o.regularize_on);
  if (o.epochs) c.epochs = *o.epochs;
  if (o.max_steps) c.max_steps = *o.max_steps;
  if (o.batch_size) c.batch_size = *o.batch_size;
  if (o.lr) c.lr = *o.lr;
  if (o.weight_decay) c.weight_decay = *o.weight_decay;
  c.validate();
  return c;
}

void report_error(std::ostream& err, const char* kind, int code, const std::string& message) {
  err << json{{"error", kind}, {"exit", code}, {"message", message}}.dump() << '\n';
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Contrastive representation learning with an entropic optimal-transport regularizer"};
  app.name("sinsim");
  app.require_subcommand(1);
  app.footer(
      "Exit codes: 0 success, 1 verification failed, 2 usage error, 3 invalid config, "
      "4 runtime failure.\nFlags override config-file values, which override built-in defaults.");

  Overrides train_o;
  auto* train = app.add_subcommand("train", "Pretrain, probe, and write metrics and a checkpoint");
  add_config_flags(*train, train_o, true);

  Overrides probe_o;
  std::string probe_ckpt;
  std::string probe_kind = "linear";
  auto* probe_cmd = app.add_subcommand("probe", "Frozen-encoder probe accuracy as JSON");
  add_config_flags(*probe_cmd, probe_o, false);
  probe_cmd->add_option("--checkpoint", probe_ckpt, "Checkpoint written by train")->required()
      ->check(CLI::ExistingFile);
  probe_cmd->add_option("--kind", probe_kind, "linear or mlp")->check(CLI::IsMember({"linear", "mlp"}));

  Overrides sweep_o;
  std::string sweep_axis;
  std::vector<double> sweep_values;
  std::optional<std::string> sweep_out;
  bool sweep_timings = false;
  auto* sweep_cmd = app.add_subcommand("sweep", "One pretrain + probe per value; CSV report");
  add_config_flags(*sweep_cmd, sweep_o, true);
  sweep_cmd->add_option("--axis", sweep_axis, "beta, lambda or iters")->required()
      ->check(CLI::IsMember({"beta", "lambda", "iters"}));
  sweep_cmd->add_option("--values", sweep_values, "Comma-separated axis values")->required()
      ->delimiter(',');
  sweep_cmd->add_option("--out", sweep_out, "Report path (default <output-dir>/sweep.csv)");
  sweep_cmd->add_flag("--timings", sweep_timings, "Record wall time per row (not reproducible)");

  std::uint64_t verify_seed = 0;
  std::optional<std::string> verify_out;
  auto* verify_cmd = app.add_subcommand("verify", "Transport solver battery; JSON report");
  verify_cmd->add_option("--seed", verify_seed, "Seed for the battery instances");
  verify_cmd->add_option("--out", verify_out, "Also write the report to this file");

  Overrides export_o;
  std::string export_ckpt;
  std::string export_split = "test";
  std::string export_out;
  auto* export_cmd = app.add_subcommand("export-embeddings", "Encoder outputs as CSV");
  add_config_flags(*export_cmd, export_o, false);
  export_cmd->add_option("--checkpoint", export_ckpt, "Checkpoint written by train")->required()
      ->check(CLI::ExistingFile);
  export_cmd->add_option("--split", export_split, "train or test")
      ->check(CLI::IsMember({"train", "test"}));
  export_cmd->add_option("--out", export_out, "CSV path")->required();

  std::uint64_t emd_seed = 0;
  std::vector<double> emd_lambdas = {0.5, 0.1, 0.05, 0.01, 0.001};
  std::size_t emd_n = 8;
  std::size_t emd_instances = 20;
  auto* emd_cmd = app.add_subcommand("emd-compare", "Entropic vs exact transport cost table (CSV)");
  emd_cmd->add_option("--seed", emd_seed, "Seed for the instances");
  emd_cmd->add_option("--lambdas", emd_lambdas, "Comma-separated entropic strengths")->delimiter(',');
  emd_cmd->add_option("--n", emd_n, "Points per side")->check(CLI::Range(1, 512));
  emd_cmd->add_option("--instances", emd_instances, "Problems per strength")->check(CLI::PositiveNumber);

  if (argc <= 1) {
    err << app.help();
    report_error(err, "usage", kExitUsage, "no subcommand given");
    return kExitUsage;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    report_error(err, "usage", kExitUsage, e.what());
    return kExitUsage;
  }

  try {
    if (train->parsed()) {
      const RunConfig config = resolve(train_o);
      const TrainSummary s = train_run(config);
      err << "train: " << s.steps << " steps, probe accuracy " << s.probe_acc << ", artifacts in "
          << config.output_dir.string() << '\n';
      out << json{{"steps", s.steps},
                  {"probe_acc", s.probe_acc},
                  {"nt_xent_final", s.final_epoch.nt_xent},
                  {"sinkhorn_final", s.final_epoch.sinkhorn},
                  {"output_dir", config.output_dir.string()}}
                 .dump()
          << '\n';
    } else if (probe_cmd->parsed()) {
      RunConfig config = resolve(probe_o);
      config.probe.kind = parse_probe_kind(probe_kind);
      const ModelParams params = load_checkpoint(probe_ckpt);
      const TrainTest data = load_data(config);
      const double acc = probe(params, data.train, data.test,
                               probe_settings(config));
      out << json{{"accuracy", acc},
                  {"kind", probe_kind},
                  {"train_size", data.train.size()},
                  {"test_size", data.test.size()}}
                 .dump()
          << '\n';
    } else if (sweep_cmd->parsed()) {
      const RunConfig config = resolve(sweep_o);
      SweepOptions options;
      options.timings = sweep_timings;
      const auto rows = sweep(config, parse_sweep_axis(sweep_axis), sweep_values, options);
      const std::filesystem::path path =
          sweep_out ? std::filesystem::path(*sweep_out) : config.output_dir / "sweep.csv";
      write_text(path, sweep_csv(rows));
      for (const auto& r : rows) {
        if (r.status == "error") err << "sweep: value " << r.axis_value << " failed: " << r.error << '\n';
      }
      err << "sweep: " << rows.size() << " rows written to " << path.string() << '\n';
    } else if (verify_cmd->parsed()) {
      const VerifyReport report = run_verify_battery(verify_seed);
      const std::string text = report.to_json();
      if (verify_out) write_text(*verify_out, text);
      out << text;
      if (!report.all_pass()) {
        report_error(err, "verification", kExitVerifyFailed,
                     std::to_string(report.failures()) + " of " +
                         std::to_string(report.checks.size()) + " checks failed");
        return kExitVerifyFailed;
      }
    } else if (export_cmd->parsed()) {
      const RunConfig config = resolve(export_o);
      const ModelParams params = load_checkpoint(export_ckpt);
      const TrainTest data = load_data(config);
      export_embeddings(params, export_split == "train" ? data.train : data.test, export_out);
      err << "export-embeddings: wrote " << export_out << '\n';
    } else if (emd_cmd->parsed()) {
      out << emd_compare_csv(emd_compare(emd_seed, emd_lambdas, emd_n, emd_instances));
    }
  } catch (const ConfigError& e) {
    report_error(err, "config", kExitConfig, e.what());
    return kExitConfig;
  } catch (const NonFiniteLoss& e) {
    report_error(err, "non_finite_loss", kExitRuntime, e.what());
    return kExitRuntime;
  } catch (const IoError& e) {
    report_error(err, "io", kExitRuntime, e.what());
    return kExitRuntime;
  } catch (const FormatError& e) {
    report_error(err, "format", kExitRuntime, e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    report_error(err, "runtime", kExitRuntime, e.what());
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace sinsim::cli
