#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ecgsal/ecgsal.h"

namespace {

struct Options {
  std::string config_file;
  std::optional<std::string> seed, model, protocol, threads, output_dir, data_dir, epochs, loss;
  std::vector<std::string> sets;
  bool quiet = false;
};

void log_line(const char* line, void* user) {
  if (!*static_cast<bool*>(user)) std::cerr << line << '\n';
}

int report_failure(ecgsal_status s) {
  std::cerr << "error: " << ecgsal_last_error() << '\n';
  return ecgsal_exit_code(s);
}

int run_command(const std::string& command, const Options& opt) {
  ecgsal_config* cfg = nullptr;
  ecgsal_status s = ecgsal_config_create(&cfg);
  if (s != ECGSAL_OK) return report_failure(s);
  if (!opt.config_file.empty()) s = ecgsal_config_load_file(cfg, opt.config_file.c_str());

  std::map<std::string, std::string> overrides;
  const std::pair<const char*, const std::optional<std::string>*> flags[] = {
      {"seed", &opt.seed},         {"model", &opt.model},       {"protocol", &opt.protocol},
      {"threads", &opt.threads},   {"output_dir", &opt.output_dir}, {"data_dir", &opt.data_dir},
      {"epochs", &opt.epochs},     {"loss", &opt.loss},
  };
  for (const auto& [key, value] : flags) {
    if (*value) overrides[key] = **value;
  }
  for (const auto& kv : opt.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::cerr << "error: InvalidConfig: --set expects key=value, got '" << kv << "'\n";
      ecgsal_config_free(cfg);
      return 2;
    }
    overrides[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  for (const auto& [k, v] : overrides) {
    if (s != ECGSAL_OK) break;
    s = ecgsal_config_set(cfg, k.c_str(), v.c_str());
  }

  char* summary = nullptr;
  bool quiet = opt.quiet;
  if (s == ECGSAL_OK) s = ecgsal_run(command.c_str(), cfg, log_line, &quiet, &summary);
  ecgsal_config_free(cfg);
  if (s != ECGSAL_OK) return report_failure(s);
  if (summary) {
    std::cout << summary;
    if (*summary && summary[std::char_traits<char>::length(summary) - 1] != '\n') std::cout << '\n';
    ecgsal_string_free(summary);
  }
  return 0;
}

int dump_record(const std::string& dir, const std::string& id) {
  ecgsal_record* rec = nullptr;
  ecgsal_status s = ecgsal_record_load(dir.c_str(), id.c_str(), &rec);
  if (s != ECGSAL_OK) return report_failure(s);
  char* json = nullptr;
  s = ecgsal_record_to_json(rec, &json);
  ecgsal_record_free(rec);
  if (s != ECGSAL_OK) return report_failure(s);
  std::cout << json << '\n';
  ecgsal_string_free(json);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ECG beat classification and gradient saliency pipeline"};
  app.set_version_flag("--version", std::string(ecgsal_version()));
  app.require_subcommand(1);

  Options opt;
  const auto add_common = [&opt](CLI::App* sub) {
    sub->add_option("--config", opt.config_file, "key=value configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", opt.seed, "root seed");
    sub->add_option("--model", opt.model, "model architecture")->check(CLI::IsMember({"cnn", "lstm"}));
    sub->add_option("--protocol", opt.protocol, "split protocol")->check(CLI::IsMember({"holdout", "lpo"}));
    sub->add_option("--threads", opt.threads, "worker threads (0 = all cores)");
    sub->add_option("--output-dir", opt.output_dir, "output root directory");
    sub->add_option("--data-dir", opt.data_dir, "directory holding the WFDB records");
    sub->add_option("--epochs", opt.epochs, "training epochs");
    sub->add_option("--loss", opt.loss, "training loss")->check(CLI::IsMember({"cross_entropy", "ce", "focal"}));
    sub->add_option("--set", opt.sets, "extra key=value configuration override")->expected(1)->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    sub->add_flag("-q,--quiet", opt.quiet, "suppress progress lines");
  };

  const std::pair<const char*, const char*> commands[] = {
      {"ingest", "parse records and build the beat set"},
      {"split", "partition beats into train and test sets"},
      {"train", "train a model on the split"},
      {"eval", "evaluate a trained model on the test set"},
      {"explain", "compute saliency maps, segment profiles and group comparisons"},
      {"report", "summarize every evaluated model"},
  };
  std::string selected;
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    add_common(sub);
    sub->callback([&selected, n = std::string(name)] { selected = n; });
  }

  std::string dump_dir, dump_id;
  auto* dump = app.add_subcommand("dump-record", "print one parsed record as JSON");
  dump->add_option("dir", dump_dir, "record directory")->required();
  dump->add_option("record", dump_id, "record id, e.g. 100")->required();
  dump->callback([&selected] { selected = "dump-record"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (selected == "dump-record") return dump_record(dump_dir, dump_id);
  return run_command(selected, opt);
}
