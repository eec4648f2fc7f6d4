#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "cdlgen/config.hpp"
#include "cdlgen/error.hpp"
#include "cdlgen/orchestrator.hpp"

namespace fs = std::filesystem;

// Runs one session in record mode against canned replies, one reply file per
// call in order, and writes the resulting cassette.
int main(int argc, char** argv) {
  CLI::App app{"Record a cassette from canned replies", "cdlgen-record-scripted"};
  std::string task_id, config_path, cassette_path;
  std::vector<std::string> reply_files;
  app.add_option("--task", task_id, "Task id or task file")->required();
  app.add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  app.add_option("--cassette", cassette_path, "Cassette to write (replaced)")->required();
  app.add_option("replies", reply_files, "Reply text files in call order")->required()->check(CLI::ExistingFile);
  CLI11_PARSE(app, argc, argv);

  try {
    std::vector<std::string> replies;
    for (const auto& p : reply_files) {
      std::ifstream in(p, std::ios::binary);
      replies.emplace_back(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    auto config = cdlgen::load_config(config_path);
    auto index = cdlgen::load_index_file(config.index_path);
    if (!config.rename_map.empty()) index.set_renames(cdlgen::load_rename_map(config.rename_map));
    fs::remove(cassette_path);
    auto provider = std::make_shared<cdlgen::ScriptedProvider>(replies);
    auto cassette = std::make_shared<cdlgen::Cassette>(fs::path(cassette_path).stem().string());
    auto gateway = cdlgen::Gateway::record(provider, cassette, fs::path(cassette_path));
    auto s = cdlgen::run_session(cdlgen::load_task(task_id), index, config, gateway);
    std::cout << s.session_id << "\t" << cdlgen::to_string(s.status) << "\tcalls=" << provider->calls()
              << "\tcompile_iters=" << s.counters.compile << "\n";
    if (!s.cause.empty()) std::cerr << s.cause << "\n";
    return s.status == cdlgen::SessionStatus::converged ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
