// morpes command-line entry point: serve, metrics, segment, score.
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "morpes/composer.hpp"
#include "morpes/errors.hpp"
#include "morpes/evaluator.hpp"
#include "morpes/metrics.hpp"
#include "morpes/profile.hpp"
#include "morpes/segmenter.hpp"
#include "morpes/service.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

struct PageSource {
  std::string url;
  std::string file;
  std::string base_url = "http://localhost/";
  std::size_t max_chars = 1200;
  std::size_t min_chars = 40;
  int timeout_ms = 10000;

  void add_options(CLI::App* cmd) {
    auto* url_opt = cmd->add_option("--url", url, "Fetch the page from this URL");
    auto* file_opt = cmd->add_option("--file", file, "Read the page from a local HTML file")->check(CLI::ExistingFile);
    url_opt->excludes(file_opt);
    cmd->add_option("--base-url", base_url, "URL the local file is treated as")->capture_default_str();
    cmd->add_option("--max-chars", max_chars, "Maximum segment length")->capture_default_str();
    cmd->add_option("--min-chars", min_chars, "Minimum segment length")->capture_default_str();
    cmd->add_option("--timeout-ms", timeout_ms, "Fetch timeout")->capture_default_str();
  }

  morpes::RawPage load() const {
    if (!url.empty()) return morpes::fetch_page(url, std::chrono::milliseconds(timeout_ms));
    if (file.empty()) throw std::runtime_error("one of --url or --file is required");
    return {base_url, morpes::html::decode_to_utf8(read_file(file), ""), morpes::now_utc()};
  }

  morpes::SegmentationParams params() const { return {max_chars, min_chars}; }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Personalized mobile re-rendering proxy"};
  app.require_subcommand(1);

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP proxy");
  std::string config_path;
  std::string listen;
  bool print_config = false;
  serve->add_option("--config", config_path, "Configuration file (defaults to $MORPES_CONFIG)");
  serve->add_option("--listen", listen, "host:port, overrides the configuration");
  serve->add_flag("--print-config", print_config, "Print the effective configuration and exit");

  // metrics
  auto* metrics = app.add_subcommand("metrics", "Aggregate session metrics");
  std::string input;
  std::string format = "table";
  metrics->add_option("--input", input, "Records or metrics CSV")->required()->check(CLI::ExistingFile);
  metrics->add_option("--format", format, "table or csv")->capture_default_str()->check(CLI::IsMember({"table", "csv"}));

  // segment
  auto* segment = app.add_subcommand("segment", "Segment a page and print the segments as JSON");
  PageSource segment_source;
  segment_source.add_options(segment);

  // score
  auto* score = app.add_subcommand("score", "Score a page against a profile and print the shot plan");
  PageSource score_source;
  score_source.add_options(score);
  std::string profile_path;
  std::vector<std::string> terms;
  std::string template_id;
  std::string now_text;
  score->add_option("--profile", profile_path, "Profile JSON file")->check(CLI::ExistingFile);
  score->add_option("--terms", terms, "Seed terms for an ad-hoc profile")->delimiter(',');
  score->add_option("--template", template_id, "Template id (compact, regular, wide)");
  score->add_option("--now", now_text, "Reference time for freshness (ISO-8601)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve) {
      if (config_path.empty()) {
        if (const char* env = std::getenv("MORPES_CONFIG"); env && *env) config_path = env;
      }
      morpes::ServiceConfig config = config_path.empty() ? morpes::ServiceConfig{} : morpes::load_config(config_path);
      if (!listen.empty()) config.listen_address = listen;
      config.validate();
      if (print_config) {
        std::cout << morpes::config_to_json(config).dump(2) << "\n";
        return 0;
      }
      morpes::run_service(config);
      return 0;
    }

    if (*metrics) {
      const auto sessions = morpes::parse_metrics_input(read_file(input));
      const auto report = morpes::aggregate_report(sessions);
      std::cout << (format == "csv" ? morpes::format_csv(report) : morpes::format_table(report));
      return 0;
    }

    if (*segment) {
      const auto set = morpes::segment_page(segment_source.load(), segment_source.params());
      std::cout << nlohmann::json(set).dump(2) << "\n";
      return 0;
    }

    if (*score) {
      morpes::RawPage page = score_source.load();
      morpes::Timestamp now = page.fetched_at;
      if (!now_text.empty()) {
        auto parsed = morpes::parse_iso8601(now_text);
        if (!parsed) throw std::runtime_error("invalid --now value " + now_text);
        now = *parsed;
      }
      morpes::Profile profile =
          profile_path.empty()
              ? morpes::build_profile("cli", terms, now)
              : nlohmann::json::parse(read_file(profile_path)).get<morpes::Profile>();
      const auto set = morpes::segment_page(page, score_source.params());
      const auto scores = morpes::score_page(set, profile, morpes::DimensionWeights{}, now);
      const auto templates = morpes::default_templates();
      std::optional<std::string_view> requested;
      if (!template_id.empty()) requested = template_id;
      const auto& tmpl = morpes::select_template(templates, requested);
      const auto plan = morpes::compose_shots(morpes::sort_segments(scores), tmpl, set.page_url);
      nlohmann::json out = {{"template", tmpl}, {"scores", scores}, {"plan", plan}};
      std::cout << out.dump(2) << "\n";
      return 0;
    }
  } catch (const morpes::Error& e) {
    std::cerr << "morpes: " << e.kind() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "morpes: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
