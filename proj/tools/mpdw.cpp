/*
 * Copyright 2026 The mpdw Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mpdw/datagen.hpp"
#include "mpdw/pipeline.hpp"

namespace {

using namespace mpdw;

int finish(const StageOutcome& o) {
  for (const auto& log : o.logs) std::cerr << log.line() << '\n';
  std::cout << o.output;
  if (o.quarantined) {
    std::cerr << "quarantined " << o.quarantined << " record(s); see rejects.csv\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-source applicant data warehouse"};
  app.require_subcommand(1);

  std::string config_path;
  const auto with_config = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "pipeline config (JSON)")->required()->check(CLI::ExistingFile);
  };

  auto* gen = app.add_subcommand("gen", "generate synthetic city sources, truth files and a config");
  std::string out_dir;
  std::uint64_t seed = 20070101;
  std::string scale = "small";
  std::size_t records = 3000;
  double dup_rate = 0.05;
  double blank_rate = 0.03;
  double disc_rate = 0.10;
  gen->add_option("-o,--out", out_dir, "output directory")->required();
  gen->add_option("--seed", seed, "generator seed");
  gen->add_option("--scale", scale, "small (per-city --records) or full (28.1/15.56/6.85 MB)")
      ->check(CLI::IsMember({"small", "full"}));
  gen->add_option("--records", records, "records per city at small scale");
  gen->add_option("--duplicate-rate", dup_rate)->check(CLI::Range(0.0, 1.0));
  gen->add_option("--blank-rate", blank_rate)->check(CLI::Range(0.0, 1.0));
  gen->add_option("--discrepancy-rate", disc_rate)->check(CLI::Range(0.0, 1.0));

  auto* ingest = app.add_subcommand("ingest", "parse and map every source to canonical records");
  with_config(ingest);
  auto* etl = app.add_subcommand("etl", "normalize, fill, deduplicate, generalize and reduce");
  with_config(etl);
  auto* load = app.add_subcommand("load", "build and persist the star schema");
  with_config(load);
  auto* refresh = app.add_subcommand("refresh", "re-ingest and refresh the warehouse keeping surrogate ids");
  with_config(refresh);

  auto* query = app.add_subcommand("query", "aggregate the cube");
  with_config(query);
  std::string measure = "total";
  std::vector<std::string> group_by;
  std::vector<std::string> filters;
  std::string years;
  bool csv = false;
  query->add_option("--measure", measure, "total | seekers | directed")
      ->check(CLI::IsMember({"total", "seekers", "directed"}));
  query->add_option("--group-by", group_by, "dimension[:level], repeatable");
  query->add_option("--filter", filters, "dimension[:level]=member[,member], repeatable");
  query->add_option("--years", years, "FROM:TO");
  query->add_flag("--csv", csv, "CSV instead of an aligned table");

  auto* report = app.add_subcommand("report", "write the configured reports");
  with_config(report);
  auto* bench = app.add_subcommand("bench", "time row-scan against cube answers");
  with_config(bench);
  std::size_t repetitions = 0;
  std::size_t threads = 0;
  bench->add_option("--repetitions", repetitions, "override the configured repetitions");
  bench->add_option("--reader-threads", threads, "add a concurrent cube-read pass");
  auto* validate = app.add_subcommand("validate", "check warehouse invariants");
  with_config(validate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) {
      GenConfig g = scale == "full" ? GenConfig::full_scale(seed) : GenConfig::with_record_counts(records, records, records, seed);
      g.duplicate_rate = dup_rate;
      g.blank_rate = blank_rate;
      g.discrepancy_rate = disc_rate;
      const GenResult r = generate(g);
      write_generated_dataset(r, out_dir);
      std::cerr << "[gen] seed=" << seed;
      for (const auto& s : r.sources) std::cerr << ' ' << s.file_name << '=' << s.raw.size() << "/" << s.bytes.size() << 'B';
      std::cerr << " truth=" << r.truth.size() << '\n';
      return 0;
    }

    const PipelineConfig cfg = load_pipeline_config(config_path);
    if (ingest->parsed()) return finish(stage_ingest(cfg));
    if (etl->parsed()) return finish(stage_etl(cfg));
    if (load->parsed() || refresh->parsed()) {
      // Writers serialize; readers rely on the manifest checksums.
      WarehouseLock lock(cfg.warehouse_dir);
      return finish(load->parsed() ? stage_load(cfg) : stage_refresh(cfg));
    }
    if (report->parsed()) return finish(stage_report(cfg));
    if (validate->parsed()) return finish(stage_validate(cfg));
    if (bench->parsed()) {
      PipelineConfig c = cfg;
      if (repetitions) c.bench.repetitions = repetitions;
      if (threads) c.bench.reader_threads = threads;
      return finish(stage_bench(c));
    }
    if (query->parsed()) {
      AggregateQuery q;
      q.measure = *parse_measure(measure);
      for (const auto& g : group_by) q.group_by.push_back(parse_group_by(g));
      for (const auto& f : filters) q.filters.push_back(parse_filter(f));
      if (!years.empty()) q.filters.push_back(year_filter(parse_year_span(years)));
      return finish(stage_query(cfg, q, csv ? ReportFormat::csv : ReportFormat::table));
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
