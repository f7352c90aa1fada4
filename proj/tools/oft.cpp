// oft: command-line front end for the workload / allocation toolkit.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "oft/adapt.hpp"
#include "oft/cocom.hpp"
#include "oft/dfaplan.hpp"
#include "oft/effortclass.hpp"
#include "oft/error.hpp"
#include "oft/io.hpp"
#include "oft/microworld.hpp"
#include "oft/monitor.hpp"
#include "oft/physio.hpp"
#include "oft/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

// Writes files into `dir` plus a manifest listing them.
void write_outputs(const fs::path& dir, const std::string& command, const json& config, const json& seed,
                   const std::vector<std::pair<std::string, std::string>>& files) {
  std::vector<std::string> names;
  for (const auto& [name, text] : files) {
    oft::io::write_text(dir / name, text);
    names.push_back(name);
  }
  oft::io::write_text(dir / "manifest.json", oft::io::manifest(command, config, seed, names).dump(2) + "\n");
}

oft::microworld::OperatorScript load_operator(const std::string& spec) {
  if (spec.size() > 5 && spec.substr(spec.size() - 5) == ".json") {
    return oft::microworld::operator_script_from_json(oft::io::read_json_file(spec));
  }
  return oft::microworld::builtin_script(spec);
}

bool parse_on_off(const std::string& s) {
  if (s == "on") return true;
  if (s == "off") return false;
  throw oft::ArgumentError("--dfa expects on or off");
}

struct ScenarioArgs {
  std::uint64_t seed = 1;
  std::string dfa = "off";
  std::string op = "degrading-overload";
  std::string scenario;
  int duration = 0;

  void add(CLI::App* app) {
    app->add_option("--seed", seed, "random seed");
    app->add_option("--dfa", dfa, "adaptive assistance loop: on|off");
    app->add_option("--operator", op, "operator script name or JSON file");
    app->add_option("--scenario", scenario, "scenario JSON (defaults built in)");
    app->add_option("--duration", duration, "override scenario duration (s)");
  }

  oft::microworld::ScenarioConfig config() const {
    auto c = scenario.empty() ? oft::microworld::ScenarioConfig{}
                              : oft::microworld::scenario_from_json(oft::io::read_json_file(scenario));
    c.seed = seed;
    if (duration > 0) c.duration_s = duration;
    c.validate();
    return c;
  }
};

int run(int argc, char** argv) {
  CLI::App app{"oft: workload monitoring, regulation analysis and function allocation"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "engine config JSON (default: $OFT_CONFIG, else built-in)");

  // physio
  auto* physio = app.add_subcommand("physio", "per-second HRV / pupil features from raw streams");
  std::string beats_path, pupil_path, out_dir = "out";
  int duration = 0;
  physio->add_option("--beats", beats_path, "CSV t_s,rr_ms")->required();
  physio->add_option("--pupil", pupil_path, "CSV t_s,pupil_mm,valid")->required();
  physio->add_option("--duration", duration, "seconds to cover (default: last timestamp)");
  physio->add_option("--out", out_dir, "output directory");

  // monitor
  auto* mon = app.add_subcommand("monitor", "fuse recorded streams into an MWL timeline");
  std::string run_dir, ticks_path, constraints_path;
  mon->add_option("--run", run_dir, "directory written by `simulate` (supplies all four streams)");
  mon->add_option("--ticks", ticks_path, "task tick JSONL");
  mon->add_option("--constraints", constraints_path, "constraint frame JSONL");
  mon->add_option("--beats", beats_path, "CSV t_s,rr_ms");
  mon->add_option("--pupil", pupil_path, "CSV t_s,pupil_mm,valid");
  mon->add_option("--out", out_dir, "output directory");

  // classify
  auto* cls = app.add_subcommand("classify", "effort classification");
  cls->require_subcommand(1);
  std::string data_path, model_path, model_type = "knn", metric = "chebyshev", scheme = "per-subject", test_subjects;
  int k = 1, trees = 68;
  std::uint64_t cls_seed = 1;
  double train_fraction = 0.75;
  bool binary = false;
  auto add_model_opts = [&](CLI::App* c) {
    c->add_option("--model-type", model_type, "knn|rf|majority");
    c->add_option("--k", k, "neighbours for knn");
    c->add_option("--metric", metric, "euclidean|squared-euclidean|manhattan|chebyshev");
    c->add_option("--trees", trees, "trees for rf");
    c->add_option("--seed", cls_seed, "seed for rf and splits");
    c->add_flag("--binary", binary, "merge TD2 and TD3 into one high class");
  };
  auto* train = cls->add_subcommand("train", "fit a model");
  train->add_option("--data", data_path, "CSV subject,t_s,hrv,pupil_z,td")->required();
  train->add_option("--out", model_path, "model JSON")->required();
  add_model_opts(train);
  auto* predict = cls->add_subcommand("predict", "apply a model");
  predict->add_option("--model", model_path, "model JSON")->required();
  predict->add_option("--data", data_path, "CSV subject,t_s,hrv,pupil_z,td")->required();
  predict->add_flag("--binary", binary, "merge TD2 and TD3 into one high class");
  auto* cv = cls->add_subcommand("cv", "hold-out evaluation");
  cv->add_option("--data", data_path, "CSV subject,t_s,hrv,pupil_z,td")->required();
  cv->add_option("--scheme", scheme, "per-subject|leave-subjects-out");
  cv->add_option("--train-fraction", train_fraction, "per-subject training share");
  cv->add_option("--test-subjects", test_subjects, "comma-separated held-out subjects");
  add_model_opts(cv);

  // cocom
  auto* cocom = app.add_subcommand("cocom", "control-mode coding");
  cocom->require_subcommand(1);
  std::string trace_path, roster_path;
  auto* code = cocom->add_subcommand("code", "code each period of a tank trace");
  code->add_option("--trace", trace_path, "CSV t_s,tank_a,tank_b,period")->required();
  auto* trans = cocom->add_subcommand("transitions", "transition matrix from coded participants");
  trans->add_option("--roster", roster_path, "CSV participant,mode_low,mode_high")->required();

  // dfa
  auto* dfa = app.add_subcommand("dfa", "dynamic function allocation");
  dfa->require_subcommand(1);
  std::string dfa_model, situations, criterion, steps;
  auto* check = dfa->add_subcommand("check", "MinConf / Pot and feasibility");
  check->add_option("--model", dfa_model, "allocation model JSON")->required();
  check->add_option("--situations", situations, "comma-separated situation ids")->required();
  auto* solve = dfa->add_subcommand("solve", "minimum-cost allocation");
  solve->add_option("--model", dfa_model, "allocation model JSON")->required();
  solve->add_option("--situations", situations, "comma-separated situation ids")->required();
  solve->add_option("--criterion", criterion, "cost model name")->required();
  auto* scen = dfa->add_subcommand("scenario", "sequence of situation sets with antecedence");
  scen->add_option("--model", dfa_model, "allocation model JSON")->required();
  scen->add_option("--steps", steps, "steps separated by ';', situations by ','")->required();
  scen->add_option("--criterion", criterion, "cost model name")->required();

  // simulate / endtoend
  auto* sim = app.add_subcommand("simulate", "run the microworld");
  ScenarioArgs sim_args;
  sim_args.add(sim);
  sim->add_option("--out", out_dir, "output directory");
  auto* e2e = app.add_subcommand("endtoend", "simulate, monitor and correlate with ground truth");
  ScenarioArgs e2e_args;
  e2e_args.add(e2e);
  e2e->add_option("--out", out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(oft::ExitCode::kConfig);
  }

  const auto engine = oft::monitor::load_engine_config(config_path);
  const json engine_json = oft::monitor::to_json(engine);

  if (*physio) {
    const auto rr = oft::io::parse_beats(oft::io::read_text(beats_path, "beats"));
    const auto pupil = oft::io::parse_pupil(oft::io::read_text(pupil_path, "pupil"));
    if (duration <= 0) {
      double last = 0.0;
      if (!rr.timestamps_s.empty()) last = std::max(last, rr.timestamps_s.back());
      if (!pupil.empty()) last = std::max(last, pupil.back().t_s);
      duration = static_cast<int>(std::floor(last)) + 1;
    }
    const auto fsx = oft::physio::extract_features(rr, pupil, duration, engine.physio);
    write_outputs(out_dir, "physio", engine_json, nullptr,
                  {{"frames.csv", oft::io::frames_csv(fsx)},
                   {"frames.jsonl", oft::io::frames_jsonl(fsx)},
                   {"metadata.json", oft::io::to_json(fsx.metadata).dump(2) + "\n"}});
    std::cout << oft::io::to_json(fsx.metadata).dump() << "\n";
    return 0;
  }

  if (*mon) {
    auto pick = [&](const std::string& explicit_path, const std::string& name, const std::string& stream) {
      if (!explicit_path.empty()) return explicit_path;
      if (!run_dir.empty()) return (fs::path(run_dir) / name).string();
      throw oft::IngestionError(stream + " stream not given (use --" + stream + " or --run)");
    };
    oft::pipeline::MonitorInputs in;
    in.ticks = oft::pipeline::parse_ticks(oft::io::read_text(pick(ticks_path, "ticks.jsonl", "ticks"), "ticks"));
    in.constraints = oft::pipeline::parse_constraints(
        oft::io::read_text(pick(constraints_path, "constraints.jsonl", "constraints"), "constraints"));
    in.beats = oft::io::parse_beats(oft::io::read_text(pick(beats_path, "beats.csv", "beats"), "beats"));
    in.pupil = oft::io::parse_pupil(oft::io::read_text(pick(pupil_path, "pupil.csv", "pupil"), "pupil"));
    const auto r = oft::pipeline::run_monitor(in, engine);
    write_outputs(out_dir, "monitor", engine_json, nullptr,
                  {{"mwl.jsonl", oft::pipeline::mwl_jsonl(r.states)},
                   {"events.jsonl", oft::pipeline::events_jsonl(r.events)},
                   {"report.json", r.report.dump(2) + "\n"}});
    std::cout << r.report.dump() << "\n";
    return 0;
  }

  if (*cls) {
    auto data = oft::io::parse_dataset(oft::io::read_text(data_path, "dataset"));
    if (binary) data = oft::effortclass::binarize(std::move(data));
    oft::effortclass::ModelSpec spec;
    if (model_type == "knn") {
      spec.kind = oft::effortclass::ModelKind::kKnn;
    } else if (model_type == "rf") {
      spec.kind = oft::effortclass::ModelKind::kForest;
    } else if (model_type == "majority") {
      spec.kind = oft::effortclass::ModelKind::kMajority;
    } else {
      throw oft::ArgumentError("unknown model type: " + model_type);
    }
    spec.k = k;
    spec.metric = oft::effortclass::metric_from_string(metric);
    spec.trees = trees;
    spec.seed = cls_seed;
    if (*train) {
      const auto model = oft::effortclass::train(spec, data);
      oft::io::write_text(model_path, oft::effortclass::to_json(model).dump() + "\n");
      std::cout << json{{"model", model_path}, {"training_accuracy", oft::effortclass::accuracy(model, data)}}.dump() << "\n";
    } else if (*predict) {
      const auto model = oft::effortclass::model_from_json(oft::io::read_json_file(model_path));
      std::string out = "subject,t_s,label,predicted\n";
      for (const auto& f : data) {
        out += f.subject + "," + oft::io::fmt(f.t_s, 9) + "," + std::to_string(f.label) + "," +
               std::to_string(oft::effortclass::predict(model, f.x)) + "\n";
      }
      std::cout << out;
    } else {
      oft::effortclass::CvScheme sch;
      if (scheme == "per-subject") {
        sch = oft::effortclass::PerSubjectHoldout{train_fraction, cls_seed};
      } else if (scheme == "leave-subjects-out") {
        oft::effortclass::LeaveSubjectsOut l;
        l.test_subjects = split(test_subjects, ',');
        sch = l;
      } else {
        throw oft::ArgumentError("unknown scheme: " + scheme);
      }
      std::cout << oft::effortclass::to_json(oft::effortclass::cross_validate(data, sch, spec)).dump(2) << "\n";
    }
    return 0;
  }

  if (*cocom) {
    if (*code) {
      std::ifstream in(trace_path);
      if (!in) throw oft::IngestionError("trace stream not found: " + trace_path);
      std::vector<std::pair<std::string, oft::cocom::ControlMode>> coded;
      for (const auto& t : oft::cocom::read_traces(in)) coded.emplace_back(t.period, oft::cocom::code_mode(t));
      oft::cocom::write_coded(std::cout, coded);
    } else {
      std::ifstream in(roster_path);
      if (!in) throw oft::IngestionError("roster stream not found: " + roster_path);
      const auto m = oft::cocom::transitions(oft::cocom::read_roster(in));
      json j;
      for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t c = 0; c < 4; ++c) {
          j["counts"][oft::cocom::to_string(oft::cocom::kModes[i])][oft::cocom::to_string(oft::cocom::kModes[c])] = m.counts[i][c];
        }
      }
      json rows, cols;
      const auto rs = m.row_sums();
      const auto cs = m.col_sums();
      for (std::size_t i = 0; i < 4; ++i) {
        rows[oft::cocom::to_string(oft::cocom::kModes[i])] = rs[i];
        cols[oft::cocom::to_string(oft::cocom::kModes[i])] = cs[i];
      }
      j["low_period_totals"] = rows;
      j["high_period_totals"] = cols;
      j["adjacency_fraction"] = m.adjacency_fraction;
      std::cout << j.dump(2) << "\n";
    }
    return 0;
  }

  if (*dfa) {
    const auto model = oft::dfaplan::model_from_json(oft::io::read_json_file(dfa_model));
    if (*check) {
      const auto sets = oft::dfaplan::allocation_sets(model, split(situations, ','));
      const auto rep = oft::dfaplan::check_feasible(model, sets);
      auto j = oft::dfaplan::to_json(sets);
      j["feasibility"] = oft::dfaplan::to_json(rep);
      std::cout << j.dump(2) << "\n";
      return rep.feasible ? 0 : static_cast<int>(oft::ExitCode::kInfeasible);
    }
    if (*solve) {
      const auto sets = oft::dfaplan::allocation_sets(model, split(situations, ','));
      const auto sol = oft::dfaplan::optimize(model, sets, model.constraints, model.cost_model(criterion));
      for (const auto& w : sol.warnings) std::cerr << "warning: " << w << "\n";
      auto j = oft::dfaplan::to_json(sol);
      j["criterion"] = criterion;
      j["situations"] = sets.situations;
      j["solution_text"] = oft::dfaplan::format_set(sol.couples, [](const std::string& s) { return s; });
      std::cout << j.dump(2) << "\n";
      return 0;
    }
    std::vector<std::vector<std::string>> seq;
    for (const auto& s : split(steps, ';')) seq.push_back(split(s, ','));
    bool all_ok = true;
    json out = json::array();
    for (const auto& st : oft::dfaplan::solve_scenario(model, seq, criterion)) {
      json j{{"situations", st.situations}, {"feasibility", oft::dfaplan::to_json(st.feasibility)}};
      if (st.solution) {
        j["solution"] = oft::dfaplan::to_json(*st.solution);
      } else {
        j["error"] = st.error;
        all_ok = false;
      }
      out.push_back(j);
    }
    std::cout << out.dump(2) << "\n";
    return all_ok ? 0 : static_cast<int>(oft::ExitCode::kInfeasible);
  }

  if (*sim) {
    const auto sc = sim_args.config();
    const auto op = load_operator(sim_args.op);
    const bool on = parse_on_off(sim_args.dfa);
    const auto log = oft::microworld::run_scenario(sc, op, on, engine);
    json cfg{{"engine", engine_json}, {"scenario", oft::microworld::to_json(sc)}, {"operator", oft::microworld::to_json(op)}, {"dfa", on}};
    write_outputs(out_dir, "simulate", cfg, sc.seed,
                  {{"runlog.jsonl", oft::microworld::runlog_jsonl(log)},
                   {"ticks.jsonl", oft::microworld::ticks_jsonl(log)},
                   {"constraints.jsonl", oft::microworld::constraints_jsonl(log)},
                   {"beats.csv", oft::io::beats_csv(log.beats)},
                   {"pupil.csv", oft::io::pupil_csv(log.pupil)},
                   {"isa.csv", oft::microworld::isa_csv(log)}});
    std::cout << log.events.back().dump() << "\n";
    return 0;
  }

  if (*e2e) {
    const auto sc = e2e_args.config();
    const auto op = load_operator(e2e_args.op);
    const bool on = parse_on_off(e2e_args.dfa);
    const auto r = oft::pipeline::endtoend(sc, op, on, engine);
    json cfg{{"engine", engine_json}, {"scenario", oft::microworld::to_json(sc)}, {"operator", oft::microworld::to_json(op)}, {"dfa", on}};
    write_outputs(out_dir, "endtoend", cfg, sc.seed,
                  {{"report.json", r.report.dump(2) + "\n"}, {"mwl.jsonl", oft::pipeline::mwl_jsonl(r.monitor.states)}});
    std::cout << r.report.dump() << "\n";
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const oft::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(oft::ExitCode::kData);
  }
}
