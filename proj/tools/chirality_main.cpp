#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "chirality/accounting.hpp"
#include "chirality/harness.hpp"
#include "chirality/model.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 2;
constexpr int kPropertyViolation = 3;
constexpr int kDivergence = 4;

void emit_error(const std::string& kind, const std::string& message) {
  chirality::Json j;
  j["error"] = kind;
  j["message"] = message;
  std::cerr << j.dump() << "\n";
}

int run_check_equivariance(const std::string& config, int trials, double tol,
                           std::uint64_t seed) {
  chirality::Model model = chirality::model_from_json(chirality::read_json_file(config));
  std::mt19937_64 rng(seed);
  auto checks = chirality::equivariance_suite(model, trials, rng);
  bool ok = true;
  for (const auto& c : checks) {
    const bool pass = c.violation <= tol;
    ok = ok && pass;
    std::printf("%-4s %-24s %-28s max_violation=%.3e\n", pass ? "ok" : "FAIL",
                c.layer.c_str(), c.property.c_str(), c.violation);
  }
  if (!ok) {
    emit_error("property_violation", "equivariance violation above tolerance");
    return kPropertyViolation;
  }
  return kOk;
}

int run_gradcheck(const std::string& config, double eps, double tol, std::uint64_t seed) {
  chirality::Model model = chirality::model_from_json(chirality::read_json_file(config));
  std::mt19937_64 rng(seed);
  auto checks = chirality::gradcheck_suite(model, eps, rng);
  bool ok = true;
  for (const auto& c : checks) {
    const bool pass = c.violation <= tol;
    ok = ok && pass;
    std::printf("%-4s %-24s max_grad_error=%.3e\n", pass ? "ok" : "FAIL", c.layer.c_str(),
                c.violation);
  }
  if (!ok) {
    emit_error("property_violation", "gradient check error above tolerance");
    return kPropertyViolation;
  }
  return kOk;
}

int run_audit(const std::string& config) {
  chirality::Model model = chirality::model_from_json(chirality::read_json_file(config));
  chirality::CostReport report = chirality::audit_model(model);
  std::fputs(report.table().c_str(), stdout);
  for (const auto& l : model.layers) {
    if (l.kind != chirality::Layer::Kind::Linear &&
        l.kind != chirality::Layer::Kind::InvarianceHead)
      continue;
    auto pf = chirality::param_reduction_factor(l.linear->in_layout, l.linear->out_layout);
    auto mf = chirality::mult_reduction_factor(l.linear->in_layout);
    std::printf("formula factors: params %ld/%ld  mults %ld/%ld\n", pf.num, pf.den, mf.num,
                mf.den);
  }
  return kOk;
}

int run_gen_task(const std::string& config, long samples, double noise, std::uint64_t seed,
                 const std::string& teacher, const std::string& out) {
  chirality::Json j = chirality::read_json_file(config);
  chirality::JointLayout in = chirality::layout_from_json(j.at("in_layout"));
  chirality::JointLayout outl = chirality::layout_from_json(j.at("out_layout"));
  std::string tch = teacher.empty() ? j.value("teacher", "linear") : teacher;
  chirality::Task task = chirality::gen_task(in, outl, tch, samples, noise, seed);
  chirality::write_json_file(out, chirality::task_to_json(task));
  std::printf("wrote %ld samples to %s\n", static_cast<long>(task.X.rows()), out.c_str());
  return kOk;
}

int run_train(const std::string& config, const std::string& task_path,
              const std::string& out, double limit_frac) {
  chirality::Model model = chirality::model_from_json(chirality::read_json_file(config));
  chirality::Task task = chirality::task_from_json(chirality::read_json_file(task_path));
  chirality::TrainResult res = chirality::train(model, task, limit_frac);
  if (!out.empty())
    chirality::write_json_file(out, chirality::model_to_json(model, /*include_params=*/true));
  std::printf("epochs=%d samples=%ld final_loss=%.6e\n", res.epochs_run, res.samples_used,
              res.final_loss);
  return kOk;
}

int run_eval(const std::string& model_path, const std::string& task_path,
             const std::string& mode_name) {
  chirality::Model model = chirality::model_from_json(chirality::read_json_file(model_path));
  chirality::Task task = chirality::task_from_json(chirality::read_json_file(task_path));
  chirality::EvalMode mode = chirality::parse_eval_mode(mode_name);
  long mults = 0;
  double err = chirality::evaluate(model, task, mode, &mults);
  chirality::Json j;
  j["mode"] = mode_name;
  j["mpjpe"] = err;
  j["mults_per_sample"] = mults;
  std::cout << j.dump() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chirality-equivariant pose network toolkit"};
  app.require_subcommand(1);

  std::string config, task_path, model_path, out_path, mode = "plain", teacher;
  int trials = 100;
  double tol = 1e-10, eps = 1e-6, grad_tol = 1e-5, noise = 0.0, limit_frac = 1.0;
  long samples = 1000;
  std::uint64_t seed = 1;

  auto* chk = app.add_subcommand("check-equivariance",
                                 "Measure mirror-equivariance violations per layer");
  chk->add_option("--config", config, "model JSON")->required();
  chk->add_option("--trials", trials, "random trials per layer");
  chk->add_option("--tol", tol, "max allowed violation");
  chk->add_option("--seed", seed, "rng seed");

  auto* aud = app.add_subcommand("audit", "Parameter and multiplication accounting");
  aud->add_option("--config", config, "model JSON")->required();

  auto* gen = app.add_subcommand("gen-task", "Generate a synthetic regression task");
  gen->add_option("--layout", config, "JSON with in_layout/out_layout (and teacher)")
      ->required();
  gen->add_option("--samples", samples, "sample count");
  gen->add_option("--noise", noise, "label noise stddev");
  gen->add_option("--seed", seed, "rng seed");
  gen->add_option("--teacher", teacher, "linear|mlp (overrides config)");
  gen->add_option("--out", out_path, "output task JSON")->required();

  auto* trn = app.add_subcommand("train", "Train a model on a task");
  trn->add_option("--config", config, "model JSON")->required();
  trn->add_option("--task", task_path, "task JSON")->required();
  trn->add_option("--out", out_path, "trained model JSON");
  trn->add_option("--limit-frac", limit_frac, "train on this fraction of the data");

  auto* evl = app.add_subcommand("eval", "Evaluate a trained model");
  evl->add_option("--model", model_path, "trained model JSON")->required();
  evl->add_option("--task", task_path, "task JSON")->required();
  evl->add_option("--mode", mode, "plain|flip-averaged");

  auto* grd = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  grd->add_option("--config", config, "model JSON")->required();
  grd->add_option("--eps", eps, "finite-difference step");
  grd->add_option("--tol", grad_tol, "max allowed gradient error");
  grd->add_option("--seed", seed, "rng seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (chk->parsed()) return run_check_equivariance(config, trials, tol, seed);
    if (aud->parsed()) return run_audit(config);
    if (gen->parsed()) return run_gen_task(config, samples, noise, seed, teacher, out_path);
    if (trn->parsed()) return run_train(config, task_path, out_path, limit_frac);
    if (evl->parsed()) return run_eval(model_path, task_path, mode);
    if (grd->parsed()) return run_gradcheck(config, eps, grad_tol, seed);
  } catch (const chirality::DivergenceError& e) {
    emit_error("divergence", e.what());
    return kDivergence;
  } catch (const chirality::ValidationError& e) {
    emit_error("validation", e.what());
    return kValidation;
  } catch (const chirality::Json::exception& e) {
    emit_error("validation", e.what());
    return kValidation;
  } catch (const std::exception& e) {
    emit_error("internal", e.what());
    return 1;
  }
  return kOk;
}
