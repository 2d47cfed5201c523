#include "filtkit/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "filtkit/cfverify.hpp"
#include "filtkit/noise.hpp"
#include "filtkit/sdesim.hpp"

namespace filtkit::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

ValidationError::ValidationError(std::vector<std::string> issues_)
    : std::runtime_error([&issues_] {
        std::string msg = "scenario validation failed";
        for (const auto& s : issues_) msg += "\n  - " + s;
        return msg;
      }()),
      issues(std::move(issues_)) {}

namespace {

// ---- JSON field extraction with field-path diagnostics ----

struct FieldReader {
  std::vector<std::string> issues;

  bool bad(const std::string& path, const std::string& what) {
    issues.push_back(path + ": " + what);
    return false;
  }

  bool read(const json& node, const std::string& path, double& out) {
    if (!node.is_number()) return bad(path, "expected a number");
    out = node.get<double>();
    return true;
  }

  bool read(const json& node, const std::string& path, std::uint64_t& out) {
    if (!node.is_number_unsigned() && !node.is_number_integer())
      return bad(path, "expected a non-negative integer");
    if (node.is_number_integer() && node.get<std::int64_t>() < 0)
      return bad(path, "expected a non-negative integer");
    out = node.get<std::uint64_t>();
    return true;
  }

  bool read(const json& node, const std::string& path, bool& out) {
    if (!node.is_boolean()) return bad(path, "expected true or false");
    out = node.get<bool>();
    return true;
  }

  bool read(const json& node, const std::string& path, std::string& out) {
    if (!node.is_string()) return bad(path, "expected a string");
    out = node.get<std::string>();
    return true;
  }

  bool read(const json& node, const std::string& path, Vector& out) {
    if (!node.is_array() || node.empty()) return bad(path, "expected a non-empty array of numbers");
    Vector v(node.size());
    for (std::size_t i = 0; i < node.size(); ++i) {
      if (!node[i].is_number()) return bad(path, "expected a non-empty array of numbers");
      v(static_cast<Index>(i)) = node[i].get<double>();
    }
    out = std::move(v);
    return true;
  }

  bool read(const json& node, const std::string& path, Matrix& out) {
    if (!node.is_array() || node.empty())
      return bad(path, "expected a matrix (array of row arrays)");
    const std::size_t rows = node.size();
    std::size_t cols = 0;
    for (std::size_t i = 0; i < rows; ++i) {
      if (!node[i].is_array() || node[i].empty())
        return bad(path, "expected a matrix (array of row arrays)");
      if (i == 0)
        cols = node[i].size();
      else if (node[i].size() != cols)
        return bad(path, "rows have unequal lengths");
    }
    Matrix M(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) {
        if (!node[i][j].is_number()) return bad(path, "matrix entries must be numbers");
        M(static_cast<Index>(i), static_cast<Index>(j)) = node[i][j].get<double>();
      }
    out = std::move(M);
    return true;
  }

  template <typename T>
  bool fetch(const json& obj, const std::string& key, const std::string& path, T& out,
             bool required) {
    if (!obj.contains(key)) {
      if (required) return bad(path, "required field missing");
      return true;
    }
    return read(obj.at(key), path, out);
  }
};

json to_json(const Matrix& M) {
  json rows = json::array();
  for (Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(row);
  }
  return rows;
}

json to_json(const Vector& v) {
  json arr = json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  static const char* digits = "0123456789abcdef";
  for (int i = 15; i >= 0; --i) {
    buf[i] = digits[h & 0xF];
    h >>= 4;
  }
  buf[16] = '\0';
  return std::string(buf, 16);
}

std::string filter_name(FilterKind k) {
  switch (k) {
    case FilterKind::Cd: return "cd";
    case FilterKind::Cc: return "cc";
    case FilterKind::Bilinear: return "bilinear";
  }
  return "cd";
}

int compute_parse_line(const std::string& text, std::size_t byte) {
  int line = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

std::vector<double> expand_schedule(FieldReader& r, const json& node, const std::string& path) {
  std::vector<double> out;
  if (node.is_array()) {
    for (std::size_t i = 0; i < node.size(); ++i) {
      if (!node[i].is_number()) {
        r.bad(path, "expected numbers");
        return out;
      }
      out.push_back(node[i].get<double>());
    }
    return out;
  }
  if (node.is_object()) {
    double start = 0.0, stop = 0.0, step = 0.0;
    bool ok = r.fetch(node, "start", path + ".start", start, true);
    ok = r.fetch(node, "stop", path + ".stop", stop, true) && ok;
    ok = r.fetch(node, "step", path + ".step", step, true) && ok;
    if (!ok) return out;
    if (!(step > 0.0) || stop < start) {
      r.bad(path, "range needs step > 0 and stop >= start");
      return out;
    }
    for (double t = start; t <= stop + 1e-9 * std::max(1.0, std::abs(stop)); t += step)
      out.push_back(t);
    return out;
  }
  r.bad(path, "expected an array of instants or {start, stop, step}");
  return out;
}

// ---- canonical echo of the effective scenario ----

std::string canonical_text_of(const Scenario& s) {
  ordered_json doc;
  doc["name"] = s.name;
  ordered_json model;
  if (const auto* lin = s.linear()) {
    model["type"] = "linear";
    model["A"] = to_json(lin->A(0.0));
    model["G"] = to_json(lin->G(0.0));
  } else {
    const auto* bi = s.bilinear();
    model["type"] = "bilinear";
    model["A"] = to_json(bi->A(0.0));
    model["G"] = to_json(bi->G(0.0));
    model["A0"] = to_json(bi->A0(0.0));
    model["B"] = to_json(bi->B(0.0));
  }
  doc["model"] = model;
  ordered_json meas;
  if (const auto* dm = s.discrete()) {
    meas["type"] = "discrete";
    meas["C"] = to_json(dm->C(0.0));
    meas["R"] = to_json(dm->R(0.0));
    meas["schedule"] = dm->schedule;
  } else {
    const auto* cm = s.continuous();
    meas["type"] = "continuous";
    meas["C"] = to_json(cm->C(0.0));
    meas["phi_eta"] = to_json(cm->phi_eta);
  }
  doc["measurement"] = meas;
  doc["initial_belief"] = {{"mean", to_json(s.initial_belief.mean)},
                           {"cov", to_json(s.initial_belief.cov)}};
  doc["truth_x0"] = to_json(s.truth_x0);
  doc["horizon"] = s.horizon;
  doc["dt"] = s.dt;
  doc["seed"] = s.seed;
  ordered_json filt;
  filt["type"] = filter_name(s.filter.kind);
  filt["use_vec_form"] = s.filter.use_vec_form;
  filt["joseph_update"] = s.filter.joseph_update;
  if (s.filter.ode_substep)
    filt["ode_substep"] = *s.filter.ode_substep;
  else
    filt["ode_substep"] = nullptr;
  filt["covariance_form"] =
      s.filter.covariance_form == kf_bilinear::CovarianceForm::MomentExact ? "moment-exact"
                                                                           : "as-printed";
  doc["filter"] = filt;
  doc["verify"] = {{"theorem1", s.verify.theorem1},
                   {"theorem2", s.verify.theorem2},
                   {"appendix", s.verify.appendix}};
  return doc.dump();
}

}  // namespace

Scenario load_scenario(const std::string& path, const Overrides& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(0, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();

  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(compute_parse_line(text, e.byte), e.what());
  }
  if (!doc.is_object()) throw ParseError(1, "scenario document must be an object");

  FieldReader r;
  Scenario s;
  r.fetch(doc, "name", "name", s.name, false);

  // model
  std::string model_type = "linear";
  Matrix A, G;
  Vector A0, B;
  if (!doc.contains("model")) {
    r.bad("model", "required field missing");
  } else {
    const json& jm = doc.at("model");
    r.fetch(jm, "type", "model.type", model_type, false);
    if (model_type != "linear" && model_type != "bilinear")
      r.bad("model.type", "expected \"linear\" or \"bilinear\"");
    r.fetch(jm, "A", "model.A", A, true);
    r.fetch(jm, "G", "model.G", G, true);
    if (model_type == "bilinear") {
      if (A.size() > 0) A0 = Vector::Zero(A.rows());
      if (G.size() > 0) B = Vector::Zero(G.cols());
      r.fetch(jm, "A0", "model.A0", A0, false);
      r.fetch(jm, "B", "model.B", B, false);
    }
  }
  const int n = static_cast<int>(A.rows());
  const int d = static_cast<int>(G.cols());
  if (model_type == "bilinear")
    s.model = BilinearStateModel{n, d, A0, A, G, B};
  else
    s.model = LinearStateModel{n, d, A, G};

  // measurement
  std::string meas_type;
  if (!doc.contains("measurement")) {
    r.bad("measurement", "required field missing");
  } else {
    const json& jm = doc.at("measurement");
    if (!r.fetch(jm, "type", "measurement.type", meas_type, true) ||
        (meas_type != "discrete" && meas_type != "continuous")) {
      r.bad("measurement.type", "expected \"discrete\" or \"continuous\"");
    } else if (meas_type == "discrete") {
      Matrix C, R;
      std::vector<double> schedule;
      r.fetch(jm, "C", "measurement.C", C, true);
      r.fetch(jm, "R", "measurement.R", R, true);
      if (jm.contains("schedule"))
        schedule = expand_schedule(r, jm.at("schedule"), "measurement.schedule");
      else
        r.bad("measurement.schedule", "required field missing");
      s.measurement = DiscreteMeasurementModel{static_cast<int>(C.rows()), C, R, schedule};
    } else {
      Matrix C, phi;
      r.fetch(jm, "C", "measurement.C", C, true);
      r.fetch(jm, "phi_eta", "measurement.phi_eta", phi, true);
      s.measurement = ContinuousMeasurementModel{static_cast<int>(C.rows()), C, phi};
    }
  }

  // belief, truth seed, grid
  s.initial_belief.t = 0.0;
  s.initial_belief.mean = Vector::Zero(std::max(n, 1));
  s.initial_belief.cov = Matrix::Identity(std::max(n, 1), std::max(n, 1));
  if (doc.contains("initial_belief")) {
    const json& jb = doc.at("initial_belief");
    r.fetch(jb, "mean", "initial_belief.mean", s.initial_belief.mean, false);
    r.fetch(jb, "cov", "initial_belief.cov", s.initial_belief.cov, false);
  }
  s.truth_x0 = s.initial_belief.mean;
  r.fetch(doc, "truth_x0", "truth_x0", s.truth_x0, false);
  r.fetch(doc, "horizon", "horizon", s.horizon, true);
  r.fetch(doc, "dt", "dt", s.dt, false);
  r.fetch(doc, "seed", "seed", s.seed, false);

  // filter selection
  s.filter.kind = meas_type == "continuous"
                      ? (model_type == "bilinear" ? FilterKind::Bilinear : FilterKind::Cc)
                      : FilterKind::Cd;
  if (doc.contains("filter")) {
    const json& jf = doc.at("filter");
    std::string kind;
    if (r.fetch(jf, "type", "filter.type", kind, false) && !kind.empty()) {
      if (kind == "cd") s.filter.kind = FilterKind::Cd;
      else if (kind == "cc") s.filter.kind = FilterKind::Cc;
      else if (kind == "bilinear") s.filter.kind = FilterKind::Bilinear;
      else r.bad("filter.type", "expected \"cd\", \"cc\" or \"bilinear\"");
    }
    r.fetch(jf, "use_vec_form", "filter.use_vec_form", s.filter.use_vec_form, false);
    r.fetch(jf, "joseph_update", "filter.joseph_update", s.filter.joseph_update, false);
    if (jf.contains("ode_substep") && !jf.at("ode_substep").is_null()) {
      double sub = 0.0;
      if (r.read(jf.at("ode_substep"), "filter.ode_substep", sub)) {
        if (sub > 0.0) s.filter.ode_substep = sub;
        else r.bad("filter.ode_substep", "must be positive");
      }
    }
    std::string form;
    if (r.fetch(jf, "covariance_form", "filter.covariance_form", form, false) && !form.empty()) {
      if (form == "as-printed") s.filter.covariance_form = kf_bilinear::CovarianceForm::AsPrinted;
      else if (form == "moment-exact")
        s.filter.covariance_form = kf_bilinear::CovarianceForm::MomentExact;
      else r.bad("filter.covariance_form", "expected \"as-printed\" or \"moment-exact\"");
    }
  }
  if (doc.contains("verify")) {
    const json& jv = doc.at("verify");
    r.fetch(jv, "theorem1", "verify.theorem1", s.verify.theorem1, false);
    r.fetch(jv, "theorem2", "verify.theorem2", s.verify.theorem2, false);
    r.fetch(jv, "appendix", "verify.appendix", s.verify.appendix, false);
  }

  if (overrides.seed) s.seed = *overrides.seed;
  if (overrides.filter) s.filter.kind = *overrides.filter;
  if (overrides.covariance_form) s.filter.covariance_form = *overrides.covariance_form;

  // cross-field validation
  if (r.issues.empty()) {
    auto prefix = [&r](const std::string& p, std::vector<std::string> errs) {
      for (auto& e : errs) r.issues.push_back(p + e);
    };
    if (const auto* lin = s.linear()) prefix("model.", models::validate(*lin));
    if (const auto* bi = s.bilinear()) prefix("model.", models::validate(*bi));
    Index meas_cols = 0;
    if (const auto* dm = s.discrete()) {
      prefix("measurement.", models::validate(*dm));
      meas_cols = dm->C(0.0).cols();
    }
    if (const auto* cm = s.continuous()) {
      prefix("measurement.", models::validate(*cm));
      meas_cols = cm->C(0.0).cols();
    }
    if (meas_cols != n)
      r.bad("measurement.C", "expected " + std::to_string(n) + " columns, got " +
                                 std::to_string(meas_cols));
    prefix("initial_belief.", models::validate(s.initial_belief));
    if (s.initial_belief.mean.size() != n)
      r.bad("initial_belief.mean", "expected length " + std::to_string(n));
    if (s.truth_x0.size() != n) r.bad("truth_x0", "expected length " + std::to_string(n));
    if (!(s.horizon > 0.0)) r.bad("horizon", "must be positive");
    if (!(s.dt > 0.0)) r.bad("dt", "must be positive");
    if (s.horizon > 0.0 && s.dt > 0.0) {
      try {
        (void)sdesim::step_count(s.dt, s.horizon);
      } catch (const InvalidStep& e) {
        r.bad("dt", e.what());
      }
      if (const auto* dm = s.discrete()) {
        for (const double t : dm->schedule) {
          const double q = t / s.dt;
          if (t < -1e-12 || t > s.horizon + 1e-9 ||
              std::abs(q - std::round(q)) > 1e-9 * std::max(1.0, std::abs(q))) {
            r.bad("measurement.schedule",
                  "instant " + std::to_string(t) + " not on the simulation grid");
            break;
          }
        }
      }
    }
    switch (s.filter.kind) {
      case FilterKind::Cd:
        if (!s.discrete()) r.bad("filter.type", "cd needs measurement.type discrete");
        if (!s.linear()) r.bad("filter.type", "cd needs model.type linear");
        break;
      case FilterKind::Cc:
        if (!s.continuous()) r.bad("filter.type", "cc needs measurement.type continuous");
        if (!s.linear()) r.bad("filter.type", "cc needs model.type linear");
        break;
      case FilterKind::Bilinear:
        if (!s.continuous()) r.bad("filter.type", "bilinear needs measurement.type continuous");
        break;
    }
  }
  if (!r.issues.empty()) throw ValidationError(std::move(r.issues));

  s.canonical_text = canonical_text_of(s);
  s.hash = fnv1a_hex(s.canonical_text);
  return s;
}

namespace {

std::vector<std::string> provenance(const Scenario& s) {
  return {"scenario=" + s.name, "scenario_hash=" + s.hash, "seed=" + std::to_string(s.seed)};
}

std::ofstream open_out(const std::string& out_dir, const std::string& file) {
  fs::create_directories(out_dir);
  const auto p = fs::path(out_dir) / file;
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

// Every command records the effective scenario (defaults and overrides
// applied) so an output directory is self-describing.
void write_echo(const Scenario& s, const std::string& out_dir) {
  auto os = open_out(out_dir, "scenario_echo.json");
  os << s.canonical_text << "\n";
}

SamplePath simulate_truth(const Scenario& s, std::uint64_t seed) {
  if (const auto* bi = s.bilinear())
    return sdesim::simulate_stratonovich(*bi, s.truth_x0, s.dt, s.horizon, seed);
  return sdesim::simulate_ito(*s.linear(), s.truth_x0, s.dt, s.horizon, seed);
}

MeasurementRecord make_record(const Scenario& s, const SamplePath& path, std::uint64_t seed) {
  if (const auto* dm = s.discrete()) return sdesim::gen_discrete_measurements(path, *dm, seed);
  return sdesim::gen_continuous_measurements(path, *s.continuous(), seed);
}

BilinearStateModel promote(const LinearStateModel& lin) {
  return {lin.n, lin.d, Vector(Vector::Zero(lin.n)), lin.A, lin.G, Vector(Vector::Zero(lin.d))};
}

FilterTrajectory run_filter(const Scenario& s, const MeasurementRecord& record) {
  switch (s.filter.kind) {
    case FilterKind::Cd: {
      kf_cd::CdFilterConfig cfg;
      cfg.ode_substep = s.filter.ode_substep;
      cfg.use_vec_form = s.filter.use_vec_form;
      cfg.joseph_update = s.filter.joseph_update;
      return kf_cd::run(*s.linear(), *s.discrete(), record, s.initial_belief, cfg, s.horizon);
    }
    case FilterKind::Cc: {
      kf_cc::CcFilterConfig cfg;
      cfg.dt = s.dt;
      cfg.use_vec_form = s.filter.use_vec_form;
      return kf_cc::run(*s.linear(), *s.continuous(), record, s.initial_belief, cfg);
    }
    case FilterKind::Bilinear: {
      kf_bilinear::BilinearFilterConfig cfg;
      cfg.dt = s.dt;
      cfg.covariance_form = s.filter.covariance_form;
      const BilinearStateModel model = s.bilinear() ? *s.bilinear() : promote(*s.linear());
      return kf_bilinear::run(model, *s.continuous(), record, s.initial_belief, cfg);
    }
  }
  throw std::logic_error("unreachable filter kind");
}

struct RunStats {
  double mse = 0.0;
  double p_trace_avg = 0.0;
  double inn_sum = 0.0;
  double inn_sumsq = 0.0;
  std::size_t inn_count = 0;
  Vector final_mean;
  Matrix final_cov;

  double inn_mean() const { return inn_count ? inn_sum / static_cast<double>(inn_count) : 0.0; }
  double inn_var() const {
    if (inn_count < 2) return 0.0;
    const double mu = inn_mean();
    return (inn_sumsq - static_cast<double>(inn_count) * mu * mu) /
           static_cast<double>(inn_count - 1);
  }
};

RunStats collect_stats(const SamplePath& truth, const FilterTrajectory& traj) {
  RunStats st;
  std::size_t used = 0;
  for (const auto& step : traj.steps) {
    if (step.innovation) {
      for (Index i = 0; i < step.innovation->size(); ++i) {
        const double v = (*step.innovation)(i);
        st.inn_sum += v;
        st.inn_sumsq += v * v;
        ++st.inn_count;
      }
    }
    if (step.tag != StepTag::Updated) continue;
    const Vector x = truth.states.col(static_cast<Index>(sdesim::grid_index(truth, step.belief.t)));
    st.mse += (step.belief.mean - x).squaredNorm();
    st.p_trace_avg += step.belief.cov.trace();
    ++used;
  }
  if (used > 0) {
    st.mse /= static_cast<double>(used);
    st.p_trace_avg /= static_cast<double>(used);
  }
  if (!traj.steps.empty()) {
    st.final_mean = traj.steps.back().belief.mean;
    st.final_cov = traj.steps.back().belief.cov;
  }
  return st;
}

}  // namespace

int cmd_simulate(const Scenario& s, const std::string& out_dir) {
  write_echo(s, out_dir);
  const SamplePath path = simulate_truth(s, s.seed);
  const MeasurementRecord record = make_record(s, path, s.seed);
  auto truth_os = open_out(out_dir, "truth.csv");
  sdesim::write_csv(truth_os, path, provenance(s));
  auto meas_os = open_out(out_dir, "measurements.csv");
  sdesim::write_csv(meas_os, record, provenance(s));
  return 0;
}

int cmd_filter(const Scenario& s, const std::string& out_dir, int mc_runs) {
  if (mc_runs < 1) throw std::invalid_argument("--mc must be >= 1");
  write_echo(s, out_dir);
  if (mc_runs == 1) {
    const SamplePath path = simulate_truth(s, s.seed);
    const MeasurementRecord record = make_record(s, path, s.seed);
    const FilterTrajectory traj = run_filter(s, record);
    const RunStats st = collect_stats(path, traj);

    auto comments = provenance(s);
    comments.push_back("filter=" + filter_name(s.filter.kind));
    auto traj_os = open_out(out_dir, "trajectory.csv");
    trajectory::write_csv(traj_os, traj, comments);

    ordered_json summary;
    summary["scenario_hash"] = s.hash;
    summary["seed"] = s.seed;
    summary["final_mean"] = to_json(st.final_mean);
    summary["final_cov"] = to_json(st.final_cov);
    summary["innovation_mean"] = st.inn_mean();
    summary["innovation_var"] = st.inn_var();
    summary["mse"] = st.mse;
    summary["p_trace_avg"] = st.p_trace_avg;
    auto os = open_out(out_dir, "summary.json");
    os << summary.dump(2) << "\n";
    return 0;
  }

  // Monte Carlo sweep: run r uses the substream derived from (seed, r).
  // Workers fill a slot per run; the merge is index-ordered, so the output
  // does not depend on scheduling.
  std::vector<RunStats> slots(static_cast<std::size_t>(mc_runs));
  std::vector<std::string> errors(static_cast<std::size_t>(mc_runs));
  const unsigned workers =
      std::max(1u, std::min(std::thread::hardware_concurrency(), 8u));
  std::vector<std::future<void>> futs;
  for (unsigned w = 0; w < workers; ++w) {
    futs.push_back(std::async(std::launch::async, [&, w] {
      for (int r = static_cast<int>(w); r < mc_runs; r += static_cast<int>(workers)) {
        try {
          const std::uint64_t run_seed = derive_seed(s.seed, static_cast<std::uint64_t>(r));
          const SamplePath path = simulate_truth(s, run_seed);
          const MeasurementRecord record = make_record(s, path, run_seed);
          slots[static_cast<std::size_t>(r)] = collect_stats(path, run_filter(s, record));
        } catch (const std::exception& e) {
          errors[static_cast<std::size_t>(r)] = e.what();
        }
      }
    }));
  }
  for (auto& f : futs) f.get();
  for (int r = 0; r < mc_runs; ++r)
    if (!errors[static_cast<std::size_t>(r)].empty())
      throw std::runtime_error("run " + std::to_string(r) + ": " + errors[static_cast<std::size_t>(r)]);

  double mse = 0.0, ptrace = 0.0, inn_sum = 0.0, inn_sumsq = 0.0;
  std::size_t inn_count = 0;
  ordered_json per_run = ordered_json::array();
  for (int r = 0; r < mc_runs; ++r) {
    const RunStats& st = slots[static_cast<std::size_t>(r)];
    mse += st.mse;
    ptrace += st.p_trace_avg;
    inn_sum += st.inn_sum;
    inn_sumsq += st.inn_sumsq;
    inn_count += st.inn_count;
    ordered_json row;
    row["run"] = r;
    row["seed"] = derive_seed(s.seed, static_cast<std::uint64_t>(r));
    row["mse"] = st.mse;
    row["p_trace_avg"] = st.p_trace_avg;
    per_run.push_back(row);
  }
  mse /= mc_runs;
  ptrace /= mc_runs;
  const double inn_mean = inn_count ? inn_sum / static_cast<double>(inn_count) : 0.0;
  const double inn_var =
      inn_count > 1
          ? (inn_sumsq - static_cast<double>(inn_count) * inn_mean * inn_mean) /
                static_cast<double>(inn_count - 1)
          : 0.0;

  ordered_json summary;
  summary["scenario_hash"] = s.hash;
  summary["seed"] = s.seed;
  summary["runs"] = mc_runs;
  summary["mse"] = mse;
  summary["p_trace_avg"] = ptrace;
  summary["mse_over_p"] = ptrace > 0.0 ? mse / ptrace : 0.0;
  summary["innovation_mean"] = inn_mean;
  summary["innovation_var"] = inn_var;
  summary["per_run"] = per_run;
  auto os = open_out(out_dir, "mc_summary.json");
  os << summary.dump(2) << "\n";
  return 0;
}

int cmd_stationary(const Scenario& s, const std::string& out_dir) {
  ordered_json doc;
  doc["scenario_hash"] = s.hash;
  if (s.filter.kind == FilterKind::Bilinear)
    throw ValidationError({"filter.type: stationary needs cd or cc"});
  write_echo(s, out_dir);
  const LinearStateModel& lin = *s.linear();
  const Matrix A = lin.A(0.0);
  const Matrix GGt = lin.G(0.0) * lin.G(0.0).transpose();
  if (s.filter.kind == FilterKind::Cd) {
    const Matrix P = kf_cd::stationary_predict_cov(lin);
    doc["kind"] = "lyapunov";
    doc["P_predict"] = to_json(P);
    doc["predict_residual"] = (A * P + P * A.transpose() + GGt).norm();
    if (const auto* dm = s.discrete()) {
      const Matrix Pu = kf_cd::stationary_update_cov(P, *dm);
      doc["P_update"] = to_json(Pu);
    }
  } else {
    const auto* cm = s.continuous();
    const Matrix P = kf_cc::stationary_cov(lin, *cm);
    const Matrix C = cm->C(0.0);
    const Matrix K = numkit::solve_spd(cm->phi_eta, Matrix(C * P)).transpose();
    doc["kind"] = "riccati";
    doc["P"] = to_json(P);
    doc["residual"] = (A * P + P * A.transpose() + GGt - K * (C * P)).norm();
  }
  auto os = open_out(out_dir, "stationary.json");
  os << doc.dump(2) << "\n";
  return 0;
}

int cmd_verify(const Scenario& s, const std::string& out_dir, const std::string& which) {
  if (which != "all" && which != "theorem1" && which != "theorem2" && which != "appendix")
    throw ValidationError({"--verify: expected all, theorem1, theorem2 or appendix"});
  write_echo(s, out_dir);
  const bool want1 = which == "theorem1" || (which == "all" && s.verify.theorem1);
  const bool want2 = which == "theorem2" || (which == "all" && s.verify.theorem2);
  const bool want3 = which == "appendix" || (which == "all" && s.verify.appendix);

  std::vector<std::string> issues;
  if ((want1 || want2) && !s.linear())
    issues.push_back("verify: transform checks need model.type linear");
  if (want2 && which == "theorem2" && !s.continuous())
    issues.push_back("verify.theorem2: needs measurement.type continuous");
  if (!issues.empty()) throw ValidationError(std::move(issues));

  std::vector<cfverify::VerifyRecord> records;
  const Index n = s.initial_belief.mean.size();
  const auto probes = cfverify::default_probe_grid(n);
  auto probe_label = [](const char* stem, const Vector& p) {
    std::string label = stem;
    label += " s=(";
    for (Index i = 0; i < p.size(); ++i) {
      if (i) label += ",";
      label += sdesim::format_double(p(i));
    }
    return label + ")";
  };

  if (want1) {
    for (const auto& p : probes) {
      const auto [lhs, rhs] = cfverify::theorem1_routes(*s.linear(), s.initial_belief, p);
      const double res = cfverify::theorem1_residual(*s.linear(), s.initial_belief, p);
      records.push_back({probe_label("theorem1", p), lhs, rhs, res, 1e-10, res <= 1e-10});
    }
  }
  if (want2 && s.continuous()) {
    const SamplePath path = simulate_truth(s, s.seed);
    const MeasurementRecord record = make_record(s, path, s.seed);
    kf_cc::CcFilterConfig cfg;
    cfg.dt = s.dt;
    const FilterTrajectory traj = kf_cc::run(*s.linear(), *s.continuous(), record,
                                             s.initial_belief, cfg);
    const double tol = 5.0 * s.dt;
    for (const auto& p : probes) {
      const double res =
          cfverify::theorem2_cf_sde_residual(*s.linear(), *s.continuous(), traj, record, p);
      records.push_back({probe_label("theorem2", p), res, 0.0, res, tol, res <= tol});
    }
  }
  if (want3) {
    for (int i = 1; i <= n; ++i)
      for (int j = 1; j <= n; ++j)
        for (int g = 1; g <= n; ++g) {
          const auto [lhs, rhs] = cfverify::third_moment_identity(s.initial_belief, i, j, g);
          const double res = std::abs(lhs - rhs);
          const std::string label = "appendix ijg=(" + std::to_string(i) + "," +
                                    std::to_string(j) + "," + std::to_string(g) + ")";
          records.push_back({label, lhs, rhs, res, 1e-12, res <= 1e-12});
        }
  }

  auto os = open_out(out_dir, "verify_report.txt");
  for (const auto& c : provenance(s)) os << "# " << c << "\n";
  cfverify::write_report(os, records);
  const bool all_pass =
      std::all_of(records.begin(), records.end(), [](const auto& r) { return r.pass; });
  if (!all_pass) {
    std::cerr << "verification failed; see " << (fs::path(out_dir) / "verify_report.txt").string()
              << "\n";
    return 2;
  }
  return 0;
}

int run_main(const std::vector<std::string>& args) {
  CLI::App app{"stochastic state estimation toolkit"};
  app.require_subcommand(1);

  std::string scenario_path, out_dir = "out", filter_s, covform_s, verify_s = "all";
  std::int64_t seed = -1;
  int mc_runs = 1;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--scenario", scenario_path, "scenario file")->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "override the scenario seed");
    sub->add_option("--filter", filter_s, "cd|cc|bilinear");
    sub->add_option("--covariance-form", covform_s, "as-printed|moment-exact");
    return sub;
  };
  CLI::App* c_sim = add_common(app.add_subcommand("simulate", "integrate truth and measurements"));
  CLI::App* c_fil = add_common(app.add_subcommand("filter", "run the selected filter"));
  c_fil->add_option("--mc", mc_runs, "number of Monte Carlo runs");
  CLI::App* c_sta = add_common(app.add_subcommand("stationary", "stationary covariance solves"));
  CLI::App* c_ver = add_common(app.add_subcommand("verify", "transform-domain checks"));
  c_ver->add_option("--verify", verify_s, "all|theorem1|theorem2|appendix");

  std::vector<std::string> argv_like = args;
  try {
    std::vector<const char*> argv;
    argv.push_back("filtkit");
    for (const auto& a : argv_like) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    Overrides ov;
    if (seed >= 0) ov.seed = static_cast<std::uint64_t>(seed);
    if (!filter_s.empty()) {
      if (filter_s == "cd") ov.filter = FilterKind::Cd;
      else if (filter_s == "cc") ov.filter = FilterKind::Cc;
      else if (filter_s == "bilinear") ov.filter = FilterKind::Bilinear;
      else throw ValidationError({"--filter: expected cd, cc or bilinear"});
    }
    if (!covform_s.empty()) {
      if (covform_s == "as-printed") ov.covariance_form = kf_bilinear::CovarianceForm::AsPrinted;
      else if (covform_s == "moment-exact")
        ov.covariance_form = kf_bilinear::CovarianceForm::MomentExact;
      else throw ValidationError({"--covariance-form: expected as-printed or moment-exact"});
    }

    const Scenario s = load_scenario(scenario_path, ov);
    if (c_sim->parsed()) return cmd_simulate(s, out_dir);
    if (c_fil->parsed()) return cmd_filter(s, out_dir, mc_runs);
    if (c_sta->parsed()) return cmd_stationary(s, out_dir);
    if (c_ver->parsed()) return cmd_verify(s, out_dir, verify_s);
    return 1;
  } catch (const ParseError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const SingularSystem& e) {
    std::cerr << "error: SingularSystem: " << e.what() << "\n";
    return 2;
  } catch (const NoConvergence& e) {
    std::cerr << "error: NoConvergence: " << e.what() << "\n";
    return 2;
  } catch (const NotSPD& e) {
    std::cerr << "error: NotSPD: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace filtkit::cli
