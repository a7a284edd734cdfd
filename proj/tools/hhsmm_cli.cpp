// Command-line workflow driver: simulate, init, fit, predict, rul, score.
#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "hhsmm/hhsmm.hpp"

namespace {

using namespace hhsmm;

IntVector parse_int_list(const std::string& s) {
  IntVector out;
  std::string cur;
  for (char c : s + ",") {
    if (c == ',') {
      if (!cur.empty()) out.push_back(std::stoi(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  return out;
}

std::vector<bool> parse_bool_list(const std::string& s) {
  std::vector<bool> out;
  std::string cur;
  for (char c : s + ",") {
    if (c == ',') {
      if (cur.empty()) continue;
      if (cur == "T" || cur == "t" || cur == "true" || cur == "1")
        out.push_back(true);
      else if (cur == "F" || cur == "f" || cur == "false" || cur == "0")
        out.push_back(false);
      else
        throw ValidationError("cannot parse boolean '" + cur + "'");
      cur.clear();
    } else {
      cur += c;
    }
  }
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Minimal SVG line chart of one series.
void write_svg_line(const std::string& path, const std::vector<double>& ys,
                    const std::string& title) {
  if (ys.empty()) throw ValidationError("plot: empty series");
  const int W = 720, H = 420, m = 50;
  double ymin = ys[0], ymax = ys[0];
  for (double v : ys) {
    ymin = std::min(ymin, v);
    ymax = std::max(ymax, v);
  }
  if (ymax == ymin) ymax = ymin + 1.0;
  std::ofstream out(path);
  if (!out) throw ValidationError("plot: cannot open " + path);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
  out << "<rect width='100%' height='100%' fill='white'/>\n";
  out << "<text x='" << W / 2 << "' y='24' text-anchor='middle' font-size='16'>" << title
      << "</text>\n";
  out << "<line x1='" << m << "' y1='" << H - m << "' x2='" << W - m << "' y2='" << H - m
      << "' stroke='black'/>\n";
  out << "<line x1='" << m << "' y1='" << m << "' x2='" << m << "' y2='" << H - m
      << "' stroke='black'/>\n";
  out << "<polyline fill='none' stroke='steelblue' stroke-width='1.5' points='";
  for (std::size_t i = 0; i < ys.size(); ++i) {
    double px = m + (W - 2.0 * m) * (ys.size() == 1 ? 0.5 : double(i) / (ys.size() - 1));
    double py = H - m - (H - 2.0 * m) * (ys[i] - ymin) / (ymax - ymin);
    out << px << ',' << py << ' ';
  }
  out << "'/>\n";
  out << "<text x='" << m << "' y='" << H - m + 18 << "' font-size='12'>1</text>\n";
  out << "<text x='" << W - m << "' y='" << H - m + 18 << "' text-anchor='end' font-size='12'>"
      << ys.size() << "</text>\n";
  out << "<text x='" << m - 4 << "' y='" << H - m << "' text-anchor='end' font-size='12'>"
      << fmt(ymin) << "</text>\n";
  out << "<text x='" << m - 4 << "' y='" << m + 6 << "' text-anchor='end' font-size='12'>"
      << fmt(ymax) << "</text>\n";
  out << "</svg>\n";
}

ModelSpec load_model_or_fit(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ValidationError("malformed JSON in " + path + ": " + e.what());
  }
  if (j.contains("model")) return model_from_json(j.at("model"));
  return model_from_json(j);
}

ModelSpec load_validated(const std::string& path) {
  ModelSpec spec = load_model_or_fit(path);
  auto rep = validate_model(spec);
  if (!rep.ok()) throw ValidationError("invalid model in " + path + ":\n" + rep.to_string());
  return spec;
}

int cmd_simulate(const std::string& model_path, const std::string& nsim_str, std::uint64_t seed,
                 bool autoregress, const std::string& out_path) {
  ModelSpec spec = load_validated(model_path);
  SimulateOptions opts;
  opts.autoregress = autoregress;
  SequenceSet data = simulate(spec, parse_int_list(nsim_str), seed, opts);
  store_sequences(data, out_path);
  return 0;
}

int cmd_init(const std::string& data_path, int nstate, const std::string& nmix_str, bool ltr,
             bool final_absorb, bool regress, const std::string& resp_ind_str,
             const std::string& sojourn_str, const std::string& semi_str, int M, int K,
             std::uint64_t seed, const std::string& out_path) {
  SequenceSet data = load_sequences(data_path);
  NmixSpec nmix = NmixSpec::automatic();
  if (nmix_str == "none")
    nmix = NmixSpec::none();
  else if (nmix_str != "auto")
    nmix = NmixSpec::of(parse_int_list(nmix_str));
  IntVector resp_ind = parse_int_list(resp_ind_str);
  auto clus = initial_cluster(data, nstate, nmix, ltr, final_absorb, regress, resp_ind, seed);

  InitializeOptions opts;
  bool none_mix = nmix.mode == NmixSpec::Mode::none;
  opts.emission_family = regress ? (none_mix ? "addreg" : "mixlm")
                                 : (none_mix ? "nonpar" : "mixmvnorm");
  if (sojourn_str == "auto") {
    opts.sojourn_auto = true;
  } else {
    opts.sojourn = parse_sojourn_type(sojourn_str);
  }
  if (!semi_str.empty()) {
    opts.semi = parse_bool_list(semi_str);
  } else if (sojourn_str == "none") {
    opts.semi.assign(nstate, false);
  } else if (ltr) {
    opts.semi.assign(nstate, true);
    opts.semi[nstate - 1] = false;
  } else {
    opts.semi.assign(nstate, true);
  }
  opts.M = M;
  if (K > 0) {
    opts.spline.K = K;
    opts.addreg.K = K;
  }
  opts.addreg.resp_ind = resp_ind;
  ModelSpec spec = initialize_model(clus, opts);
  store_model(spec, out_path);
  return 0;
}

int cmd_fit(const std::string& data_path, const std::string& model_path, int maxit, double tol,
            bool lock_init, const std::string& out_path, const std::string& trace_path,
            const std::string& plot_path, bool verbose) {
  SequenceSet data = load_sequences(data_path);
  ModelSpec spec = load_validated(model_path);
  FitControl ctrl;
  ctrl.maxit = maxit;
  ctrl.tol = tol;
  ctrl.lock_init = lock_init;
  ctrl.verbose = verbose;
  FitResult fit = hhsmmfit(data, spec, ctrl);
  json out;
  out["model"] = model_to_json(fit.model);
  out["loglik_trace"] = fit.loglik_trace;
  out["loglik"] = fit.loglik;
  out["AIC"] = fit.AIC;
  out["BIC"] = fit.BIC;
  out["iterations"] = fit.iterations;
  out["converged"] = fit.converged;
  std::ofstream os(out_path);
  if (!os) throw ValidationError("cannot open " + out_path);
  os << out.dump(1) << "\n";
  if (!trace_path.empty()) {
    std::ofstream tr(trace_path);
    if (!tr) throw ValidationError("cannot open " + trace_path);
    tr << "iter,loglik\n";
    for (std::size_t i = 0; i < fit.loglik_trace.size(); ++i)
      tr << (i + 1) << ',' << fmt(fit.loglik_trace[i]) << "\n";
  }
  if (!plot_path.empty()) write_svg_line(plot_path, fit.loglik_trace, "log-likelihood trace");
  return 0;
}

int cmd_predict(const std::string& fit_path, const std::string& data_path,
                const std::string& method_str, int future, const std::string& out_path,
                const std::string& plot_path) {
  ModelSpec spec = load_validated(fit_path);
  SequenceSet data = load_sequences(data_path);
  auto states = predict_states(spec, data, parse_decode_method(method_str), future);
  std::ofstream out(out_path);
  if (!out) throw ValidationError("cannot open " + out_path);
  out << "seq_id,t,state\n";
  for (std::size_t i = 0; i < states.size(); ++i)
    for (std::size_t t = 0; t < states[i].size(); ++t)
      out << (i + 1) << ',' << (t + 1) << ',' << states[i][t] << "\n";
  if (!plot_path.empty()) {
    std::vector<double> ys(states[0].begin(), states[0].end());
    write_svg_line(plot_path, ys, "decoded states (sequence 1)");
  }
  return 0;
}

int cmd_rul(const std::string& fit_path, const std::string& data_path,
            const std::string& method_str, const std::string& confidence_str, double level,
            const std::string& out_path) {
  ModelSpec spec = load_validated(fit_path);
  SequenceSet data = load_sequences(data_path);
  auto ests = estimate_rul(spec, data, parse_decode_method(method_str),
                           parse_rul_confidence(confidence_str), level);
  std::ofstream out(out_path);
  if (!out) throw ValidationError("cannot open " + out_path);
  out << "seq_id,t,state,rul,rul_low,rul_up\n";
  for (std::size_t i = 0; i < ests.size(); ++i)
    out << (i + 1) << ',' << data.N[i] << ',' << ests[i].last_state << ',' << fmt(ests[i].rul)
        << ',' << fmt(ests[i].rul_low) << ',' << fmt(ests[i].rul_up) << "\n";
  return 0;
}

int cmd_score(const std::string& fit_path, const std::string& data_path,
              const std::string& out_path) {
  ModelSpec spec = load_validated(fit_path);
  SequenceSet data = load_sequences(data_path);
  auto scores = score(data, spec);
  std::ofstream out(out_path);
  if (!out) throw ValidationError("cannot open " + out_path);
  out << "seq_id,loglik\n";
  for (std::size_t i = 0; i < scores.size(); ++i) out << (i + 1) << ',' << fmt(scores[i]) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hidden hybrid Markov/semi-Markov models"};
  app.require_subcommand(1);

  std::string model_path, data_path, out_path, trace_path, plot_path, fit_path;
  std::string nsim_str, nmix_str = "auto", resp_ind_str = "1", sojourn_str = "gamma";
  std::string method_str = "viterbi", confidence_str = "mean", semi_str;
  std::uint64_t seed = 0;
  int nstate = 2, maxit = 100, future = 0, M = 0, K = 0;
  double tol = 1e-4, level = 0.95;
  bool ltr = false, final_absorb = false, regress = false, lock_init = false, verbose = false;
  bool autoregress = false;

  auto* sim = app.add_subcommand("simulate", "simulate sequences from a model");
  sim->add_option("--model", model_path)->required();
  sim->add_option("--nsim", nsim_str)->required();
  sim->add_option("--seed", seed);
  sim->add_flag("--autoregress", autoregress);
  sim->add_option("--out", out_path)->required();

  auto* ini = app.add_subcommand("init", "initial clustering and model initialization");
  ini->add_option("--data", data_path)->required();
  ini->add_option("--nstate", nstate)->required();
  ini->add_option("--nmix", nmix_str, "counts like 2,2,2 | auto | none");
  ini->add_flag("--ltr", ltr);
  ini->add_flag("--final-absorb", final_absorb);
  ini->add_flag("--regress", regress);
  ini->add_option("--resp-ind", resp_ind_str);
  ini->add_option("--sojourn", sojourn_str, "gamma|weibull|lognormal|nonparametric|auto|none");
  ini->add_option("--semi", semi_str, "per-state flags like F,T,F");
  ini->add_option("--M", M, "sojourn truncation bound");
  ini->add_option("--K", K, "basis size for spline families");
  ini->add_option("--seed", seed);
  ini->add_option("--out", out_path)->required();

  auto* fit = app.add_subcommand("fit", "EM estimation");
  fit->add_option("--data", data_path)->required();
  fit->add_option("--model", model_path)->required();
  fit->add_option("--maxit", maxit);
  fit->add_option("--tol", tol);
  fit->add_flag("--lock-init", lock_init);
  fit->add_flag("--verbose", verbose);
  fit->add_option("--out", out_path)->required();
  fit->add_option("--trace", trace_path);
  fit->add_option("--plot", plot_path);

  auto* pre = app.add_subcommand("predict", "state decoding and future-state prediction");
  pre->add_option("--fit", fit_path)->required();
  pre->add_option("--data", data_path)->required();
  pre->add_option("--method", method_str, "viterbi|smoothing");
  pre->add_option("--future", future);
  pre->add_option("--out", out_path)->required();
  pre->add_option("--plot", plot_path);

  auto* rul = app.add_subcommand("rul", "residual-useful-lifetime estimation");
  rul->add_option("--fit", fit_path)->required();
  rul->add_option("--data", data_path)->required();
  rul->add_option("--method", method_str, "viterbi|smoothing");
  rul->add_option("--confidence", confidence_str, "mean|max");
  rul->add_option("--level", level);
  rul->add_option("--out", out_path)->required();

  auto* sco = app.add_subcommand("score", "log-likelihood of new sequences");
  sco->add_option("--fit", fit_path)->required();
  sco->add_option("--data", data_path)->required();
  sco->add_option("--out", out_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) return cmd_simulate(model_path, nsim_str, seed, autoregress, out_path);
    if (ini->parsed())
      return cmd_init(data_path, nstate, nmix_str, ltr, final_absorb, regress, resp_ind_str,
                      sojourn_str, semi_str, M, K, seed, out_path);
    if (fit->parsed())
      return cmd_fit(data_path, model_path, maxit, tol, lock_init, out_path, trace_path, plot_path,
                     verbose);
    if (pre->parsed())
      return cmd_predict(fit_path, data_path, method_str, future, out_path, plot_path);
    if (rul->parsed())
      return cmd_rul(fit_path, data_path, method_str, confidence_str, level, out_path);
    if (sco->parsed()) return cmd_score(fit_path, data_path, out_path);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
