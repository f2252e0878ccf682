#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "kfeed/harness.hpp"

namespace kfeed {

namespace {

/// Parses the 6-significant-digit rendering back so JSON output is stable and compact.
double rounded(double value) { return std::stod(format_number(value)); }

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << content;
  out.flush();
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

nlohmann::ordered_json config_echo(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["grid"] = c.grid_path;
  j["weights"] = c.weights_path;
  j["k"] = c.k;
  j["horizon"] = c.horizon;
  j["intended_probability"] = rounded(c.intended_probability);
  j["episodes"] = c.episodes;
  j["runs"] = c.runs;
  j["seed"] = c.seed;
  j["noise"] = rounded(c.noise);
  j["bonus_mode"] = to_string(c.bonus_mode);
  j["conf_c"] = rounded(c.c_conf);
  j["delta"] = rounded(c.delta);
  j["ridge"] = rounded(c.ridge);
  j["B"] = rounded(c.bound);
  j["mle_step"] = rounded(c.solver.step_size);
  j["mle_iters"] = c.solver.max_iters;
  j["mle_tol"] = rounded(c.solver.grad_tolerance);
  j["pg_step"] = rounded(c.planner.step_size);
  j["pg_samples"] = c.planner.rollouts_per_gradient;
  j["pg_eps"] = rounded(c.planner.epsilon);
  j["pg_iters"] = c.planner.max_ascent_iters;
  j["eval_rollouts"] = c.eval_rollouts;
  j["refit_every"] = c.effective_refit_every();
  return j;
}

struct Series {
  const CurveStats* curve;
  std::string title;
  std::string y_label;
  std::optional<double> reference;  // horizontal line, e.g. V*
};

std::string render_svg(const Series& series) {
  constexpr double kWidth = 800, kHeight = 480, kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;
  const auto& mean = series.curve->mean;
  const auto& sd = series.curve->stddev;
  const std::size_t n = mean.size();
  const std::size_t stride = std::max<std::size_t>(1, (n + 999) / 1000);

  double lo = 0.0;
  double hi = 1e-12;
  for (std::size_t i = 0; i < n; ++i) {
    lo = std::min(lo, mean[i] - 2 * sd[i]);
    hi = std::max(hi, mean[i] + 2 * sd[i]);
  }
  if (series.reference) hi = std::max(hi, *series.reference);
  hi += 0.05 * (hi - lo);

  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto x_of = [&](std::size_t i) { return kLeft + (n > 1 ? plot_w * i / (n - 1) : 0.0); };
  auto y_of = [&](double v) { return kTop + plot_h * (hi - v) / (hi - lo); };

  auto polyline = [&](auto value_at, const char* cls) {
    std::ostringstream out;
    out << "  <polyline class=\"" << cls << "\" points=\"";
    for (std::size_t i = 0; i < n; i += stride) {
      out << format_number(x_of(i)) << ',' << format_number(y_of(value_at(i))) << ' ';
    }
    if ((n - 1) % stride != 0) out << format_number(x_of(n - 1)) << ',' << format_number(y_of(value_at(n - 1)));
    out << "\"/>\n";
    return out.str();
  };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
      << "  <style>.mean{fill:none;stroke:#1f77b4;stroke-width:1.5}"
         ".band{fill:none;stroke:#1f77b4;stroke-opacity:0.35;stroke-width:1}"
         ".ref{stroke:#d62728;stroke-dasharray:6 4}"
         "text{font-family:sans-serif;font-size:12px}</style>\n"
      << "  <rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << plot_w << "\" height=\"" << plot_h
      << "\" fill=\"none\" stroke=\"#444\"/>\n"
      << "  <text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\">" << series.title << "</text>\n"
      << "  <text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">episode</text>\n"
      << "  <text x=\"16\" y=\"" << kHeight / 2 << "\" transform=\"rotate(-90 16 " << kHeight / 2
      << ")\" text-anchor=\"middle\">" << series.y_label << "</text>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    svg << "  <text x=\"" << kLeft - 6 << "\" y=\"" << format_number(y_of(v) + 4)
        << "\" text-anchor=\"end\">" << format_number(v) << "</text>\n";
    const std::size_t e = n > 1 ? (n - 1) * t / 4 : 0;
    svg << "  <text x=\"" << format_number(x_of(e)) << "\" y=\"" << kTop + plot_h + 16
        << "\" text-anchor=\"middle\">" << e + 1 << "</text>\n";
  }
  if (series.reference) {
    svg << "  <line class=\"ref\" x1=\"" << kLeft << "\" x2=\"" << kLeft + plot_w << "\" y1=\""
        << format_number(y_of(*series.reference)) << "\" y2=\"" << format_number(y_of(*series.reference))
        << "\"/>\n";
  }
  svg << polyline([&](std::size_t i) { return mean[i] + 2 * sd[i]; }, "band");
  svg << polyline([&](std::size_t i) { return mean[i] - 2 * sd[i]; }, "band");
  svg << polyline([&](std::size_t i) { return mean[i]; }, "mean");
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace

void emit_results(const BatchResult& batch, const std::string& out_dir) {
  namespace fs = std::filesystem;
  const fs::path dir(out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());

  std::ostringstream csv;
  csv << "run,episode,feedback,value_mc,optimistic_value,w_error,regret_cum\n";
  std::ostringstream raw;
  raw << "run,episode,regret_cum_raw\n";
  for (const auto& run : batch.runs) {
    for (const auto& r : run) {
      csv << r.run << ',' << r.episode << ',' << r.feedback << ',' << format_number(r.value_mc) << ','
          << format_number(r.optimistic_value) << ',' << format_number(r.w_error) << ','
          << format_number(r.regret_cum) << '\n';
      raw << r.run << ',' << r.episode << ',' << format_number(r.regret_cum_raw) << '\n';
    }
  }
  write_file(dir / "episodes.csv", csv.str());
  write_file(dir / "regret_raw.csv", raw.str());

  const std::size_t n = batch.value.mean.size();
  const std::size_t decile = std::max<std::size_t>(1, n / 10);
  nlohmann::ordered_json summary;
  summary["config"] = config_echo(batch.config);
  summary["seeds"] = batch.seeds;
  summary["optimal_value_estimate"] = rounded(batch.optimal.value);
  summary["optimal_value_standard_error"] = rounded(batch.optimal.standard_error);
  summary["optimal_value_note"] = "Markovian softmax baseline planned on the true reward; a lower bound";
  summary["final_mean_value"] = n > 0 ? rounded(batch.value.mean.back()) : 0.0;
  summary["first_decile_mean_value"] = rounded(window_mean(batch.value, 0, decile));
  summary["last_decile_mean_value"] = rounded(window_mean(batch.value, n - decile, n));
  summary["final_mean_regret"] = n > 0 ? rounded(batch.regret.mean.back()) : 0.0;
  summary["final_mean_regret_raw"] = n > 0 ? rounded(batch.regret_raw.mean.back()) : 0.0;
  nlohmann::ordered_json w = nlohmann::ordered_json::parse(batch.w_star.dump());
  summary["w_star"] = w;
  write_file(dir / "summary.json", summary.dump(2) + "\n");

  nlohmann::ordered_json timing;
  timing["wall_time_seconds"] = batch.wall_time_seconds;
  write_file(dir / "timing.json", timing.dump(2) + "\n");

  write_file(dir / "learning_curve.svg",
             render_svg({&batch.value, "Average true reward (mean +/- 2 sd over runs)", "true value",
                         batch.optimal.value}));
  write_file(dir / "regret_curve.svg",
             render_svg({&batch.regret, "Cumulative regret against the estimated optimum (mean +/- 2 sd)",
                         "cumulative regret", std::nullopt}));
}

}  // namespace kfeed
