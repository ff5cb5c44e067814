// Command-line workflow around the APGW toolkit: fit, compare, simulate,
// curves, replicate-paper.  Every result-writing run also writes a manifest
// with input digests and the seed, so outputs can be traced to their inputs.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "apgw/apgw.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "0.1.0";

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitConvergence = 3;

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::string data_path;
    std::string time_column;
    std::string status_column;
    std::string covariates;
    std::string model = "";
    std::vector<std::string> fixes;
    bool allow_two_scales = false;
    std::optional<std::uint64_t> seed;
    std::optional<int> max_iterations;
    std::optional<double> gradient_tolerance;
    std::optional<int> n_starts;
};

std::string default_out_dir() {
    if (const char* env = std::getenv("APGW_OUT_DIR")) return env;
    return "apgw_out";
}

// Resolves the layered configuration: file values first, flags override.
apgw::io::Config load_config(const CommonArgs& args) {
    apgw::io::Config cfg;
    if (!args.config_path.empty()) cfg = apgw::io::Config::parse_file(args.config_path);
    if (!args.data_path.empty()) cfg.set("data", "path", args.data_path);
    if (!args.time_column.empty()) cfg.set("data", "time", args.time_column);
    if (!args.status_column.empty()) cfg.set("data", "status", args.status_column);
    if (!args.covariates.empty()) cfg.set("data", "covariates", args.covariates);
    if (!args.model.empty()) cfg.set("model", "spec", args.model);
    if (!args.fixes.empty()) {
        std::string joined;
        for (const auto& f : args.fixes) joined += (joined.empty() ? "" : ",") + f;
        cfg.set("model", "fix", joined);
    }
    if (args.allow_two_scales) cfg.set("model", "allow_two_scales", "true");
    if (args.seed) cfg.set("optimizer", "seed", std::to_string(*args.seed));
    if (args.max_iterations)
        cfg.set("optimizer", "max_iterations", std::to_string(*args.max_iterations));
    if (args.gradient_tolerance)
        cfg.set("optimizer", "gradient_tolerance",
                apgw::io::format_double(*args.gradient_tolerance));
    if (args.n_starts) cfg.set("optimizer", "n_starts", std::to_string(*args.n_starts));
    if (!args.out_dir.empty()) cfg.set("output", "dir", args.out_dir);
    return cfg;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    for (const auto& piece : apgw::io::split(text, ',')) {
        const std::string t = apgw::io::trim(piece);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

bool parse_bool(const std::string& text, const std::string& key) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw apgw::ConfigError("key '" + key + "' must be a boolean, got '" + text + "'");
}

apgw::SurvivalDataset load_data(apgw::io::Config& cfg, std::string& path_out) {
    const auto path = cfg.take("data", "path");
    if (!path) throw apgw::ConfigError("missing required key 'data.path' (flag --data)");
    path_out = *path;
    apgw::io::DatasetSchema schema;
    schema.time_column = cfg.take_or("data", "time", "time");
    schema.status_column = cfg.take_or("data", "status", "status");
    if (const auto cols = cfg.take("data", "covariates"))
        schema.covariate_columns = split_list(*cols);
    return apgw::io::load_dataset(path_out, schema);
}

apgw::OptimizerConfig load_optimizer(apgw::io::Config& cfg) {
    apgw::OptimizerConfig opt;
    opt.max_iterations =
        static_cast<int>(cfg.take_number("optimizer", "max_iterations", opt.max_iterations));
    opt.gradient_tolerance =
        cfg.take_number("optimizer", "gradient_tolerance", opt.gradient_tolerance);
    opt.step_tolerance = cfg.take_number("optimizer", "step_tolerance", opt.step_tolerance);
    opt.n_starts = static_cast<int>(cfg.take_number("optimizer", "n_starts", opt.n_starts));
    opt.seed = static_cast<std::uint64_t>(cfg.take_number("optimizer", "seed", 0));
    opt.validate();
    return opt;
}

// "M(beta,alpha)" optionally followed by ":key=value" fixes.
apgw::ModelSpec parse_spec_entry(const std::string& entry, const apgw::SurvivalDataset& data,
                                 bool allow_two_scales) {
    const auto parts = apgw::io::split(entry, ':');
    apgw::ModelSpec spec = apgw::parse_model_spec(apgw::io::trim(parts[0]), data.p(),
                                                  data.names, allow_two_scales);
    for (std::size_t i = 1; i < parts.size(); ++i) {
        const auto eq = parts[i].find('=');
        if (eq == std::string::npos)
            throw apgw::ConfigError("fix '" + parts[i] + "' must look like nu0=0.6931");
        const auto key = apgw::parse_coefficient_key(apgw::io::trim(parts[i].substr(0, eq)));
        const auto value = apgw::io::parse_double(parts[i].substr(eq + 1));
        if (!value) throw apgw::ConfigError("fix '" + parts[i] + "' has a non-numeric value");
        spec.fixed_values[key] = *value;
    }
    spec.validate();
    return spec;
}

apgw::ModelSpec load_model(apgw::io::Config& cfg, const apgw::SurvivalDataset& data) {
    const auto text = cfg.take("model", "spec");
    if (!text) throw apgw::ConfigError("missing required key 'model.spec' (flag --model)");
    bool allow_two = false;
    if (const auto flag = cfg.take("model", "allow_two_scales"))
        allow_two = parse_bool(*flag, "model.allow_two_scales");
    apgw::ModelSpec spec = apgw::parse_model_spec(*text, data.p(), data.names, allow_two);
    if (const auto fixes = cfg.take("model", "fix")) {
        for (const auto& item : split_list(*fixes)) {
            const auto eq = item.find('=');
            if (eq == std::string::npos)
                throw apgw::ConfigError("fix '" + item + "' must look like nu0=0.6931");
            const auto key = apgw::parse_coefficient_key(apgw::io::trim(item.substr(0, eq)));
            const auto value = apgw::io::parse_double(item.substr(eq + 1));
            if (!value) throw apgw::ConfigError("fix '" + item + "' has a non-numeric value");
            spec.fixed_values[key] = *value;
        }
    }
    spec.validate();
    return spec;
}

class ManifestWriter {
  public:
    ManifestWriter(std::string command, fs::path out_dir, std::uint64_t seed,
                   std::string config_digest)
        : command_(std::move(command)),
          out_dir_(std::move(out_dir)),
          seed_(seed),
          config_digest_(std::move(config_digest)),
          start_(std::chrono::steady_clock::now()) {}

    void add_input(const fs::path& path) {
        inputs_.emplace_back(path.string(),
                             "fnv1a64:" + apgw::digest_hex(apgw::io::file_digest(path)));
    }

    void write_text(const std::string& name, const std::string& content) {
        apgw::io::atomic_write(out_dir_ / name, content);
        outputs_.push_back(name);
    }

    void write_json(const std::string& name, const json& payload) {
        write_text(name, payload.dump(2) + "\n");
    }

    void finalize() {
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        json m;
        m["command"] = command_;
        m["config_digest"] = config_digest_;
        m["seed"] = seed_;
        m["tool_version"] = kToolVersion;
        m["wall_clock_seconds"] = seconds;
        m["inputs"] = json::array();
        for (const auto& [path, digest] : inputs_)
            m["inputs"].push_back({{"path", path}, {"digest", digest}});
        m["outputs"] = outputs_;
        apgw::io::atomic_write(out_dir_ / "manifest.json", m.dump(2) + "\n");
        std::cout << "outputs written to " << out_dir_.string() << "\n";
    }

  private:
    std::string command_;
    fs::path out_dir_;
    std::uint64_t seed_;
    std::string config_digest_;
    std::chrono::steady_clock::time_point start_;
    std::vector<std::pair<std::string, std::string>> inputs_;
    std::vector<std::string> outputs_;
};

std::string config_digest_for(const CommonArgs& args, int argc, char** argv) {
    std::string blob;
    if (!args.config_path.empty()) blob = apgw::io::read_file(args.config_path);
    blob += "\n--argv--\n";
    for (int i = 0; i < argc; ++i) blob += std::string(argv[i]) + "\n";
    return "fnv1a64:" + apgw::digest_hex(apgw::fnv1a64(blob));
}

json coefficient_json(const apgw::FitResult& fit) {
    json rows = json::array();
    const auto entries = fit.spec.free_entries();
    std::optional<Eigen::VectorXd> se;
    std::vector<std::pair<double, double>> ci;
    if (fit.covariance) {
        se = apgw::standard_errors(fit);
        ci = apgw::wald_ci(fit, 0.95);
    }
    int free_pos = 0;
    for (apgw::Block b : apgw::kAllBlocks) {
        for (int j = 0; j <= fit.spec.n_covariates; ++j) {
            json row;
            row["name"] = fit.spec.entry_label(b, j);
            row["block"] = apgw::to_string(b);
            row["index"] = j;
            row["estimate"] = fit.coefs.block(b)[j];
            const bool is_free = fit.spec.is_free(b, j);
            row["fixed"] = !is_free;
            if (is_free) {
                if (se) {
                    row["se"] = (*se)[free_pos];
                    row["ci_lower"] = ci[static_cast<std::size_t>(free_pos)].first;
                    row["ci_upper"] = ci[static_cast<std::size_t>(free_pos)].second;
                }
                ++free_pos;
            }
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

std::string fit_report_text(const apgw::FitResult& fit, const std::string& data_path,
                            int n_events) {
    std::ostringstream out;
    char buf[256];
    out << "model: " << fit.spec.name() << "   free parameters: " << fit.dim() << "\n";
    out << "data: " << data_path << "   n = " << fit.n_obs << "   events = " << n_events
        << "   censored = " << fit.n_obs - n_events << "\n";
    std::snprintf(buf, sizeof(buf),
                  "loglik = %.4f   AIC = %.4f   BIC = %.4f   converged = %s   iterations = %d\n",
                  fit.loglik, fit.aic, fit.bic, fit.converged ? "yes" : "no", fit.n_iter);
    out << buf;
    out << "\n";
    std::snprintf(buf, sizeof(buf), "%-22s %12s %10s %22s\n", "coefficient", "estimate", "se",
                  "95% CI");
    out << buf;
    std::optional<Eigen::VectorXd> se;
    std::vector<std::pair<double, double>> ci;
    if (fit.covariance) {
        se = apgw::standard_errors(fit);
        ci = apgw::wald_ci(fit, 0.95);
    }
    int free_pos = 0;
    for (apgw::Block b : apgw::kAllBlocks) {
        for (int j = 0; j <= fit.spec.n_covariates; ++j) {
            const bool is_free = fit.spec.is_free(b, j);
            const double est = fit.coefs.block(b)[j];
            if (!is_free && est == 0.0 && !fit.spec.active.count(b) && j > 0) continue;
            if (is_free && se) {
                std::snprintf(buf, sizeof(buf), "%-22s %12.4f %10.4f [%9.4f,%9.4f]\n",
                              fit.spec.entry_label(b, j).c_str(), est, (*se)[free_pos],
                              ci[static_cast<std::size_t>(free_pos)].first,
                              ci[static_cast<std::size_t>(free_pos)].second);
            } else if (is_free) {
                std::snprintf(buf, sizeof(buf), "%-22s %12.4f %10s %22s\n",
                              fit.spec.entry_label(b, j).c_str(), est, "?", "");
            } else {
                std::snprintf(buf, sizeof(buf), "%-22s %12.4f %10s %22s\n",
                              fit.spec.entry_label(b, j).c_str(), est, "---", "(fixed)");
            }
            out << buf;
            if (is_free) ++free_pos;
        }
    }
    Eigen::RowVectorXd zero_profile = Eigen::RowVectorXd::Zero(fit.spec.n_covariates);
    const apgw::ApgwParams baseline = apgw::subject_params(fit.coefs, zero_profile);
    const apgw::HazardShape shape = apgw::classify_shape(baseline);
    out << "\nbaseline (all covariates 0): phi = " << baseline.phi
        << ", lambda = " << baseline.lambda << ", gamma = " << baseline.gamma
        << ", kappa = " << baseline.kappa << "\n";
    out << "baseline hazard shape: " << apgw::to_string(shape.tag);
    if (shape.turning_point) out << " (turning point at t = " << *shape.turning_point << ")";
    out << "\n";
    if (baseline.kappa < 0.0 && fit.covariance) {
        const apgw::CureReport cure = apgw::cure_report(fit, {zero_profile});
        std::snprintf(buf, sizeof(buf),
                      "baseline cure proportion: %.4f  (95%% CI %.4f, %.4f)\n",
                      cure.profiles[0].estimate, cure.profiles[0].lower,
                      cure.profiles[0].upper);
        out << buf;
    }
    if (fit.condition_warning) out << "warning: " << *fit.condition_warning << "\n";
    return out.str();
}

json fit_json(const apgw::FitResult& fit, const std::string& data_path, int n_events) {
    json j;
    j["model"] = fit.spec.name();
    j["data"] = data_path;
    j["n"] = fit.n_obs;
    j["events"] = n_events;
    j["dim"] = fit.dim();
    j["loglik"] = fit.loglik;
    j["aic"] = fit.aic;
    j["bic"] = fit.bic;
    j["converged"] = fit.converged;
    j["iterations"] = fit.n_iter;
    j["data_digest"] = "fnv1a64:" + apgw::digest_hex(fit.data_digest);
    j["coefficients"] = coefficient_json(fit);
    if (fit.condition_warning) j["warning"] = *fit.condition_warning;
    if (fit.covariance) {
        json cov = json::array();
        for (int r = 0; r < fit.covariance->rows(); ++r) {
            json row = json::array();
            for (int cidx = 0; cidx < fit.covariance->cols(); ++cidx)
                row.push_back((*fit.covariance)(r, cidx));
            cov.push_back(std::move(row));
        }
        j["covariance"] = std::move(cov);
    }
    return j;
}

int count_events(const apgw::SurvivalDataset& data) {
    int events = 0;
    for (int i = 0; i < data.n(); ++i) events += data.status[i];
    return events;
}

std::string model_table_text(const std::vector<apgw::ModelTableRow>& rows) {
    std::ostringstream out;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-24s %6s %12s %10s %10s %10s %10s\n", "model", "dim",
                  "loglik", "AIC", "BIC", "dAIC", "dBIC");
    out << buf;
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%-24s %6d %12.2f %10.2f %10.2f %10.2f %10.2f%s\n",
                      r.name.c_str(), r.dim, r.loglik, r.aic, r.bic, r.delta_aic, r.delta_bic,
                      r.converged ? "" : "  (not converged)");
        out << buf;
    }
    return out.str();
}

std::string model_table_csv(const std::vector<apgw::ModelTableRow>& rows) {
    std::ostringstream out;
    out << "model,dim,loglik,aic,bic,delta_aic,delta_bic,converged\n";
    for (const auto& r : rows)
        out << r.name << "," << r.dim << "," << apgw::io::format_double(r.loglik) << ","
            << apgw::io::format_double(r.aic) << "," << apgw::io::format_double(r.bic) << ","
            << apgw::io::format_double(r.delta_aic) << ","
            << apgw::io::format_double(r.delta_bic) << "," << (r.converged ? 1 : 0) << "\n";
    return out.str();
}

std::string summary_csv(const apgw::ReplicationSummary& summary) {
    std::ostringstream out;
    out << "nu,model,coefficient,free,median,sd,mean_se,n_used,convergence_rate\n";
    for (const auto& cell : summary.cells) {
        for (const auto& c : cell.coefficients) {
            auto cell_value = [](double v) {
                return std::isnan(v) ? std::string() : apgw::io::format_double(v);
            };
            out << (std::isinf(cell.nu) ? "inf" : apgw::io::format_double(cell.nu)) << ","
                << cell.spec_name << "," << c.label << "," << (c.is_free ? 1 : 0) << ","
                << cell_value(c.median) << "," << (c.is_free ? cell_value(c.sd) : std::string())
                << "," << cell_value(c.mean_se) << "," << c.n_used << ","
                << apgw::io::format_double(cell.convergence_rate) << "\n";
        }
    }
    return out.str();
}

std::string estimates_csv(const apgw::StudyResult& study) {
    std::ostringstream out;
    out << "nu,model,replicate,converged,loglik,aic";
    const auto& spec0 = study.scenario.fit_specs.front();
    for (apgw::Block b : apgw::kAllBlocks)
        for (int j = 0; j <= spec0.n_covariates; ++j)
            out << "," << apgw::to_string(b) << j;
    out << "\n";
    for (const auto& point : study.points) {
        for (std::size_t s = 0; s < point.samples.size(); ++s) {
            const auto& spec = study.scenario.fit_specs[s];
            for (std::size_t r = 0; r < point.samples[s].size(); ++r) {
                const auto& rep = point.samples[s][r];
                out << (std::isinf(point.nu) ? "inf" : apgw::io::format_double(point.nu)) << ","
                    << spec.name() << "," << r << "," << (rep.converged ? 1 : 0) << ","
                    << apgw::io::format_double(rep.loglik) << ","
                    << apgw::io::format_double(rep.aic);
                for (apgw::Block b : apgw::kAllBlocks)
                    for (int j = 0; j <= spec.n_covariates; ++j)
                        out << ","
                            << (rep.fit_error
                                    ? "NA"
                                    : apgw::io::format_double(rep.coefs.block(b)[j]));
                out << "\n";
            }
        }
    }
    return out.str();
}

std::string probes_csv(const apgw::StudyResult& study) {
    std::ostringstream out;
    out << "nu,model,replicate";
    for (double u : study.scenario.survivor_probe_u)
        out << ",S0_at_Q0_" << apgw::io::format_double(u);
    out << "\n";
    for (const auto& point : study.points) {
        for (std::size_t s = 0; s < point.samples.size(); ++s) {
            for (std::size_t r = 0; r < point.samples[s].size(); ++r) {
                const auto& rep = point.samples[s][r];
                if (rep.survivor_probes.empty()) continue;
                out << (std::isinf(point.nu) ? "inf" : apgw::io::format_double(point.nu)) << ","
                    << study.scenario.fit_specs[s].name() << "," << r;
                for (double v : rep.survivor_probes) out << "," << apgw::io::format_double(v);
                out << "\n";
            }
        }
    }
    return out.str();
}

std::string rates_csv(const apgw::StudyResult& study) {
    std::ostringstream out;
    out << "nu,censoring_rate,realized_censoring\n";
    for (const auto& point : study.points)
        out << (std::isinf(point.nu) ? "inf" : apgw::io::format_double(point.nu)) << ","
            << apgw::io::format_double(point.censoring_rate) << ","
            << apgw::io::format_double(point.realized_censoring) << "\n";
    return out.str();
}

std::vector<double> parse_grid(const std::string& text, const std::string& key) {
    // either "a:b:n" (inclusive linear grid) or a comma list
    const auto colon_parts = apgw::io::split(text, ':');
    std::vector<double> grid;
    if (colon_parts.size() == 3) {
        const auto a = apgw::io::parse_double(colon_parts[0]);
        const auto b = apgw::io::parse_double(colon_parts[1]);
        const auto n = apgw::io::parse_double(colon_parts[2]);
        if (!a || !b || !n || *n < 2)
            throw apgw::ConfigError("key '" + key + "' grid must be min:max:count with count >= 2");
        for (int i = 0; i < static_cast<int>(*n); ++i)
            grid.push_back(*a + (*b - *a) * i / (*n - 1.0));
        return grid;
    }
    for (const auto& item : split_list(text)) {
        const auto v = apgw::io::parse_double(item);
        if (!v) throw apgw::ConfigError("key '" + key + "': '" + item + "' is not a number");
        grid.push_back(*v);
    }
    if (grid.empty()) throw apgw::ConfigError("key '" + key + "' produced an empty grid");
    return grid;
}

std::vector<double> parse_nu_list(const std::string& text) {
    std::vector<double> out;
    for (const auto& item : split_list(text)) {
        if (item == "inf" || item == "Inf" || item == "infinity") {
            out.push_back(apgw::kNuInfinity);
        } else {
            const auto v = apgw::io::parse_double(item);
            if (!v) throw apgw::ConfigError("nu list entry '" + item + "' is not a number");
            out.push_back(*v);
        }
    }
    return out;
}

int run_fit(const CommonArgs& args, int argc, char** argv) {
    apgw::io::Config cfg = load_config(args);
    std::string data_path;
    const apgw::SurvivalDataset data = load_data(cfg, data_path);
    const apgw::ModelSpec spec = load_model(cfg, data);
    const apgw::OptimizerConfig opt = load_optimizer(cfg);
    const fs::path out_dir = cfg.take_or("output", "dir", default_out_dir());
    cfg.finish();

    ManifestWriter manifest("fit", out_dir, opt.seed, config_digest_for(args, argc, argv));
    manifest.add_input(data_path);
    const apgw::FitResult fit = apgw::fit(data, spec, opt);
    const int events = count_events(data);
    manifest.write_text("report.txt", fit_report_text(fit, data_path, events));
    manifest.write_json("fit.json", fit_json(fit, data_path, events));
    manifest.finalize();
    std::cout << fit_report_text(fit, data_path, events);
    return fit.converged ? kExitOk : kExitConvergence;
}

int run_compare(const CommonArgs& args, const std::string& models_arg, int argc, char** argv) {
    apgw::io::Config cfg = load_config(args);
    std::string data_path;
    const apgw::SurvivalDataset data = load_data(cfg, data_path);
    const apgw::OptimizerConfig opt = load_optimizer(cfg);
    const fs::path out_dir = cfg.take_or("output", "dir", default_out_dir());
    std::string models = models_arg;
    if (const auto m = cfg.take("compare", "models"); m && models.empty()) models = *m;
    if (models.empty())
        models = "M(beta);M(tau);M(beta,alpha);M(tau,alpha);M(beta,nu);M(tau,nu)";
    bool allow_two = false;
    if (const auto flag = cfg.take("model", "allow_two_scales"))
        allow_two = parse_bool(*flag, "model.allow_two_scales");
    cfg.finish();

    ManifestWriter manifest("compare", out_dir, opt.seed, config_digest_for(args, argc, argv));
    manifest.add_input(data_path);
    std::vector<apgw::FitResult> fits;
    for (const auto& entry : apgw::io::split(models, ';')) {
        const std::string t = apgw::io::trim(entry);
        if (t.empty()) continue;
        fits.push_back(apgw::fit(data, parse_spec_entry(t, data, allow_two), opt));
    }
    if (fits.empty()) throw apgw::ConfigError("compare: empty model list");
    const auto rows = apgw::model_table(fits);
    manifest.write_text("comparison.txt", model_table_text(rows));
    manifest.write_text("comparison.csv", model_table_csv(rows));
    manifest.finalize();
    std::cout << model_table_text(rows);
    bool all_converged = true;
    for (const auto& f : fits) all_converged = all_converged && f.converged;
    return all_converged ? kExitOk : kExitConvergence;
}

void write_study_outputs(ManifestWriter& manifest, const apgw::StudyResult& study) {
    const apgw::ReplicationSummary summary = apgw::summarize(study);
    manifest.write_text("study_summary.csv", summary_csv(summary));
    manifest.write_text("study_estimates.csv", estimates_csv(study));
    manifest.write_text("censoring_rates.csv", rates_csv(study));
    if (!study.scenario.survivor_probe_u.empty())
        manifest.write_text("survivor_probes.csv", probes_csv(study));
}

// True tau/beta/alpha blocks; the nu intercept is swept by the scenario.nu
// grid and nu slopes are not part of the scenario grammar.
apgw::RegressionCoefficients parse_true_coefs(apgw::io::Config& cfg, int p) {
    apgw::RegressionCoefficients coefs(p);
    for (apgw::Block b : {apgw::Block::Tau, apgw::Block::Beta, apgw::Block::Alpha}) {
        const std::string key = apgw::to_string(b);
        const auto text = cfg.take("scenario", key);
        if (!text) continue;
        const auto values = split_list(*text);
        if (static_cast<int>(values.size()) != p + 1)
            throw apgw::ConfigError("scenario." + key + " needs " + std::to_string(p + 1) +
                                    " values (intercept first)");
        for (int j = 0; j <= p; ++j) {
            const auto v = apgw::io::parse_double(values[static_cast<std::size_t>(j)]);
            if (!v) throw apgw::ConfigError("scenario." + key + ": bad number");
            coefs.block(b)[j] = *v;
        }
    }
    return coefs;
}

int run_simulate(const CommonArgs& args, int replicates_flag, int n_flag, int argc,
                 char** argv) {
    apgw::io::Config cfg = load_config(args);
    apgw::ScenarioConfig sc;
    const std::string law = cfg.take_or("scenario", "covariate", "none");
    if (law == "none") {
        sc.covariate_law.kind = apgw::CovariateLaw::Kind::None;
    } else if (law.rfind("bernoulli", 0) == 0) {
        sc.covariate_law.kind = apgw::CovariateLaw::Kind::Bernoulli;
        const auto colon = law.find(':');
        if (colon != std::string::npos) {
            const auto v = apgw::io::parse_double(law.substr(colon + 1));
            if (!v || !(*v > 0.0 && *v < 1.0))
                throw apgw::ConfigError("scenario.covariate: bernoulli:p needs p in (0,1)");
            sc.covariate_law.prob = *v;
        }
    } else {
        throw apgw::ConfigError("scenario.covariate must be 'none' or 'bernoulli:p', got '" +
                                law + "'");
    }
    const int p = sc.covariate_law.n_covariates();
    sc.true_coefs = parse_true_coefs(cfg, p);
    sc.n = static_cast<int>(cfg.take_number("scenario", "n", 1000));
    sc.n_replicates = static_cast<int>(cfg.take_number("scenario", "replicates", 100));
    if (n_flag > 0) sc.n = n_flag;
    if (replicates_flag > 0) sc.n_replicates = replicates_flag;
    sc.target_censoring = cfg.take_number("scenario", "censoring", 0.30);
    if (const auto nu = cfg.take("scenario", "nu")) sc.nu_grid = parse_nu_list(*nu);
    if (const auto probes = cfg.take("scenario", "probes"))
        sc.survivor_probe_u = parse_grid(*probes, "scenario.probes");
    sc.n_threads = static_cast<int>(cfg.take_number("scenario", "threads", 0));
    const auto fits_text = cfg.take("scenario", "fits");
    if (!fits_text) throw apgw::ConfigError("missing required key 'scenario.fits'");
    sc.optimizer = load_optimizer(cfg);
    sc.seed = sc.optimizer.seed;
    const fs::path out_dir = cfg.take_or("output", "dir", default_out_dir());

    // fit specs need a dataset shape; build a placeholder with the right width
    apgw::SurvivalDataset shape;
    shape.times = Eigen::VectorXd::Ones(1);
    shape.status = Eigen::VectorXi::Ones(1);
    shape.covariates = Eigen::MatrixXd::Zero(1, p);
    if (p > 0) shape.names = {"x1"};
    for (const auto& entry : apgw::io::split(*fits_text, ';')) {
        const std::string t = apgw::io::trim(entry);
        if (!t.empty()) sc.fit_specs.push_back(parse_spec_entry(t, shape, true));
    }
    cfg.finish();
    sc.validate();

    ManifestWriter manifest("simulate", out_dir, sc.seed, config_digest_for(args, argc, argv));
    if (!args.config_path.empty()) manifest.add_input(args.config_path);
    const apgw::StudyResult study = apgw::run_study(sc);
    write_study_outputs(manifest, study);
    manifest.finalize();
    return kExitOk;
}

int run_replicate(const CommonArgs& args, const std::string& table, int replicates, int n,
                  const std::string& nu_arg, int argc, char** argv) {
    apgw::io::Config cfg = load_config(args);
    const apgw::OptimizerConfig opt = load_optimizer(cfg);
    const fs::path out_dir = cfg.take_or("output", "dir", default_out_dir());
    cfg.finish();
    std::vector<double> nu_grid = {0.0, 0.22, 0.41, 0.69, 1.10, 1.61, apgw::kNuInfinity};
    if (!nu_arg.empty()) nu_grid = parse_nu_list(nu_arg);

    apgw::ScenarioConfig sc;
    if (table == "3") {
        sc = apgw::nocov_study_design(nu_grid, n > 0 ? n : 1000,
                                      replicates > 0 ? replicates : 1000, opt.seed);
    } else if (table == "4" || table == "B1" || table == "B2") {
        const int default_n = table == "4" ? 1000 : (table == "B1" ? 500 : 100);
        sc = apgw::covariate_study_design(nu_grid, n > 0 ? n : default_n,
                                          replicates > 0 ? replicates : 1000, opt.seed);
        sc.survivor_probe_u = {0.1, 0.5, 0.9};
    } else {
        throw apgw::ConfigError("--table must be one of 3, 4, B1, B2; got '" + table + "'");
    }
    sc.optimizer = opt;

    ManifestWriter manifest("replicate-paper", out_dir, sc.seed,
                            config_digest_for(args, argc, argv));
    const apgw::StudyResult study = apgw::run_study(sc);
    write_study_outputs(manifest, study);
    manifest.finalize();
    return kExitOk;
}

int run_curves(const CommonArgs& args, const std::string& kind_arg, int covariate_idx,
               const std::string& profile_arg, const std::string& profile2_arg,
               const std::string& grid_arg, int argc, char** argv) {
    apgw::io::Config cfg = load_config(args);
    std::string data_path;
    const apgw::SurvivalDataset data = load_data(cfg, data_path);
    const apgw::ModelSpec spec = load_model(cfg, data);
    const apgw::OptimizerConfig opt = load_optimizer(cfg);
    const fs::path out_dir = cfg.take_or("output", "dir", default_out_dir());
    cfg.finish();

    apgw::CurveRequest req;
    if (kind_arg == "survivor") req.kind = apgw::CurveKind::Survivor;
    else if (kind_arg == "hazard") req.kind = apgw::CurveKind::Hazard;
    else if (kind_arg == "hazard-ratio") req.kind = apgw::CurveKind::HazardRatio;
    else if (kind_arg == "quantile-ratio") req.kind = apgw::CurveKind::QuantileRatio;
    else
        throw apgw::ConfigError(
            "--kind must be survivor, hazard, hazard-ratio or quantile-ratio");
    if (req.kind == apgw::CurveKind::QuantileRatio && !spec.active.count(apgw::Block::Tau))
        throw apgw::ConfigError("quantile ratios need a model with a tau scale component");

    auto parse_profile = [&](const std::string& text) {
        Eigen::RowVectorXd x = Eigen::RowVectorXd::Zero(data.p());
        if (text.empty()) return x;
        const auto values = split_list(text);
        if (static_cast<int>(values.size()) != data.p())
            throw apgw::ConfigError("profile needs " + std::to_string(data.p()) + " values");
        for (int j = 0; j < data.p(); ++j) {
            const auto v = apgw::io::parse_double(values[static_cast<std::size_t>(j)]);
            if (!v) throw apgw::ConfigError("profile entry '" +
                                            values[static_cast<std::size_t>(j)] +
                                            "' is not a number");
            x[j] = *v;
        }
        return x;
    };
    req.profile = parse_profile(profile_arg);
    const bool ratio =
        req.kind == apgw::CurveKind::HazardRatio || req.kind == apgw::CurveKind::QuantileRatio;
    if (ratio) {
        if (!profile2_arg.empty()) {
            req.profile2 = parse_profile(profile2_arg);
        } else if (covariate_idx >= 0) {
            Eigen::RowVectorXd x = req.profile;
            if (covariate_idx >= data.p())
                throw apgw::ConfigError("--covariate index out of range");
            x[covariate_idx] = 1.0;
            req.profile[covariate_idx] = 0.0;
            req.profile2 = x;
        } else {
            throw apgw::ConfigError("ratio curves need --profile2 or --covariate");
        }
    }
    const std::string default_grid =
        req.kind == apgw::CurveKind::QuantileRatio ? "0.02:0.98:49" : "0.05:10:100";
    req.grid = parse_grid(grid_arg.empty() ? default_grid : grid_arg, "--grid");

    ManifestWriter manifest("curves", out_dir, opt.seed, config_digest_for(args, argc, argv));
    manifest.add_input(data_path);
    const apgw::FitResult fit = apgw::fit(data, spec, opt);
    const auto values = apgw::evaluate_curve(fit, req);

    std::ostringstream out;
    out << "# kind: " << kind_arg << "\n";
    out << "# model: " << fit.spec.name() << "\n";
    out << "# data: " << data_path << "\n# profile:";
    for (int j = 0; j < req.profile.size(); ++j)
        out << " " << apgw::io::format_double(req.profile[j]);
    out << "\n";
    if (req.profile2) {
        out << "# profile2:";
        for (int j = 0; j < req.profile2->size(); ++j)
            out << " " << apgw::io::format_double((*req.profile2)[j]);
        out << "\n";
    }
    out << (req.kind == apgw::CurveKind::QuantileRatio ? "u" : "t") << ",value\n";
    for (std::size_t i = 0; i < req.grid.size(); ++i)
        out << apgw::io::format_double(req.grid[i]) << ","
            << apgw::io::format_double(values[i]) << "\n";
    manifest.write_text("curve.csv", out.str());
    manifest.finalize();
    return fit.converged ? kExitOk : kExitConvergence;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"APGW parametric survival modelling toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    CommonArgs args;
    auto add_common = [&](CLI::App* cmd, bool with_data, bool with_model) {
        cmd->add_option("--config", args.config_path, "key-value config file");
        cmd->add_option("--out-dir", args.out_dir,
                        "output directory (default: $APGW_OUT_DIR or apgw_out)");
        cmd->add_option("--seed", args.seed, "RNG seed");
        cmd->add_option("--max-iterations", args.max_iterations, "optimizer iteration cap");
        cmd->add_option("--gradient-tolerance", args.gradient_tolerance,
                        "score max-norm convergence tolerance");
        cmd->add_option("--starts", args.n_starts, "number of optimizer starts");
        if (with_data) {
            cmd->add_option("--data", args.data_path, "dataset CSV path");
            cmd->add_option("--time", args.time_column, "time column name");
            cmd->add_option("--status", args.status_column, "status column name (0/1)");
            cmd->add_option("--covariates", args.covariates,
                            "comma list of covariate columns (default: all others)");
        }
        if (with_model) {
            cmd->add_option("--model", args.model, "model spec, e.g. M(beta,alpha)");
            cmd->add_option("--fix", args.fixes,
                            "freeze a coefficient, e.g. --fix nu0=0.6931 (repeatable)");
            cmd->add_flag("--allow-two-scales", args.allow_two_scales,
                          "permit tau and beta together (diagnostics only)");
        }
    };

    auto* fit_cmd = app.add_subcommand("fit", "fit one model to a dataset");
    add_common(fit_cmd, true, true);

    auto* compare_cmd =
        app.add_subcommand("compare", "fit and rank a set of models on one dataset");
    add_common(compare_cmd, true, false);
    std::string models_arg;
    compare_cmd->add_option("--models", models_arg,
                            "semicolon list of model specs (default: the six-model set)");
    compare_cmd->add_flag("--allow-two-scales", args.allow_two_scales,
                          "permit tau and beta together (diagnostics only)");

    auto* simulate_cmd =
        app.add_subcommand("simulate", "run a replication study from a scenario config");
    add_common(simulate_cmd, false, false);
    int replicates_flag = 0, n_flag = 0;
    simulate_cmd->add_option("--replicates", replicates_flag, "override scenario.replicates");
    simulate_cmd->add_option("--n", n_flag, "override scenario.n");

    auto* curves_cmd = app.add_subcommand("curves", "fit a model and export a curve");
    add_common(curves_cmd, true, true);
    std::string kind_arg = "survivor", profile_arg, profile2_arg, grid_arg;
    int covariate_idx = -1;
    curves_cmd->add_option("--kind", kind_arg,
                           "survivor | hazard | hazard-ratio | quantile-ratio");
    curves_cmd->add_option("--profile", profile_arg, "covariate profile (comma list)");
    curves_cmd->add_option("--profile2", profile2_arg, "comparison profile for ratio kinds");
    curves_cmd->add_option("--covariate", covariate_idx,
                           "0-based covariate column toggled 0 -> 1 for ratio kinds");
    curves_cmd->add_option("--grid", grid_arg, "grid as min:max:count or comma list");

    auto* replicate_cmd =
        app.add_subcommand("replicate-paper", "run a bundled simulation study design");
    add_common(replicate_cmd, false, false);
    std::string table_arg = "3", nu_arg;
    replicate_cmd->add_option("--table", table_arg, "study design id: 3 | 4 | B1 | B2");
    replicate_cmd->add_option("--replicates", replicates_flag, "replicates per nu value");
    replicate_cmd->add_option("--n", n_flag, "sample size per replicate");
    replicate_cmd->add_option("--nu", nu_arg, "comma list of nu values (inf allowed)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (fit_cmd->parsed()) return run_fit(args, argc, argv);
        if (compare_cmd->parsed()) return run_compare(args, models_arg, argc, argv);
        if (simulate_cmd->parsed())
            return run_simulate(args, replicates_flag, n_flag, argc, argv);
        if (curves_cmd->parsed())
            return run_curves(args, kind_arg, covariate_idx, profile_arg, profile2_arg,
                              grid_arg, argc, argv);
        if (replicate_cmd->parsed())
            return run_replicate(args, table_arg, replicates_flag, n_flag, nu_arg, argc, argv);
    } catch (const apgw::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const apgw::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const apgw::DimensionMismatch& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const apgw::DomainViolation& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const apgw::InvalidParameter& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const apgw::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}
